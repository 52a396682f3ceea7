use std::sync::OnceLock;

use super::config::ExperimentConfig;
use crate::blocks::{train, EncodedInput, Example, History, MessageEncoder, TextBlock, TrainConfig, Vocab};
use crate::corpus::{prepare_subset, split, Dataset, Splits};
use crate::error::{Error, Result};
use crate::featurizer;
use crate::forest::ForestParams;
use crate::nn::init::{derive_seed, seeded_rng};

/// Shared state for every method run on one corpus: splits, the vocabulary
/// and featurizer (fitted on the train split only), encoded examples, the
/// seeded initial text block, and the lazily trained finetuned encoder.
#[derive(Debug)]
pub struct Experiment {
    pub name: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub splits: Splits,
    pub classes: Vec<String>,
    pub encoder: MessageEncoder,
    pub train: Vec<Example<EncodedInput>>,
    pub val: Vec<Example<EncodedInput>>,
    pub test: Vec<Example<EncodedInput>>,
    initial_text: TextBlock,
    finetuned: OnceLock<(TextBlock, History)>,
}

impl Experiment {
    /// Applies the optional subset preparation, then splits with a seed
    /// derived from `seed`.
    pub fn new(name: impl Into<String>, ds: &Dataset, config: ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let prepared;
        let ds = match (config.corpus.per_class_cap, config.corpus.keep_longest) {
            (None, None) => ds,
            (cap, keep) => {
                let cap = cap.unwrap_or(usize::MAX);
                prepared = prepare_subset(ds, cap, keep.unwrap_or(cap))?.0;
                &prepared
            }
        };
        let splits = split(ds, &config.split.spec(derive_seed(seed, "split"))?)?;
        Self::from_splits(name, splits, config, seed)
    }

    pub fn from_splits(name: impl Into<String>, splits: Splits, config: ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let classes = splits.train.label_set.clone();
        if classes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least two classes, got {}",
                classes.len()
            )));
        }
        let vocab = Vocab::build(&splits.train, config.model.vocab_size)?;
        let featurizer = featurizer::fit(&splits.train, &config.featurizer)?;
        let encoder = MessageEncoder::new(vocab, featurizer, config.model.max_len);
        let train = encoder.examples(&splits.train, &classes)?;
        let val = encoder.examples(&splits.val, &classes)?;
        let test = encoder.examples(&splits.test, &classes)?;
        let initial_text = TextBlock::init(
            &config.model,
            encoder.vocab.len(),
            classes.len(),
            &mut seeded_rng(derive_seed(seed, "text-block")),
        )?;
        Ok(Experiment {
            name: name.into(),
            config,
            seed,
            splits,
            classes,
            encoder,
            train,
            val,
            test,
            initial_text,
            finetuned: OnceLock::new(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.feature_dim()
    }

    /// The seeded text block every method starts from; frozen methods use
    /// it unchanged.
    pub fn initial_text_block(&self) -> &TextBlock {
        &self.initial_text
    }

    /// Text block trained on the task with its own head, computed once and
    /// shared by all finetuned methods.
    pub fn finetuned_text_block(&self) -> Result<&(TextBlock, History)> {
        if let Some(done) = self.finetuned.get() {
            return Ok(done);
        }
        log::info!("finetuning text block");
        let mut text = self.initial_text.clone();
        let history = train(&mut text, &self.train, &self.val, &self.train_config("finetune"))?;
        Ok(self.finetuned.get_or_init(|| (text, history)))
    }

    pub fn train_config(&self, stream: &str) -> TrainConfig {
        TrainConfig {
            epochs: self.config.training.epochs,
            batch_size: self.config.training.batch_size,
            seed: derive_seed(self.seed, &format!("train-{stream}")),
            optimizer: self.config.optimizer.clone(),
        }
    }

    pub fn forest_params(&self, stream: &str) -> ForestParams {
        self.config
            .forest
            .params(derive_seed(self.seed, &format!("forest-{stream}")))
    }

    pub fn stream_seed(&self, stream: &str) -> u64 {
        derive_seed(self.seed, stream)
    }
}
