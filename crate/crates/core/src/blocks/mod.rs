//! Block-based message classifier: a transformer text block and a dense
//! metadata block, each emitting class scores, merged by a combine strategy
//! and trained jointly.

mod combine;
mod meta;
mod network;
mod text;
mod train;
mod vocab;

use serde::{Deserialize, Serialize};

pub use combine::{AverageOf, Combine, CombineCache, CombineKind};
pub use meta::{MetaBlock, MetaCache};
pub use network::{BlockNetwork, ConcatClassifier, EncodedInput, NetworkCache};
pub use text::{TextBlock, TextCache, EMBEDDING_STD, POSITION_STD};
pub use train::{
    accuracy, batch_gradient, example_loss, predict_index, score, sgd_step, train, EpochRecord, Example, History,
    TrainConfig, Trainable,
};
pub use vocab::{words, TokenSequence, Vocab, CLS, PAD, SPECIALS, UNK};

use crate::corpus::{Dataset, Message};
use crate::error::{Error, Result};
use crate::featurizer::FeaturizerModel;
use crate::nn::init::{derive_seed, seeded_rng};
use crate::nn::{argmax, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    /// Token positions including the leading `CLS`.
    pub max_len: usize,
    /// Vocabulary size including the three special tokens.
    pub vocab_size: usize,
    /// Optional ReLU layer width inside the weighted-concat head.
    pub combine_hidden: Option<usize>,
    pub average_of: AverageOf,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 128,
            max_len: 64,
            vocab_size: 8000,
            combine_hidden: None,
            average_of: AverageOf::Logits,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible into {} heads",
                self.d_model, self.n_heads
            ));
        }
        if self.d_ff == 0 {
            return bad("d_ff must be positive".into());
        }
        if self.max_len == 0 {
            return bad("max_len must be positive".into());
        }
        if self.vocab_size < SPECIALS.len() {
            return bad(format!("vocab_size must be at least {}", SPECIALS.len()));
        }
        if self.combine_hidden == Some(0) {
            return bad("combine_hidden must be positive when set".into());
        }
        Ok(())
    }
}

/// Turns messages into model inputs with a fitted vocabulary and featurizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEncoder {
    pub vocab: Vocab,
    pub featurizer: FeaturizerModel,
    pub max_len: usize,
}

impl MessageEncoder {
    pub fn new(vocab: Vocab, featurizer: FeaturizerModel, max_len: usize) -> Self {
        MessageEncoder {
            vocab,
            featurizer,
            max_len,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.featurizer.feature_dim()
    }

    pub fn encode(&self, m: &Message) -> EncodedInput {
        EncodedInput {
            tokens: self.vocab.tokenize(&m.text, self.max_len),
            features: self.featurizer.transform(m).values,
        }
    }

    /// Encodes every message and resolves labels against `classes`.
    pub fn examples(&self, ds: &Dataset, classes: &[String]) -> Result<Vec<Example<EncodedInput>>> {
        ds.messages
            .iter()
            .map(|m| Ok(Example::new(self.encode(m), class_index(classes, &m.label)?)))
            .collect()
    }
}

pub fn class_index(classes: &[String], label: &str) -> Result<usize> {
    classes
        .iter()
        .position(|c| c == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: usize,
    pub label: String,
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn from_logits(logits: &[f64], classes: &[String]) -> Result<Self> {
        if logits.len() != classes.len() {
            return Err(Error::shape("prediction", classes.len(), logits.len()));
        }
        let probs = softmax(logits)?;
        let index = argmax(&probs);
        Ok(Prediction {
            index,
            label: classes[index].clone(),
            probs,
        })
    }
}

/// Which representation [`MessageClassifier::embed`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMode {
    /// Pooled `CLS` vector only.
    Text,
    /// Pooled `CLS` vector followed by the metadata features.
    TextAndMeta,
}

/// A block network bundled with its encoder and class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageClassifier {
    pub encoder: MessageEncoder,
    pub network: BlockNetwork,
    pub classes: Vec<String>,
}

impl MessageClassifier {
    pub fn init(
        config: &ModelConfig,
        combine: CombineKind,
        encoder: MessageEncoder,
        classes: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if classes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least two classes, got {}",
                classes.len()
            )));
        }
        if encoder.max_len != config.max_len {
            return Err(Error::shape(
                "MessageClassifier max_len",
                config.max_len,
                encoder.max_len,
            ));
        }
        let c = classes.len();
        let text = TextBlock::init(
            config,
            encoder.vocab.len(),
            c,
            &mut seeded_rng(derive_seed(seed, "text")),
        )?;
        let meta = MetaBlock::init(encoder.feature_dim(), c, &mut seeded_rng(derive_seed(seed, "meta")));
        let combine = Combine::init(
            combine,
            2,
            c,
            config.combine_hidden,
            config.average_of,
            &mut seeded_rng(derive_seed(seed, "combine")),
        );
        Ok(MessageClassifier {
            encoder,
            network: BlockNetwork::new(text, meta, combine)?,
            classes,
        })
    }

    pub fn predict(&self, m: &Message) -> Result<Prediction> {
        let logits = self.network.forward(&self.encoder.encode(m))?;
        Prediction::from_logits(&logits, &self.classes)
    }

    pub fn embed(&self, m: &Message, mode: EmbedMode) -> Result<Vec<f64>> {
        let input = self.encoder.encode(m);
        let mut v = self.network.text.embed(&input.tokens)?;
        if mode == EmbedMode::TextAndMeta {
            v.extend_from_slice(&input.features);
        }
        Ok(v)
    }
}
