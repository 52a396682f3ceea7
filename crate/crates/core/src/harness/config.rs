use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::method_spec;
use crate::blocks::ModelConfig;
use crate::corpus::SplitSpec;
use crate::error::{Error, Result};
use crate::featurizer::FeaturizerConfig;
use crate::forest::ForestParams;
use crate::nn::OptimizerConfig;

/// Full experiment configuration, read from TOML. Every section and key is
/// optional; omitted values take their defaults.
///
/// ```toml
/// seed = 7
///
/// [model]
/// d_model = 64
/// n_layers = 2
/// n_heads = 4
/// d_ff = 128
/// max_len = 64
/// vocab_size = 8000
///
/// [featurizer]
/// top_senders = 120
/// top_affiliations = 120
/// rush_bins = 50
///
/// [optimizer]
/// kind = "adam"
/// lr = 0.001
/// clip_norm = 5.0
///
/// [training]
/// epochs = 10
/// batch_size = 32
///
/// [forest]
/// n_trees = 250
///
/// [split]
/// train = 0.7
/// val = 0.1
/// test = 0.2
///
/// [grid]
/// methods = ["1", "5", "blocks-weighted"]
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every derived seed; the CLI `--seed` flag overrides it.
    pub seed: u64,
    pub model: ModelConfig,
    pub featurizer: FeaturizerConfig,
    pub optimizer: OptimizerConfig,
    pub training: TrainingConfig,
    pub forest: ForestConfig,
    pub split: SplitConfig,
    pub corpus: CorpusConfig,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 10,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        let p = ForestParams::default();
        ForestConfig {
            n_trees: p.n_trees,
            max_depth: p.max_depth,
            min_samples_leaf: p.min_samples_leaf,
            bootstrap: p.bootstrap,
            max_features: p.max_features,
        }
    }
}

impl ForestConfig {
    pub fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            bootstrap: self.bootstrap,
            max_features: self.max_features,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitConfig {
            train: s.train_fraction,
            val: s.val_fraction,
            test: s.test_fraction,
        }
    }
}

impl SplitConfig {
    pub fn spec(&self, seed: u64) -> Result<SplitSpec> {
        SplitSpec::new(self.train, self.val, self.test, seed)
    }
}

/// Optional subset preparation applied before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub per_class_cap: Option<usize>,
    pub keep_longest: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Method ids or names, run in this order by `compare`.
    pub methods: Vec<String>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            methods: (1..=10).map(|i| i.to_string()).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.featurizer.validate()?;
        self.optimizer.validate()?;
        if self.training.batch_size == 0 {
            return Err(Error::Config("training.batch_size must be positive".into()));
        }
        self.forest.params(0).validate()?;
        self.split.spec(0)?;
        if let CorpusConfig {
            per_class_cap: Some(cap),
            keep_longest: Some(keep),
        } = self.corpus
        {
            if cap < keep {
                return Err(Error::Config(format!(
                    "corpus.per_class_cap {cap} < keep_longest {keep}"
                )));
            }
        }
        if self.grid.methods.is_empty() {
            return Err(Error::Config("grid.methods is empty".into()));
        }
        for m in &self.grid.methods {
            method_spec(m)?;
        }
        Ok(())
    }
}
