use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::grid::{method_spec, MethodSpec};
use crate::blocks::{BlockNetwork, ConcatClassifier, EncodedInput, MessageEncoder, Prediction, TextBlock};
use crate::corpus::Message;
use crate::error::{Error, Result};
use crate::forest::RandomForest;
use crate::nn::{argmax, softmax};

pub const CHECKPOINT_FORMAT: &str = "metablocks-checkpoint/1";

/// The fitted predictor of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    /// Text block with its own class head.
    Text {
        text: TextBlock,
    },
    /// Dense head over the pooled embedding, optionally with features.
    Dense {
        classifier: ConcatClassifier,
    },
    /// Forest over the pooled embedding, optionally with features.
    Forest {
        encoder: TextBlock,
        with_features: bool,
        forest: RandomForest,
    },
    Blocks {
        network: BlockNetwork,
    },
}

/// Pooled embedding, with the feature vector appended when requested.
pub fn forest_input(encoder: &TextBlock, input: &EncodedInput, with_features: bool) -> Result<Vec<f64>> {
    let mut v = encoder.embed(&input.tokens)?;
    if with_features {
        v.extend_from_slice(&input.features);
    }
    Ok(v)
}

impl TrainedModel {
    /// Class probabilities: softmax output for networks, vote shares for forests.
    pub fn probabilities(&self, input: &EncodedInput) -> Result<Vec<f64>> {
        self.scores(input).map(|(_, p)| p)
    }

    fn scores(&self, input: &EncodedInput) -> Result<(usize, Vec<f64>)> {
        let logits = match self {
            TrainedModel::Text { text } => text.forward(&input.tokens)?,
            TrainedModel::Dense { classifier } => crate::blocks::Trainable::logits(classifier, input)?,
            TrainedModel::Blocks { network } => network.forward(input)?,
            TrainedModel::Forest {
                encoder,
                with_features,
                forest,
            } => {
                let p = forest.predict(&forest_input(encoder, input, *with_features)?)?;
                return Ok((p.index, p.votes));
            }
        };
        let probs = softmax(&logits)?;
        Ok((argmax(&probs), probs))
    }

    pub fn predict_index(&self, input: &EncodedInput) -> Result<usize> {
        self.scores(input).map(|(i, _)| i)
    }
}

/// Everything needed to predict on raw messages after a `train` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub method: u8,
    pub classes: Vec<String>,
    pub encoder: MessageEncoder,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(
        method: &MethodSpec,
        classes: Vec<String>,
        encoder: MessageEncoder,
        config: ExperimentConfig,
        seed: u64,
        model: TrainedModel,
    ) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            method: method.id,
            classes,
            encoder,
            config,
            seed,
            model,
        }
    }

    pub fn method_spec(&self) -> Result<MethodSpec> {
        method_spec(&self.method.to_string())
    }

    pub fn predict(&self, m: &Message) -> Result<Prediction> {
        let (index, probs) = self.model.scores(&self.encoder.encode(m))?;
        Ok(Prediction {
            index,
            label: self.classes[index].clone(),
            probs,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format `{}` (expected `{CHECKPOINT_FORMAT}`)",
                ck.format
            )));
        }
        ck.method_spec()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
