use std::fmt;

use serde::{Deserialize, Serialize};

use crate::blocks::CombineKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    /// Randomly initialised from the run seed and never updated.
    Frozen,
    /// Trained on the task.
    Finetuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetadataMode {
    None,
    /// Feature vector appended to the pooled text embedding.
    Concat,
    /// Separate metadata block trained jointly with the text block.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Dense,
    Forest,
    AverageCombine,
    WeightedCombine,
}

impl HeadKind {
    pub fn combine(self) -> Option<CombineKind> {
        match self {
            HeadKind::AverageCombine => Some(CombineKind::Average),
            HeadKind::WeightedCombine => Some(CombineKind::WeightedConcat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct MethodSpec {
    pub id: u8,
    pub name: &'static str,
    pub encoder: EncoderMode,
    pub metadata: MetadataMode,
    pub head: HeadKind,
    pub description: &'static str,
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id, self.name)
    }
}

const fn spec(
    id: u8,
    name: &'static str,
    encoder: EncoderMode,
    metadata: MetadataMode,
    head: HeadKind,
    description: &'static str,
) -> MethodSpec {
    MethodSpec {
        id,
        name,
        encoder,
        metadata,
        head,
        description,
    }
}

use EncoderMode::{Finetuned, Frozen};
use HeadKind::{AverageCombine, Dense, Forest, WeightedCombine};
use MetadataMode::{Block, Concat};

/// The ten comparison methods, in report order.
pub const METHOD_GRID: [MethodSpec; 10] = [
    spec(
        1,
        "frozen-dense",
        Frozen,
        MetadataMode::None,
        Dense,
        "frozen encoder, dense head",
    ),
    spec(
        2,
        "frozen-forest",
        Frozen,
        MetadataMode::None,
        Forest,
        "frozen encoder, random forest",
    ),
    spec(
        3,
        "frozen-concat-dense",
        Frozen,
        Concat,
        Dense,
        "frozen encoder + metadata, dense head",
    ),
    spec(
        4,
        "frozen-concat-forest",
        Frozen,
        Concat,
        Forest,
        "frozen encoder + metadata, random forest",
    ),
    spec(
        5,
        "finetuned-dense",
        Finetuned,
        MetadataMode::None,
        Dense,
        "finetuned encoder, dense head",
    ),
    spec(
        6,
        "finetuned-forest",
        Finetuned,
        MetadataMode::None,
        Forest,
        "finetuned encoder, random forest",
    ),
    spec(
        7,
        "finetuned-concat-dense",
        Finetuned,
        Concat,
        Dense,
        "finetuned encoder + metadata, dense head",
    ),
    spec(
        8,
        "finetuned-concat-forest",
        Finetuned,
        Concat,
        Forest,
        "finetuned encoder + metadata, random forest",
    ),
    spec(
        9,
        "blocks-average",
        Finetuned,
        Block,
        AverageCombine,
        "joint text and metadata blocks, averaged",
    ),
    spec(
        10,
        "blocks-weighted",
        Finetuned,
        Block,
        WeightedCombine,
        "joint text and metadata blocks, weighted",
    ),
];

/// Accepts a method id (`"10"`) or name (`"blocks-weighted"`).
pub fn method_spec(key: &str) -> Result<MethodSpec> {
    let key = key.trim();
    METHOD_GRID
        .iter()
        .find(|m| m.name == key || key.parse::<u8>().is_ok_and(|id| id == m.id))
        .copied()
        .ok_or_else(|| Error::UnknownMethod(key.to_string()))
}

pub const REFERENCE_DATASETS: [&str; 4] = ["amazon", "yelp", "reddit", "enron"];

/// Accuracies reported for the original large-scale setup (pretrained
/// encoder, full corpora), indexed like [`METHOD_GRID`]. Context only; they
/// are not targets for this implementation.
pub const REFERENCE_ACCURACY: [[f64; 4]; 10] = [
    [0.66, 0.29, 0.56, 0.49],
    [0.61, 0.22, 0.52, 0.49],
    [0.65, 0.24, 0.46, 0.48],
    [0.61, 0.22, 0.50, 0.50],
    [0.74, 0.39, 0.61, 0.47],
    [0.73, 0.38, 0.60, 0.47],
    [0.71, 0.38, 0.62, 0.47],
    [0.73, 0.39, 0.60, 0.47],
    [0.70, 0.30, 0.62, 0.47],
    [0.77, 0.40, 0.62, 0.53],
];

pub fn reference_accuracy(id: u8) -> Option<[f64; 4]> {
    REFERENCE_ACCURACY.get(usize::from(id).checked_sub(1)?).copied()
}
