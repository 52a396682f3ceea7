//! Message classification with a jointly trained text-encoder block and a
//! meta-data block, plus the baseline pipelines they are compared against.

pub mod blocks;
pub mod corpus;
pub mod error;
pub mod featurizer;
pub mod forest;
pub mod harness;
pub mod nn;

pub use error::{Error, Result};
