//! Message data model, JSONL ingestion, subset preparation, splitting and
//! synthetic corpora.

mod dataset;
pub mod io;
mod message;
mod prepare;
mod split;
pub mod synth;

pub use dataset::{Dataset, Provenance};
pub use io::{load_corpus, read_corpus, save_corpus, write_corpus, LoadReport, Rejection};
pub use message::{parse_message, parse_timestamp, Message, ParsedMessage};
pub use prepare::{prepare_subset, PrepareReport};
pub use split::{split, SplitSpec, Splits};
pub use synth::{generate_synthetic, SynthConfig, SynthMode};
