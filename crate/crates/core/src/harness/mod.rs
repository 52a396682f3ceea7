//! The ten-method comparison grid: shared experiment state, method
//! registry, evaluation, checkpoints and results reporting.

mod config;
mod experiment;
mod grid;
mod methods;
mod metrics;
mod model;
mod report;

pub use config::{CorpusConfig, ExperimentConfig, ForestConfig, GridConfig, SplitConfig, TrainingConfig};
pub use experiment::Experiment;
pub use grid::{
    method_spec, reference_accuracy, EncoderMode, HeadKind, MetadataMode, MethodSpec, METHOD_GRID, REFERENCE_ACCURACY,
    REFERENCE_DATASETS,
};
pub use methods::{BlockMethod, Fitted, Method, MethodRegistry, PipelineMethod};
pub use metrics::{evaluate, ClassMetrics, Evaluation};
pub use model::{forest_input, Checkpoint, TrainedModel, CHECKPOINT_FORMAT};
pub use report::{compare_all, run_method, ResultsTable, RunResult};
