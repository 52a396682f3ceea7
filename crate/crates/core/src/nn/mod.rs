//! Minimal dense/attention substrate with hand-written backpropagation.

pub mod attention;
pub mod dense;
pub mod functional;
pub mod gradcheck;
pub mod init;
pub mod norm;
pub mod optim;
pub mod param;
pub mod tape;
pub mod tensor;

pub use attention::{Attended, AttentionCache, AttentionLayer};
pub use dense::{Activation, DenseCache, DenseLayer};
pub use functional::{argmax, cross_entropy, softmax, softmax_cross_entropy};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use norm::LayerNorm;
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState, StepReport};
pub use param::{
    add_scaled, any_nonzero_under, flatten, join, named_params, param_count, scale_params, with_scalar_mut, zeros_like,
    Parameterized,
};
pub use tape::Tape;
pub use tensor::Tensor;
