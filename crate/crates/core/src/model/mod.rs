//! Small MLP binary classifier with exact backpropagation.

mod batch;
mod checkpoint;
mod mlp;
mod optimizer;

pub use batch::{Batch, FeatureNorm};
pub use checkpoint::Checkpoint;
pub use mlp::{MlpModel, PROB_CLAMP};
pub use optimizer::{apply_update, OptimizerKind, OptimizerState};
