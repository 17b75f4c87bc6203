//! TC-ResNet and 2D ablation models: construction, inference, training
//! passes, batch-norm folding and checkpoints.

mod arch;
mod checkpoint;
mod instance;
mod spec;

pub use arch::{Architecture, BlockPlan, ConvUnit, HEAD_DROPOUT, POOL_STRIDE, POOL_WINDOW};
pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use instance::{batch_input, build_model, param_layout, ModelInstance, ParamKind, Trace, HEAD_INIT_GAIN};
pub use spec::{Family, ModelSpec, BASE_CHANNELS};
