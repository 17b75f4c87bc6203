//! Forward and backward kernels for every layer type the models use.

mod activation;
mod batchnorm;
mod conv;
mod linear;
mod loss;
pub(crate) mod par;
mod pool;
mod tensor;

pub use activation::{dropout, dropout_backward, relu, relu_backward};
pub use batchnorm::{
    batch_stats, batchnorm_backward, batchnorm_infer, batchnorm_train, update_moving_stats,
    BatchNormParams, BatchStats, BN_EPSILON, BN_MOMENTUM,
};
pub use conv::{
    conv2d_forward, conv2d_forward_bias, conv_backward, conv_temporal_forward, same_padding,
    ConvGeometry, SamePad,
};
pub use linear::{fully_connected, fully_connected_backward};
pub use loss::{softmax, softmax_cross_entropy};
pub use pool::{avg_pool2d, avg_pool2d_backward, global_avg_pool, global_avg_pool_backward};
pub use tensor::{Scalar, Tensor};

/// Train mode uses batch statistics and active dropout; infer mode uses
/// moving statistics and no dropout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}
