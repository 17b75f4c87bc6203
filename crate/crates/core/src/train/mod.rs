//! SGD training: config, optimizer, data preparation and the training loop.

mod config;
mod data;
mod sgd;
mod trainer;

pub use config::{lr_at, TrainConfig};
pub use data::{read_wav, Corpus};
pub use sgd::{sgd_step, OptimizerState};
pub use trainer::{
    accuracy_from_logits, argmax, batch_loss, evaluate_accuracy, predict_logits, train_loop, train_loop_with,
    MetricsLog, MetricsRow, TrainOutcome,
};
