use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_iters: usize,
    pub base_lr: f64,
    pub lr_drop_every: usize,
    pub lr_drop_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub eval_every: usize,
    /// Evaluation rounds without a new best validation accuracy before stopping.
    pub early_stop_patience: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            total_iters: 30_000,
            base_lr: 0.1,
            lr_drop_every: 10_000,
            lr_drop_factor: 10.0,
            momentum: 0.9,
            weight_decay: 0.001,
            dropout_p: 0.5,
            eval_every: 500,
            early_stop_patience: 10,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Parses flat `key = value` lines (`#` starts a comment). Missing keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.total_iters > 0
            && self.base_lr > 0.0
            && self.lr_drop_every > 0
            && self.lr_drop_factor > 1.0
            && (0.0..1.0).contains(&self.momentum)
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.dropout_p)
            && self.eval_every > 0
            && self.early_stop_patience > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }
}

/// `base_lr / lr_drop_factor ^ floor(iter / lr_drop_every)`.
pub fn lr_at(iter: usize, cfg: &TrainConfig) -> f64 {
    cfg.base_lr / cfg.lr_drop_factor.powi((iter / cfg.lr_drop_every) as i32)
}
