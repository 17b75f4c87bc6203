//! Batch normalization over the trailing channel axis.

use super::tensor::{Scalar, Tensor};
use super::Mode;
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.99;

/// Per-channel scale/shift and running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams<T = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub moving_mean: Vec<T>,
    pub moving_var: Vec<T>,
    pub epsilon: T,
    pub momentum: T,
}

impl<T: Scalar> BatchNormParams<T> {
    /// gamma = 1, beta = 0, moving statistics (0, 1).
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            moving_mean: vec![T::zero(); channels],
            moving_var: vec![T::one(); channels],
            epsilon: T::of(BN_EPSILON),
            momentum: T::of(BN_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes `x`. In train mode the batch statistics are returned and
    /// folded into the moving averages.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BatchStats<T>>)> {
        match mode {
            Mode::Infer => Ok((
                batchnorm_infer(
                    x,
                    &self.gamma,
                    &self.beta,
                    &self.moving_mean,
                    &self.moving_var,
                    self.epsilon,
                )?,
                None,
            )),
            Mode::Train => {
                let (y, stats) = batchnorm_train(x, &self.gamma, &self.beta, self.epsilon)?;
                update_moving_stats(&mut self.moving_mean, &mut self.moving_var, &stats, self.momentum);
                Ok((y, Some(stats)))
            }
        }
    }
}

/// Per-channel mean and (biased) variance of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

fn channels_of<T: Scalar>(x: &Tensor<T>, expected: usize) -> Result<usize> {
    let c = *x
        .shape()
        .last()
        .ok_or_else(|| Error::shape("batch norm on a rank-0 tensor"))?;
    if c != expected || c == 0 {
        return Err(Error::shape(format!(
            "batch norm has {expected} channels, input has {c}"
        )));
    }
    Ok(c)
}

pub fn batch_stats<T: Scalar>(x: &Tensor<T>, channels: usize) -> Result<BatchStats<T>> {
    let c = channels_of(x, channels)?;
    let count = x.len() / c;
    if count == 0 {
        return Err(Error::shape("batch norm over an empty batch"));
    }
    let inv_n = T::of(1.0 / count as f64);
    let mut mean = vec![T::zero(); c];
    for row in x.data().chunks_exact(c) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m * inv_n);
    let mut var = vec![T::zero(); c];
    for row in x.data().chunks_exact(c) {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - m;
            *s = *s + d * d;
        }
    }
    var.iter_mut().for_each(|s| *s = *s * inv_n);
    Ok(BatchStats { mean, var })
}

/// `y = gamma (x - mean) / sqrt(var + eps) + beta` with the given statistics.
pub fn batchnorm_infer<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    mean: &[T],
    var: &[T],
    eps: T,
) -> Result<Tensor<T>> {
    let c = channels_of(x, gamma.len())?;
    if beta.len() != c || mean.len() != c || var.len() != c {
        return Err(Error::shape("batch norm parameter lengths disagree"));
    }
    let scale: Vec<T> = gamma
        .iter()
        .zip(var)
        .map(|(&g, &v)| g / (v + eps).sqrt())
        .collect();
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(c) {
        for (i, v) in row.iter_mut().enumerate() {
            *v = scale[i] * (*v - mean[i]) + beta[i];
        }
    }
    Ok(out)
}

/// Normalizes with the batch's own statistics, which are returned.
pub fn batchnorm_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> Result<(Tensor<T>, BatchStats<T>)> {
    let stats = batch_stats(x, gamma.len())?;
    let y = batchnorm_infer(x, gamma, beta, &stats.mean, &stats.var, eps)?;
    Ok((y, stats))
}

/// `m <- momentum * m + (1 - momentum) * batch`.
pub fn update_moving_stats<T: Scalar>(
    moving_mean: &mut [T],
    moving_var: &mut [T],
    stats: &BatchStats<T>,
    momentum: T,
) {
    let keep = momentum;
    let take = T::one() - momentum;
    for (m, &b) in moving_mean.iter_mut().zip(&stats.mean) {
        *m = keep * *m + take * b;
    }
    for (m, &b) in moving_var.iter_mut().zip(&stats.var) {
        *m = keep * *m + take * b;
    }
}

/// Train-mode gradients, differentiating through the batch statistics.
/// Returns `(grad_x, grad_gamma, grad_beta)`.
pub fn batchnorm_backward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    eps: T,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    if grad_out.shape() != x.shape() {
        return Err(Error::shape(format!(
            "grad_out {:?} vs input {:?}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let c = gamma.len();
    let stats = batch_stats(x, c)?;
    let n = T::of((x.len() / c) as f64);
    let inv_std: Vec<T> = stats.var.iter().map(|&v| (v + eps).sqrt().recip()).collect();

    let mut grad_beta = vec![T::zero(); c];
    let mut grad_gamma = vec![T::zero(); c];
    for (xr, gr) in x.data().chunks_exact(c).zip(grad_out.data().chunks_exact(c)) {
        for i in 0..c {
            let xhat = (xr[i] - stats.mean[i]) * inv_std[i];
            grad_beta[i] = grad_beta[i] + gr[i];
            grad_gamma[i] = grad_gamma[i] + gr[i] * xhat;
        }
    }

    // dx = gamma * inv_std / N * (N g - sum(g) - xhat * sum(g xhat))
    let mut gx = grad_out.clone();
    for (gxr, xr) in gx.data_mut().chunks_exact_mut(c).zip(x.data().chunks_exact(c)) {
        for i in 0..c {
            let xhat = (xr[i] - stats.mean[i]) * inv_std[i];
            gxr[i] = gamma[i] * inv_std[i] / n * (n * gxr[i] - grad_beta[i] - xhat * grad_gamma[i]);
        }
    }
    Ok((gx, grad_gamma, grad_beta))
}
