//! Brute-force forward pass that counts every multiply and add executed
//! inside convolution and classifier kernels.
//!
//! Convolutions run over an explicitly zero-padded copy of the input, so
//! padded taps are counted like any other. Everything else (batch norm, ReLU,
//! pooling, residual adds) is evaluated but not counted.

use crate::error::{Error, Result};
use crate::models::{ConvUnit, ModelInstance};
use crate::nn_core::{avg_pool2d, batchnorm_infer, global_avg_pool, relu, same_padding, Tensor, BN_EPSILON};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub multiplies: u64,
    pub adds: u64,
}

impl OpCounter {
    pub fn flops(&self) -> u64 {
        self.multiplies + self.adds
    }
}

/// Runs `instance` on `input` (`[h, w, c]`, unbatched) with counting kernels.
/// Returns the logits and the operation counts.
pub fn instrumented_forward(instance: &ModelInstance<f32>, input: &Tensor<f32>) -> Result<(Vec<f32>, OpCounter)> {
    if instance.is_folded() {
        return Err(Error::Model("instrumented pass expects an unfolded instance".into()));
    }
    let arch = instance.architecture();
    if input.shape() != arch.input_shape {
        return Err(Error::shape(format!("expected {:?}, got {:?}", arch.input_shape, input.shape())));
    }
    let mut ops = OpCounter::default();
    let mut h = unit(instance, &arch.stem, input, &mut ops)?;
    if let Some((window, stride)) = arch.pool {
        h = avg_pool2d(&h, window, stride)?;
    }
    for block in &arch.blocks {
        let a = unit(instance, &block.first, &h, &mut ops)?;
        let b = unit(instance, &block.second, &a, &mut ops)?;
        let s = match &block.shortcut {
            Some(sc) => unit(instance, sc, &h, &mut ops)?,
            None => h.clone(),
        };
        h = relu(&b.add(&s)?);
    }
    let pooled = global_avg_pool(&h)?;
    let w = instance.param("fc/weight")?;
    let (c_in, c_out) = (w.shape()[0], w.shape()[1]);
    let mut logits = vec![0.0f32; c_out];
    for (o, logit) in logits.iter_mut().enumerate() {
        let mut acc = 0.0f32;
        for i in 0..c_in {
            let prod = pooled.data()[i] * w.data()[i * c_out + o];
            ops.multiplies += 1;
            acc += prod;
            ops.adds += 1;
        }
        *logit = acc;
    }
    Ok((logits, ops))
}

fn unit(instance: &ModelInstance<f32>, u: &ConvUnit, x: &Tensor<f32>, ops: &mut OpCounter) -> Result<Tensor<f32>> {
    let z = naive_conv(x, instance.param(&u.param("weight"))?, u.stride, ops)?;
    let y = batchnorm_infer(
        &z,
        instance.param(&u.param("gamma"))?.data(),
        instance.param(&u.param("beta"))?.data(),
        instance.param(&u.param("moving_mean"))?.data(),
        instance.param(&u.param("moving_var"))?.data(),
        BN_EPSILON as f32,
    )?;
    Ok(if u.relu { relu(&y) } else { y })
}

fn naive_conv(x: &Tensor<f32>, w: &Tensor<f32>, stride: (usize, usize), ops: &mut OpCounter) -> Result<Tensor<f32>> {
    let &[h, wd, c_in] = x.shape() else {
        return Err(Error::shape("expected [h, w, c]"));
    };
    let &[kh, kw, _, c_out] = w.shape() else {
        return Err(Error::shape("expected 4-d kernel"));
    };
    let ph = same_padding(h, kh, stride.0);
    let pw = same_padding(wd, kw, stride.1);
    let (hp, wp) = (h + ph.before + ph.after, wd + pw.before + pw.after);
    let mut padded = vec![0.0f32; hp * wp * c_in];
    for i in 0..h {
        for j in 0..wd {
            for c in 0..c_in {
                padded[((i + ph.before) * wp + j + pw.before) * c_in + c] = x.data()[(i * wd + j) * c_in + c];
            }
        }
    }
    let mut out = vec![0.0f32; ph.out * pw.out * c_out];
    for oi in 0..ph.out {
        for oj in 0..pw.out {
            for o in 0..c_out {
                let mut acc = 0.0f32;
                for a in 0..kh {
                    for b in 0..kw {
                        for c in 0..c_in {
                            let xv = padded[((oi * stride.0 + a) * wp + oj * stride.1 + b) * c_in + c];
                            let wv = w.data()[((a * kw + b) * c_in + c) * c_out + o];
                            let prod = xv * wv;
                            ops.multiplies += 1;
                            acc += prod;
                            ops.adds += 1;
                        }
                    }
                }
                out[(oi * pw.out + oj) * c_out + o] = acc;
            }
        }
    }
    Tensor::new(vec![ph.out, pw.out, c_out], out)
}
