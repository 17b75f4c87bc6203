use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::arch::{Architecture, ConvUnit};
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::features::MfccMatrix;
use crate::nn_core::{
    avg_pool2d, avg_pool2d_backward, batchnorm_backward, batchnorm_infer, batchnorm_train,
    conv2d_forward_bias, conv_backward, dropout, dropout_backward, fully_connected,
    fully_connected_backward, global_avg_pool, global_avg_pool_backward, relu, relu_backward,
    update_moving_stats, Mode, Scalar, Tensor, BN_EPSILON, BN_MOMENTUM,
};
use crate::rng;

/// Role of a named parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Gamma,
    Beta,
    MovingMean,
    MovingVar,
    /// Only present after batch-norm folding.
    Bias,
}

impl ParamKind {
    pub fn of(name: &str) -> Self {
        match name.rsplit('/').next() {
            Some("gamma") => ParamKind::Gamma,
            Some("beta") => ParamKind::Beta,
            Some("moving_mean") => ParamKind::MovingMean,
            Some("moving_var") => ParamKind::MovingVar,
            Some("bias") => ParamKind::Bias,
            _ => ParamKind::Weight,
        }
    }

    /// Whether the optimizer updates it.
    pub fn trainable(self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Gamma | ParamKind::Beta)
    }
}

/// Names and shapes of every parameter in topological order.
pub fn param_layout(arch: &Architecture, folded: bool) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for unit in arch.units() {
        out.push((unit.param("weight"), unit.weight_shape()));
        if folded {
            out.push((unit.param("bias"), vec![unit.c_out]));
        } else {
            for p in ["gamma", "beta", "moving_mean", "moving_var"] {
                out.push((unit.param(p), vec![unit.c_out]));
            }
        }
    }
    out.push(("fc/weight".into(), vec![arch.fc_in, arch.n_classes]));
    out
}

/// A materialized model: spec, ordered parameter table and mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInstance<T = f32> {
    spec: ModelSpec,
    arch: Architecture,
    params: IndexMap<String, Tensor<T>>,
    mode: Mode,
    folded: bool,
}

/// Gain on the classifier's He-normal init, so the initial softmax is close to uniform.
pub const HEAD_INIT_GAIN: f64 = 0.1;

/// He-normal conv/FC weights (the classifier scaled by [`HEAD_INIT_GAIN`]),
/// unit BN scale, zero shift, moving statistics (0, 1).
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<ModelInstance<f32>> {
    spec.validate()?;
    let arch = Architecture::from_spec(spec);
    let mut params = IndexMap::new();
    for (i, (name, shape)) in param_layout(&arch, false).into_iter().enumerate() {
        let n: usize = shape.iter().product();
        let data = match ParamKind::of(&name) {
            ParamKind::Weight => {
                let fan_in: usize = shape[..shape.len() - 1].iter().product();
                let gain = if name == "fc/weight" { HEAD_INIT_GAIN } else { 1.0 };
                let normal = Normal::new(0.0, gain * (2.0 / fan_in as f64).sqrt()).expect("positive std");
                let mut r = rng::stream(seed, 0x7765_6967, i as u64);
                (0..n).map(|_| normal.sample(&mut r) as f32).collect()
            }
            ParamKind::Gamma | ParamKind::MovingVar => vec![1.0; n],
            _ => vec![0.0; n],
        };
        params.insert(name, Tensor::new(shape, data)?);
    }
    Ok(ModelInstance {
        spec: *spec,
        arch,
        params,
        mode: Mode::Train,
        folded: false,
    })
}

/// Activations kept from a train-mode forward pass.
pub struct UnitTrace<T> {
    input: Tensor<T>,
    conv_out: Tensor<T>,
    bn_out: Tensor<T>,
}

pub struct BlockTrace<T> {
    first: UnitTrace<T>,
    second: UnitTrace<T>,
    shortcut: Option<UnitTrace<T>>,
    sum: Tensor<T>,
}

pub struct Trace<T> {
    stem: UnitTrace<T>,
    pool_input_shape: Option<Vec<usize>>,
    blocks: Vec<BlockTrace<T>>,
    gap_input_shape: Vec<usize>,
    dropout_mask: Option<Vec<T>>,
    fc_input: Tensor<T>,
}

impl<T: Scalar> ModelInstance<T> {
    /// Assembles an instance from a parameter table, checking it against the spec.
    pub fn from_parts(spec: ModelSpec, params: IndexMap<String, Tensor<T>>, folded: bool) -> Result<Self> {
        spec.validate()?;
        let arch = Architecture::from_spec(&spec);
        let layout = param_layout(&arch, folded);
        if layout.len() != params.len() {
            return Err(Error::Model(format!(
                "{} expects {} parameters, got {}",
                spec,
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), (got_name, tensor)) in layout.iter().zip(&params) {
            if name != got_name || shape.as_slice() != tensor.shape() {
                return Err(Error::Model(format!(
                    "expected {name} {shape:?}, found {got_name} {:?}",
                    tensor.shape()
                )));
            }
        }
        Ok(Self {
            spec,
            arch,
            params,
            mode: if folded { Mode::Infer } else { Mode::Train },
            folded,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &IndexMap<String, Tensor<T>> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut IndexMap<String, Tensor<T>> {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Result<&Tensor<T>> {
        self.params
            .get(name)
            .ok_or_else(|| Error::Model(format!("missing parameter {name}")))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) -> Result<()> {
        if self.folded && mode == Mode::Train {
            return Err(Error::Model("a folded model cannot be trained".into()));
        }
        self.mode = mode;
        Ok(())
    }

    pub fn is_folded(&self) -> bool {
        self.folded
    }

    /// Total scalar count over every parameter, trainable or not.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelInstance<U> {
        ModelInstance {
            spec: self.spec,
            arch: self.arch.clone(),
            params: self.params.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
            mode: self.mode,
            folded: self.folded,
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let want = self.arch.input_shape;
        let s = x.shape();
        let spatial = match s.len() {
            3 => s,
            4 => &s[1..],
            _ => &[][..],
        };
        if spatial != want {
            return Err(Error::shape(format!(
                "{} expects input {want:?} (optionally batched), got {s:?}",
                self.spec
            )));
        }
        Ok(())
    }

    /// Logits `[n, n_classes]` using moving statistics and no dropout,
    /// regardless of the instance's mode.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = self.unit_infer(&self.arch.stem, x)?;
        if let Some((window, stride)) = self.arch.pool {
            h = avg_pool2d(&h, window, stride)?;
        }
        for block in &self.arch.blocks {
            let a = self.unit_infer(&block.first, &h)?;
            let b = self.unit_infer(&block.second, &a)?;
            let sum = match &block.shortcut {
                Some(sc) => b.add(&self.unit_infer(sc, &h)?)?,
                None => b.add(&h)?,
            };
            h = relu(&sum);
        }
        let pooled = global_avg_pool(&h)?;
        fully_connected(&pooled, self.param("fc/weight")?, None)
    }

    fn unit_infer(&self, unit: &ConvUnit, x: &Tensor<T>) -> Result<Tensor<T>> {
        let w = self.param(&unit.param("weight"))?;
        let y = if self.folded {
            let bias = self.param(&unit.param("bias"))?;
            conv2d_forward_bias(x, w, Some(bias.data()), unit.stride)?
        } else {
            let z = conv2d_forward_bias(x, w, None, unit.stride)?;
            batchnorm_infer(
                &z,
                self.param(&unit.param("gamma"))?.data(),
                self.param(&unit.param("beta"))?.data(),
                self.param(&unit.param("moving_mean"))?.data(),
                self.param(&unit.param("moving_var"))?.data(),
                T::of(BN_EPSILON),
            )?
        };
        Ok(if unit.relu { relu(&y) } else { y })
    }

    /// Train-mode forward pass: batch statistics (moving averages are updated),
    /// dropout with probability `dropout_p`. Returns logits and the activations
    /// needed by [`ModelInstance::backward`].
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor<T>,
        dropout_p: f64,
        rng: &mut R,
    ) -> Result<(Tensor<T>, Trace<T>)> {
        if self.mode != Mode::Train {
            return Err(Error::Model("forward_train needs a train-mode instance".into()));
        }
        self.check_input(x)?;
        let arch = self.arch.clone();
        let (mut h, stem) = self.unit_train(&arch.stem, x.clone())?;
        let mut pool_input_shape = None;
        if let Some((window, stride)) = arch.pool {
            pool_input_shape = Some(h.shape().to_vec());
            h = avg_pool2d(&h, window, stride)?;
        }
        let mut blocks = Vec::with_capacity(arch.blocks.len());
        for block in &arch.blocks {
            let (a, first) = self.unit_train(&block.first, h.clone())?;
            let (b, second) = self.unit_train(&block.second, a)?;
            let (sum, shortcut) = match &block.shortcut {
                Some(sc) => {
                    let (s, t) = self.unit_train(sc, h)?;
                    (b.add(&s)?, Some(t))
                }
                None => (b.add(&h)?, None),
            };
            h = relu(&sum);
            blocks.push(BlockTrace {
                first,
                second,
                shortcut,
                sum,
            });
        }
        let gap_input_shape = h.shape().to_vec();
        let pooled = global_avg_pool(&h)?;
        let n = pooled.len() / arch.fc_in;
        let pooled = pooled.reshape(vec![n, arch.fc_in])?;
        let (dropped, dropout_mask) = dropout(&pooled, dropout_p, Mode::Train, rng)?;
        let logits = fully_connected(&dropped, self.param("fc/weight")?, None)?;
        Ok((
            logits,
            Trace {
                stem,
                pool_input_shape,
                blocks,
                gap_input_shape,
                dropout_mask,
                fc_input: dropped,
            },
        ))
    }

    fn unit_train(&mut self, unit: &ConvUnit, x: Tensor<T>) -> Result<(Tensor<T>, UnitTrace<T>)> {
        let conv_out = conv2d_forward_bias(&x, self.param(&unit.param("weight"))?, None, unit.stride)?;
        let (bn_out, stats) = batchnorm_train(
            &conv_out,
            self.param(&unit.param("gamma"))?.data(),
            self.param(&unit.param("beta"))?.data(),
            T::of(BN_EPSILON),
        )?;
        let mut mean = self.param(&unit.param("moving_mean"))?.clone();
        let mut var = self.param(&unit.param("moving_var"))?.clone();
        update_moving_stats(mean.data_mut(), var.data_mut(), &stats, T::of(BN_MOMENTUM));
        self.params.insert(unit.param("moving_mean"), mean);
        self.params.insert(unit.param("moving_var"), var);
        let out = if unit.relu { relu(&bn_out) } else { bn_out.clone() };
        Ok((
            out,
            UnitTrace {
                input: x,
                conv_out,
                bn_out,
            },
        ))
    }

    /// Gradients of `sum(grad_logits * logits)` for every trainable parameter,
    /// keyed by parameter name, in table order.
    pub fn backward(&self, trace: &Trace<T>, grad_logits: &Tensor<T>) -> Result<IndexMap<String, Tensor<T>>> {
        let mut grads = IndexMap::new();
        let (g_fc_in, g_fc_w) = fully_connected_backward(&trace.fc_input, self.param("fc/weight")?, grad_logits)?;
        let g_pooled = dropout_backward(&g_fc_in, trace.dropout_mask.as_deref());
        let mut g = global_avg_pool_backward(&trace.gap_input_shape, &g_pooled)?;

        for (block, bt) in self.arch.blocks.iter().zip(&trace.blocks).rev() {
            let g_sum = relu_backward(&bt.sum, &g)?;
            let g_mid = self.unit_backward(&block.second, &bt.second, &g_sum, &mut grads)?;
            let mut g_in = self.unit_backward(&block.first, &bt.first, &g_mid, &mut grads)?;
            match (&block.shortcut, &bt.shortcut) {
                (Some(sc), Some(st)) => g_in.add_assign(&self.unit_backward(sc, st, &g_sum, &mut grads)?)?,
                _ => g_in.add_assign(&g_sum)?,
            }
            g = g_in;
        }
        if let (Some((window, stride)), Some(shape)) = (self.arch.pool, &trace.pool_input_shape) {
            g = avg_pool2d_backward(shape, window, stride, &g)?;
        }
        self.unit_backward(&self.arch.stem, &trace.stem, &g, &mut grads)?;
        grads.insert("fc/weight".into(), g_fc_w);

        // table order
        let mut ordered = IndexMap::with_capacity(grads.len());
        for name in self.params.keys() {
            if let Some(t) = grads.swap_remove(name) {
                ordered.insert(name.clone(), t);
            }
        }
        Ok(ordered)
    }

    fn unit_backward(
        &self,
        unit: &ConvUnit,
        trace: &UnitTrace<T>,
        grad_out: &Tensor<T>,
        grads: &mut IndexMap<String, Tensor<T>>,
    ) -> Result<Tensor<T>> {
        let g_bn = if unit.relu {
            relu_backward(&trace.bn_out, grad_out)?
        } else {
            grad_out.clone()
        };
        let gamma = self.param(&unit.param("gamma"))?;
        let (g_conv, g_gamma, g_beta) = batchnorm_backward(&trace.conv_out, gamma.data(), T::of(BN_EPSILON), &g_bn)?;
        let w = self.param(&unit.param("weight"))?;
        let (g_x, g_w) = conv_backward(&trace.input, w, unit.stride, &g_conv)?;
        let c = unit.c_out;
        grads.insert(unit.param("weight"), g_w);
        grads.insert(unit.param("gamma"), Tensor::new(vec![c], g_gamma)?);
        grads.insert(unit.param("beta"), Tensor::new(vec![c], g_beta)?);
        Ok(g_x)
    }

    /// Rewrites every conv + batch norm pair as a single conv with bias:
    /// `w' = w * gamma / sqrt(var + eps)`, `b = beta - gamma * mean / sqrt(var + eps)`.
    pub fn fold_batchnorm(&self) -> Result<Self> {
        if self.mode != Mode::Infer {
            return Err(Error::Model("batch norm can only be folded in infer mode".into()));
        }
        if self.folded {
            return Ok(self.clone());
        }
        let eps = T::of(BN_EPSILON);
        let mut params = IndexMap::new();
        for unit in self.arch.units() {
            let gamma = self.param(&unit.param("gamma"))?.data();
            let beta = self.param(&unit.param("beta"))?.data();
            let mean = self.param(&unit.param("moving_mean"))?.data();
            let var = self.param(&unit.param("moving_var"))?.data();
            let scale: Vec<T> = gamma.iter().zip(var).map(|(&g, &v)| g / (v + eps).sqrt()).collect();
            let mut w = self.param(&unit.param("weight"))?.clone();
            for row in w.data_mut().chunks_exact_mut(unit.c_out) {
                for (x, &s) in row.iter_mut().zip(&scale) {
                    *x = *x * s;
                }
            }
            let bias: Vec<T> = (0..unit.c_out).map(|o| beta[o] - scale[o] * mean[o]).collect();
            params.insert(unit.param("weight"), w);
            params.insert(unit.param("bias"), Tensor::new(vec![unit.c_out], bias)?);
        }
        params.insert("fc/weight".into(), self.param("fc/weight")?.clone());
        ModelInstance::from_parts(self.spec, params, true)
    }
}

impl ModelInstance<f32> {
    /// Reshapes a `t x f` MFCC matrix to the family's layout and returns the logits.
    pub fn forward_mfcc(&self, mfcc: &MfccMatrix) -> Result<Vec<f32>> {
        let x = if self.spec.family.is_temporal() {
            mfcc.to_temporal_input()
        } else {
            mfcc.to_image_input()
        };
        Ok(self.forward(&x)?.into_data())
    }
}

/// Stacks `t x f` matrices into a batch tensor for `spec`'s family.
pub fn batch_input(spec: &ModelSpec, mats: &[&MfccMatrix]) -> Result<Tensor<f32>> {
    let [h, w, c] = spec.input_shape();
    let mut data = Vec::with_capacity(mats.len() * h * w * c);
    for m in mats {
        if m.t * m.f != h * w * c {
            return Err(Error::shape(format!("{}x{} features for a {h}x{w}x{c} model", m.t, m.f)));
        }
        data.extend(m.values.iter().map(|&v| v as f32));
    }
    Tensor::new(vec![mats.len(), h, w, c], data)
}

