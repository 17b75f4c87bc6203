use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::nn_core::{Scalar, Tensor};

/// Per-parameter momentum buffers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub velocity: IndexMap<String, Tensor<T>>,
    pub iteration: usize,
}

/// SGD with momentum and coupled L2 weight decay:
/// `g' = g + wd * p`, `v = momentum * v + g'`, `p -= lr * v`.
///
/// Only parameters present in `grads` are touched, so batch-norm moving
/// statistics (which never get gradients) are not decayed.
pub fn sgd_step<T: Scalar>(
    params: &mut IndexMap<String, Tensor<T>>,
    grads: &IndexMap<String, Tensor<T>>,
    state: &mut OptimizerState<T>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    let (lr, mu, wd) = (T::of(lr), T::of(momentum), T::of(weight_decay));
    for (name, grad) in grads {
        let param = params
            .get_mut(name)
            .ok_or_else(|| Error::Train(format!("gradient for unknown parameter {name}")))?;
        if param.shape() != grad.shape() {
            return Err(Error::shape(format!(
                "{name}: parameter {:?} vs gradient {:?}",
                param.shape(),
                grad.shape()
            )));
        }
        let v = state
            .velocity
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(grad.shape().to_vec()));
        for ((p, &g), vel) in param.data_mut().iter_mut().zip(grad.data()).zip(v.data_mut()) {
            let g = g + wd * *p;
            *vel = mu * *vel + g;
            *p = *p - lr * *vel;
        }
    }
    state.iteration += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(name: &str, v: f64) -> IndexMap<String, Tensor<f64>> {
        IndexMap::from([(name.to_string(), Tensor::new(vec![1], vec![v]).unwrap())])
    }

    #[test]
    fn zero_gradient_no_decay_is_a_no_op() {
        let mut p = one("w", 1.5);
        let mut s = OptimizerState::default();
        sgd_step(&mut p, &one("w", 0.0), &mut s, 0.1, 0.9, 0.0).unwrap();
        assert_eq!(p["w"].data()[0], 1.5);
    }

    #[test]
    fn first_step_is_plain_sgd() {
        let mut p = one("w", 1.0);
        let mut s = OptimizerState::default();
        sgd_step(&mut p, &one("w", 2.0), &mut s, 0.1, 0.9, 0.0).unwrap();
        assert!((p["w"].data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn two_steps_unrolled() {
        // v1 = g, v2 = 0.9 g + g: total displacement -lr g (1 + 1.9) = -2.9 lr g
        let (lr, g) = (0.1, 3.0);
        let mut p = one("w", 0.0);
        let mut s = OptimizerState::default();
        for _ in 0..2 {
            sgd_step(&mut p, &one("w", g), &mut s, lr, 0.9, 0.0).unwrap();
        }
        assert!((p["w"].data()[0] - (-lr * g * 2.9)).abs() < 1e-12);
        assert_eq!(s.iteration, 2);
    }

    #[test]
    fn decay_shrinks_norm() {
        let mut p = one("w", -4.0);
        let mut s = OptimizerState::default();
        let mut prev = 4.0;
        for _ in 0..50 {
            sgd_step(&mut p, &one("w", 0.0), &mut s, 0.1, 0.9, 0.001).unwrap();
            let now = p["w"].data()[0].abs();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = one("w", 0.0);
        let g = IndexMap::from([("w".to_string(), Tensor::<f64>::zeros(vec![2]))]);
        assert!(sgd_step(&mut p, &g, &mut OptimizerState::default(), 0.1, 0.9, 0.0).is_err());
    }
}
