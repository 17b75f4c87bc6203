use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

fn dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let &[c_in, c_out] = w.shape() else {
        return Err(Error::shape(format!("FC weight must be [c_in, c_out], got {:?}", w.shape())));
    };
    if c_in == 0 || x.len() % c_in != 0 || x.shape().last() != Some(&c_in) {
        return Err(Error::shape(format!(
            "FC expects trailing dim {c_in}, input is {:?}",
            x.shape()
        )));
    }
    Ok((x.len() / c_in, c_in, c_out))
}

/// `y = x W` over the trailing axis (optionally plus bias). Input `[.., c_in]`, output `[n, c_out]`.
pub fn fully_connected<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, bias: Option<&[T]>) -> Result<Tensor<T>> {
    let (n, c_in, c_out) = dims(x, w)?;
    let mut out = vec![T::zero(); n * c_out];
    for (xr, o) in x.data().chunks_exact(c_in).zip(out.chunks_exact_mut(c_out)) {
        if let Some(b) = bias {
            o.copy_from_slice(b);
        }
        for (ci, &a) in xr.iter().enumerate() {
            for (acc, &wv) in o.iter_mut().zip(&w.data()[ci * c_out..(ci + 1) * c_out]) {
                *acc = *acc + a * wv;
            }
        }
    }
    Tensor::new(vec![n, c_out], out)
}

/// Returns `(grad_x, grad_w)`; `grad_x` takes the shape of `x`.
pub fn fully_connected_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, c_in, c_out) = dims(x, w)?;
    if grad_out.len() != n * c_out {
        return Err(Error::shape("FC gradient shape mismatch"));
    }
    let mut gx = vec![T::zero(); n * c_in];
    let mut gw = vec![T::zero(); c_in * c_out];
    for ((xr, gr), gxr) in x
        .data()
        .chunks_exact(c_in)
        .zip(grad_out.data().chunks_exact(c_out))
        .zip(gx.chunks_exact_mut(c_in))
    {
        for ci in 0..c_in {
            let wrow = &w.data()[ci * c_out..(ci + 1) * c_out];
            gxr[ci] = wrow.iter().zip(gr).map(|(&a, &b)| a * b).sum();
            for (gv, &g) in gw[ci * c_out..(ci + 1) * c_out].iter_mut().zip(gr) {
                *gv = *gv + xr[ci] * g;
            }
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), gx)?,
        Tensor::new(w.shape().to_vec(), gw)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight() {
        let x = Tensor::from_fn(vec![1, 4], |i| i as f64 + 0.5);
        let w = Tensor::from_fn(vec![4, 4], |i| if i % 5 == 0 { 1.0 } else { 0.0 });
        assert_eq!(fully_connected(&x, &w, None).unwrap().data(), x.data());
    }

    #[test]
    fn forty_eight_to_twelve() {
        let x = Tensor::<f32>::zeros(vec![1, 1, 1, 48]);
        let w = Tensor::<f32>::zeros(vec![48, 12]);
        assert_eq!(fully_connected(&x, &w, None).unwrap().shape(), &[1, 12]);
        assert!(fully_connected(&x, &Tensor::zeros(vec![40, 12]), None).is_err());
    }
}
