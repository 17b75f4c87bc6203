use super::conv::same_padding;
use super::tensor::{nhwc, shape_like, Scalar, Tensor};
use crate::error::{Error, Result};

/// Mean over every spatial position, per channel: `[n, h, w, c] -> [n, 1, 1, c]`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, w, c] = nhwc(x.shape())?;
    let positions = h * w;
    if positions == 0 {
        return Err(Error::shape("global pool over an empty spatial extent"));
    }
    let inv = T::of(1.0 / positions as f64);
    let mut out = vec![T::zero(); n * c];
    for (b, o) in out.chunks_exact_mut(c).enumerate() {
        for row in x.data()[b * positions * c..(b + 1) * positions * c].chunks_exact(c) {
            for (acc, &v) in o.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        o.iter_mut().for_each(|v| *v = *v * inv);
    }
    Tensor::new(shape_like(x.shape(), n, 1, 1, c), out)
}

/// Spreads each pooled gradient uniformly back over the `input_shape` positions.
pub fn global_avg_pool_backward<T: Scalar>(
    input_shape: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [n, h, w, c] = nhwc(input_shape)?;
    if grad_out.len() != n * c {
        return Err(Error::shape(format!(
            "pooled gradient has {} values, expected {}",
            grad_out.len(),
            n * c
        )));
    }
    let inv = T::of(1.0 / (h * w) as f64);
    let mut gx = Vec::with_capacity(n * h * w * c);
    for g in grad_out.data().chunks_exact(c) {
        for _ in 0..h * w {
            gx.extend(g.iter().map(|&v| v * inv));
        }
    }
    Tensor::new(input_shape.to_vec(), gx)
}

/// Average pooling with SAME padding. Windows that overlap the zero padding
/// are still divided by the full `window * window` area.
pub fn avg_pool2d<T: Scalar>(x: &Tensor<T>, window: usize, stride: usize) -> Result<Tensor<T>> {
    let [n, h, w, c] = nhwc(x.shape())?;
    if window == 0 || stride == 0 {
        return Err(Error::shape("pool window and stride must be >= 1"));
    }
    let ph = same_padding(h, window, stride);
    let pw = same_padding(w, window, stride);
    let inv = T::of(1.0 / (window * window) as f64);
    let mut out = vec![T::zero(); n * ph.out * pw.out * c];
    for b in 0..n {
        let xs = &x.data()[b * h * w * c..(b + 1) * h * w * c];
        for oh in 0..ph.out {
            for ow in 0..pw.out {
                let o = &mut out[((b * ph.out + oh) * pw.out + ow) * c..][..c];
                for i in pool_taps(oh, stride, window, ph.before, h) {
                    for j in pool_taps(ow, stride, window, pw.before, w) {
                        for (acc, &v) in o.iter_mut().zip(&xs[(i * w + j) * c..][..c]) {
                            *acc = *acc + v;
                        }
                    }
                }
                o.iter_mut().for_each(|v| *v = *v * inv);
            }
        }
    }
    Tensor::new(shape_like(x.shape(), n, ph.out, pw.out, c), out)
}

pub fn avg_pool2d_backward<T: Scalar>(
    input_shape: &[usize],
    window: usize,
    stride: usize,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [n, h, w, c] = nhwc(input_shape)?;
    let ph = same_padding(h, window, stride);
    let pw = same_padding(w, window, stride);
    if grad_out.len() != n * ph.out * pw.out * c {
        return Err(Error::shape("avg pool gradient shape mismatch"));
    }
    let inv = T::of(1.0 / (window * window) as f64);
    let mut gx = vec![T::zero(); n * h * w * c];
    for b in 0..n {
        for oh in 0..ph.out {
            for ow in 0..pw.out {
                let g = &grad_out.data()[((b * ph.out + oh) * pw.out + ow) * c..][..c];
                for i in pool_taps(oh, stride, window, ph.before, h) {
                    for j in pool_taps(ow, stride, window, pw.before, w) {
                        let dst = &mut gx[((b * h + i) * w + j) * c..][..c];
                        for (d, &v) in dst.iter_mut().zip(g) {
                            *d = *d + v * inv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(input_shape.to_vec(), gx)
}

/// In-bounds input indices covered by output `o`.
fn pool_taps(o: usize, stride: usize, window: usize, before: usize, len: usize) -> impl Iterator<Item = usize> {
    let start = o * stride;
    (start..start + window).filter_map(move |p| p.checked_sub(before).filter(|&i| i < len))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_pool_of_constant() {
        let x = Tensor::full(vec![13, 1, 48], 2.5f64);
        let y = global_avg_pool(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 48]);
        assert!(y.data().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn avg_pool_shape_and_edges() {
        let x = Tensor::full(vec![98, 40, 1], 1.0f64);
        let y = avg_pool2d(&x, 4, 4).unwrap();
        assert_eq!(y.shape(), &[25, 10, 1]);
        // rows: 98 = 1 pad + 96 + 1 pad, so first and last row windows see 3 real rows
        assert!((y.data()[0] - 12.0 / 16.0).abs() < 1e-12);
        assert!((y.data()[10 * 5] - 1.0).abs() < 1e-12);
        assert!((y.data()[24 * 10] - 12.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn avg_pool_backward_conserves_mass_for_full_windows() {
        let g = Tensor::full(vec![2, 2, 1], 1.0f64);
        let gx = avg_pool2d_backward(&[8, 8, 1], 4, 4, &g).unwrap();
        assert!((gx.sum() - 4.0).abs() < 1e-12);
    }
}
