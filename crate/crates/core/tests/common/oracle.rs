//! Plain-loop reference implementations used as test oracles.

use rand::Rng;
use tcresnet::nn_core::Tensor;

pub fn random_tensor<R: Rng>(r: &mut R, shape: Vec<usize>) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| r.gen_range(-1.0..1.0))
}

/// Zero-pads explicitly, then slides the kernel with plain loops.
pub fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, stride: (usize, usize)) -> Tensor<f64> {
    let [n, h, wd, cin] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let [kh, kw, _, cout] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
    let out_dim = |len: usize, s: usize| len.div_ceil(s);
    let pad_total = |len: usize, k: usize, s: usize| ((out_dim(len, s) - 1) * s + k).saturating_sub(len);
    let (oh, ow) = (out_dim(h, stride.0), out_dim(wd, stride.1));
    let (ph, pw) = (pad_total(h, kh, stride.0), pad_total(wd, kw, stride.1));
    let (top, left) = (ph / 2, pw / 2);
    let (hp, wp) = (h + ph, wd + pw);
    let mut padded = vec![0.0; n * hp * wp * cin];
    for b in 0..n {
        for i in 0..h {
            for j in 0..wd {
                for c in 0..cin {
                    padded[((b * hp + i + top) * wp + j + left) * cin + c] = x.data()[((b * h + i) * wd + j) * cin + c];
                }
            }
        }
    }
    let mut out = vec![0.0; n * oh * ow * cout];
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                for o in 0..cout {
                    let mut acc = 0.0;
                    for a in 0..kh {
                        for e in 0..kw {
                            for c in 0..cin {
                                let xv = padded[((b * hp + i * stride.0 + a) * wp + j * stride.1 + e) * cin + c];
                                acc += xv * w.data()[((a * kw + e) * cin + c) * cout + o];
                            }
                        }
                    }
                    out[((b * oh + i) * ow + j) * cout + o] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, oh, ow, cout], out).unwrap()
}

/// Average pooling over SAME-padded windows, always dividing by `window^2`.
pub fn naive_avg_pool(x: &Tensor<f64>, window: usize, stride: usize) -> Tensor<f64> {
    let [n, h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let top = ((oh - 1) * stride + window).saturating_sub(h) / 2;
    let left = ((ow - 1) * stride + window).saturating_sub(w) / 2;
    let mut out = vec![0.0; n * oh * ow * c];
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut s = 0.0;
                    for a in 0..window {
                        for e in 0..window {
                            let (r, q) = ((i * stride + a) as isize - top as isize, (j * stride + e) as isize - left as isize);
                            if r >= 0 && q >= 0 && (r as usize) < h && (q as usize) < w {
                                s += x.data()[((b * h + r as usize) * w + q as usize) * c + ch];
                            }
                        }
                    }
                    out[((b * oh + i) * ow + j) * c + ch] = s / (window * window) as f64;
                }
            }
        }
    }
    Tensor::new(vec![n, oh, ow, c], out).unwrap()
}

pub fn naive_fc(x: &Tensor<f64>, w: &Tensor<f64>) -> Tensor<f64> {
    let (cin, cout) = (w.shape()[0], w.shape()[1]);
    let n = x.len() / cin;
    let mut out = vec![0.0; n * cout];
    for b in 0..n {
        for o in 0..cout {
            for i in 0..cin {
                out[b * cout + o] += x.data()[b * cin + i] * w.data()[i * cout + o];
            }
        }
    }
    Tensor::new(vec![n, cout], out).unwrap()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (1.0 + y.abs()))
        .fold(0.0, f64::max)
}

pub fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Worst relative error between central differences of `f` at `x` and
/// `analytic`, with magnitudes below 1e-6 floored to 1e-6.
pub fn grad_error(x: &Tensor<f64>, analytic: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
        let a = analytic.data()[i];
        worst = worst.max((numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-6));
    }
    worst
}
