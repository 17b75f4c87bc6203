//! Bias-free convolutions with SAME padding.
//!
//! Activations are NHWC (a leading batch axis is optional), kernels are
//! `[k_h, k_w, c_in, c_out]`. A temporal convolution is the `w = 1` case:
//! the input is `t x 1 x f` and the kernel `k x 1 x f x c_out`.

use super::par::{for_each_chunk, map_indices};
use super::tensor::{nhwc, shape_like, Scalar, Tensor};
use crate::error::{Error, Result};

/// SAME padding along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamePad {
    pub out: usize,
    pub before: usize,
    pub after: usize,
}

/// Output length `ceil(input / stride)`; total padding is split with the
/// smaller half in front.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> SamePad {
    let out = input.div_ceil(stride);
    let total = ((out.saturating_sub(1)) * stride + kernel).saturating_sub(input);
    SamePad {
        out,
        before: total / 2,
        after: total - total / 2,
    }
}

/// Resolved shapes of one convolution call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub c_in: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub c_out: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pad_h: SamePad,
    pub pad_w: SamePad,
}

impl ConvGeometry {
    pub fn resolve(x_shape: &[usize], w_shape: &[usize], stride: (usize, usize)) -> Result<Self> {
        let [batch, in_h, in_w, c_in] = nhwc(x_shape)?;
        let &[k_h, k_w, wc_in, c_out] = w_shape else {
            return Err(Error::shape(format!(
                "kernel must be [k_h, k_w, c_in, c_out], got {w_shape:?}"
            )));
        };
        if wc_in != c_in {
            return Err(Error::shape(format!(
                "kernel expects {wc_in} input channels, input has {c_in}"
            )));
        }
        if k_h == 0 || k_w == 0 || c_out == 0 {
            return Err(Error::shape(format!("degenerate kernel {w_shape:?}")));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(Error::shape("stride must be >= 1"));
        }
        if in_h == 0 || in_w == 0 {
            return Err(Error::shape(format!("empty spatial extent {x_shape:?}")));
        }
        Ok(Self {
            batch,
            in_h,
            in_w,
            c_in,
            k_h,
            k_w,
            c_out,
            stride_h: stride.0,
            stride_w: stride.1,
            pad_h: same_padding(in_h, k_h, stride.0),
            pad_w: same_padding(in_w, k_w, stride.1),
        })
    }

    pub fn out_h(&self) -> usize {
        self.pad_h.out
    }

    pub fn out_w(&self) -> usize {
        self.pad_w.out
    }

    fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.c_in
    }

    fn out_len(&self) -> usize {
        self.out_h() * self.out_w() * self.c_out
    }

    /// Input row for output row `o` and kernel tap `k`, or `None` in the padding.
    #[inline]
    fn src_h(&self, o: usize, k: usize) -> Option<usize> {
        (o * self.stride_h + k)
            .checked_sub(self.pad_h.before)
            .filter(|&i| i < self.in_h)
    }

    #[inline]
    fn src_w(&self, o: usize, k: usize) -> Option<usize> {
        (o * self.stride_w + k)
            .checked_sub(self.pad_w.before)
            .filter(|&i| i < self.in_w)
    }
}

/// 2D convolution, SAME padding, no bias.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: (usize, usize),
) -> Result<Tensor<T>> {
    conv2d_forward_bias(x, w, None, stride)
}

/// 2D convolution with an optional per-output-channel bias (used only by
/// batch-norm-folded models).
pub fn conv2d_forward_bias<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&[T]>,
    stride: (usize, usize),
) -> Result<Tensor<T>> {
    let g = ConvGeometry::resolve(x.shape(), w.shape(), stride)?;
    if let Some(b) = bias {
        if b.len() != g.c_out {
            return Err(Error::shape(format!(
                "bias has {} entries for {} output channels",
                b.len(),
                g.c_out
            )));
        }
    }
    let mut out = vec![T::zero(); g.batch * g.out_len()];
    let (xd, wd) = (x.data(), w.data());
    for_each_chunk(&mut out, g.out_len(), |n, o| {
        conv2d_sample(&g, &xd[n * g.in_len()..(n + 1) * g.in_len()], wd, bias, o)
    });
    Tensor::new(
        shape_like(x.shape(), g.batch, g.out_h(), g.out_w(), g.c_out),
        out,
    )
}

fn conv2d_sample<T: Scalar>(
    g: &ConvGeometry,
    x: &[T],
    w: &[T],
    bias: Option<&[T]>,
    out: &mut [T],
) {
    let (cin, cout) = (g.c_in, g.c_out);
    for oh in 0..g.out_h() {
        for ow in 0..g.out_w() {
            let base = (oh * g.out_w() + ow) * cout;
            let acc = &mut out[base..base + cout];
            if let Some(b) = bias {
                acc.copy_from_slice(b);
            }
            for kh in 0..g.k_h {
                let Some(ih) = g.src_h(oh, kh) else { continue };
                for kw in 0..g.k_w {
                    let Some(iw) = g.src_w(ow, kw) else { continue };
                    let xrow = &x[(ih * g.in_w + iw) * cin..][..cin];
                    let wtap = &w[(kh * g.k_w + kw) * cin * cout..][..cin * cout];
                    for (ci, &a) in xrow.iter().enumerate() {
                        let wrow = &wtap[ci * cout..(ci + 1) * cout];
                        for (o, &wv) in acc.iter_mut().zip(wrow) {
                            *o = *o + a * wv;
                        }
                    }
                }
            }
        }
    }
}

/// Temporal (1D) convolution over `t x 1 x c_in` input with a `k x 1 x c_in x c_out`
/// kernel. Accumulation order matches [`conv2d_forward`] so results are bitwise equal.
pub fn conv_temporal_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::resolve(x.shape(), w.shape(), (stride, 1))?;
    if g.in_w != 1 || g.k_w != 1 {
        return Err(Error::shape(format!(
            "temporal convolution needs t x 1 x c input and k x 1 kernel, got {:?} and {:?}",
            x.shape(),
            w.shape()
        )));
    }
    let (cin, cout) = (g.c_in, g.c_out);
    let t_in = g.in_h;
    let t_out = g.out_h();
    let mut out = vec![T::zero(); g.batch * t_out * cout];
    let (xd, wd) = (x.data(), w.data());
    for_each_chunk(&mut out, t_out * cout, |n, o| {
        let xs = &xd[n * t_in * cin..(n + 1) * t_in * cin];
        for j in 0..t_out {
            let acc = &mut o[j * cout..(j + 1) * cout];
            for i in 0..g.k_h {
                let Some(src) = g.src_h(j, i) else { continue };
                let xrow = &xs[src * cin..(src + 1) * cin];
                let wtap = &wd[i * cin * cout..(i + 1) * cin * cout];
                for (ci, &a) in xrow.iter().enumerate() {
                    for (acc_o, &wv) in acc.iter_mut().zip(&wtap[ci * cout..(ci + 1) * cout]) {
                        *acc_o = *acc_o + a * wv;
                    }
                }
            }
        }
    });
    Tensor::new(shape_like(x.shape(), g.batch, t_out, 1, cout), out)
}

/// Gradients of `sum(grad_out * conv2d_forward(x, w))` with respect to `x` and `w`.
pub fn conv_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: (usize, usize),
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let g = ConvGeometry::resolve(x.shape(), w.shape(), stride)?;
    let expected = shape_like(x.shape(), g.batch, g.out_h(), g.out_w(), g.c_out);
    if grad_out.shape() != expected.as_slice() {
        return Err(Error::shape(format!(
            "grad_out shape {:?}, forward output shape {expected:?}",
            grad_out.shape()
        )));
    }
    let (xd, wd, gd) = (x.data(), w.data(), grad_out.data());
    let (il, ol) = (g.in_len(), g.out_len());

    let mut gx = vec![T::zero(); g.batch * il];
    for_each_chunk(&mut gx, il, |n, gxs| {
        conv_backward_input(&g, wd, &gd[n * ol..(n + 1) * ol], gxs)
    });

    let partials = map_indices(g.batch, |n| {
        let mut gw = vec![T::zero(); wd.len()];
        conv_backward_weight(&g, &xd[n * il..(n + 1) * il], &gd[n * ol..(n + 1) * ol], &mut gw);
        gw
    });
    let mut gw = vec![T::zero(); wd.len()];
    for p in partials {
        for (a, b) in gw.iter_mut().zip(p) {
            *a = *a + b;
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), gx)?,
        Tensor::new(w.shape().to_vec(), gw)?,
    ))
}

fn conv_backward_input<T: Scalar>(g: &ConvGeometry, w: &[T], gout: &[T], gx: &mut [T]) {
    let (cin, cout) = (g.c_in, g.c_out);
    for oh in 0..g.out_h() {
        for ow in 0..g.out_w() {
            let go = &gout[(oh * g.out_w() + ow) * cout..][..cout];
            for kh in 0..g.k_h {
                let Some(ih) = g.src_h(oh, kh) else { continue };
                for kw in 0..g.k_w {
                    let Some(iw) = g.src_w(ow, kw) else { continue };
                    let gxrow = &mut gx[(ih * g.in_w + iw) * cin..][..cin];
                    let wtap = &w[(kh * g.k_w + kw) * cin * cout..][..cin * cout];
                    for (ci, gxv) in gxrow.iter_mut().enumerate() {
                        let wrow = &wtap[ci * cout..(ci + 1) * cout];
                        let s: T = go.iter().zip(wrow).map(|(&a, &b)| a * b).sum();
                        *gxv = *gxv + s;
                    }
                }
            }
        }
    }
}

fn conv_backward_weight<T: Scalar>(g: &ConvGeometry, x: &[T], gout: &[T], gw: &mut [T]) {
    let (cin, cout) = (g.c_in, g.c_out);
    for oh in 0..g.out_h() {
        for ow in 0..g.out_w() {
            let go = &gout[(oh * g.out_w() + ow) * cout..][..cout];
            for kh in 0..g.k_h {
                let Some(ih) = g.src_h(oh, kh) else { continue };
                for kw in 0..g.k_w {
                    let Some(iw) = g.src_w(ow, kw) else { continue };
                    let xrow = &x[(ih * g.in_w + iw) * cin..][..cin];
                    let gtap = &mut gw[(kh * g.k_w + kw) * cin * cout..][..cin * cout];
                    for (ci, &a) in xrow.iter().enumerate() {
                        for (gv, &b) in gtap[ci * cout..(ci + 1) * cout].iter_mut().zip(go) {
                            *gv = *gv + a * b;
                        }
                    }
                }
            }
        }
    }
}
