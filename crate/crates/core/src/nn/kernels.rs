//! Forward and backward kernels for every layer primitive the network
//! uses. All kernels are pure; the parallel ones partition work so that
//! each output element is produced by exactly one task with a fixed
//! summation order, which keeps results bitwise identical for any
//! thread count.

use rayon::prelude::*;

use crate::error::{shape_err, Error, Result};

use super::{Activation, ConvSpec, Scalar, Tensor};

/// Output extent of a strided window along one axis, `None` when the
/// window does not fit.
pub fn window_out(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if stride == 0 || kernel == 0 || padded < kernel {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}

/// Range of output positions whose tap `k` lands inside `[0, len)`.
#[inline]
fn valid_range(out_len: usize, len: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    if len + pad < k + 1 {
        return (0, 0);
    }
    let hi = ((len - 1 + pad - k) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// Convolution (cross-correlation) with zero padding and the activation
/// named by `spec`.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    spec: &ConvSpec,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    if x.channels() != spec.in_channels {
        return Err(shape_err!(
            "conv expects {} input channels, got {}",
            spec.in_channels,
            x.channels()
        ));
    }
    if weight.dims() != spec.weight_dims() {
        return Err(shape_err!(
            "conv weight dims {:?} do not match spec {:?}",
            weight.dims(),
            spec.weight_dims()
        ));
    }
    match (spec.has_bias, bias) {
        (true, None) => return Err(shape_err!("conv spec has a bias but none was given")),
        (false, Some(_)) => return Err(shape_err!("conv spec has no bias but one was given")),
        _ => {}
    }
    x.expect_finite("conv2d input")?;
    let y = conv2d_forward(x, weight, bias, spec.stride, spec.padding)?;
    Ok(match spec.activation {
        Activation::None => y,
        Activation::Relu => relu(&y),
        Activation::Sigmoid => sigmoid(&y),
    })
}

pub(crate) fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let [n, cin, h, w] = x.dims();
    let [cout, wcin, kh, kw] = weight.dims();
    if wcin != cin {
        return Err(shape_err!("conv weight expects {wcin} input channels, input has {cin}"));
    }
    if let Some(b) = bias {
        if b.numel() != cout {
            return Err(shape_err!("bias has {} values for {cout} output channels", b.numel()));
        }
    }
    let oh = window_out(h, kh, stride, pad)
        .ok_or_else(|| shape_err!("conv window {kh} does not fit height {h} with padding {pad}"))?;
    let ow = window_out(w, kw, stride, pad)
        .ok_or_else(|| shape_err!("conv window {kw} does not fit width {w} with padding {pad}"))?;

    let mut out = Tensor::zeros([n, cout, oh, ow]);
    let wd = weight.data();
    out.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(plane, dst)| {
            let (ni, oc) = (plane / cout, plane % cout);
            if let Some(b) = bias {
                dst.fill(b.data()[oc]);
            }
            for ic in 0..cin {
                let src = x.plane(ni, ic);
                for ky in 0..kh {
                    let (oy_lo, oy_hi) = valid_range(oh, h, ky, stride, pad);
                    for kx in 0..kw {
                        let wv = wd[((oc * cin + ic) * kh + ky) * kw + kx];
                        let (ox_lo, ox_hi) = valid_range(ow, w, kx, stride, pad);
                        for oy in oy_lo..oy_hi {
                            let iy = oy * stride + ky - pad;
                            let row = &src[iy * w..(iy + 1) * w];
                            let drow = &mut dst[oy * ow..(oy + 1) * ow];
                            if stride == 1 {
                                let shift = kx as isize - pad as isize;
                                let s = (ox_lo as isize + shift) as usize;
                                let len = ox_hi - ox_lo;
                                for (d, &v) in drow[ox_lo..ox_hi].iter_mut().zip(&row[s..s + len]) {
                                    *d += wv * v;
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    drow[ox] += wv * row[ox * stride + kx - pad];
                                }
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of a convolution with respect to its input, weight and
/// (optionally) bias.
pub(crate) fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    pad: usize,
    with_bias: bool,
) -> (Tensor<T>, Tensor<T>, Option<Tensor<T>>) {
    let [n, cin, h, w] = x.dims();
    let [cout, _, kh, kw] = weight.dims();
    let [_, _, oh, ow] = grad_out.dims();
    let wd = weight.data();

    let mut gx = Tensor::zeros(x.dims());
    gx.data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(plane, dst)| {
            let (ni, ic) = (plane / cin, plane % cin);
            for oc in 0..cout {
                let go = grad_out.plane(ni, oc);
                for ky in 0..kh {
                    let (oy_lo, oy_hi) = valid_range(oh, h, ky, stride, pad);
                    for kx in 0..kw {
                        let wv = wd[((oc * cin + ic) * kh + ky) * kw + kx];
                        let (ox_lo, ox_hi) = valid_range(ow, w, kx, stride, pad);
                        for oy in oy_lo..oy_hi {
                            let iy = oy * stride + ky - pad;
                            let grow = &go[oy * ow..(oy + 1) * ow];
                            let drow = &mut dst[iy * w..(iy + 1) * w];
                            for ox in ox_lo..ox_hi {
                                drow[ox * stride + kx - pad] += wv * grow[ox];
                            }
                        }
                    }
                }
            }
        });

    let mut gw = Tensor::zeros(weight.dims());
    gw.data_mut()
        .par_chunks_mut(cin * kh * kw)
        .enumerate()
        .for_each(|(oc, dst)| {
            for ic in 0..cin {
                for ky in 0..kh {
                    let (oy_lo, oy_hi) = valid_range(oh, h, ky, stride, pad);
                    for kx in 0..kw {
                        let (ox_lo, ox_hi) = valid_range(ow, w, kx, stride, pad);
                        let mut acc = T::zero();
                        for ni in 0..n {
                            let go = grad_out.plane(ni, oc);
                            let src = x.plane(ni, ic);
                            for oy in oy_lo..oy_hi {
                                let iy = oy * stride + ky - pad;
                                let grow = &go[oy * ow..(oy + 1) * ow];
                                let row = &src[iy * w..(iy + 1) * w];
                                for ox in ox_lo..ox_hi {
                                    acc += grow[ox] * row[ox * stride + kx - pad];
                                }
                            }
                        }
                        dst[(ic * kh + ky) * kw + kx] = acc;
                    }
                }
            }
        });

    let gb = with_bias.then(|| {
        let sums: Vec<T> = (0..cout)
            .map(|oc| (0..n).map(|ni| grad_out.plane(ni, oc).iter().copied().sum::<T>()).sum())
            .collect();
        Tensor::new([1, cout, 1, 1], sums).expect("bias dims")
    });
    (gx, gw, gb)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Channels `[start, end)` of `x`.
pub fn channel_slice<T: Scalar>(x: &Tensor<T>, start: usize, end: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims();
    if start >= end || end > c {
        return Err(shape_err!("channel range {start}..{end} invalid for {c} channels"));
    }
    let hw = h * w;
    let mut data = Vec::with_capacity(n * (end - start) * hw);
    for ni in 0..n {
        let base = ni * c * hw;
        data.extend_from_slice(&x.data()[base + start * hw..base + end * hw]);
    }
    Tensor::new([n, end - start, h, w], data)
}

/// Split into channels `[0, k)` and `[k, C)`.
pub fn channel_split<T: Scalar>(x: &Tensor<T>, k: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let c = x.channels();
    if k == 0 || k >= c {
        return Err(shape_err!("split point {k} must lie strictly inside 0..{c}"));
    }
    Ok((channel_slice(x, 0, k)?, channel_slice(x, k, c)?))
}

pub fn channel_concat<T: Scalar>(xs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = xs
        .first()
        .ok_or_else(|| Error::Argument("cannot concatenate an empty list".into()))?;
    let [n, _, h, w] = first.dims();
    for t in xs {
        let [tn, _, th, tw] = t.dims();
        if (tn, th, tw) != (n, h, w) {
            return Err(shape_err!(
                "concat operands disagree: {:?} vs {:?}",
                first.dims(),
                t.dims()
            ));
        }
    }
    let c: usize = xs.iter().map(|t| t.channels()).sum();
    let mut data = Vec::with_capacity(n * c * h * w);
    for ni in 0..n {
        for t in xs {
            let chw = t.channels() * h * w;
            data.extend_from_slice(&t.data()[ni * chw..(ni + 1) * chw]);
        }
    }
    Tensor::new([n, c, h, w], data)
}

/// Sub-pixel rearrangement: `out[n, c, h*s+i, w*s+j] = in[n, c*s*s + i*s + j, h, w]`.
pub fn pixel_shuffle<T: Scalar>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims();
    if s == 0 || c % (s * s) != 0 {
        return Err(shape_err!("pixel shuffle by {s} needs channels divisible by {}, got {c}", s * s));
    }
    let oc = c / (s * s);
    let mut out = Tensor::zeros([n, oc, h * s, w * s]);
    for ni in 0..n {
        for ci in 0..c {
            let (co, i, j) = (ci / (s * s), (ci % (s * s)) / s, ci % s);
            let src = x.plane(ni, ci);
            for hi in 0..h {
                for wi in 0..w {
                    out.set([ni, co, hi * s + i, wi * s + j], src[hi * w + wi]);
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Scalar>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims();
    if s == 0 || h % s != 0 || w % s != 0 {
        return Err(shape_err!("pixel unshuffle by {s} needs spatial dims divisible by {s}, got {h}x{w}"));
    }
    let (oh, ow) = (h / s, w / s);
    let mut out = Tensor::zeros([n, c * s * s, oh, ow]);
    for ni in 0..n {
        for co in 0..c * s * s {
            let (ci, i, j) = (co / (s * s), (co % (s * s)) / s, co % s);
            for hi in 0..oh {
                for wi in 0..ow {
                    out.set([ni, co, hi, wi], x.at([ni, ci, hi * s + i, wi * s + j]));
                }
            }
        }
    }
    Ok(out)
}

/// Sliding-window maximum without padding. Returns the pooled tensor
/// and, per output element, the flat input offset of the winner (first
/// maximum in scan order).
pub fn max_pool_with_argmax<T: Scalar>(
    x: &Tensor<T>,
    kernel: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, c, h, w] = x.dims();
    let oh = window_out(h, kernel, stride, 0);
    let ow = window_out(w, kernel, stride, 0);
    let (oh, ow) = match (oh, ow) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(shape_err!("pool window {kernel} (stride {stride}) larger than {h}x{w} input")),
    };
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut arg = vec![0usize; out.numel()];
    let mut o = 0;
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * h * w;
            let src = x.plane(ni, ci);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = src[oy * stride * w + ox * stride];
                    let mut best_at = oy * stride * w + ox * stride;
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let at = (oy * stride + ky) * w + ox * stride + kx;
                            if src[at] > best {
                                best = src[at];
                                best_at = at;
                            }
                        }
                    }
                    out.data_mut()[o] = best;
                    arg[o] = base + best_at;
                    o += 1;
                }
            }
        }
    }
    Ok((out, arg))
}

pub fn max_pool<T: Scalar>(x: &Tensor<T>, kernel: usize, stride: usize) -> Result<Tensor<T>> {
    Ok(max_pool_with_argmax(x, kernel, stride)?.0)
}

/// Source taps for resizing one axis under half-pixel centers with edge
/// clamping: `(lower index, upper index, weight of upper)`.
fn bilinear_taps(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub fn bilinear_resize<T: Scalar>(x: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims();
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return Err(shape_err!("cannot resize {h}x{w} to {out_h}x{out_w}"));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(x.clone());
    }
    let ty = bilinear_taps(h, out_h);
    let tx = bilinear_taps(w, out_w);
    let mut out = Tensor::zeros([n, c, out_h, out_w]);
    out.data_mut()
        .par_chunks_mut(out_h * out_w)
        .enumerate()
        .for_each(|(plane, dst)| {
            let src = x.plane(plane / c, plane % c);
            for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
                let ly = T::of(ly);
                for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                    let lx = T::of(lx);
                    let top = src[y0 * w + x0] * (T::one() - lx) + src[y0 * w + x1] * lx;
                    let bot = src[y1 * w + x0] * (T::one() - lx) + src[y1 * w + x1] * lx;
                    dst[oy * out_w + ox] = top * (T::one() - ly) + bot * ly;
                }
            }
        });
    Ok(out)
}

pub(crate) fn bilinear_resize_backward<T: Scalar>(
    in_dims: [usize; 4],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let [_, c, h, w] = in_dims;
    let [_, _, out_h, out_w] = grad_out.dims();
    if (out_h, out_w) == (h, w) {
        return grad_out.clone();
    }
    let ty = bilinear_taps(h, out_h);
    let tx = bilinear_taps(w, out_w);
    let mut gx = Tensor::zeros(in_dims);
    gx.data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(plane, dst)| {
            let go = grad_out.plane(plane / c, plane % c);
            for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
                let ly = T::of(ly);
                for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                    let lx = T::of(lx);
                    let g = go[oy * out_w + ox];
                    dst[y0 * w + x0] += g * (T::one() - ly) * (T::one() - lx);
                    dst[y0 * w + x1] += g * (T::one() - ly) * lx;
                    dst[y1 * w + x0] += g * ly * (T::one() - lx);
                    dst[y1 * w + x1] += g * ly * lx;
                }
            }
        });
    gx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ones(dims: [usize; 4]) -> Tensor<f32> {
        Tensor::full(dims, 1.0)
    }

    fn plain(cin: usize, cout: usize, k: usize, pad: usize) -> ConvSpec {
        ConvSpec::new(cin, cout, k).padding(pad).bias(false)
    }

    #[test]
    fn conv_ones_3x3_padded() {
        let spec = plain(1, 1, 3, 1);
        let y = conv2d(&ones([1, 1, 3, 3]), &spec, &ones([1, 1, 3, 3]), None).unwrap();
        assert_eq!(y.dims(), [1, 1, 3, 3]);
        assert_eq!(
            y.data(),
            &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]
        );
    }

    #[test]
    fn conv_zero_weights_give_zero() {
        let spec = ConvSpec::new(4, 5, 3).padding(1);
        let x = Tensor::<f32>::from_fn([2, 4, 6, 7], |[a, b, c, d]| (a + b * c) as f32 - d as f32);
        let y = conv2d(&x, &spec, &Tensor::zeros(spec.weight_dims()), Some(&Tensor::zeros([1, 5, 1, 1]))).unwrap();
        assert_eq!(y.dims(), [2, 5, 6, 7]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_identity_relu_clamps_negative() {
        let spec = ConvSpec::new(2, 2, 1).activation(Activation::Relu);
        let w = Tensor::from_fn(spec.weight_dims(), |[o, i, _, _]| if o == i { 1.0 } else { 0.0 });
        let x = Tensor::<f32>::full([1, 2, 3, 3], -2.0);
        let y = conv2d(&x, &spec, &w, Some(&Tensor::zeros([1, 2, 1, 1]))).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_rejects_channel_mismatch_and_nan() {
        let spec = plain(2, 1, 3, 1);
        let w = Tensor::zeros(spec.weight_dims());
        assert!(matches!(
            conv2d(&ones([1, 3, 4, 4]), &spec, &w, None),
            Err(Error::Shape(_))
        ));
        let mut x = ones([1, 2, 4, 4]);
        x.set([0, 1, 2, 2], f32::NAN);
        assert!(matches!(conv2d(&x, &spec, &w, None), Err(Error::Numeric(_))));
    }

    #[test]
    fn strided_conv_matches_direct_sum() {
        let x = Tensor::<f64>::from_fn([1, 2, 9, 8], |[_, c, h, w]| ((c * 31 + h * 7 + w * 3) % 11) as f64 - 5.0);
        let wt = Tensor::<f64>::from_fn([3, 2, 3, 3], |[o, i, a, b]| ((o * 5 + i * 3 + a * 2 + b) % 7) as f64 - 3.0);
        for (stride, pad) in [(1, 0), (1, 1), (2, 0), (2, 1), (3, 2)] {
            let y = conv2d_forward(&x, &wt, None, stride, pad).unwrap();
            let [_, _, oh, ow] = y.dims();
            for o in 0..3 {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for i in 0..2 {
                            for a in 0..3 {
                                for b in 0..3 {
                                    let iy = (oy * stride + a) as isize - pad as isize;
                                    let ix = (ox * stride + b) as isize - pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < 9 && (ix as usize) < 8 {
                                        acc += wt.at([o, i, a, b]) * x.at([0, i, iy as usize, ix as usize]);
                                    }
                                }
                            }
                        }
                        assert_eq!(y.at([0, o, oy, ox]), acc, "stride {stride} pad {pad}");
                    }
                }
            }
        }
    }

    #[test]
    fn split_shapes_and_values() {
        let x = Tensor::<f32>::zeros([1, 48, 8, 8]);
        let (a, b) = channel_split(&x, 24).unwrap();
        assert_eq!(a.dims(), [1, 24, 8, 8]);
        assert_eq!(b.dims(), [1, 24, 8, 8]);
        let x = Tensor::new([1, 2, 1, 1], vec![3.0f32, 4.0]).unwrap();
        let (a, b) = channel_split(&x, 1).unwrap();
        assert_eq!((a.data(), b.data()), (&[3.0][..], &[4.0][..]));
        assert!(channel_split(&x, 0).is_err());
        assert!(channel_split(&x, 2).is_err());
    }

    #[test]
    fn concat_shapes_and_order() {
        let parts: Vec<Tensor<f32>> = [24, 12, 6, 6].iter().map(|&c| Tensor::zeros([1, c, 8, 8])).collect();
        let refs: Vec<_> = parts.iter().collect();
        assert_eq!(channel_concat(&refs).unwrap().dims(), [1, 48, 8, 8]);

        let a = Tensor::<f32>::full([1, 1, 2, 2], 1.5);
        assert_eq!(channel_concat(&[&a]).unwrap(), a);
        let b = Tensor::<f32>::full([1, 1, 2, 2], -2.0);
        let ab = channel_concat(&[&a, &b]).unwrap();
        assert!(ab.plane(0, 0).iter().all(|&v| v == 1.5));
        assert!(ab.plane(0, 1).iter().all(|&v| v == -2.0));

        assert!(matches!(channel_concat::<f32>(&[]), Err(Error::Argument(_))));
        let c = Tensor::<f32>::zeros([1, 1, 3, 2]);
        assert!(matches!(channel_concat(&[&a, &c]), Err(Error::Shape(_))));
    }

    #[test]
    fn pixel_shuffle_cases() {
        let x = Tensor::<f32>::zeros([1, 12, 2, 3]);
        assert_eq!(pixel_shuffle(&x, 2).unwrap().dims(), [1, 3, 4, 6]);
        let x = Tensor::new([1, 4, 1, 1], vec![0.0f32, 1.0, 2.0, 3.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.dims(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[0.0, 1.0, 2.0, 3.0]);
        let x = Tensor::<f32>::from_fn([2, 3, 4, 5], |[a, b, c, d]| (a * 60 + b * 20 + c * 5 + d) as f32);
        assert_eq!(pixel_shuffle(&x, 1).unwrap(), x);
        assert!(pixel_shuffle(&Tensor::<f32>::zeros([1, 6, 2, 2]), 2).is_err());
    }

    #[test]
    fn max_pool_cases() {
        let x = Tensor::<f32>::full([1, 2, 9, 9], 7.0);
        assert!(max_pool(&x, 3, 2).unwrap().data().iter().all(|&v| v == 7.0));
        let x = Tensor::new([1, 1, 2, 2], vec![1.0f32, 5.0, 3.0, 2.0]).unwrap();
        assert_eq!(max_pool(&x, 2, 1).unwrap().data(), &[5.0]);
        let x = Tensor::<f32>::zeros([1, 1, 16, 16]);
        assert_eq!(max_pool(&x, 7, 3).unwrap().dims(), [1, 1, 4, 4]);
        assert!(max_pool(&Tensor::<f32>::zeros([1, 1, 6, 16]), 7, 3).is_err());
    }

    #[test]
    fn bilinear_cases() {
        let x = Tensor::<f32>::from_fn([1, 2, 3, 5], |[_, c, h, w]| (c * 15 + h * 5 + w) as f32 * 0.37);
        assert_eq!(bilinear_resize(&x, 3, 5).unwrap(), x);
        let k = Tensor::<f32>::full([1, 2, 3, 5], 0.625);
        for (h, w) in [(1, 1), (7, 2), (9, 13)] {
            let y = bilinear_resize(&k, h, w).unwrap();
            assert!(y.data().iter().all(|&v| v == 0.625));
        }
        let x = Tensor::new([1, 1, 1, 2], vec![0.0f32, 2.0]).unwrap();
        assert_eq!(bilinear_resize(&x, 1, 4).unwrap().data(), &[0.0, 0.5, 1.5, 2.0]);
    }

    fn tensor_strategy(max_c: usize) -> impl Strategy<Value = Tensor<f32>> {
        (1..3usize, 2..=max_c, 1..6usize, 1..6usize).prop_flat_map(|(n, c, h, w)| {
            proptest::collection::vec(-10.0f32..10.0, n * c * h * w)
                .prop_map(move |d| Tensor::new([n, c, h, w], d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn split_concat_round_trip(x in tensor_strategy(9), k in 1usize..9) {
            prop_assume!(k < x.channels());
            let (a, b) = channel_split(&x, k).unwrap();
            prop_assert_eq!(channel_concat(&[&a, &b]).unwrap(), x);
        }

        #[test]
        fn shuffle_is_a_bijection(x in tensor_strategy(3), s in 1usize..4) {
            let [n, c, h, w] = x.dims();
            let y = Tensor::from_fn([n, c * s * s, h, w], |[a, b, cc, d]| x.at([a, b % c, cc, d]) + b as f32);
            let z = pixel_shuffle(&y, s).unwrap();
            prop_assert_eq!(pixel_unshuffle(&z, s).unwrap(), y.clone());
            let mut before: Vec<_> = y.data().iter().map(|v| v.to_bits()).collect();
            let mut after: Vec<_> = z.data().iter().map(|v| v.to_bits()).collect();
            before.sort_unstable();
            after.sort_unstable();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn conv_is_linear_without_bias(
            a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000, stride in 1usize..3,
        ) {
            let mut r = crate::nn::Rng::new(seed);
            let mut rand = |dims| Tensor::<f64>::from_fn(dims, |_| r.uniform() * 2.0 - 1.0);
            let x = rand([2, 3, 7, 6]);
            let y = rand([2, 3, 7, 6]);
            let w = rand([4, 3, 3, 3]);
            let lhs = conv2d_forward(&x.zip_map(&y, |p, q| a * p + b * q).unwrap(), &w, None, stride, 1).unwrap();
            let cx = conv2d_forward(&x, &w, None, stride, 1).unwrap();
            let cy = conv2d_forward(&y, &w, None, stride, 1).unwrap();
            let rhs = cx.zip_map(&cy, |p, q| a * p + b * q).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }
}
