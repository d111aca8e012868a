use rayon::prelude::*;

use crate::error::{Error, Result};

use super::image::ImageBuffer;

const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = −0.5`.
pub fn cubic_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Per-output-sample taps along one axis: first source index (before
/// clamping) and the normalized weights.
struct Taps {
    start: Vec<isize>,
    weights: Vec<Vec<f64>>,
}

fn axis_taps(in_len: usize, out_len: usize) -> Taps {
    let inv = in_len as f64 / out_len as f64;
    // Downsampling stretches the kernel by the inverse scale.
    let stretch = inv.max(1.0);
    let radius = 2.0 * stretch;
    let mut start = Vec::with_capacity(out_len);
    let mut weights = Vec::with_capacity(out_len);
    for o in 0..out_len {
        let center = (o as f64 + 0.5) * inv - 0.5;
        let lo = (center - radius).floor() as isize;
        let hi = (center + radius).ceil() as isize;
        let mut w: Vec<f64> = (lo..=hi)
            .map(|i| cubic_kernel((i as f64 - center) / stretch))
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        start.push(lo);
        weights.push(w);
    }
    Taps { start, weights }
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Separable bicubic resampling of one `w × h` plane to `out_w × out_h`.
pub fn bicubic_resize_plane(
    data: &[f32],
    w: usize,
    h: usize,
    out_w: usize,
    out_h: usize,
) -> Result<Vec<f32>> {
    if out_w == 0 || out_h == 0 || w == 0 || h == 0 {
        return Err(Error::Argument(format!(
            "cannot resize {w}x{h} to {out_w}x{out_h}"
        )));
    }
    if data.len() != w * h {
        return Err(Error::Shape(format!(
            "plane has {} samples, expected {w}x{h}",
            data.len()
        )));
    }
    if (w, h) == (out_w, out_h) {
        return Ok(data.to_vec());
    }
    let tx = axis_taps(w, out_w);
    let ty = axis_taps(h, out_h);

    // Horizontal pass into f64 rows, then vertical pass.
    let mut rows = vec![0f64; h * out_w];
    rows.par_chunks_mut(out_w).enumerate().for_each(|(y, row)| {
        let src = &data[y * w..(y + 1) * w];
        for (ox, out) in row.iter_mut().enumerate() {
            let s = tx.start[ox];
            *out = tx.weights[ox]
                .iter()
                .enumerate()
                .map(|(k, &wt)| wt * src[clamp_index(s + k as isize, w)] as f64)
                .sum();
        }
    });
    let mut out = vec![0f32; out_w * out_h];
    out.par_chunks_mut(out_w).enumerate().for_each(|(oy, row)| {
        let s = ty.start[oy];
        for (ox, v) in row.iter_mut().enumerate() {
            let acc: f64 = ty.weights[oy]
                .iter()
                .enumerate()
                .map(|(k, &wt)| wt * rows[clamp_index(s + k as isize, h) * out_w + ox])
                .sum();
            *v = acc as f32;
        }
    });
    Ok(out)
}

/// Resizes every plane by `scale`; output dims are `round(dim · scale)`.
pub fn bicubic_resize(img: &ImageBuffer, scale: f64) -> Result<ImageBuffer> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Argument(format!("resize scale must be positive, got {scale}")));
    }
    let out_w = (img.width as f64 * scale).round() as usize;
    let out_h = (img.height as f64 * scale).round() as usize;
    resize_to(img, out_w, out_h)
}

pub(crate) fn resize_to(img: &ImageBuffer, out_w: usize, out_h: usize) -> Result<ImageBuffer> {
    let mut planes: [Vec<f32>; 3] = Default::default();
    for (dst, src) in planes.iter_mut().zip(&img.planes) {
        *dst = bicubic_resize_plane(src, img.width, img.height, out_w, out_h)?;
    }
    img.with_planes(out_w, out_h, planes)
}

/// Bicubic degradation by the integer factor `s`.
pub fn downscale(img: &ImageBuffer, s: usize) -> Result<ImageBuffer> {
    if s == 0 {
        return Err(Error::Argument("downscale factor must be positive".into()));
    }
    bicubic_resize(img, 1.0 / s as f64)
}
