use std::f64::consts::PI;

use crate::error::Result;
use crate::nn::Rng;

use super::image::{ColorSpace, ImageBuffer, PlaneFormat};
use super::manifest::SamplePair;
use super::resize::downscale;

/// Smooth random 10-bit HDR content: a few sinusoids per channel.
pub fn synthetic_hdr(size: usize, rng: &mut Rng) -> ImageBuffer {
    let waves: Vec<[f64; 4]> = (0..9)
        .map(|_| {
            [
                0.5 + 3.0 * rng.uniform(),
                0.5 + 3.0 * rng.uniform(),
                2.0 * PI * rng.uniform(),
                0.1 + 0.2 * rng.uniform(),
            ]
        })
        .collect();
    let planes = [0, 1, 2].map(|c| {
        (0..size * size)
            .map(|i| {
                let (x, y) = ((i % size) as f64 / size as f64, (i / size) as f64 / size as f64);
                let v: f64 = waves[3 * c..3 * c + 3]
                    .iter()
                    .map(|w| w[3] * (2.0 * PI * (w[0] * x + w[1] * y) + w[2]).sin())
                    .sum();
                (0.5 + v).clamp(0.0, 1.0) as f32
            })
            .collect()
    });
    ImageBuffer::new(size, size, 10, ColorSpace::Hdr2100, PlaneFormat::Rgb, planes)
        .expect("valid dims")
        .quantized()
}

/// Stand-in SDR grade: bicubic downscale by `scale`, then a compressive
/// tone curve and 8-bit quantization.
pub fn synthetic_sdr(hr: &ImageBuffer, scale: usize) -> Result<ImageBuffer> {
    let lr = downscale(hr, scale)?;
    let planes = lr
        .planes
        .clone()
        .map(|p| p.into_iter().map(|v| v.clamp(0.0, 1.0).powf(0.6)).collect());
    Ok(ImageBuffer::new(lr.width, lr.height, 8, ColorSpace::Sdr709, PlaneFormat::Rgb, planes)?.quantized())
}

/// `count` aligned pairs of `size × size` HR images, reproducible from `seed`.
pub fn synthetic_pairs(count: usize, size: usize, scale: usize, seed: u64) -> Result<Vec<SamplePair>> {
    (0..count)
        .map(|i| {
            let mut rng = Rng::stream(seed, i as u64);
            let hr = synthetic_hdr(size, &mut rng);
            let lr = synthetic_sdr(&hr, scale)?;
            SamplePair::new(lr, hr, scale, format!("synthetic{i:03}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_aligned_and_reproducible() {
        let a = synthetic_pairs(2, 32, 2, 4).unwrap();
        let b = synthetic_pairs(2, 32, 2, 4).unwrap();
        assert_eq!((a[0].lr.width, a[0].hr.width), (16, 32));
        assert_eq!(a[0].lr.bit_depth, 8);
        assert_eq!(a[1].hr.color_space, ColorSpace::Hdr2100);
        assert_eq!(a[1].lr, b[1].lr);
        assert_ne!(a[0].hr, a[1].hr);
    }
}
