//! PSNR and SSIM on luma planes.

use std::fmt::Write as _;

use crate::data::{ImageBuffer, Plane};
use crate::error::{Error, Result};

/// Value written to reports in place of an infinite PSNR.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_same(a: &Plane, b: &Plane) -> Result<()> {
    if (a.width, a.height) != (b.width, b.height) || a.data.len() != b.data.len() {
        return Err(Error::Shape(format!(
            "metric inputs differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

pub fn mse(a: &Plane, b: &Plane) -> Result<f64> {
    check_same(a, b)?;
    if a.data.is_empty() {
        return Err(Error::Argument("empty plane".into()));
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data.len() as f64)
}

/// `10·log10(peak² / MSE)`; identical planes give `+∞`.
pub fn psnr_y(a: &Plane, b: &Plane, peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Valid-mode separable filtering of a `w × h` field.
fn filter_valid(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| taps[i] * data[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| taps[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM: 11×11 Gaussian window (σ = 1.5), `K1 = 0.01`,
/// `K2 = 0.03`, averaged over every window fully inside the image.
pub fn ssim_y(a: &Plane, b: &Plane, peak: f64) -> Result<f64> {
    check_same(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Argument(format!(
            "{w}x{h} plane is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let av: Vec<f64> = a.data.iter().map(|&v| v as f64).collect();
    let bv: Vec<f64> = b.data.iter().map(|&v| v as f64).collect();
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(&av, w, h, &taps);
    let mu_b = filter_valid(&bv, w, h, &taps);
    let aa = filter_valid(&prod(&av, &av), w, h, &taps);
    let bb = filter_valid(&prod(&bv, &bv), w, h, &taps);
    let ab = filter_valid(&prod(&av, &bv), w, h, &taps);
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Luma of `img` on its integer code scale, from quantized samples.
pub fn coded_luma(img: &ImageBuffer) -> Plane {
    let mut luma = img.quantized().to_luma();
    let max = img.max_code() as f64;
    for v in &mut luma.data {
        *v = (*v as f64 * max) as f32;
    }
    luma
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub id: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub channel: &'static str,
    pub peak: f64,
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn new(peak: f64) -> Self {
        Self {
            channel: "Y",
            peak,
            rows: Vec::new(),
        }
    }

    /// Scores a prediction against its reference on the coded luma scale.
    pub fn add(&mut self, id: impl Into<String>, pred: &ImageBuffer, reference: &ImageBuffer) -> Result<()> {
        let (p, r) = (coded_luma(pred), coded_luma(reference));
        self.rows.push(MetricRow {
            id: id.into(),
            psnr_db: psnr_y(&p, &r, self.peak)?,
            ssim: ssim_y(&p, &r, self.peak)?,
        });
        Ok(())
    }

    /// Mean PSNR with infinite values replaced by [`PSNR_CAP_DB`].
    pub fn mean_psnr(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.psnr_db.min(PSNR_CAP_DB)))
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.ssim))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,psnr_db,ssim\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.4},{:.6}", r.id, r.psnr_db.min(PSNR_CAP_DB), r.ssim);
        }
        let _ = writeln!(out, "mean,{:.4},{:.6}", self.mean_psnr(), self.mean_ssim());
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "{} images, channel {}, peak {}: PSNR {:.4} dB, SSIM {:.6}",
            self.rows.len(),
            self.channel,
            self.peak,
            self.mean_psnr(),
            self.mean_ssim()
        )
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColorSpace, PlaneFormat};
    use crate::nn::Rng;

    fn plane(w: usize, h: usize, f: impl FnMut(usize) -> f32) -> Plane {
        Plane::new(w, h, (0..w * h).map(f).collect()).unwrap()
    }

    fn random_plane(w: usize, h: usize, rng: &mut Rng) -> Plane {
        plane(w, h, |_| rng.uniform() as f32)
    }

    /// Direct evaluation over each window with the 2-D weight array.
    fn ssim_oracle(a: &Plane, b: &Plane, peak: f64) -> f64 {
        let k = SSIM_WINDOW;
        let c = (k as f64 - 1.0) / 2.0;
        let mut wts = vec![0.0; k * k];
        for y in 0..k {
            for x in 0..k {
                let r2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
                wts[y * k + x] = (-r2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            }
        }
        let s: f64 = wts.iter().sum();
        wts.iter_mut().for_each(|v| *v /= s);
        let (c1, c2) = ((SSIM_K1 * peak).powi(2), (SSIM_K2 * peak).powi(2));
        let mut total = 0.0;
        let mut count = 0;
        for oy in 0..=a.height - k {
            for ox in 0..=a.width - k {
                let (mut ma, mut mb) = (0.0, 0.0);
                for y in 0..k {
                    for x in 0..k {
                        ma += wts[y * k + x] * a.at(ox + x, oy + y) as f64;
                        mb += wts[y * k + x] * b.at(ox + x, oy + y) as f64;
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for y in 0..k {
                    for x in 0..k {
                        let da = a.at(ox + x, oy + y) as f64 - ma;
                        let db = b.at(ox + x, oy + y) as f64 - mb;
                        va += wts[y * k + x] * da * da;
                        vb += wts[y * k + x] * db * db;
                        cov += wts[y * k + x] * da * db;
                    }
                }
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn psnr_one_code() {
        let a = plane(16, 16, |i| (i % 200) as f32);
        let b = plane(16, 16, |i| (i % 200) as f32 + 1.0);
        let p = psnr_y(&a, &b, 255.0).unwrap();
        assert!((p - 48.1308).abs() < 1e-3, "{p}");
    }

    #[test]
    fn psnr_identical_and_doubling() {
        let mut rng = Rng::new(1);
        let a = random_plane(8, 8, &mut rng);
        assert_eq!(psnr_y(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = plane(8, 8, |i| a.data[i] + 0.01);
        let c = plane(8, 8, |i| a.data[i] + 0.01 * 2f32.sqrt());
        let drop = psnr_y(&a, &b, 1.0).unwrap() - psnr_y(&a, &c, 1.0).unwrap();
        assert!((drop - 10.0 * 2f64.log10()).abs() < 1e-3, "{drop}");
    }

    #[test]
    fn psnr_offset_invariance() {
        let a = plane(8, 8, |i| (i * 3 % 50) as f32);
        let b = plane(8, 8, |i| (i * 7 % 50) as f32);
        let a2 = plane(8, 8, |i| a.data[i] + 100.0);
        let b2 = plane(8, 8, |i| b.data[i] + 100.0);
        assert_eq!(psnr_y(&a, &b, 1023.0).unwrap(), psnr_y(&a2, &b2, 1023.0).unwrap());
    }

    #[test]
    fn ssim_matches_brute_force() {
        let mut rng = Rng::new(7);
        for _ in 0..5 {
            let a = random_plane(32, 32, &mut rng);
            let b = random_plane(32, 32, &mut rng);
            let got = ssim_y(&a, &b, 1.0).unwrap();
            let want = ssim_oracle(&a, &b, 1.0);
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
            assert_eq!(got, ssim_y(&b, &a, 1.0).unwrap());
            assert!((-1.0..=1.0).contains(&got));
        }
    }

    #[test]
    fn ssim_identity_and_constants() {
        let mut rng = Rng::new(3);
        let a = random_plane(20, 14, &mut rng);
        assert_eq!(ssim_y(&a, &a, 1.0).unwrap(), 1.0);
        let c = plane(12, 12, |_| 0.4);
        assert!((ssim_y(&c, &c.clone(), 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_errors() {
        let a = plane(10, 20, |_| 0.0);
        assert!(matches!(ssim_y(&a, &a, 1.0), Err(Error::Argument(_))));
        let b = plane(20, 10, |_| 0.0);
        assert!(matches!(ssim_y(&a, &b, 1.0), Err(Error::Shape(_))));
        assert!(matches!(psnr_y(&a, &b, 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn yuv_chroma_is_ignored() {
        let mut rng = Rng::new(5);
        let y: Vec<f32> = (0..256).map(|_| rng.uniform() as f32).collect();
        let u1: Vec<f32> = (0..256).map(|_| rng.uniform() as f32).collect();
        let u2: Vec<f32> = (0..256).map(|_| rng.uniform() as f32).collect();
        let a = ImageBuffer::new(16, 16, 10, ColorSpace::Hdr2100, PlaneFormat::Yuv, [y.clone(), u1.clone(), u1]).unwrap();
        let b = ImageBuffer::new(16, 16, 10, ColorSpace::Hdr2100, PlaneFormat::Yuv, [y, u2.clone(), u2]).unwrap();
        let mut r = MetricReport::new(1023.0);
        r.add("x", &a, &b).unwrap();
        assert_eq!(r.rows[0].psnr_db, f64::INFINITY);
        assert_eq!(r.rows[0].ssim, 1.0);
        assert!(r.to_csv().contains("x,100.0000,1.000000"));
    }
}
