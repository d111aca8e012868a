use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    #[serde(rename = "sdr_709")]
    Sdr709,
    #[serde(rename = "hdr_2100")]
    Hdr2100,
}

impl ColorSpace {
    /// `(Kr, Kb)` luma coefficients.
    pub fn luma_coefficients(self) -> (f64, f64) {
        match self {
            ColorSpace::Sdr709 => (0.2126, 0.0722),
            ColorSpace::Hdr2100 => (0.2627, 0.0593),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlaneFormat {
    Rgb,
    Yuv,
}

/// Three full-resolution planes, stored normalized to `[0, 1]` by the
/// maximum code value `2^bit_depth − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub color_space: ColorSpace,
    pub format: PlaneFormat,
    pub planes: [Vec<f32>; 3],
}

/// A single plane, e.g. luma.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} plane needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

fn check_depth(bit_depth: u8) -> Result<()> {
    if bit_depth != 8 && bit_depth != 10 {
        return Err(Error::Format(format!("unsupported bit depth {bit_depth}")));
    }
    Ok(())
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        bit_depth: u8,
        color_space: ColorSpace,
        format: PlaneFormat,
        planes: [Vec<f32>; 3],
    ) -> Result<Self> {
        check_depth(bit_depth)?;
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!("empty image {width}x{height}")));
        }
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::Shape(format!("planes do not match {width}x{height}")));
        }
        Ok(Self {
            width,
            height,
            bit_depth,
            color_space,
            format,
            planes,
        })
    }

    pub fn max_code(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    /// Builds an image from integer code values, rejecting codes above
    /// `2^bit_depth − 1`.
    pub fn from_codes(
        width: usize,
        height: usize,
        bit_depth: u8,
        color_space: ColorSpace,
        format: PlaneFormat,
        codes: [Vec<u16>; 3],
    ) -> Result<Self> {
        check_depth(bit_depth)?;
        let max = ((1u32 << bit_depth) - 1) as u16;
        for (p, plane) in codes.iter().enumerate() {
            if let Some(i) = plane.iter().position(|&c| c > max) {
                return Err(Error::Range(format!(
                    "code {} in plane {p} at sample {i} exceeds the {bit_depth}-bit maximum {max}",
                    plane[i]
                )));
            }
        }
        let scale = 1.0 / max as f32;
        let planes = codes.map(|p| p.into_iter().map(|c| c as f32 * scale).collect());
        Self::new(width, height, bit_depth, color_space, format, planes)
    }

    /// Quantized code values (clamped to the valid range).
    pub fn to_codes(&self) -> [Vec<u16>; 3] {
        let max = self.max_code() as f32;
        self.planes.clone().map(|p| {
            p.into_iter()
                .map(|v| (v.clamp(0.0, 1.0) * max).round() as u16)
                .collect()
        })
    }

    /// Rounds every sample to its nearest code value.
    pub fn quantized(&self) -> Self {
        let codes = self.to_codes();
        Self::from_codes(self.width, self.height, self.bit_depth, self.color_space, self.format, codes)
            .expect("quantized codes are in range")
    }

    pub fn with_planes(&self, width: usize, height: usize, planes: [Vec<f32>; 3]) -> Result<Self> {
        Self::new(width, height, self.bit_depth, self.color_space, self.format, planes)
    }

    /// `(1, 3, H, W)` tensor of the normalized planes.
    pub fn to_tensor(&self) -> Tensor<f32> {
        let data = self.planes.iter().flat_map(|p| p.iter().copied()).collect();
        Tensor::new([1, 3, self.height, self.width], data).expect("plane sizes")
    }

    /// Batch element `n` of a 3-channel tensor as an image.
    pub fn from_tensor(
        t: &Tensor<f32>,
        n: usize,
        bit_depth: u8,
        color_space: ColorSpace,
        format: PlaneFormat,
    ) -> Result<Self> {
        let [batch, c, h, w] = t.dims();
        if c != 3 || n >= batch {
            return Err(Error::Shape(format!("cannot take image {n} from tensor {:?}", t.dims())));
        }
        let planes = [0, 1, 2].map(|ci| t.plane(n, ci).to_vec());
        Self::new(w, h, bit_depth, color_space, format, planes)
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::Argument(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{} image",
                self.width, self.height
            )));
        }
        let planes = self.planes.clone().map(|p| {
            (y..y + h)
                .flat_map(|r| p[r * self.width + x..r * self.width + x + w].to_vec())
                .collect()
        });
        self.with_planes(w, h, planes)
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        let planes = self.planes.clone().map(|p| {
            p.chunks(w)
                .flat_map(|row| row.iter().rev().copied().collect::<Vec<_>>())
                .collect()
        });
        self.with_planes(self.width, self.height, planes).expect("same dims")
    }

    /// Rotation by `quarter_turns · 90°` counter-clockwise.
    pub fn rotate90(&self, quarter_turns: usize) -> Self {
        let mut img = self.clone();
        for _ in 0..quarter_turns % 4 {
            let (w, h) = (img.width, img.height);
            // out[y', x'] with out dims (h' = w, w' = h): out[w-1-x][y] = in[y][x]
            let planes = img.planes.clone().map(|p| {
                let mut out = vec![0.0; w * h];
                for y in 0..h {
                    for x in 0..w {
                        out[(w - 1 - x) * h + y] = p[y * w + x];
                    }
                }
                out
            });
            img = img.with_planes(h, w, planes).expect("rotated dims");
        }
        img
    }

    /// Luma plane: the first plane of YUV data, or the colour-space
    /// weighted sum `Kr·R + (1 − Kr − Kb)·G + Kb·B` of RGB data.
    pub fn to_luma(&self) -> Plane {
        let data = match self.format {
            PlaneFormat::Yuv => self.planes[0].clone(),
            PlaneFormat::Rgb => {
                let (kr, kb) = self.color_space.luma_coefficients();
                let kg = 1.0 - kr - kb;
                let [r, g, b] = &self.planes;
                r.iter()
                    .zip(g)
                    .zip(b)
                    .map(|((&r, &g), &b)| (kr * r as f64 + kg * g as f64 + kb * b as f64) as f32)
                    .collect()
            }
        };
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Metadata file accompanying a raw planar YUV payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub color_space: ColorSpace,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

enum Container {
    Png,
    RawYuv,
}

fn container_of(path: &Path) -> Result<Container> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => Ok(Container::Png),
        Some("yuv") => Ok(Container::RawYuv),
        _ => Err(Error::Format(format!(
            "unsupported container for {} (expected .png or .yuv)",
            path.display()
        ))),
    }
}

/// Loads an 8-bit RGB PNG (SDR), a 16-bit RGB PNG holding 10-bit codes
/// (HDR) or a raw planar 4:4:4 `.yuv` file with its `.yuv.json` sidecar.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    match container_of(path)? {
        Container::Png => load_png(path),
        Container::RawYuv => load_yuv(path),
    }
}

pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match container_of(path)? {
        Container::Png => save_png(img, path),
        Container::RawYuv => save_yuv(img, path),
    }
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

fn load_png(path: &Path) -> Result<ImageBuffer> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = png::Decoder::new(BufReader::new(file));
    let mut reader = reader.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.color_type != png::ColorType::Rgb {
        return Err(png_err(path, format!("expected RGB, found {:?}", info.color_type)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let bytes = &buf[..info.buffer_size()];
    let mut codes: [Vec<u16>; 3] = Default::default();
    match info.bit_depth {
        png::BitDepth::Eight => {
            for px in bytes.chunks_exact(3) {
                for (c, &v) in px.iter().enumerate() {
                    codes[c].push(v as u16);
                }
            }
            ImageBuffer::from_codes(w, h, 8, ColorSpace::Sdr709, PlaneFormat::Rgb, codes)
        }
        png::BitDepth::Sixteen => {
            for px in bytes.chunks_exact(6) {
                for c in 0..3 {
                    codes[c].push(u16::from_be_bytes([px[2 * c], px[2 * c + 1]]));
                }
            }
            ImageBuffer::from_codes(w, h, 10, ColorSpace::Hdr2100, PlaneFormat::Rgb, codes)
        }
        other => Err(png_err(path, format!("unsupported bit depth {other:?}"))),
    }
}

fn save_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    if img.format != PlaneFormat::Rgb {
        return Err(Error::Format(format!(
            "{}: PNG holds RGB planes only",
            path.display()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    let codes = img.to_codes();
    let n = img.width * img.height;
    let data: Vec<u8> = if img.bit_depth == 8 {
        enc.set_depth(png::BitDepth::Eight);
        (0..n).flat_map(|i| (0..3).map(move |c| (i, c))).map(|(i, c)| codes[c][i] as u8).collect()
    } else {
        enc.set_depth(png::BitDepth::Sixteen);
        (0..n)
            .flat_map(|i| (0..3).map(move |c| (i, c)))
            .flat_map(|(i, c)| codes[c][i].to_be_bytes())
            .collect()
    };
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(&data).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

fn load_yuv(path: &Path) -> Result<ImageBuffer> {
    let side_path = sidecar_path(path);
    let side_text = fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: Sidecar = serde_json::from_str(&side_text)
        .map_err(|e| Error::Format(format!("{}: {e}", side_path.display())))?;
    check_depth(side.bit_depth)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let per_sample = if side.bit_depth == 8 { 1 } else { 2 };
    let n = side.width * side.height;
    if bytes.len() != 3 * n * per_sample {
        return Err(Error::Format(format!(
            "{}: payload has {} bytes, sidecar {}x{} at {} bits needs {}",
            path.display(),
            bytes.len(),
            side.width,
            side.height,
            side.bit_depth,
            3 * n * per_sample
        )));
    }
    let codes: Vec<u16> = if per_sample == 1 {
        bytes.iter().map(|&b| b as u16).collect()
    } else {
        bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect()
    };
    let planes = [0, 1, 2].map(|p| codes[p * n..(p + 1) * n].to_vec());
    ImageBuffer::from_codes(
        side.width,
        side.height,
        side.bit_depth,
        side.color_space,
        PlaneFormat::Yuv,
        planes,
    )
}

fn save_yuv(img: &ImageBuffer, path: &Path) -> Result<()> {
    if img.format != PlaneFormat::Yuv {
        return Err(Error::Format(format!(
            "{}: raw .yuv holds YUV planes only",
            path.display()
        )));
    }
    let codes = img.to_codes();
    let bytes: Vec<u8> = if img.bit_depth == 8 {
        codes.iter().flatten().map(|&c| c as u8).collect()
    } else {
        codes.iter().flatten().flat_map(|c| c.to_le_bytes()).collect()
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = Sidecar {
        width: img.width,
        height: img.height,
        bit_depth: img.bit_depth,
        color_space: img.color_space,
    };
    let side_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&side).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))
}
