use crate::error::{Error, Result};
use crate::nn::Rng;

use super::image::ImageBuffer;

/// Draws an HR patch whose top-left corner lies on the `s` grid and the
/// LR window that covers the same area.
///
/// Returns `(lr_patch, hr_patch)`.
pub fn crop_aligned_pair(
    hr: &ImageBuffer,
    lr: &ImageBuffer,
    s: usize,
    patch: usize,
    rng: &mut Rng,
) -> Result<(ImageBuffer, ImageBuffer)> {
    if s == 0 || patch == 0 || patch % s != 0 {
        return Err(Error::Argument(format!(
            "patch {patch} must be a positive multiple of the scale {s}"
        )));
    }
    if hr.width < patch || hr.height < patch {
        return Err(Error::Argument(format!(
            "{}x{} image is smaller than the {patch}x{patch} patch",
            hr.width, hr.height
        )));
    }
    if lr.width * s != hr.width || lr.height * s != hr.height {
        return Err(Error::Shape(format!(
            "LR {}x{} is not HR {}x{} divided by {s}",
            lr.width, lr.height, hr.width, hr.height
        )));
    }
    let x = s * rng.below((hr.width - patch) / s + 1);
    let y = s * rng.below((hr.height - patch) / s + 1);
    let hr_patch = hr.crop(x, y, patch, patch)?;
    let lr_patch = lr.crop(x / s, y / s, patch / s, patch / s)?;
    Ok((lr_patch, hr_patch))
}

/// A horizontal flip followed by a counter-clockwise rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Augmentation {
    pub flip: bool,
    pub quarter_turns: usize,
}

impl Augmentation {
    pub fn draw(rng: &mut Rng) -> Self {
        let flip = rng.coin();
        let quarter_turns = rng.below(4);
        Self { flip, quarter_turns }
    }

    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        if self.quarter_turns % 2 == 1 && img.width != img.height {
            return Err(Error::Argument(format!(
                "cannot rotate a non-square {}x{} patch by {}°",
                img.width,
                img.height,
                self.quarter_turns * 90
            )));
        }
        let img = if self.flip { img.flip_horizontal() } else { img.clone() };
        Ok(img.rotate90(self.quarter_turns))
    }
}

/// Applies one random flip/rotation to both patches of a pair.
pub fn augment(
    lr: &ImageBuffer,
    hr: &ImageBuffer,
    rng: &mut Rng,
) -> Result<(ImageBuffer, ImageBuffer, Augmentation)> {
    let aug = Augmentation::draw(rng);
    Ok((aug.apply(lr)?, aug.apply(hr)?, aug))
}
