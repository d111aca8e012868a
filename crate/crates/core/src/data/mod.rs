//! Image containers, colour handling, bicubic degradation and aligned
//! patch sampling.

mod image;
mod manifest;
mod patch;
mod resize;
mod synth;

pub use image::{load_image, save_image, ColorSpace, ImageBuffer, Plane, PlaneFormat, Sidecar};
pub use manifest::{load_manifest, save_manifest, Manifest, ManifestEntry, SamplePair};
pub use patch::{augment, crop_aligned_pair, Augmentation};
pub use resize::{bicubic_resize, bicubic_resize_plane, cubic_kernel, downscale};
pub use synth::{synthetic_hdr, synthetic_pairs, synthetic_sdr};
