//! Synthesizes a 10-bit HR frame, degrades it at every scale and samples an
//! aligned, augmented training patch pair. Images go to the given
//! directory (default `degrade_out/`).
//!
//! ```text
//! cargo run --release --example degrade_and_crop -- [out_dir]
//! ```

use std::path::PathBuf;

use anyhow::Result;
use fdan::data::{augment, crop_aligned_pair, downscale, save_image, synthetic_hdr, synthetic_sdr};
use fdan::Rng;

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "degrade_out".into()));
    std::fs::create_dir_all(&out)?;
    let mut rng = Rng::new(7);
    let hr = synthetic_hdr(512, &mut rng);
    save_image(&hr, out.join("hr.png"))?;

    for s in [2, 4, 8, 16] {
        let lr = downscale(&hr, s)?;
        println!("x{s}: {}x{} -> {}x{}", hr.width, hr.height, lr.width, lr.height);
    }

    let s = 4;
    let lr = synthetic_sdr(&hr, s)?;
    save_image(&lr, out.join("lr_x4.png"))?;
    let (lp, hp) = crop_aligned_pair(&hr, &lr, s, 256, &mut rng)?;
    let (lp, hp, aug) = augment(&lp, &hp, &mut rng)?;
    println!(
        "patch pair: LR {}x{}, HR {}x{}, flip {}, rotation {}°",
        lp.width,
        lp.height,
        hp.width,
        hp.height,
        aug.flip,
        aug.quarter_turns * 90
    );
    save_image(&lp, out.join("patch_lr.png"))?;
    save_image(&hp, out.join("patch_hr.png"))?;
    println!("wrote images to {}", out.display());
    Ok(())
}
