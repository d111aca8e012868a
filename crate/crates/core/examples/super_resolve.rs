//! Runs a network on an LR-SDR image and writes the HR-HDR result.
//! Without arguments a synthetic input and a freshly initialized x4
//! network are used, and the checkpoint round trip is shown.
//!
//! ```text
//! cargo run --release --example super_resolve -- [checkpoint input.png output.png]
//! ```

use anyhow::{bail, Result};
use fdan::cli::super_resolve;
use fdan::data::{load_image, save_image, synthetic_hdr, synthetic_sdr};
use fdan::model::{load_checkpoint, save_checkpoint};
use fdan::{build_fdan, FdanConfig, Rng};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (params, config, lr, out) = match args.as_slice() {
        [ckpt, input, output] => {
            let (params, config) = load_checkpoint(ckpt)?;
            (params, config, load_image(input)?, output.clone())
        }
        [] => {
            let config = FdanConfig::default();
            let (_, params) = build_fdan(&config)?;
            let dir = tempfile::tempdir()?;
            let ckpt = dir.path().join("fdan_x4.ckpt");
            save_checkpoint(&params, &config, &ckpt)?;
            let (loaded, _) = load_checkpoint(&ckpt)?;
            println!(
                "checkpoint {} bytes, reload bitwise equal: {}",
                std::fs::metadata(&ckpt)?.len(),
                loaded.bitwise_eq(&params)
            );
            let hr = synthetic_hdr(128, &mut Rng::new(1));
            (loaded, config, synthetic_sdr(&hr, 4)?, "super_resolved.png".into())
        }
        _ => bail!("usage: super_resolve [checkpoint input output]"),
    };
    let (model, _) = build_fdan(&config)?;
    let hr = super_resolve(&model, &params, &lr)?;
    save_image(&hr, &out)?;
    println!("{}x{} -> {}x{} at x{}: {out}", lr.width, lr.height, hr.width, hr.height, config.scale);
    Ok(())
}
