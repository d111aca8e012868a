//! Scores a bicubic-upscaling baseline against synthetic HR-HDR frames
//! with luma PSNR/SSIM on 10-bit codes.
//!
//! ```text
//! cargo run --release --example evaluate_metrics
//! ```

use anyhow::Result;
use fdan::data::{bicubic_resize, synthetic_pairs, ColorSpace, ImageBuffer};
use fdan::metrics::MetricReport;

fn main() -> Result<()> {
    let scale = 4;
    let pairs = synthetic_pairs(5, 128, scale, 3)?;
    let mut report = MetricReport::new(1023.0);
    for p in &pairs {
        let up = bicubic_resize(&p.lr, scale as f64)?;
        let up = ImageBuffer {
            bit_depth: 10,
            color_space: ColorSpace::Hdr2100,
            ..up
        };
        report.add(p.source_id.clone(), &up, &p.hr)?;
    }
    print!("{}", report.to_csv());
    println!("{}", report.summary());
    Ok(())
}
