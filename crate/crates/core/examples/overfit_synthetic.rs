//! Overfits a reduced network on four synthetic pairs and reports the
//! smoothed loss curve.
//!
//! ```text
//! cargo run --release --example overfit_synthetic -- [iterations]
//! ```

use anyhow::Result;
use fdan::data::synthetic_pairs;
use fdan::train::{Trainer, TrainConfig};
use fdan::FdanConfig;

fn main() -> Result<()> {
    let iterations: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(500);
    let dir = tempfile::tempdir()?;
    let config = TrainConfig {
        model: FdanConfig {
            channels: 16,
            blocks: 3,
            groups: 2,
            scale: 2,
            ..FdanConfig::default()
        },
        batch_size: Some(4),
        iterations: Some(iterations),
        period_iters: Some(iterations),
        restart: false,
        patch_size: 64,
        lr_max: 2e-3,
        lr_min: 1e-6,
        checkpoint: dir.path().join("overfit.ckpt"),
        log: dir.path().join("overfit.csv"),
        ..TrainConfig::default()
    };
    let pairs = synthetic_pairs(4, 64, 2, 0)?;
    let start = std::time::Instant::now();
    let out = Trainer::new(config, pairs)?.run(None)?;
    let windows: Vec<f64> = out
        .losses
        .chunks(50)
        .map(|w| w.iter().map(|&v| v as f64).sum::<f64>() / w.len() as f64)
        .collect();
    for (i, w) in windows.iter().enumerate() {
        println!("iters {:>4}..{:>4}  mean loss {w:.6}", i * 50, (i + 1) * 50);
    }
    let first = out.losses[0] as f64;
    let last = *windows.last().unwrap();
    println!(
        "initial {first:.6}, final window {last:.6} ({:.1}% of initial) in {:.1?}",
        100.0 * last / first,
        start.elapsed()
    );
    Ok(())
}
