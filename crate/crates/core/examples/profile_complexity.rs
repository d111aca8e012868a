//! Parameter, FLOP and activation counts at the native LR resolution of
//! every scale, plus the block/group ablation grid at x4.
//!
//! ```text
//! cargo run --release --example profile_complexity
//! ```

use anyhow::Result;
use fdan::profiler::{kilo_truncated, native_lr_resolution, profile};
use fdan::{build_fdan, FdanConfig};

fn main() -> Result<()> {
    println!("{:>5} {:>10} {:>10} {:>9} {:>9} {:>8}", "scale", "input", "params(K)", "FLOPs(G)", "MACs(G)", "acts(G)");
    for s in [2, 4, 8, 16] {
        let (model, _) = build_fdan(&FdanConfig::with_scale(s))?;
        let (h, w) = native_lr_resolution(s);
        let r = profile(&model, h, w)?;
        println!(
            "{:>5} {:>10} {:>10} {:>9.2} {:>9.2} {:>8.2}",
            format!("x{s}"),
            format!("{w}x{h}"),
            kilo_truncated(r.totals.params),
            r.totals.flops as f64 / 1e9,
            r.totals.macs as f64 / 1e9,
            r.totals.activations as f64 / 1e9
        );
    }

    println!("\nablations at x4, 960x540:");
    let variants = [
        ("B=1", FdanConfig { blocks: 1, ..FdanConfig::default() }),
        ("B=2", FdanConfig { blocks: 2, ..FdanConfig::default() }),
        ("B=3 (default)", FdanConfig::default()),
        ("B=4", FdanConfig { blocks: 4, ..FdanConfig::default() }),
        ("G=2", FdanConfig { groups: 2, ..FdanConfig::default() }),
        ("G=4", FdanConfig { groups: 4, ..FdanConfig::default() }),
        ("G=8", FdanConfig { groups: 8, ..FdanConfig::default() }),
        ("no aggregation", FdanConfig { aggregate: false, ..FdanConfig::default() }),
    ];
    for (name, cfg) in variants {
        let (model, _) = build_fdan(&cfg)?;
        let r = profile(&model, 540, 960)?;
        println!(
            "  {name:<15} params {:>8}K  FLOPs {:>7.2}G",
            kilo_truncated(r.totals.params),
            r.totals.flops as f64 / 1e9
        );
    }
    Ok(())
}
