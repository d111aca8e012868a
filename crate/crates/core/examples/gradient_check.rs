//! Compares reverse-mode parameter gradients of the full network + l1 loss
//! against central differences, in double precision.
//!
//! ```text
//! cargo run --release --example gradient_check -- [coordinates]
//! ```

use anyhow::Result;
use fdan::model::check_param_gradients;
use fdan::{build_fdan, FdanConfig, Rng, Tensor};

fn main() -> Result<()> {
    let count: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(30);
    let config = FdanConfig {
        channels: 16,
        blocks: 3,
        groups: 2,
        scale: 2,
        ..FdanConfig::default()
    };
    let (model, params) = build_fdan(&config)?;
    let params = params.cast::<f64>();
    let mut rng = Rng::new(42);
    let input = Tensor::from_fn([1, 3, 16, 16], |_| rng.uniform());
    let target = Tensor::from_fn([1, 3, 32, 32], |_| rng.uniform());

    let check = check_param_gradients(&model, &params, &input, &target, count, 1e-6, &mut rng)?;
    println!("{:<28} {:>7} {:>14} {:>14} {:>10}", "parameter", "offset", "analytic", "numeric", "rel.err");
    for c in &check.coords {
        println!(
            "{:<28} {:>7} {:>14.6e} {:>14.6e} {:>10.2e}",
            c.param, c.offset, c.analytic, c.numeric, c.relative_error
        );
    }
    println!(
        "{} coordinates ({} redrawn near kinks), max relative error {:.3e}",
        check.coords.len(),
        check.resampled,
        check.max_relative_error
    );
    Ok(())
}
