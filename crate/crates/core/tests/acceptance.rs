//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs single-threaded so every number is reproducible.

use std::time::Instant;

use fdan::data::{
    downscale, load_image, save_image, synthetic_pairs, ColorSpace, ImageBuffer, Plane, PlaneFormat,
};
use fdan::metrics::{psnr_y, ssim_y};
use fdan::model::{check_param_gradients, load_checkpoint, save_checkpoint, Hfdg};
use fdan::profiler::{
    count_activations, count_flops, count_params, kilo_truncated, native_lr_resolution, profile,
    reconstruction_flops,
};
use fdan::train::{TrainConfig, Trainer};
use fdan::{build_fdan, FdanConfig, Rng, Tensor};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn param_counts() -> Outcome {
    let table = [(2, 126_660u64, "126.66"), (4, 142_248, "142.24"), (8, 204_600, "204.60"), (16, 454_008, "454.00")];
    let mut got = Vec::new();
    for (s, want, kilo) in table {
        let (model, store) = build_fdan(&FdanConfig::with_scale(s)).map_err(err)?;
        let n = count_params(&model);
        ensure(n == want && store.numel() as u64 == want, || format!("x{s}: {n} != {want}"))?;
        ensure(kilo_truncated(n) == kilo, || format!("x{s}: {} != {kilo}K", kilo_truncated(n)))?;
        got.push(n.to_string());
    }
    Ok(got.join(" / "))
}

fn flops() -> Outcome {
    let table = [(2, 404.44), (4, 117.22), (8, 45.42), (16, 27.48)];
    let mut parts = Vec::new();
    let mut backbone = Vec::new();
    for (s, reference_g) in table {
        let (model, _) = build_fdan(&FdanConfig::with_scale(s)).map_err(err)?;
        let (h, w) = native_lr_resolution(s);
        let report = profile(&model, h, w).map_err(err)?;
        let (f, _) = count_flops(&model, h, w).map_err(err)?;
        ensure(f == report.totals.flops, || "count_flops disagrees with the report".into())?;
        let g = f as f64 / 1e9;
        let rel = (g - reference_g).abs() / reference_g;
        ensure(rel < 0.01, || format!("x{s}: {g:.2}G vs {reference_g}G ({:.2}%)", rel * 100.0))?;
        parts.push(format!("{g:.2}G"));
        backbone.push((f - reconstruction_flops(&report)) as f64 * (s * s) as f64 / 4.0);
    }
    let lo = backbone.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = backbone.iter().cloned().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    ensure(spread < 0.005, || format!("backbone spread {:.3}%", spread * 100.0))?;
    Ok(format!("{} (backbone spread {:.3}%)", parts.join(" / "), spread * 100.0))
}

fn activations() -> Outcome {
    let (model, _) = build_fdan(&FdanConfig::with_scale(4)).map_err(err)?;
    let a = count_activations(&model, 540, 960).map_err(err)? as f64 / 1e9;
    let rel = (a - 0.59).abs() / 0.59;
    ensure(rel < 0.10, || format!("{a:.3}G vs 0.59G"))?;
    Ok(format!("{a:.3}G vs 0.59G ({:.1}%)", rel * 100.0))
}

fn gradients() -> Outcome {
    let config = FdanConfig {
        channels: 16,
        blocks: 3,
        groups: 2,
        scale: 2,
        seed: 5,
        ..FdanConfig::default()
    };
    let (model, params) = build_fdan(&config).map_err(err)?;
    let params = params.cast::<f64>();
    let mut rng = Rng::new(2024);
    let x = Tensor::from_fn([1, 3, 16, 16], |_| rng.uniform());
    let t = Tensor::from_fn([1, 3, 32, 32], |_| rng.uniform());
    let check = check_param_gradients(&model, &params, &x, &t, 40, 1e-6, &mut rng).map_err(err)?;
    ensure(check.coords.len() >= 30, || "fewer than 30 coordinates".into())?;
    ensure(check.max_relative_error < 1e-3, || {
        format!("max relative error {:.3e}", check.max_relative_error)
    })?;
    Ok(format!(
        "{} coordinates, max relative error {:.2e}",
        check.coords.len(),
        check.max_relative_error
    ))
}

fn channel_conservation() -> Outcome {
    for (c, b) in [(48, 3), (32, 2), (64, 4), (16, 1)] {
        let widths = Hfdg::concat_widths(c, b).map_err(err)?;
        let total: usize = widths.iter().sum();
        ensure(total == c, || format!("C={c}, B={b}: {widths:?} sums to {total}"))?;
    }
    Ok("concat width == C for all four (C, B)".into())
}

fn overfit() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let iterations = 500;
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
    let pairs = synthetic_pairs(4, 64, 2, 0).map_err(err)?;
    let out = Trainer::new(config, pairs).and_then(|mut t| t.run(None)).map_err(err)?;
    let windows: Vec<f64> = out
        .losses
        .chunks(50)
        .map(|w| w.iter().map(|&v| v as f64).sum::<f64>() / w.len() as f64)
        .collect();
    let initial = out.losses[0] as f64;
    let last = *windows.last().unwrap();
    ensure(last <= 0.1 * initial, || format!("final {last:.5} vs initial {initial:.5}"))?;
    ensure(windows.windows(2).all(|w| w[1] <= w[0]), || {
        format!("smoothed loss increased: {windows:?}")
    })?;
    Ok(format!(
        "initial {initial:.4}, final 50-iteration mean {last:.4} ({:.1}%)",
        100.0 * last / initial
    ))
}

fn ssim_oracle(a: &Plane, b: &Plane) -> f64 {
    const K: usize = 11;
    let c = 5.0;
    let mut wts = [[0.0f64; K]; K];
    let mut s = 0.0;
    for (y, row) in wts.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = (-((x as f64 - c).powi(2) + (y as f64 - c).powi(2)) / 4.5).exp();
            s += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut n = 0;
    for oy in 0..=a.height - K {
        for ox in 0..=a.width - K {
            let at = |p: &Plane, x, y| p.at(ox + x, oy + y) as f64;
            let (mut ma, mut mb) = (0.0, 0.0);
            for y in 0..K {
                for x in 0..K {
                    ma += wts[y][x] / s * at(a, x, y);
                    mb += wts[y][x] / s * at(b, x, y);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in 0..K {
                for x in 0..K {
                    let w = wts[y][x] / s;
                    let (da, db) = (at(a, x, y) - ma, at(b, x, y) - mb);
                    va += w * da * da;
                    vb += w * db * db;
                    cov += w * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            n += 1;
        }
    }
    total / n as f64
}

fn metrics() -> Outcome {
    let mut rng = Rng::new(77);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut plane = || Plane::new(32, 32, (0..1024).map(|_| rng.uniform() as f32).collect()).unwrap();
        let (a, b) = (plane(), plane());
        let got = ssim_y(&a, &b, 1.0).map_err(err)?;
        worst = worst.max((got - ssim_oracle(&a, &b)).abs());
    }
    ensure(worst < 1e-6, || format!("SSIM deviation {worst:.2e}"))?;
    let a = Plane::new(8, 8, (0..64).map(|i| (i * 3) as f32).collect()).unwrap();
    let b = Plane::new(8, 8, a.data.iter().map(|v| v + 1.0).collect()).unwrap();
    let p = psnr_y(&a, &b, 255.0).map_err(err)?;
    ensure((p - 48.1308).abs() < 1e-3, || format!("PSNR {p} dB"))?;
    Ok(format!("SSIM max deviation {worst:.1e} over 20 pairs, PSNR {p:.4} dB"))
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = FdanConfig::with_scale(4);
    let (_, params) = build_fdan(&config).map_err(err)?;
    let path = dir.path().join("x4.ckpt");
    save_checkpoint(&params, &config, &path).map_err(err)?;
    let (back, back_cfg) = load_checkpoint(&path).map_err(err)?;
    ensure(back.bitwise_eq(&params) && back_cfg == config, || "checkpoint differs".into())?;

    let mut rng = Rng::new(8);
    let mut codes = |max: usize| [0, 1, 2].map(|_| (0..40 * 24).map(|_| rng.below(max + 1) as u16).collect());
    let images = [
        ("sdr.png", ImageBuffer::from_codes(40, 24, 8, ColorSpace::Sdr709, PlaneFormat::Rgb, codes(255))),
        ("hdr.png", ImageBuffer::from_codes(40, 24, 10, ColorSpace::Hdr2100, PlaneFormat::Rgb, codes(1023))),
        ("hdr.yuv", ImageBuffer::from_codes(40, 24, 10, ColorSpace::Hdr2100, PlaneFormat::Yuv, codes(1023))),
    ];
    for (name, img) in images {
        let img = img.map_err(err)?;
        let p = dir.path().join(name);
        save_image(&img, &p).map_err(err)?;
        ensure(load_image(&p).map_err(err)? == img, || format!("{name} differs after reload"))?;
    }

    let hr = ImageBuffer::new(
        3840,
        2160,
        10,
        ColorSpace::Hdr2100,
        PlaneFormat::Rgb,
        [vec![0.25; 3840 * 2160], vec![0.5; 3840 * 2160], vec![0.75; 3840 * 2160]],
    )
    .map_err(err)?;
    let mut dims = Vec::new();
    for (s, want) in [(2, (1920, 1080)), (4, (960, 540)), (8, (480, 270)), (16, (240, 135))] {
        let lr = downscale(&hr, s).map_err(err)?;
        ensure((lr.width, lr.height) == want, || format!("x{s}: {}x{}", lr.width, lr.height))?;
        dims.push(format!("{}x{}", lr.width, lr.height));
    }
    Ok(format!("checkpoint, PNG8/PNG16/YUV bitwise; {}", dims.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("parameter counts", param_counts),
        ("FLOPs at native resolution", flops),
        ("activations at x4", activations),
        ("gradient check", gradients),
        ("channel conservation", channel_conservation),
        ("overfit smoke test", overfit),
        ("metric oracles", metrics),
        ("pipeline round trips", round_trips),
    ];
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut failed = 0;
    pool.install(|| {
        for (i, (name, f)) in criteria.iter().enumerate() {
            let start = Instant::now();
            match f() {
                Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{:.1?}]", i + 1, start.elapsed()),
                Err(detail) => {
                    failed += 1;
                    println!("criterion {} {name}: FAIL ({detail}) [{:.1?}]", i + 1, start.elapsed());
                }
            }
        }
    });
    if failed == 0 {
        println!(
            "criterion 9 desk-scale substitution: PASS (published PSNR/SSIM results need full-scale training on 4K video pairs and are \
             not reproduced; criteria 1-8 stand in for them and all passed)"
        );
    } else {
        println!("criterion 9 desk-scale substitution: FAIL ({failed} of criteria 1-8 failed)");
        std::process::exit(1);
    }
}
