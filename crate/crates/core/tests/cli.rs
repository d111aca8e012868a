use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fdan::data::{save_image, synthetic_hdr, synthetic_sdr, ImageBuffer};
use fdan::model::save_checkpoint;
use fdan::{build_fdan, FdanConfig, Rng};

fn fdan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdan")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lr_image(size: usize, seed: u64) -> ImageBuffer {
    let hr = synthetic_hdr(size * 2, &mut Rng::new(seed));
    synthetic_sdr(&hr, 2).unwrap()
}

#[test]
fn profile_x4() {
    let o = fdan(&["profile", "--scale", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("total params: 142,248"), "{text}");
    assert!(text.contains("input 960x540"), "{text}");
    assert!(text.contains("FLOPs 117.29G"), "{text}");
    assert!(text.contains("layer,kind,params,macs,flops,activations"));
}

#[test]
fn infer_16_to_64() {
    let dir = tempfile::tempdir().unwrap();
    let config = FdanConfig::with_scale(4);
    let (_, params) = build_fdan(&config).unwrap();
    let ckpt = dir.path().join("x4.ckpt");
    save_checkpoint(&params, &config, &ckpt).unwrap();
    let input = dir.path().join("lr.png");
    save_image(&lr_image(16, 1), &input).unwrap();
    let before = fs::read(&input).unwrap();
    let out = dir.path().join("hr.png");
    let o = fdan(&[
        "infer",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let hr = fdan::data::load_image(&out).unwrap();
    assert_eq!((hr.width, hr.height, hr.bit_depth), (64, 64, 10));
    assert_eq!(fs::read(&input).unwrap(), before);
}

#[test]
fn infer_without_checkpoint_is_usage_error() {
    let o = fdan(&["infer", "--input", "x.png", "--out", "y.png"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[usage]"));
    assert!(stderr(&o).contains("--ckpt"));
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ckpt");
    let o = fdan(&["infer", "--ckpt", missing.to_str().unwrap(), "--input", "a.png", "--out", "b.png"]);
    assert_eq!(o.status.code(), Some(8));
    assert!(stderr(&o).starts_with("error[io]:"), "{}", stderr(&o));

    let o = fdan(&["profile", "--scale", "3"]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).starts_with("error[config]:"));

    let o = fdan(&["profile", "--set", "model.width=3"]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).contains("unknown config key 'model.width'"));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"epochs": 1, "typo_key": 2}"#).unwrap();
    let o = fdan(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));

    let o = fdan(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_succeeds() {
    let o = fdan(&["--help"]);
    assert!(o.status.success());
    for cmd in ["prepare", "train", "infer", "eval", "profile", "selftest"] {
        assert!(stdout(&o).contains(cmd), "{cmd}");
    }
}

#[test]
fn selftest_passes() {
    let o = fdan(&["selftest"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
    assert!(!text.contains("FAIL"));
}

fn write_pairs(root: &Path, n: usize) {
    fs::create_dir_all(root.join("sdr")).unwrap();
    fs::create_dir_all(root.join("hdr")).unwrap();
    for i in 0..n {
        let hdr = synthetic_hdr(64, &mut Rng::new(i as u64));
        let sdr = synthetic_sdr(&hdr, 1).unwrap();
        save_image(&sdr, root.join(format!("sdr/frame{i}.png"))).unwrap();
        save_image(&hdr, root.join(format!("hdr/frame{i}.png"))).unwrap();
    }
}

#[test]
fn prepare_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    write_pairs(&raw, 2);
    let prepared = dir.path().join("prepared");
    let o = fdan(&[
        "prepare",
        "--input",
        raw.to_str().unwrap(),
        "--out",
        prepared.to_str().unwrap(),
        "--scale",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = prepared.join("manifest.json");
    let m = fdan::data::load_manifest(&manifest).unwrap();
    assert_eq!(m.entries.len(), 2);
    let lr = fdan::data::load_image(prepared.join(&m.entries[0].lr)).unwrap();
    assert_eq!((lr.width, lr.height, lr.bit_depth), (32, 32, 8));

    let config = dir.path().join("train.json");
    fs::write(
        &config,
        r#"{"model": {"channels": 8, "blocks": 2, "groups": 1}, "iterations": 4,
            "period_iters": 4, "patch_size": 32, "batch_size": 2, "lr_max": 1e-3}"#,
    )
    .unwrap();
    let train = |out: &Path| {
        fdan(&[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--manifest",
            manifest.to_str().unwrap(),
            "--scale",
            "2",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let (run_a, run_b) = (dir.path().join("a"), dir.path().join("b"));
    let o = train(&run_a);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(train(&run_b).status.success());
    let ckpt = run_a.join("fdan.ckpt");
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(run_b.join("fdan.ckpt")).unwrap());
    let log = fs::read_to_string(run_a.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 5);

    let report = dir.path().join("report.csv");
    let o = fdan(&[
        "eval",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--split",
        "train",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("id,psnr_db,ssim\nframe0,"), "{csv}");
    assert!(csv.lines().last().unwrap().starts_with("mean,"));
    assert!(stdout(&o).contains("channel Y, peak 1023"));
}
