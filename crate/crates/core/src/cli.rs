//! Command-line front end: `prepare`, `train`, `infer`, `eval`, `profile`
//! and `selftest`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    downscale, load_image, load_manifest, save_image, save_manifest, ColorSpace, ImageBuffer, ManifestEntry,
    SamplePair,
};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::{
    build_fdan, check_param_gradients, decode_checkpoint, encode_checkpoint, load_checkpoint, FdanConfig,
    Hfdg,
};
use crate::nn::{Rng, Tensor};
use crate::profiler::{native_lr_resolution, profile, thousands};
use crate::train::{TrainConfig, Trainer};

/// Exit code for malformed command lines.
pub const EXIT_USAGE: i32 = 2;

/// Exit code for each error category.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Shape(_) => 3,
        Error::Numeric(_) => 4,
        Error::Argument(_) => 5,
        Error::Config(_) => 6,
        Error::Format(_) => 7,
        Error::Io { .. } => 8,
        Error::Internal(_) => 9,
        Error::Range(_) => 10,
    }
}

#[derive(Parser, Debug)]
#[command(name = "fdan", version, about = "Joint super-resolution and inverse tone mapping")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON training/model configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Upscaling factor (2, 4, 8 or 16).
    #[arg(long, global = true)]
    pub scale: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 keeps every run bitwise reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, global = true)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Configuration override `key=value`, with dotted keys for nested
    /// fields (e.g. `model.channels=16`).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Degrade HR-SDR images into LR inputs and write a manifest.
    Prepare {
        /// Directory holding `sdr/` and `hdr/` images with matching stems.
        #[arg(long)]
        input: PathBuf,
        /// Split label written to the manifest.
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Train a network; writes a checkpoint and a CSV loss log.
    Train {
        /// Continue from a `.state` file written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Super-resolve one LR-SDR image into an HR-HDR image.
    Infer {
        #[arg(long)]
        input: PathBuf,
    },
    /// PSNR/SSIM of a checkpoint on the manifest's pairs.
    Eval {
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Parameter, FLOP and activation counts.
    Profile {
        /// LR input height (defaults to the native 2160/scale).
        #[arg(long)]
        height: Option<usize>,
        /// LR input width (defaults to the native 3840/scale).
        #[arg(long)]
        width: Option<usize>,
    },
    /// Run the built-in gradient, shape and parameter-count checks.
    Selftest,
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
/// Failures print one `error[<category>]: <message>` line to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("FDAN_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            eprintln!("run `fdan --help` for usage");
            EXIT_USAGE
        }
        Err(Failed(err)) => {
            eprintln!("error[{}]: {err}", err.category());
            exit_code(&err)
        }
    }
}

/// Failure of a subcommand: bad invocation or a library error.
pub enum CliError {
    Usage(String),
    Failed(Error),
}
use CliError::{Failed, Usage};

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Failed(e)
    }
}

fn require<'a>(v: &'a Option<PathBuf>, flag: &str, cmd: &str) -> std::result::Result<&'a PathBuf, CliError> {
    v.as_ref()
        .ok_or_else(|| Usage(format!("{cmd} requires --{flag} <path>")))
}

pub fn execute(cli: &Cli) -> std::result::Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> std::result::Result<(), CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Prepare { input, split } => {
            let out = require(&c.out, "out", "prepare")?;
            let entries = prepare(input, out, c.scale.unwrap_or(4), split)?;
            println!("wrote {} pairs to {}", entries, out.join("manifest.json").display());
        }
        Command::Train { resume } => {
            let config = train_config(c)?;
            let manifest = config
                .manifest
                .clone()
                .ok_or_else(|| Usage("train requires --manifest or a config with \"manifest\"".into()))?;
            let pairs = load_manifest(&manifest)?.load_pairs("train", config.model.scale)?;
            let mut trainer = match resume {
                Some(state) => Trainer::resume(config, pairs, state)?,
                None => Trainer::new(config, pairs)?,
            };
            let out = trainer.run(None)?;
            let last = out.losses.last().copied().unwrap_or(f32::NAN);
            println!(
                "trained {} iterations, final loss {last:.6}; checkpoint {}, log {}",
                out.iterations,
                out.checkpoint.display(),
                out.log.display()
            );
        }
        Command::Infer { input } => {
            let ckpt = require(&c.ckpt, "ckpt", "infer")?;
            let out = require(&c.out, "out", "infer")?;
            let (params, config) = load_checkpoint(ckpt)?;
            let (model, _) = build_fdan(&config)?;
            let lr = load_image(input)?;
            let hr = super_resolve(&model, &params, &lr)?;
            save_image(&hr, out)?;
            println!("{}x{} -> {}x{}: {}", lr.width, lr.height, hr.width, hr.height, out.display());
        }
        Command::Eval { split } => {
            let ckpt = require(&c.ckpt, "ckpt", "eval")?;
            let manifest = require(&c.manifest, "manifest", "eval")?;
            let (params, config) = load_checkpoint(ckpt)?;
            let (model, _) = build_fdan(&config)?;
            let pairs = load_manifest(manifest)?.load_pairs(split, config.scale)?;
            let report = evaluate(&model, &params, &pairs)?;
            match &c.out {
                Some(path) => fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?,
                None => print!("{}", report.to_csv()),
            }
            println!("{}", report.summary());
        }
        Command::Profile { height, width } => {
            let mut model_cfg = if c.config.is_some() || !c.overrides.is_empty() {
                train_config(c)?.model
            } else {
                FdanConfig::default()
            };
            if let Some(s) = c.scale {
                model_cfg.scale = s;
            }
            model_cfg.validate()?;
            let (nh, nw) = native_lr_resolution(model_cfg.scale);
            let (model, _) = build_fdan(&model_cfg)?;
            let report = profile(&model, height.unwrap_or(nh), width.unwrap_or(nw))?;
            println!("{}", report.summary());
            println!("total params: {}", thousands(report.totals.params));
            match &c.out {
                Some(path) => fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?,
                None => print!("{}", report.to_csv()),
            }
        }
        Command::Selftest => {
            let failures = selftest(c.seed.unwrap_or(0));
            if failures > 0 {
                return Err(Error::Internal(format!("{failures} selftest checks failed")).into());
            }
        }
    }
    Ok(())
}

/// Loads `--config` (or defaults), applies `--set` overrides, then the
/// dedicated flags `--scale`, `--seed`, `--manifest`, `--ckpt` and `--out`.
pub fn train_config(c: &Common) -> Result<TrainConfig> {
    let mut config = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<TrainConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    if !c.overrides.is_empty() {
        config = apply_overrides(&config, &c.overrides)?;
    }
    if let Some(s) = c.scale {
        config.model.scale = s;
    }
    if let Some(seed) = c.seed {
        config.seed = seed;
        config.model.seed = seed;
    }
    if let Some(m) = &c.manifest {
        config.manifest = Some(m.clone());
    }
    if let Some(out) = &c.out {
        config.checkpoint = out.join("fdan.ckpt");
        config.log = out.join("train_log.csv");
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    if let Some(ckpt) = &c.ckpt {
        config.checkpoint = ckpt.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Applies `key=value` pairs to a config. Keys are dotted paths into the
/// JSON form; values parse as JSON and fall back to plain strings.
pub fn apply_overrides(config: &TrainConfig, overrides: &[String]) -> Result<TrainConfig> {
    let mut doc = serde_json::to_value(config).map_err(|e| Error::Internal(e.to_string()))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
        let pointer = format!("/{}", key.replace('.', "/"));
        let slot = doc
            .pointer_mut(&pointer)
            .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_owned()));
    }
    serde_json::from_value(doc).map_err(|e| Error::Config(format!("after overrides: {e}")))
}

/// Runs the network on an LR image and returns a 10-bit HDR image in the
/// input's plane format.
pub fn super_resolve(
    model: &crate::model::Fdan,
    params: &crate::model::ParamStore<f32>,
    lr: &ImageBuffer,
) -> Result<ImageBuffer> {
    let y = model.infer(params, &lr.to_tensor())?;
    let y = y.map(|v| v.clamp(0.0, 1.0));
    Ok(ImageBuffer::from_tensor(&y, 0, 10, ColorSpace::Hdr2100, lr.format)?.quantized())
}

pub fn evaluate(
    model: &crate::model::Fdan,
    params: &crate::model::ParamStore<f32>,
    pairs: &[SamplePair],
) -> Result<MetricReport> {
    let peak = pairs.first().map_or(1023.0, |p| p.hr.max_code() as f64);
    let mut report = MetricReport::new(peak);
    for p in pairs {
        let pred = super_resolve(model, params, &p.lr)?;
        report.add(p.source_id.clone(), &pred, &p.hr)?;
    }
    Ok(report)
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("png" | "yuv")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Reads `<input>/sdr/*` (HR-SDR) and `<input>/hdr/*` (HR-HDR) pairs by
/// file stem, writes bicubic LR-SDR inputs to `<out>/lr`, copies the
/// HDR targets to `<out>/hr` and writes `<out>/manifest.json`.
pub fn prepare(input: &Path, out: &Path, scale: usize, split: &str) -> Result<usize> {
    if !crate::model::SUPPORTED_SCALES.contains(&scale) {
        return Err(Error::Argument(format!("unsupported scale {scale}")));
    }
    let (sdr_dir, hdr_dir) = (input.join("sdr"), input.join("hdr"));
    let hdr_files = image_files(&hdr_dir)?;
    let (lr_dir, hr_dir) = (out.join("lr"), out.join("hr"));
    for d in [&lr_dir, &hr_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut entries = Vec::new();
    for sdr_path in image_files(&sdr_dir)? {
        let stem = sdr_path.file_stem().unwrap_or_default().to_owned();
        let hdr_path = hdr_files
            .iter()
            .find(|p| p.file_stem() == Some(stem.as_os_str()))
            .ok_or_else(|| Error::Argument(format!("no HDR image matches {}", sdr_path.display())))?;
        let sdr = load_image(&sdr_path)?;
        let hdr = load_image(hdr_path)?;
        if (sdr.width, sdr.height) != (hdr.width, hdr.height) {
            return Err(Error::Shape(format!(
                "{}: SDR {}x{} vs HDR {}x{}",
                stem.to_string_lossy(),
                sdr.width,
                sdr.height,
                hdr.width,
                hdr.height
            )));
        }
        if sdr.width % scale != 0 || sdr.height % scale != 0 {
            return Err(Error::Argument(format!(
                "{}: {}x{} is not divisible by {scale}",
                stem.to_string_lossy(),
                sdr.width,
                sdr.height
            )));
        }
        let lr = downscale(&sdr, scale)?.quantized();
        let ext = sdr_path.extension().unwrap_or_default().to_string_lossy().into_owned();
        let lr_name = PathBuf::from("lr").join(format!("{}_x{scale}.{ext}", stem.to_string_lossy()));
        save_image(&lr, out.join(&lr_name))?;
        let hr_ext = hdr_path.extension().unwrap_or_default().to_string_lossy().into_owned();
        let hr_name = PathBuf::from("hr").join(format!("{}.{hr_ext}", stem.to_string_lossy()));
        save_image(&hdr, out.join(&hr_name))?;
        entries.push(ManifestEntry {
            lr: lr_name,
            hr: hr_name,
            scale,
            split: split.to_owned(),
        });
    }
    if entries.is_empty() {
        return Err(Error::Argument(format!("no images found in {}", sdr_dir.display())));
    }
    save_manifest(&entries, out.join("manifest.json"))?;
    Ok(entries.len())
}

fn check(name: &str, result: Result<String>) -> bool {
    match result {
        Ok(detail) => {
            println!("PASS {name}: {detail}");
            true
        }
        Err(e) => {
            println!("FAIL {name}: {e}");
            false
        }
    }
}

/// Runs the built-in oracles and returns the number of failures.
pub fn selftest(seed: u64) -> usize {
    let mut failed = 0;
    let mut tally = |ok: bool| failed += usize::from(!ok);

    tally(check("param counts", (|| {
        for (s, want) in [(2, 126_660u64), (4, 142_248), (8, 204_600), (16, 454_008)] {
            let (model, _) = build_fdan(&FdanConfig::with_scale(s))?;
            let got = crate::profiler::count_params(&model);
            if got != want {
                return Err(Error::Internal(format!("scale {s}: {got} != {want}")));
            }
        }
        Ok("126,660 / 142,248 / 204,600 / 454,008".into())
    })()));

    tally(check("channel conservation", (|| {
        for (c, b) in [(48, 3), (32, 2), (64, 4), (16, 1)] {
            let total: usize = Hfdg::concat_widths(c, b)?.iter().sum();
            if total != c {
                return Err(Error::Internal(format!("C={c}, B={b}: concat width {total}")));
            }
        }
        Ok("concat width == C".into())
    })()));

    tally(check("forward shape", (|| {
        let (model, params) = build_fdan(&FdanConfig::default())?;
        let x = Tensor::full([1, 3, 16, 16], 0.5f32);
        let y = model.infer(&params, &x)?;
        if y.dims() != [1, 3, 64, 64] {
            return Err(Error::Shape(format!("got {:?}", y.dims())));
        }
        Ok("16x16 -> 64x64 at x4".into())
    })()));

    tally(check("gradients", (|| {
        let config = FdanConfig {
            channels: 8,
            blocks: 2,
            groups: 1,
            scale: 2,
            seed,
            ..FdanConfig::default()
        };
        let (model, params) = build_fdan(&config)?;
        let params = params.cast::<f64>();
        let mut rng = Rng::stream(seed, 1);
        let x = Tensor::from_fn([1, 3, 16, 16], |_| rng.uniform());
        let t = Tensor::from_fn([1, 3, 32, 32], |_| rng.uniform());
        let res = check_param_gradients(&model, &params, &x, &t, 10, 1e-6, &mut rng)?;
        if res.max_relative_error >= 1e-3 {
            return Err(Error::Numeric(format!("max relative error {:.2e}", res.max_relative_error)));
        }
        Ok(format!("10 coordinates, max relative error {:.2e}", res.max_relative_error))
    })()));

    tally(check("checkpoint round trip", (|| {
        let config = FdanConfig::with_scale(2);
        let (_, params) = build_fdan(&config)?;
        let (back, _) = decode_checkpoint(&encode_checkpoint(&params, &config)?)?;
        if !back.bitwise_eq(&params) {
            return Err(Error::Internal("decoded parameters differ".into()));
        }
        Ok("bitwise".into())
    })()));

    failed
}
