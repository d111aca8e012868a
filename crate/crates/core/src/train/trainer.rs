use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{augment, crop_aligned_pair, SamplePair};
use crate::error::{Error, Result};
use crate::model::{
    build_fdan, read_container, save_checkpoint, write_container, Entry, Fdan, FdanConfig, ParamStore,
};
use crate::nn::{Rng, Tape, Tensor};

use super::config::TrainConfig;
use super::optim::{adam_step, OptimState};
use super::schedule::{cosine_lr, LrSchedule};

pub const TRAIN_STATE_MAGIC: &[u8; 4] = b"FDAS";

const EPOCH_STREAM: u64 = 1 << 40;
const SAMPLE_STREAM: u64 = 2 << 40;

/// Mean absolute difference.
pub fn l1_loss(pred: &Tensor<f32>, target: &Tensor<f32>) -> Result<f64> {
    pred.expect_same_dims(target)?;
    let s: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(s / pred.numel() as f64)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateHeader {
    iteration: u64,
    adam_t: u64,
    model: FdanConfig,
}

/// A training run that can be stepped, saved and resumed.
pub struct Trainer {
    config: TrainConfig,
    model: Fdan,
    params: ParamStore<f32>,
    optim: OptimState,
    pairs: Vec<SamplePair>,
    schedule: LrSchedule,
    iteration: u64,
    total: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Loss of every iteration executed by this call.
    pub losses: Vec<f32>,
    pub iterations: u64,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

impl Trainer {
    pub fn new(config: TrainConfig, pairs: Vec<SamplePair>) -> Result<Self> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(Error::Argument("no training pairs".into()));
        }
        let s = config.model.scale;
        for p in &pairs {
            if p.scale != s {
                return Err(Error::Argument(format!(
                    "pair {} has scale {}, model scale is {s}",
                    p.source_id, p.scale
                )));
            }
            if p.hr.width < config.patch_size || p.hr.height < config.patch_size {
                return Err(Error::Argument(format!(
                    "pair {} ({}x{}) is smaller than the {} patch",
                    p.source_id, p.hr.width, p.hr.height, config.patch_size
                )));
            }
        }
        let (model, params) = build_fdan(&config.model)?;
        let optim = OptimState::new(&params);
        Ok(Self {
            schedule: config.schedule(pairs.len()),
            total: config.total_iters(pairs.len()),
            config,
            model,
            params,
            optim,
            pairs,
            iteration: 0,
        })
    }

    /// Restores parameters, Adam moments and the iteration counter.
    pub fn resume(config: TrainConfig, pairs: Vec<SamplePair>, state: impl AsRef<Path>) -> Result<Self> {
        let path = state.as_ref();
        let mut t = Self::new(config, pairs)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (json, mut r) = read_container(&bytes, TRAIN_STATE_MAGIC)?;
        let header: StateHeader = serde_json::from_str(&json)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if !header.model.same_architecture(&t.config.model) {
            return Err(Error::Config(format!(
                "state file architecture {:?} does not match {:?}",
                header.model, t.config.model
            )));
        }
        let mut read = |name: String, dst: &mut Tensor<f32>| -> Result<()> {
            let (_, data) = r.entry(&name)?;
            *dst = Tensor::new(dst.dims(), data)?;
            Ok(())
        };
        for ((e, m), v) in t.params.iter_mut().zip(&mut t.optim.m).zip(&mut t.optim.v) {
            read(e.name.clone(), &mut e.value)?;
            read(format!("adam.m.{}", e.name), m)?;
            read(format!("adam.v.{}", e.name), v)?;
        }
        r.finish()?;
        t.iteration = header.iteration;
        t.optim.t = header.adam_t;
        Ok(t)
    }

    pub fn save_state(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = StateHeader {
            iteration: self.iteration,
            adam_t: self.optim.t,
            model: self.config.model.clone(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Internal(e.to_string()))?;
        let names: Vec<[String; 3]> = self
            .params
            .iter()
            .map(|e| [e.name.clone(), format!("adam.m.{}", e.name), format!("adam.v.{}", e.name)])
            .collect();
        let entries = self
            .params
            .iter()
            .zip(&self.optim.m)
            .zip(&self.optim.v)
            .zip(&names)
            .flat_map(|(((e, m), v), n)| {
                [
                    Entry { name: &n[0], shape: &e.shape, data: e.value.data() },
                    Entry { name: &n[1], shape: &e.shape, data: m.data() },
                    Entry { name: &n[2], shape: &e.shape, data: v.data() },
                ]
            });
        let bytes = write_container(TRAIN_STATE_MAGIC, &json, entries)?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn total_iters(&self) -> u64 {
        self.total
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.total
    }

    pub fn model(&self) -> &Fdan {
        &self.model
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn lr(&self, iter: u64) -> f64 {
        cosine_lr(iter, &self.schedule)
    }

    /// LR and HR batch tensors of iteration `iter`. Depends only on the
    /// seed and `iter`, so a resumed run sees the same batches.
    pub fn batch(&self, iter: u64) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let b = self.config.batch_size();
        let n = self.pairs.len();
        let ipe = self.config.iters_per_epoch(n);
        let (epoch, within) = (iter / ipe, (iter % ipe) as usize);
        let mut order: Vec<usize> = (0..n).collect();
        Rng::stream(self.config.seed, EPOCH_STREAM + epoch).shuffle(&mut order);
        let s = self.config.model.scale;
        let p = self.config.patch_size;
        let mut lr_data = Vec::with_capacity(b * 3 * (p / s) * (p / s));
        let mut hr_data = Vec::with_capacity(b * 3 * p * p);
        for k in 0..b {
            let pair = &self.pairs[order[(within * b + k) % n]];
            let mut rng = Rng::stream(self.config.seed, SAMPLE_STREAM + iter * b as u64 + k as u64);
            let (lp, hp) = crop_aligned_pair(&pair.hr, &pair.lr, s, p, &mut rng)?;
            let (lp, hp, _) = augment(&lp, &hp, &mut rng)?;
            lr_data.extend(lp.planes.iter().flatten());
            hr_data.extend(hp.planes.iter().flatten());
        }
        Ok((
            Tensor::new([b, 3, p / s, p / s], lr_data)?,
            Tensor::new([b, 3, p, p], hr_data)?,
        ))
    }

    /// One forward/backward/Adam iteration; returns `(lr, loss)`.
    pub fn step(&mut self) -> Result<(f64, f32)> {
        let iter = self.iteration;
        let (x, y) = self.batch(iter)?;
        let mut tape = Tape::<f32>::new();
        let vars = self.params.bind(&mut tape);
        let xv = tape.leaf(x);
        let pred = self.model.forward(&mut tape, &vars, &xv)?;
        let yv = tape.leaf(y);
        let loss_var = tape.l1_loss(pred, yv)?;
        let loss = tape.value(loss_var).data()[0];
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss is {loss} at iteration {iter}")));
        }
        let mut grads = tape.backward(loss_var)?;
        drop(tape);
        self.params.load_grads(&vars, &mut grads)?;
        let lr = self.lr(iter);
        adam_step(&mut self.params, &mut self.optim, lr)?;
        self.iteration += 1;
        Ok((lr, loss))
    }

    fn save_all(&self) -> Result<()> {
        save_checkpoint(&self.params, &self.config.model, &self.config.checkpoint)?;
        self.save_state(self.config.state_path())
    }

    /// Steps until `until` (or the configured total), appending
    /// `iter,lr,loss` lines to the log. Checkpoint and resume state are
    /// written every `checkpoint_every` iterations and when stopping.
    pub fn run(&mut self, until: Option<u64>) -> Result<TrainOutcome> {
        let stop = until.unwrap_or(self.total).min(self.total);
        let log_path = self.config.log.clone();
        let file = if self.iteration == 0 {
            File::create(&log_path)
        } else {
            OpenOptions::new().append(true).create(true).open(&log_path)
        }
        .map_err(|e| Error::io(&log_path, e))?;
        let mut log = BufWriter::new(file);
        let io = |e| Error::io(&log_path, e);
        if self.iteration == 0 {
            writeln!(log, "iter,lr,loss").map_err(io)?;
        }
        let mut losses = Vec::new();
        while self.iteration < stop {
            let iter = self.iteration;
            let (lr, loss) = self.step()?;
            writeln!(log, "{iter},{lr:e},{loss}").map_err(io)?;
            losses.push(loss);
            if iter % 50 == 0 {
                log::info!("iter {iter}/{} lr {lr:.3e} loss {loss:.6}", self.total);
            }
            let every = self.config.checkpoint_every;
            if every > 0 && self.iteration % every == 0 && self.iteration < stop {
                log.flush().map_err(io)?;
                self.save_all()?;
            }
        }
        log.flush().map_err(io)?;
        self.save_all()?;
        Ok(TrainOutcome {
            losses,
            iterations: self.iteration,
            checkpoint: self.config.checkpoint.clone(),
            log: log_path,
        })
    }
}

/// Trains from scratch for the configured number of iterations.
pub fn train(config: TrainConfig, pairs: Vec<SamplePair>) -> Result<TrainOutcome> {
    Trainer::new(config, pairs)?.run(None)
}
