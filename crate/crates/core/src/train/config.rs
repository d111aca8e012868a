use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FdanConfig, ESA_MIN_SIZE};

use super::schedule::LrSchedule;

/// Everything a training run needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub model: FdanConfig,
    pub manifest: Option<PathBuf>,
    /// Defaults to 32 at scale 2 and 64 otherwise.
    pub batch_size: Option<usize>,
    pub epochs: u64,
    /// Length of one cosine cycle in epochs.
    pub period_epochs: u64,
    /// Overrides `epochs` when set.
    pub iterations: Option<u64>,
    /// Overrides `period_epochs` when set.
    pub period_iters: Option<u64>,
    /// HR patch side.
    pub patch_size: usize,
    pub seed: u64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub restart: bool,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    /// Save a checkpoint and resume state every this many iterations
    /// (0: only at the end).
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: FdanConfig::default(),
            manifest: None,
            batch_size: None,
            epochs: 1200,
            period_epochs: 120,
            iterations: None,
            period_iters: None,
            patch_size: 256,
            seed: 0,
            lr_max: 5e-5,
            lr_min: 1e-11,
            restart: true,
            checkpoint: PathBuf::from("fdan.ckpt"),
            log: PathBuf::from("train_log.csv"),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn batch_size(&self) -> usize {
        self.batch_size
            .unwrap_or(if self.model.scale == 2 { 32 } else { 64 })
    }

    pub fn iters_per_epoch(&self, pairs: usize) -> u64 {
        pairs.div_ceil(self.batch_size()).max(1) as u64
    }

    pub fn total_iters(&self, pairs: usize) -> u64 {
        self.iterations
            .unwrap_or(self.epochs * self.iters_per_epoch(pairs))
    }

    pub fn schedule(&self, pairs: usize) -> LrSchedule {
        LrSchedule {
            lr_max: self.lr_max,
            lr_min: self.lr_min,
            period_iters: self
                .period_iters
                .unwrap_or(self.period_epochs * self.iters_per_epoch(pairs)),
            restart: self.restart,
        }
    }

    /// Path of the optimizer/resume state written next to the checkpoint.
    pub fn state_path(&self) -> PathBuf {
        let mut s = self.checkpoint.as_os_str().to_owned();
        s.push(".state");
        PathBuf::from(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let s = self.model.scale;
        if self.patch_size == 0 || self.patch_size % s != 0 {
            return Err(Error::Config(format!(
                "patch_size {} is not a multiple of scale {s}",
                self.patch_size
            )));
        }
        if self.patch_size / s < ESA_MIN_SIZE {
            return Err(Error::Config(format!(
                "LR patch {}x{0} is below the {ESA_MIN_SIZE}x{ESA_MIN_SIZE} minimum",
                self.patch_size / s
            )));
        }
        if self.batch_size() == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < lr_min <= lr_max, got {} and {}",
                self.lr_min, self.lr_max
            )));
        }
        if self.period_iters == Some(0) || (self.period_iters.is_none() && self.period_epochs == 0) {
            return Err(Error::Config("cosine period must be positive".into()));
        }
        Ok(())
    }
}
