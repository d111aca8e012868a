use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdanConfig {
    /// Feature width `C` of the backbone.
    pub channels: usize,
    /// Decomposition blocks per group (`B`).
    pub blocks: usize,
    /// Number of hierarchical groups (`G`).
    pub groups: usize,
    /// Upscaling factor, one of 2, 4, 8, 16.
    pub scale: usize,
    /// Concatenate every group output before fusion. `false` builds the
    /// variant that only fuses the last group's output.
    pub aggregate: bool,
    /// Initialization seed.
    pub seed: u64,
}

impl Default for FdanConfig {
    fn default() -> Self {
        Self {
            channels: 48,
            blocks: 3,
            groups: 6,
            scale: 4,
            aggregate: true,
            seed: 0,
        }
    }
}

pub const SUPPORTED_SCALES: [usize; 4] = [2, 4, 8, 16];

impl FdanConfig {
    pub fn with_scale(scale: usize) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_SCALES.contains(&self.scale) {
            return Err(Error::Config(format!(
                "scale {} not in {:?}",
                self.scale, SUPPORTED_SCALES
            )));
        }
        if self.blocks == 0 || self.groups == 0 {
            return Err(Error::Config("blocks and groups must be positive".into()));
        }
        if self.blocks >= usize::BITS as usize || self.channels % (1usize << self.blocks) != 0 {
            return Err(Error::Config(format!(
                "channels {} not divisible by 2^blocks = 2^{}",
                self.channels, self.blocks
            )));
        }
        if self.channels < 4 || self.channels % 4 != 0 {
            return Err(Error::Config(format!(
                "channels {} must be a positive multiple of 4 for the attention reduction",
                self.channels
            )));
        }
        Ok(())
    }

    /// True when both configs describe the same layer graph (seed aside).
    pub fn same_architecture(&self, other: &Self) -> bool {
        (self.channels, self.blocks, self.groups, self.scale, self.aggregate)
            == (other.channels, other.blocks, other.groups, other.scale, other.aggregate)
    }

    /// Output channels of the reconstruction conv, `3·s²`.
    pub fn reconstruction_channels(&self) -> usize {
        3 * self.scale * self.scale
    }
}
