//! Feature Decomposition Aggregation Network (FDAN) for joint
//! super-resolution and inverse tone-mapping.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense NCHW tensors, layer kernels, a reverse-mode tape and
//!   a finite-difference gradient checker.
//! - [`model`]: the feature decomposition block, the hierarchical group
//!   with spatial attention, the full network and its checkpoint format.
//! - [`profiler`]: parameter, FLOP, MAC and activation counting.
//! - [`data`]: image containers, bicubic degradation, aligned cropping
//!   and augmentation.
//! - [`train`]: l1 loss, Adam, cosine annealing with warm restarts and
//!   the training loop.
//! - [`metrics`]: PSNR and SSIM on the luma plane.
//! - [`cli`]: the `fdan` command line front end.

pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod profiler;
pub mod train;

pub use error::{Error, Result};
pub use model::{build_fdan, Fdan, FdanConfig, ParamStore};
pub use nn::{Rng, Scalar, Tensor};
