//! Dense tensors, layer kernels and reverse-mode differentiation.

mod gradcheck;
mod graph;
mod init;
pub mod kernels;
mod rng;
mod scalar;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, relative_error, FD_DEFAULT_EPS};
pub use graph::{Eval, Graph};
pub use init::{kaiming_init, Activation, ConvSpec};
pub use kernels::{
    bilinear_resize, channel_concat, channel_split, conv2d, max_pool, pixel_shuffle,
    pixel_unshuffle,
};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
