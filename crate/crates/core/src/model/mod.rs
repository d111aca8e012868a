//! The FDAN network: feature decomposition blocks, hierarchical groups
//! with spatial attention, the full super-resolution network, its
//! parameter store and checkpoint format.

mod checkpoint;
mod config;
mod gradcheck;
mod network;
mod params;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub(crate) use checkpoint::{read_container, write_container, Entry};
pub use config::{FdanConfig, SUPPORTED_SCALES};
pub use gradcheck::{check_param_gradients, CoordinateCheck, ParamGradCheck};
pub use network::{build_fdan, ConvLayer, Esa, Fdan, Fdb, Hfdg, ESA_MIN_SIZE};
pub use params::{ParamEntry, ParamId, ParamStore};
