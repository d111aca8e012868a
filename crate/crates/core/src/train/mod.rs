//! ℓ1 training with Adam and cosine-annealed learning rates.

mod config;
mod optim;
mod schedule;
mod trainer;

pub use config::TrainConfig;
pub use optim::{adam_step, OptimState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use schedule::{cosine_lr, LrSchedule};
pub use trainer::{l1_loss, train, TrainOutcome, Trainer, TRAIN_STATE_MAGIC};
