//! Losses, Adam with proximal ℓ1 on the transfer matrices, cross-domain
//! pairing and the epoch loop.

mod adam;
mod loss;
mod pairing;
mod proximal;
mod trainer;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState, StepScope};
pub use loss::{cross_entropy_loss, joint_loss, logit_cross_entropy};
pub use pairing::{pair_item, pair_source_item, PairingMode};
pub use proximal::{proximal_l1, proximal_l1_in_place, sparsity_ratio};
pub use trainer::{fit, read_history, train_epoch, write_history, EpochStats, TrainConfig, Trainer};
