//! Soft actor-critic over the factored discrete valve-action space, trained
//! entirely on roll-outs inside the learned dynamics model with speed
//! augmentation.

mod ckpt;
mod nets;
mod replay;
mod sac;
mod train;

pub use ckpt::{load_policy, save_policy};
pub use nets::{Critics, Policy};
pub use replay::{ReplayBuffer, Transition};
pub use sac::{
    actor_update, actor_update_with, bellman_target, critic_update, soft_value_target,
    ExpectationMode, SacConfig,
};
pub use train::{
    curves_to_csv, episodes_to_csv, train_policy, CurveRow, EpisodeStat, PolicyError,
    PolicyTrainOutput,
};
