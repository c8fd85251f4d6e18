//! The learned vehicle dynamics model: four causal sub-modules (pressure,
//! wheel speed, body motion, vehicle speed), each a GRU over its input
//! channel windows with a Gaussian head, trained with a mixed single-step +
//! roll-out likelihood, plus the roll-out engine that splices operational
//! inputs from the dataset.

mod ckpt;
mod net;
mod rollout;
mod spec;
mod train;

pub use ckpt::{load_model, save_model};
pub use net::{
    compose_next_observation, ChainOutput, DynamicsModel, GaussianPrediction, ModelError,
};
pub use rollout::{
    evaluate_rollouts, rollout_eval_to_csv, rollout_on_trajectory, rollout_speed_mae,
    RolloutConfig, RolloutTrace, ValRollout,
};
pub use spec::{
    CausalGraph, ChannelStats, ModuleInputs, ModuleKind, NetConfig, BODY_BLOCK, D_CHANNELS, D_DIM,
    PRESSURE_BLOCK, VEHICLE_BLOCK, WHEEL_BLOCK,
};
pub use train::{mean_single_step_nll, train_model, EpochLoss, LossHistory, TrainConfig};
