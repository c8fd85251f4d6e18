//! Decision-process layer shared by data collection, model learning, and
//! policy optimization: observation frames and stacking, the factored
//! discrete action space, slip ratio, expected yaw rate, reward, termination.

mod action;
mod obs;
mod reward;

pub use action::{JointAction, WheelAction, NUM_JOINT_ACTIONS, NUM_WHEEL_ACTIONS};
pub use obs::{
    stack, Observation, StackedState, CH_A, CH_DELTA, CH_FACC, CH_FBRAKE, CH_P, CH_RATE, CH_V,
    CH_W, NUM_CHANNELS, STACK_LEN,
};
pub use reward::{expected_yaw_rate, reward, terminated, RewardConfig, RewardInputs, RewardTerms};

/// Vehicle speeds below this are too small for a meaningful slip ratio (km/h).
pub const V_MIN_GUARD_KMH: f64 = 1.0;

/// Slip ratio of one wheel: `1 - w/v`, clamped to `[0, 1]`.
///
/// Returns `None` when the vehicle speed is at or below the guard threshold,
/// where the ratio is undefined; callers must branch on it.
pub fn slip_ratio(v_kmh: f64, w_kmh: f64) -> Option<f64> {
    if v_kmh <= V_MIN_GUARD_KMH {
        return None;
    }
    Some((1.0 - w_kmh / v_kmh).clamp(0.0, 1.0))
}

/// Slip ratios for all four wheels of an observation.
pub fn slip_ratios(obs: &Observation) -> [Option<f64>; 4] {
    [
        slip_ratio(obs.v_kmh, obs.wheel_kmh[0]),
        slip_ratio(obs.v_kmh, obs.wheel_kmh[1]),
        slip_ratio(obs.v_kmh, obs.wheel_kmh[2]),
        slip_ratio(obs.v_kmh, obs.wheel_kmh[3]),
    ]
}
