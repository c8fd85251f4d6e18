//! Offline corpus collection and persistence: the rule-based and random
//! collection policies, trajectory recording at 50 Hz, and a JSON Lines
//! dataset format with a stable directory layout.

mod collect;
mod format;
mod trajectory;

pub use collect::{collect, collect_corpus, CollectPolicy, CollectionConfig};
pub use format::{load_trajectory, read_trajectory, save_trajectory, DataError, SCHEMA_VERSION};
pub use trajectory::{Dataset, StepRecord, Trajectory};

use crate::mdp::{JointAction, WheelAction};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Rule-based collection policy: per-wheel pressure control from the slip
/// ratio. Undefined slips (near-stopped vehicle) map to no-control.
pub fn rule_policy(slips: [Option<f64>; 4]) -> JointAction {
    let mut wheels = [WheelAction::NoControl; 4];
    for (i, slip) in slips.iter().enumerate() {
        wheels[i] = match slip {
            None => WheelAction::NoControl,
            Some(eta) if *eta < 0.03 => WheelAction::NoControl,
            Some(eta) if *eta < 0.1 => WheelAction::Increase,
            Some(eta) if *eta < 0.2 => WheelAction::Hold,
            Some(_) => WheelAction::Decrease,
        };
    }
    JointAction(wheels)
}

/// Random collection policy: uniform over all 256 joint actions.
pub fn random_policy(rng: &mut ChaCha12Rng) -> JointAction {
    JointAction::decode(rng.random_range(0..256u16) as u8)
}
