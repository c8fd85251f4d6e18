//! Discrete per-wheel valve actions and the joint action codec.

use serde::{Deserialize, Serialize};

pub const NUM_WHEEL_ACTIONS: usize = 4;
pub const NUM_JOINT_ACTIONS: usize = 256;

/// One wheel's pressure-control instruction for the hydraulic control unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum WheelAction {
    /// c0: pressure maintenance (braking mode, both valves closed).
    Hold = 0,
    /// c1: pressure increase (braking mode, inlet open).
    Increase = 1,
    /// c2: pressure decrease (braking mode, outlet open).
    Decrease = 2,
    /// c3: no pressure control (switching valve in normal mode).
    NoControl = 3,
}

impl WheelAction {
    pub const ALL: [WheelAction; 4] = [
        WheelAction::Hold,
        WheelAction::Increase,
        WheelAction::Decrease,
        WheelAction::NoControl,
    ];

    pub fn from_index(i: usize) -> Option<WheelAction> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Joint action over the four wheels (FL, FR, RL, RR).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub [WheelAction; 4]);

impl JointAction {
    /// All four wheels in no-control mode; the pre-braking idle action.
    pub fn no_control() -> Self {
        JointAction([WheelAction::NoControl; 4])
    }

    /// All four wheels increasing pressure.
    pub fn all_increase() -> Self {
        JointAction([WheelAction::Increase; 4])
    }

    /// Encodes to 0..=255, wheel 0 in the least-significant base-4 digit.
    pub fn encode(self) -> u8 {
        let u = self.0;
        (u[0].index() + 4 * u[1].index() + 16 * u[2].index() + 64 * u[3].index()) as u8
    }

    pub fn decode(code: u8) -> Self {
        let c = code as usize;
        JointAction([
            WheelAction::from_index(c % 4).unwrap(),
            WheelAction::from_index((c / 4) % 4).unwrap(),
            WheelAction::from_index((c / 16) % 4).unwrap(),
            WheelAction::from_index((c / 64) % 4).unwrap(),
        ])
    }

    /// Iterator over all 256 joint actions in code order.
    pub fn all() -> impl Iterator<Item = JointAction> {
        (0u16..256).map(|c| JointAction::decode(c as u8))
    }

    /// 16-dimensional one-hot-per-wheel encoding used by critics.
    pub fn one_hot(self) -> [f64; 16] {
        let mut v = [0.0; 16];
        for (i, u) in self.0.iter().enumerate() {
            v[i * 4 + u.index()] = 1.0;
        }
        v
    }
}
