//! Structure of the learned dynamics model: the dynamic-variable vector, the
//! causal input graph of the four sub-modules, network sizes, and per-channel
//! normalization statistics.

use crate::data::Trajectory;
use crate::mdp::{Observation, NUM_CHANNELS};
use serde::{Deserialize, Serialize};

/// Dimension of the predicted dynamic-variable vector
/// d = (p1..p4, w1..w4, pitch/roll/yaw rates, ax, ay, az, v).
pub const D_DIM: usize = 15;

/// Observation channel backing each entry of the d vector.
pub const D_CHANNELS: [usize; D_DIM] = [11, 12, 13, 14, 1, 2, 3, 4, 8, 9, 10, 5, 6, 7, 0];

/// Offsets of each sub-module's block within the d vector.
pub const PRESSURE_BLOCK: std::ops::Range<usize> = 0..4;
pub const WHEEL_BLOCK: std::ops::Range<usize> = 4..8;
pub const BODY_BLOCK: std::ops::Range<usize> = 8..14;
pub const VEHICLE_BLOCK: std::ops::Range<usize> = 14..15;

/// The four prediction sub-modules, in forward-chain order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Pressure,
    WheelSpeed,
    BodyMotion,
    VehicleSpeed,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 4] = [
        ModuleKind::Pressure,
        ModuleKind::WheelSpeed,
        ModuleKind::BodyMotion,
        ModuleKind::VehicleSpeed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModuleKind::Pressure => "pressure",
            ModuleKind::WheelSpeed => "wheel_speed",
            ModuleKind::BodyMotion => "body_motion",
            ModuleKind::VehicleSpeed => "vehicle_speed",
        }
    }

    pub fn block(self) -> std::ops::Range<usize> {
        match self {
            ModuleKind::Pressure => PRESSURE_BLOCK,
            ModuleKind::WheelSpeed => WHEEL_BLOCK,
            ModuleKind::BodyMotion => BODY_BLOCK,
            ModuleKind::VehicleSpeed => VEHICLE_BLOCK,
        }
    }

    pub fn out_dim(self) -> usize {
        self.block().len()
    }

    /// Width of the side input joined after the recurrent stage.
    pub fn extra_dim(self) -> usize {
        match self {
            ModuleKind::Pressure => 16,   // joint-action one-hot
            ModuleKind::WheelSpeed => 4,  // predicted next pressures
            ModuleKind::BodyMotion => 4,  // predicted next wheel speeds
            ModuleKind::VehicleSpeed => 3, // predicted next accelerations
        }
    }
}

/// Which observation channels one sub-module's recurrent stage reads, and
/// whether its mean head predicts a residual on the newest frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleInputs {
    pub window_channels: Vec<usize>,
    pub residual: bool,
}

/// The causal input graph of the whole model. The default follows the
/// physical actuation chain valve -> pressure -> wheel -> body -> speed:
/// each module's recurrent stage sees only its declared channel windows,
/// and upstream predictions join as side inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub pressure: ModuleInputs,
    pub wheel_speed: ModuleInputs,
    pub body_motion: ModuleInputs,
    pub vehicle_speed: ModuleInputs,
}

impl Default for CausalGraph {
    fn default() -> Self {
        Self {
            // p-window + brake-pedal window; action joins as a side input.
            pressure: ModuleInputs {
                window_channels: vec![11, 12, 13, 14, 15],
                residual: true,
            },
            // w-window + v-window; predicted pressure joins as a side input.
            wheel_speed: ModuleInputs {
                window_channels: vec![1, 2, 3, 4, 0],
                residual: true,
            },
            // w-window, v-window, steering window; predicted wheel speeds join.
            body_motion: ModuleInputs {
                window_channels: vec![1, 2, 3, 4, 0, 17],
                residual: false,
            },
            // v-window; predicted accelerations join as a side input.
            vehicle_speed: ModuleInputs {
                window_channels: vec![0],
                residual: true,
            },
        }
    }
}

impl CausalGraph {
    pub fn inputs(&self, kind: ModuleKind) -> &ModuleInputs {
        match kind {
            ModuleKind::Pressure => &self.pressure,
            ModuleKind::WheelSpeed => &self.wheel_speed,
            ModuleKind::BodyMotion => &self.body_motion,
            ModuleKind::VehicleSpeed => &self.vehicle_speed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for kind in ModuleKind::ALL {
            let m = self.inputs(kind);
            if m.window_channels.is_empty() {
                return Err(format!("{} has no window channels", kind.name()));
            }
            for c in &m.window_channels {
                if *c >= NUM_CHANNELS {
                    return Err(format!("{} channel {c} out of range", kind.name()));
                }
            }
            if kind == ModuleKind::BodyMotion && m.residual {
                return Err("body_motion cannot be residual: its own channels are not inputs".into());
            }
        }
        Ok(())
    }

    /// Channels whose windows must be maintained during a roll-out.
    pub fn rollout_channels(&self) -> Vec<usize> {
        let mut set = std::collections::BTreeSet::new();
        for kind in ModuleKind::ALL {
            set.extend(self.inputs(kind).window_channels.iter().copied());
        }
        set.into_iter().collect()
    }
}

/// Recurrent/fully-connected widths and dropout of every sub-module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub gru_width: usize,
    pub fc1_width: usize,
    pub fc2_width: usize,
    pub dropout: f64,
}

impl NetConfig {
    /// Reference sizes: GRU(128) + FC(128, 128), dropout 0.1.
    pub fn paper() -> Self {
        Self {
            gru_width: 128,
            fc1_width: 128,
            fc2_width: 128,
            dropout: 0.1,
        }
    }

    /// Desk-scale sizes for fast runs: GRU(32) + FC(64, 64).
    pub fn desk() -> Self {
        Self {
            gru_width: 32,
            fc1_width: 64,
            fc2_width: 64,
            dropout: 0.1,
        }
    }
}

/// Per-channel normalization statistics, computed on the training split and
/// frozen. Constant channels get a floor standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-3;

impl ChannelStats {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; NUM_CHANNELS],
            std: vec![1.0; NUM_CHANNELS],
        }
    }

    pub fn from_trajectories(trajs: &[Trajectory]) -> Self {
        let mut mean = vec![0.0; NUM_CHANNELS];
        let mut count = 0usize;
        for t in trajs {
            for rec in &t.records {
                let a = rec.obs.to_array();
                for (m, v) in mean.iter_mut().zip(a.iter()) {
                    *m += *v;
                }
                count += 1;
            }
        }
        let n = count.max(1) as f64;
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; NUM_CHANNELS];
        for t in trajs {
            for rec in &t.records {
                let a = rec.obs.to_array();
                for (s, (v, m)) in var.iter_mut().zip(a.iter().zip(mean.iter())) {
                    let d = *v - *m;
                    *s += d * d;
                }
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(STD_FLOOR))
            .collect();
        Self { mean, std }
    }

    pub fn normalize(&self, channel: usize, value: f64) -> f64 {
        (value - self.mean[channel]) / self.std[channel]
    }

    pub fn denormalize(&self, channel: usize, z: f64) -> f64 {
        z * self.std[channel] + self.mean[channel]
    }

    /// Normalizes an observation into channel order.
    pub fn normalize_frame(&self, obs: &Observation) -> [f64; NUM_CHANNELS] {
        let mut a = obs.to_array();
        for (c, v) in a.iter_mut().enumerate() {
            *v = (*v - self.mean[c]) / self.std[c];
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_graph_is_valid_and_channels_cover_rollout_needs() {
        let g = CausalGraph::default();
        g.validate().unwrap();
        let ch = g.rollout_channels();
        // v, w1..w4, p1..p4, f_brake, delta
        assert_eq!(ch, vec![0, 1, 2, 3, 4, 11, 12, 13, 14, 15, 17]);
    }

    #[test]
    fn d_layout_is_consistent() {
        assert_eq!(D_CHANNELS.len(), D_DIM);
        let mut total = 0;
        for kind in ModuleKind::ALL {
            assert_eq!(kind.block().len(), kind.out_dim());
            total += kind.out_dim();
        }
        assert_eq!(total, D_DIM);
        // Pressure block maps to pressure channels, vehicle block to v.
        assert_eq!(&D_CHANNELS[PRESSURE_BLOCK], &[11, 12, 13, 14]);
        assert_eq!(&D_CHANNELS[VEHICLE_BLOCK], &[0]);
    }

    #[test]
    fn residual_body_motion_rejected() {
        let mut g = CausalGraph::default();
        g.body_motion.residual = true;
        assert!(g.validate().is_err());
    }

    #[test]
    fn stats_floor_constant_channels() {
        use crate::data::StepRecord;
        use crate::mdp::JointAction;
        let mut records = Vec::new();
        for i in 0..50 {
            let mut o = Observation::zeros();
            o.v_kmh = 40.0 - i as f64 * 0.5;
            records.push(StepRecord {
                t_s: i as f64 * 0.02,
                obs: o,
                action: JointAction::no_control(),
            });
        }
        let traj = Trajectory {
            scenario: "s".into(),
            policy: "rule".into(),
            seed: 0,
            onset_index: 0,
            records,
        };
        let stats = ChannelStats::from_trajectories(&[traj]);
        // a_z is constant zero: floored std, exact zero z-scores.
        assert_eq!(stats.std[7], STD_FLOOR);
        assert_eq!(stats.normalize(7, 0.0), 0.0);
        // v varies: sane round trip.
        let z = stats.normalize(0, 33.0);
        assert!((stats.denormalize(0, z) - 33.0).abs() < 1e-9);
    }
}
