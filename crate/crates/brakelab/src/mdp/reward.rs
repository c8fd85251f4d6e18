//! Reward, expected yaw rate, and episode termination.

use crate::sim::VehicleParams;
use serde::{Deserialize, Serialize};

/// Coefficients and thresholds of the braking reward.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Speed-penalty coefficient (per km/h).
    pub beta1: f64,
    /// Yaw-deviation coefficient (per rad/s).
    pub beta2: f64,
    /// Slip-band violation coefficient (per wheel).
    pub beta3: f64,
    /// Lower edge of the safe slip band.
    pub slip_low: f64,
    /// Upper edge of the safe slip band.
    pub slip_high: f64,
    /// Termination speed threshold, km/h.
    pub v_eps_kmh: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta1: 0.025,
            beta2: 0.5,
            beta3: 0.2,
            slip_low: 0.1,
            slip_high: 0.2,
            v_eps_kmh: 2.0,
        }
    }
}

/// Next-step quantities the reward is evaluated on: model predictions during
/// training, simulator truth during evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RewardInputs {
    /// Predicted next vehicle speed, km/h.
    pub v_next_kmh: f64,
    /// Predicted next yaw rate, rad/s.
    pub yaw_rate_next: f64,
    /// Next-step slip ratios; `None` where undefined (contributes nothing).
    pub slips: [Option<f64>; 4],
}

/// The three reward terms, each already scaled by its coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardTerms {
    pub speed: f64,
    pub yaw: f64,
    pub slip: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.speed + self.yaw + self.slip
    }
}

/// Braking reward: speed penalty + yaw-tracking penalty + slip-band penalty.
/// Always non-positive; zero only at rest with matched yaw and in-band slips.
pub fn reward(inputs: &RewardInputs, expected_yaw: f64, cfg: &RewardConfig) -> RewardTerms {
    let mut violations = 0.0;
    for s in inputs.slips.iter().flatten() {
        if *s < cfg.slip_low || *s > cfg.slip_high {
            violations += 1.0;
        }
    }
    RewardTerms {
        speed: -cfg.beta1 * inputs.v_next_kmh,
        yaw: -cfg.beta2 * (inputs.yaw_rate_next - expected_yaw).abs(),
        slip: -cfg.beta3 * violations,
    }
}

/// Kinematic yaw rate the driver expects from the steering input:
/// `(v/3.6) * tan(delta / N_s) / L`, valid at low speeds and small angles.
pub fn expected_yaw_rate(
    v_kmh: f64,
    delta_rad: f64,
    params: &VehicleParams,
) -> Result<f64, YawDomainError> {
    let road_angle = delta_rad / params.steering_ratio;
    if road_angle.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(YawDomainError { road_angle });
    }
    Ok((v_kmh / 3.6) * road_angle.tan() / params.wheelbase_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawDomainError {
    pub road_angle: f64,
}

impl std::fmt::Display for YawDomainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "road wheel angle {} rad is outside (-pi/2, pi/2)",
            self.road_angle
        )
    }
}

impl std::error::Error for YawDomainError {}

/// An episode ends once the vehicle speed falls to the threshold (inclusive).
pub fn terminated(v_kmh: f64, cfg: &RewardConfig) -> bool {
    v_kmh <= cfg.v_eps_kmh
}
