//! Driver input traces: pedals and steering.

use serde::{Deserialize, Serialize};

/// Steering-wheel angle as a function of time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SteeringProfile {
    Constant {
        value_rad: f64,
    },
    Ramp {
        from_rad: f64,
        to_rad: f64,
        start_s: f64,
        end_s: f64,
    },
}

impl SteeringProfile {
    pub fn angle(&self, t_s: f64) -> f64 {
        match *self {
            SteeringProfile::Constant { value_rad } => value_rad,
            SteeringProfile::Ramp {
                from_rad,
                to_rad,
                start_s,
                end_s,
            } => {
                if t_s <= start_s {
                    from_rad
                } else if t_s >= end_s {
                    to_rad
                } else {
                    let frac = (t_s - start_s) / (end_s - start_s);
                    from_rad + frac * (to_rad - from_rad)
                }
            }
        }
    }
}

/// Pedal and steering traces with a step brake application at onset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    /// Brake pedal force after onset, N.
    pub brake_force_n: f64,
    /// Accelerator pedal force (held constant; zero in braking scenarios), N.
    pub accel_force_n: f64,
    pub steering: SteeringProfile,
    /// Brake application time, s.
    pub brake_onset_s: f64,
    /// Master-cylinder pressure produced per newton of pedal force, MPa/N.
    pub pedal_gain_mpa_per_n: f64,
}

impl DriverProfile {
    /// Emergency stop: pedal force produces a master pressure of 18 MPa,
    /// comfortably above the 16 MPa emergency threshold.
    pub fn emergency(onset_s: f64, steering: SteeringProfile) -> Self {
        Self {
            brake_force_n: 450.0,
            accel_force_n: 0.0,
            steering,
            brake_onset_s: onset_s,
            pedal_gain_mpa_per_n: 0.04,
        }
    }

    pub fn brake_force(&self, t_s: f64) -> f64 {
        if t_s >= self.brake_onset_s {
            self.brake_force_n
        } else {
            0.0
        }
    }

    pub fn accel_force(&self, _t_s: f64) -> f64 {
        self.accel_force_n
    }

    pub fn steering_angle(&self, t_s: f64) -> f64 {
        self.steering.angle(t_s)
    }

    /// Master-cylinder pressure at time `t`, MPa.
    pub fn master_pressure(&self, t_s: f64) -> f64 {
        self.brake_force(t_s) * self.pedal_gain_mpa_per_n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emergency_profile_exceeds_16_mpa_after_onset() {
        let d = DriverProfile::emergency(0.5, SteeringProfile::Constant { value_rad: 0.0 });
        assert_eq!(d.master_pressure(0.0), 0.0);
        assert_eq!(d.master_pressure(0.49), 0.0);
        assert!(d.master_pressure(0.5) >= 16.0);
        assert!(d.master_pressure(3.0) >= 16.0);
    }

    #[test]
    fn ramp_steering_interpolates() {
        let s = SteeringProfile::Ramp {
            from_rad: 0.0,
            to_rad: 0.4,
            start_s: 1.0,
            end_s: 2.0,
        };
        assert_eq!(s.angle(0.5), 0.0);
        assert!((s.angle(1.5) - 0.2).abs() < 1e-12);
        assert_eq!(s.angle(3.0), 0.4);
    }
}
