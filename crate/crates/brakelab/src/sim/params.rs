//! Static vehicle parameters.

use serde::{Deserialize, Serialize};

/// Physical constants of the simulated vehicle. The default profile is a
/// mid-size SUV: 2.680 m wheelbase, 1630 kg curb mass.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase_m: f64,
    pub track_width_m: f64,
    pub curb_mass_kg: f64,
    /// Steering-wheel angle to road-wheel angle ratio.
    pub steering_ratio: f64,
    pub wheel_radius_m: f64,
    pub wheel_inertia_kgm2: f64,
    pub yaw_inertia_kgm2: f64,
    /// Brake torque per unit wheel-cylinder pressure, N*m/MPa.
    pub brake_gain_nm_per_mpa: f64,
    pub cg_height_m: f64,
    /// Fraction of static weight carried by the front axle, in (0, 1).
    pub front_axle_fraction: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase_m: 2.680,
            track_width_m: 1.580,
            curb_mass_kg: 1630.0,
            steering_ratio: 15.9,
            wheel_radius_m: 0.364,
            wheel_inertia_kgm2: 1.2,
            yaw_inertia_kgm2: 2500.0,
            brake_gain_nm_per_mpa: 300.0,
            cg_height_m: 0.55,
            front_axle_fraction: 0.55,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("wheelbase_m", self.wheelbase_m),
            ("track_width_m", self.track_width_m),
            ("curb_mass_kg", self.curb_mass_kg),
            ("steering_ratio", self.steering_ratio),
            ("wheel_radius_m", self.wheel_radius_m),
            ("wheel_inertia_kgm2", self.wheel_inertia_kgm2),
            ("yaw_inertia_kgm2", self.yaw_inertia_kgm2),
            ("brake_gain_nm_per_mpa", self.brake_gain_nm_per_mpa),
            ("cg_height_m", self.cg_height_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if !(self.front_axle_fraction > 0.0 && self.front_axle_fraction < 1.0) {
            return Err(format!(
                "front_axle_fraction must be in (0,1), got {}",
                self.front_axle_fraction
            ));
        }
        Ok(())
    }

    /// Distance from the center of gravity to the front axle, m.
    pub fn cg_to_front_m(&self) -> f64 {
        self.wheelbase_m * (1.0 - self.front_axle_fraction)
    }

    /// Distance from the center of gravity to the rear axle, m.
    pub fn cg_to_rear_m(&self) -> f64 {
        self.wheelbase_m * self.front_axle_fraction
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_matches_vehicle_sheet() {
        let p = VehicleParams::default();
        assert_eq!(p.wheelbase_m, 2.680);
        assert_eq!(p.curb_mass_kg, 1630.0);
        p.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut p = VehicleParams::default();
        p.curb_mass_kg = 0.0;
        assert!(p.validate().is_err());
        let mut p = VehicleParams::default();
        p.front_axle_fraction = 1.0;
        assert!(p.validate().is_err());
    }
}
