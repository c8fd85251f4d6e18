//! Explicit-Euler vehicle dynamics: per-wheel rotation, longitudinal motion,
//! and a reduced-order yaw model.
//!
//! The yaw moment combines differential longitudinal force across the track
//! with a linear steering moment that relaxes the yaw rate toward the
//! kinematic value expected from the steering input. The steering moment is
//! weighted by a lateral-grip factor `mean((1 - eta)^2)`: locked wheels lose
//! directional stability, so split-friction braking with locked wheels
//! integrates the asymmetric moment unchecked while in-band slip control
//! holds the vehicle close to the driver-expected heading.
//!
//! All four-wheel reductions are summed per axle pair so that mirroring the
//! surface left/right negates the yaw trajectory bit-exactly.

use super::{DriverProfile, SurfaceMap, VehicleParams};
use crate::mdp::JointAction;
use serde::{Deserialize, Serialize};

const G_MPS2: f64 = 9.81;

/// Tunables of the reduced-order dynamics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub hcu: super::HcuConfig,
    /// Linear steering-moment gain toward the kinematic yaw rate, N*m*s/rad.
    pub yaw_tracking_nms_per_rad: f64,
    /// Below this vehicle speed tire forces are gated off, km/h.
    pub stop_speed_kmh: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            hcu: super::HcuConfig::default(),
            yaw_tracking_nms_per_rad: 200_000.0,
            stop_speed_kmh: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// A non-finite value appeared while integrating.
    NonFinite { control_step: Option<u64> },
}

impl SimError {
    pub fn at_step(self, step: u64) -> SimError {
        match self {
            SimError::NonFinite { .. } => SimError::NonFinite {
                control_step: Some(step),
            },
        }
    }
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::NonFinite { control_step } => match control_step {
                Some(s) => write!(f, "simulation produced a non-finite state at control step {s}"),
                None => write!(f, "simulation produced a non-finite state"),
            },
        }
    }
}

impl std::error::Error for SimError {}

/// Odd-symmetric tangent so mirrored steering produces exactly negated yaw.
fn tan_odd(x: f64) -> f64 {
    if x < 0.0 {
        -(-x).tan()
    } else {
        x.tan()
    }
}

/// Integrates one physics sub-step of length `dt_s`.
pub fn physics_step(
    state: &super::SimState,
    actions: JointAction,
    driver: &DriverProfile,
    surface: &SurfaceMap,
    params: &VehicleParams,
    cfg: &PhysicsConfig,
    dt_s: f64,
) -> Result<super::SimState, SimError> {
    if !state.is_finite() {
        return Err(SimError::NonFinite { control_step: None });
    }
    let t = state.time_s;
    let m = params.curb_mass_kg;
    let r = params.wheel_radius_m;
    let moving = state.v_kmh > cfg.stop_speed_kmh;
    let v_ms = state.v_kmh / 3.6;

    // Hydraulics.
    let p_master = driver.master_pressure(t);
    let mut pressure = [0.0; 4];
    for i in 0..4 {
        pressure[i] = super::hcu_step(
            state.pressure_mpa[i],
            actions.0[i],
            p_master,
            dt_s,
            &cfg.hcu,
        );
    }

    // Normal loads: static split plus longitudinal load transfer from the
    // previous step's acceleration. Front and rear always sum to m*g.
    let transfer = m * (-state.accel[0]) * params.cg_height_m / params.wheelbase_m;
    let front_total = (m * G_MPS2 * params.front_axle_fraction + transfer).clamp(0.0, m * G_MPS2);
    let rear_total = m * G_MPS2 - front_total;
    let fz = [
        front_total * 0.5,
        front_total * 0.5,
        rear_total * 0.5,
        rear_total * 0.5,
    ];

    // Per-wheel slip and road force.
    let x_front = state.x_m + params.cg_to_front_m() * state.heading_rad.cos();
    let x_rear = state.x_m - params.cg_to_rear_m() * state.heading_rad.cos();
    let wheel_x = [x_front, x_front, x_rear, x_rear];
    let mut slip = [0.0; 4];
    let mut force = [0.0; 4];
    for i in 0..4 {
        if moving {
            slip[i] = (1.0 - state.wheel_kmh[i] / state.v_kmh).clamp(0.0, 1.0);
            force[i] = surface
                .mu(i, wheel_x[i], slip[i])
                .map_err(|_| SimError::NonFinite { control_step: None })?
                * fz[i];
        }
    }

    // Vehicle speed: every road force opposes motion.
    let total_force = (force[0] + force[1]) + (force[2] + force[3]);
    let v_dot_ms2 = if moving { -total_force / m } else { 0.0 };
    let mut v_next = state.v_kmh + 3.6 * dt_s * v_dot_ms2;
    if v_next <= cfg.stop_speed_kmh {
        v_next = 0.0;
    }

    // Wheel rotation: road force spins the wheel up, brake torque slows it.
    // Without drive torque a wheel cannot exceed the vehicle speed.
    let mut wheels = [0.0; 4];
    for i in 0..4 {
        let brake_torque = params.brake_gain_nm_per_mpa * pressure[i];
        let w_dot_kmh = 3.6 * r * (r * force[i] - brake_torque) / params.wheel_inertia_kgm2;
        wheels[i] = (state.wheel_kmh[i] + dt_s * w_dot_kmh).clamp(0.0, v_next);
    }

    // Yaw: differential braking moment plus grip-weighted steering moment.
    let grip = {
        let g = |e: f64| (1.0 - e) * (1.0 - e);
        ((g(slip[0]) + g(slip[1])) + (g(slip[2]) + g(slip[3]))) * 0.25
    };
    let road_angle = (driver.steering_angle(t) / params.steering_ratio).clamp(-1.0, 1.0);
    let yaw_kin = v_ms * tan_odd(road_angle) / params.wheelbase_m;
    let left = force[0] + force[2];
    let right = force[1] + force[3];
    let moment = 0.5 * params.track_width_m * (left - right)
        + cfg.yaw_tracking_nms_per_rad * grip * (yaw_kin - state.yaw_rate);
    let yaw_acc = moment / params.yaw_inertia_kgm2;
    let yaw_rate_next = state.yaw_rate + dt_s * yaw_acc;
    let heading_next = state.heading_rad + dt_s * state.yaw_rate;

    let next = super::SimState {
        x_m: state.x_m + dt_s * v_ms * state.heading_rad.cos(),
        y_m: state.y_m + dt_s * v_ms * state.heading_rad.sin(),
        heading_rad: heading_next,
        v_kmh: v_next,
        wheel_kmh: wheels,
        pressure_mpa: pressure,
        yaw_rate: yaw_rate_next,
        pitch_rate: 0.0,
        roll_rate: 0.0,
        accel: [v_dot_ms2, (v_next / 3.6) * yaw_rate_next, 0.0],
        master_pressure_mpa: p_master,
        time_s: t + dt_s,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(SimError::NonFinite { control_step: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{slip_ratio, JointAction};
    use crate::sim::{
        FrictionTriple, SensorNoise, SimState, Simulation, SteeringProfile, SurfaceMap,
        SurfaceSegment, PHYSICS_DT_S,
    };

    fn no_steer() -> SteeringProfile {
        SteeringProfile::Constant { value_rad: 0.0 }
    }

    fn sim_on(surface: SurfaceMap, v0: f64, steering: SteeringProfile, seed: u64) -> Simulation {
        Simulation::new(
            SimState::rolling(v0, 0.0),
            VehicleParams::default(),
            surface,
            DriverProfile::emergency(0.1, steering),
            PhysicsConfig::default(),
            SensorNoise::default(),
            seed,
        )
    }

    #[test]
    fn rest_is_equilibrium() {
        let state = SimState::at_rest();
        let mut driver = DriverProfile::emergency(1e9, no_steer());
        driver.brake_force_n = 0.0;
        let next = physics_step(
            &state,
            JointAction::no_control(),
            &driver,
            &SurfaceMap::uniform(FrictionTriple::dry()),
            &VehicleParams::default(),
            &PhysicsConfig::default(),
            PHYSICS_DT_S,
        )
        .unwrap();
        let mut expected = state;
        expected.time_s += PHYSICS_DT_S;
        assert_eq!(next, expected);
    }

    #[test]
    fn one_step_deceleration_matches_closed_form() {
        // Friction forced to 1.0 at any positive slip: total force = m*g, so
        // one Euler sub-step drops v by exactly g*dt*3.6 km/h.
        let unit_mu = FrictionTriple {
            c1: 1.0,
            c2: 1e9,
            c3: 0.0,
        };
        let mut state = SimState::rolling(40.0, 0.0);
        // Slightly slower wheels so slip > 0.
        state.wheel_kmh = [39.6; 4];
        let driver = DriverProfile::emergency(0.0, no_steer());
        let next = physics_step(
            &state,
            JointAction::no_control(),
            &driver,
            &SurfaceMap::uniform(unit_mu),
            &VehicleParams::default(),
            &PhysicsConfig::default(),
            PHYSICS_DT_S,
        )
        .unwrap();
        let dv = state.v_kmh - next.v_kmh;
        assert!((dv - 9.81 * PHYSICS_DT_S * 3.6).abs() < 1e-12, "dv = {dv}");
    }

    #[test]
    fn braking_speed_never_increases() {
        let mut sim = sim_on(
            SurfaceMap::uniform(FrictionTriple::dry()),
            40.0,
            no_steer(),
            0,
        );
        let mut prev = sim.state.v_kmh;
        for step in 0..300 {
            let action = if step % 3 == 0 {
                JointAction::all_increase()
            } else {
                JointAction::decode((step * 37 % 256) as u8)
            };
            sim.control_step(action).unwrap();
            assert!(sim.state.v_kmh <= prev + 1e-12);
            prev = sim.state.v_kmh;
        }
    }

    #[test]
    fn pressures_stay_within_master_bounds() {
        let mut sim = sim_on(
            SurfaceMap::uniform(FrictionTriple::wet_plastic()),
            40.0,
            no_steer(),
            1,
        );
        for step in 0..400 {
            sim.control_step(JointAction::decode((step * 29 % 256) as u8))
                .unwrap();
            let master = sim.state.master_pressure_mpa;
            for p in sim.state.pressure_mpa {
                assert!(p >= 0.0 && p <= master + 1e-12);
            }
        }
    }

    #[test]
    fn straight_symmetric_braking_produces_no_yaw() {
        let mut sim = sim_on(
            SurfaceMap::uniform(FrictionTriple::dry()),
            40.0,
            no_steer(),
            2,
        );
        for _ in 0..300 {
            sim.control_step(JointAction::all_increase()).unwrap();
            assert_eq!(sim.state.yaw_rate, 0.0);
            assert_eq!(sim.state.heading_rad, 0.0);
        }
    }

    #[test]
    fn mirrored_surface_and_steering_negate_yaw_exactly() {
        let split = SurfaceMap {
            base: FrictionTriple::dry(),
            segments: vec![SurfaceSegment {
                from_m: -1e9,
                to_m: 1e9,
                side: crate::sim::Side::Right,
                triple: FrictionTriple::wet_plastic(),
            }],
            wheel_scale: [1.0; 4],
        };
        let steer = SteeringProfile::Constant { value_rad: 0.3 };
        let steer_neg = SteeringProfile::Constant { value_rad: -0.3 };
        let mut a = sim_on(split.clone(), 60.0, steer, 3);
        let mut b = sim_on(split.mirrored(), 60.0, steer_neg, 3);
        for _ in 0..400 {
            a.control_step(JointAction::all_increase()).unwrap();
            b.control_step(JointAction::all_increase()).unwrap();
            assert_eq!(a.state.yaw_rate, -b.state.yaw_rate);
            assert_eq!(a.state.heading_rad, -b.state.heading_rad);
            assert_eq!(a.state.v_kmh, b.state.v_kmh);
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_trajectories() {
        let run = || {
            let mut sim = sim_on(
                SurfaceMap::uniform(FrictionTriple::wet_plastic()),
                55.0,
                no_steer(),
                7,
            );
            let mut trace = Vec::new();
            for step in 0..250 {
                sim.control_step(JointAction::decode((step * 13 % 256) as u8))
                    .unwrap();
                trace.push(sim.state.v_kmh.to_bits());
                trace.push(sim.state.yaw_rate.to_bits());
                for w in sim.state.wheel_kmh {
                    trace.push(w.to_bits());
                }
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn icy_pressure_increase_locks_a_wheel_within_a_second() {
        let mut sim = sim_on(SurfaceMap::uniform(FrictionTriple::icy()), 55.0, no_steer(), 4);
        // DriverProfile onset is 0.1 s; hold pressure-increase for 1 s after.
        let mut locked = false;
        for _ in 0..55 {
            sim.control_step(JointAction::all_increase()).unwrap();
            if sim.state.time_s < 0.1 {
                continue;
            }
            let v = sim.state.v_kmh;
            for w in sim.state.wheel_kmh {
                if let Some(eta) = slip_ratio(v, w) {
                    if eta >= 0.95 {
                        locked = true;
                    }
                }
            }
        }
        assert!(locked, "no wheel reached slip 0.95 within 1 s on ice");
    }

    #[test]
    fn non_finite_state_is_reported() {
        let mut state = SimState::rolling(40.0, 0.0);
        state.v_kmh = f64::NAN;
        let err = physics_step(
            &state,
            JointAction::no_control(),
            &DriverProfile::emergency(0.0, no_steer()),
            &SurfaceMap::uniform(FrictionTriple::dry()),
            &VehicleParams::default(),
            &PhysicsConfig::default(),
            PHYSICS_DT_S,
        );
        assert!(err.is_err());
    }
}
