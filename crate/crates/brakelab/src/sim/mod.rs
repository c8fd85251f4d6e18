//! Ground-truth vehicle stand-in: four-wheel longitudinal + yaw dynamics,
//! slip-dependent friction, and a hydraulic control unit mapping discrete
//! valve actions to wheel-cylinder pressure changes.
//!
//! Physics integrate with explicit Euler at a 1 ms sub-step; observation and
//! control happen at the 50 Hz (20 ms) boundary. Every operation is a pure
//! function of explicit state plus an explicit RNG, so independent simulation
//! instances may run in parallel.

mod driver;
mod hcu;
mod params;
mod physics;
mod surface;

pub use driver::{DriverProfile, SteeringProfile};
pub use hcu::{hcu_step, HcuConfig};
pub use params::VehicleParams;
pub use physics::{physics_step, PhysicsConfig, SimError};
pub use surface::{friction_mu, FrictionTriple, Side, SurfaceMap, SurfaceSegment};

use crate::mdp::Observation;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Physics sub-step, seconds.
pub const PHYSICS_DT_S: f64 = 0.001;
/// Control/observation period, seconds (50 Hz).
pub const CONTROL_DT_S: f64 = 0.02;
/// Physics sub-steps per control step.
pub const SUBSTEPS_PER_CONTROL: usize = 20;

/// Full simulator state at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimState {
    /// Position, m.
    pub x_m: f64,
    pub y_m: f64,
    /// Heading, rad.
    pub heading_rad: f64,
    /// Vehicle speed, km/h.
    pub v_kmh: f64,
    /// Linear wheel speeds FL, FR, RL, RR, km/h.
    pub wheel_kmh: [f64; 4],
    /// Wheel cylinder pressures, MPa.
    pub pressure_mpa: [f64; 4],
    /// Yaw rate, rad/s.
    pub yaw_rate: f64,
    /// Pitch and roll rates, rad/s; held at zero by this reduced-order model.
    pub pitch_rate: f64,
    pub roll_rate: f64,
    /// Accelerations, m/s^2; a_z fixed at 0 (gravity-removed convention).
    pub accel: [f64; 3],
    /// Master-cylinder pressure, MPa.
    pub master_pressure_mpa: f64,
    /// Simulation time, s.
    pub time_s: f64,
}

impl SimState {
    /// Vehicle at rest at the origin.
    pub fn at_rest() -> Self {
        Self {
            x_m: 0.0,
            y_m: 0.0,
            heading_rad: 0.0,
            v_kmh: 0.0,
            wheel_kmh: [0.0; 4],
            pressure_mpa: [0.0; 4],
            yaw_rate: 0.0,
            pitch_rate: 0.0,
            roll_rate: 0.0,
            accel: [0.0; 3],
            master_pressure_mpa: 0.0,
            time_s: 0.0,
        }
    }

    /// Rolling freely at `v` km/h from longitudinal position `x0`.
    pub fn rolling(v_kmh: f64, x0_m: f64) -> Self {
        let mut s = Self::at_rest();
        s.v_kmh = v_kmh;
        s.wheel_kmh = [v_kmh; 4];
        s.x_m = x0_m;
        s
    }

    pub fn is_finite(&self) -> bool {
        let scalars = [
            self.x_m,
            self.y_m,
            self.heading_rad,
            self.v_kmh,
            self.yaw_rate,
            self.master_pressure_mpa,
            self.time_s,
        ];
        scalars.iter().all(|v| v.is_finite())
            && self.wheel_kmh.iter().all(|v| v.is_finite())
            && self.pressure_mpa.iter().all(|v| v.is_finite())
            && self.accel.iter().all(|v| v.is_finite())
    }
}

/// Optional zero-mean Gaussian sensor noise, per channel group. All-zero
/// sigmas (the default) disable noise entirely.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SensorNoise {
    pub sigma_v: f64,
    pub sigma_w: f64,
    pub sigma_accel: f64,
    pub sigma_rate: f64,
    pub sigma_pressure: f64,
}

impl SensorNoise {
    pub fn enabled(&self) -> bool {
        self.sigma_v > 0.0
            || self.sigma_w > 0.0
            || self.sigma_accel > 0.0
            || self.sigma_rate > 0.0
            || self.sigma_pressure > 0.0
    }
}

/// Packs the Table-ordered sensor frame from the simulator state and driver
/// inputs, optionally adding seeded Gaussian noise.
pub fn sense(
    state: &SimState,
    driver: &DriverProfile,
    noise: &SensorNoise,
    rng: &mut ChaCha12Rng,
) -> Observation {
    let t = state.time_s;
    let mut o = Observation {
        v_kmh: state.v_kmh,
        wheel_kmh: state.wheel_kmh,
        accel: state.accel,
        rates: [state.pitch_rate, state.roll_rate, state.yaw_rate],
        pressure_mpa: state.pressure_mpa,
        f_brake_n: driver.brake_force(t),
        f_acc_n: driver.accel_force(t),
        delta_rad: driver.steering_angle(t),
    };
    if noise.enabled() {
        let mut add = |x: &mut f64, sigma: f64| {
            if sigma > 0.0 {
                let n = Normal::new(0.0, sigma).unwrap();
                *x += n.sample(rng);
            } else {
                // Keep the stream position independent of which sigmas are on.
                let _: f64 = rng.random();
            }
        };
        add(&mut o.v_kmh, noise.sigma_v);
        for w in o.wheel_kmh.iter_mut() {
            add(w, noise.sigma_w);
        }
        for a in o.accel.iter_mut() {
            add(a, noise.sigma_accel);
        }
        for r in o.rates.iter_mut() {
            add(r, noise.sigma_rate);
        }
        for p in o.pressure_mpa.iter_mut() {
            add(p, noise.sigma_pressure);
        }
        o.v_kmh = o.v_kmh.max(0.0);
        for w in o.wheel_kmh.iter_mut() {
            *w = w.max(0.0);
        }
    }
    o
}

/// A single vehicle simulation instance: state, environment, and RNG.
pub struct Simulation {
    pub state: SimState,
    pub params: VehicleParams,
    pub surface: SurfaceMap,
    pub driver: DriverProfile,
    pub config: PhysicsConfig,
    pub noise: SensorNoise,
    rng: ChaCha12Rng,
    control_steps: u64,
}

impl Simulation {
    pub fn new(
        state: SimState,
        params: VehicleParams,
        surface: SurfaceMap,
        driver: DriverProfile,
        config: PhysicsConfig,
        noise: SensorNoise,
        seed: u64,
    ) -> Self {
        use rand::SeedableRng;
        Self {
            state,
            params,
            surface,
            driver,
            config,
            noise,
            rng: ChaCha12Rng::seed_from_u64(seed),
            control_steps: 0,
        }
    }

    /// Sensor frame at the current control boundary.
    pub fn sense(&mut self) -> Observation {
        sense(&self.state, &self.driver, &self.noise, &mut self.rng)
    }

    /// Advances one 20 ms control step holding `action` fixed across the
    /// twenty 1 ms physics sub-steps.
    pub fn control_step(&mut self, action: crate::mdp::JointAction) -> Result<(), SimError> {
        for _ in 0..SUBSTEPS_PER_CONTROL {
            self.state = physics_step(
                &self.state,
                action,
                &self.driver,
                &self.surface,
                &self.params,
                &self.config,
                PHYSICS_DT_S,
            )
            .map_err(|e| e.at_step(self.control_steps))?;
        }
        self.control_steps += 1;
        Ok(())
    }

    pub fn control_steps(&self) -> u64 {
        self.control_steps
    }
}
