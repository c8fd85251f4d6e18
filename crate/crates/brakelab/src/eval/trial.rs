//! Single-trial execution and metric extraction.

use super::controller::Controller;
use crate::mdp::{
    expected_yaw_rate, slip_ratio, stack, terminated, JointAction, Observation, RewardConfig,
    StackedState, STACK_LEN,
};
use crate::scenario::{ScenarioSpec, TrialJitter};
use crate::sim::{PhysicsConfig, SensorNoise, SimError, VehicleParams};
use serde::{Deserialize, Serialize};

/// Environment and measurement configuration shared by all trials.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSetup {
    pub params: VehicleParams,
    pub physics: PhysicsConfig,
    pub noise: SensorNoise,
    pub reward: RewardConfig,
    /// Global friction multiplier (parameter-perturbation studies).
    pub friction_scale: f64,
    /// Hard cap on trial length, control steps.
    pub max_steps: usize,
    /// Apply per-seed initial-position and friction jitter.
    pub jitter_position: bool,
    pub jitter_friction: bool,
}

impl Default for EvalSetup {
    fn default() -> Self {
        Self {
            params: VehicleParams::default(),
            physics: PhysicsConfig::default(),
            noise: SensorNoise::default(),
            reward: RewardConfig::default(),
            friction_scale: 1.0,
            max_steps: 3000,
            jitter_position: true,
            jitter_friction: true,
        }
    }
}

impl EvalSetup {
    fn jitter(&self) -> TrialJitter {
        TrialJitter {
            position: self.jitter_position,
            friction: self.jitter_friction,
        }
    }
}

/// Per-control-step measurement record.
#[derive(Clone, Copy, Debug)]
pub struct TracePoint {
    pub t_s: f64,
    pub v_kmh: f64,
    pub wheel_kmh: [f64; 4],
    pub pressure_mpa: [f64; 4],
    pub yaw_rate: f64,
    pub heading_rad: f64,
    pub heading_expected_rad: f64,
    pub action: JointAction,
}

/// Braking metrics of one trial.
#[derive(Clone, Debug)]
pub struct Metrics {
    /// Trapezoidal integral of v from brake onset to termination, m.
    pub braking_distance_m: f64,
    /// Terminal |heading - expected heading|, degrees.
    pub deviation_deg: f64,
    /// Maximum |heading - expected heading| over the trial, degrees.
    pub deviation_max_deg: f64,
    /// Some wheel held slip >= 0.95 for 5+ consecutive control steps while
    /// the vehicle was still clearly moving.
    pub lockup: bool,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug)]
pub enum TrialError {
    Sim(SimError),
    /// The vehicle never reached the termination speed within the cap.
    Timeout { steps: usize },
}

impl std::fmt::Display for TrialError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrialError::Sim(e) => write!(f, "{e}"),
            TrialError::Timeout { steps } => {
                write!(f, "trial did not terminate within {steps} control steps")
            }
        }
    }
}

impl std::error::Error for TrialError {}

impl From<SimError> for TrialError {
    fn from(e: SimError) -> Self {
        TrialError::Sim(e)
    }
}

const LOCKUP_SLIP: f64 = 0.95;
const LOCKUP_CONSECUTIVE: usize = 5;

/// Runs one controller on one scenario from its braking speed until
/// termination and extracts the braking metrics.
pub fn run_trial(
    controller: &Controller,
    scenario: &ScenarioSpec,
    seed: u64,
    setup: &EvalSetup,
) -> Result<Metrics, TrialError> {
    let mut sim = scenario.build_simulation(
        setup.params,
        setup.physics,
        setup.noise,
        seed,
        setup.jitter(),
    );
    if setup.friction_scale != 1.0 {
        sim.surface = sim.surface.globally_scaled(setup.friction_scale);
    }
    let mut ctrl_state = controller.make_state();
    let mut history: Vec<Observation> = Vec::new();
    let mut trace: Vec<TracePoint> = Vec::new();

    let mut distance = 0.0;
    let mut heading_expected = 0.0;
    let mut prev: Option<(Observation, f64)> = None; // (obs, expected yaw rate)
    let mut lock_runs = [0usize; 4];
    let mut lockup = false;
    let mut deviation_max = 0.0f64;
    let mut braking_seen = false;

    for _ in 0..setup.max_steps {
        let obs = sim.sense();
        history.push(obs);
        let stacked: StackedState = stack(&history, STACK_LEN).expect("non-empty history");
        let expected_rate =
            expected_yaw_rate(obs.v_kmh, obs.delta_rad, &setup.params).unwrap_or(0.0);
        if let Some((prev_obs, prev_rate)) = prev {
            let step_dt = crate::sim::CONTROL_DT_S;
            heading_expected += 0.5 * (prev_rate + expected_rate) * step_dt;
            if prev_obs.f_brake_n > 0.0 {
                distance += 0.5 * (prev_obs.v_kmh + obs.v_kmh) / 3.6 * step_dt;
            }
        }
        let deviation_now = (sim.state.heading_rad - heading_expected).abs();
        deviation_max = deviation_max.max(deviation_now);

        // Lock-up detection while the vehicle is still clearly moving.
        if obs.v_kmh > setup.reward.v_eps_kmh + 5.0 {
            for i in 0..4 {
                let locked = slip_ratio(obs.v_kmh, obs.wheel_kmh[i])
                    .map(|e| e >= LOCKUP_SLIP)
                    .unwrap_or(false);
                if locked {
                    lock_runs[i] += 1;
                    if lock_runs[i] >= LOCKUP_CONSECUTIVE {
                        lockup = true;
                    }
                } else {
                    lock_runs[i] = 0;
                }
            }
        } else {
            lock_runs = [0; 4];
        }

        let braking = obs.f_brake_n > 0.0;
        braking_seen |= braking;
        let action = if braking {
            controller.act(&mut ctrl_state, &stacked, &obs)
        } else {
            JointAction::no_control()
        };
        trace.push(TracePoint {
            t_s: sim.state.time_s,
            v_kmh: obs.v_kmh,
            wheel_kmh: obs.wheel_kmh,
            pressure_mpa: obs.pressure_mpa,
            yaw_rate: obs.yaw_rate(),
            heading_rad: sim.state.heading_rad,
            heading_expected_rad: heading_expected,
            action,
        });
        prev = Some((obs, expected_rate));

        if braking_seen && terminated(obs.v_kmh, &setup.reward) {
            let deviation = (sim.state.heading_rad - heading_expected).abs();
            return Ok(Metrics {
                braking_distance_m: distance,
                deviation_deg: deviation.to_degrees(),
                deviation_max_deg: deviation_max.to_degrees(),
                lockup,
                trace,
            });
        }
        sim.control_step(action)?;
    }
    Err(TrialError::Timeout {
        steps: setup.max_steps,
    })
}
