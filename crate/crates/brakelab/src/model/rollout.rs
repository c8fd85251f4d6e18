//! Roll-out engine: imagined trajectories from the trained model, with
//! operational inputs spliced from a source trajectory.

use super::net::{compose_next_observation, DynamicsModel, ModelError};
use crate::data::Trajectory;
use crate::mdp::{stack, terminated, Observation, RewardConfig, StackedState};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Roll-out behavior knobs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RolloutConfig {
    /// Maximum number of model steps.
    pub max_len: usize,
    /// Sample each Gaussian block instead of chaining means.
    pub sample: bool,
    /// Re-inject the observed next state at every step (the model is scored
    /// per step but never consumes its own predictions).
    pub teacher_forcing: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            max_len: 500,
            sample: false,
            teacher_forcing: false,
        }
    }
}

/// Result of replaying a trajectory's action sequence through the model.
#[derive(Clone, Debug, Default)]
pub struct RolloutTrace {
    /// Step index within the source trajectory of each prediction.
    pub start_t: usize,
    /// Predicted observations, one per executed action.
    pub predicted: Vec<Observation>,
}

/// Replays the actions of `traj` starting from the stacked window at
/// `start_t`, splicing pedal and steering channels from the trajectory.
/// Stops at the trajectory end, `cfg.max_len`, or model-predicted
/// termination.
pub fn rollout_on_trajectory(
    model: &DynamicsModel,
    traj: &Trajectory,
    start_t: usize,
    cfg: &RolloutConfig,
    reward_cfg: &RewardConfig,
    rng: &mut ChaCha12Rng,
) -> Result<RolloutTrace, ModelError> {
    assert!(start_t < traj.len(), "start index inside trajectory");
    let history: Vec<Observation> = traj.records[..=start_t].iter().map(|r| r.obs).collect();
    let mut window: StackedState = stack(&history, model.h).expect("non-empty history");
    let mut trace = RolloutTrace {
        start_t,
        predicted: Vec::new(),
    };
    let mut t = start_t;
    while t + 1 < traj.len() && trace.predicted.len() < cfg.max_len {
        let action = traj.records[t].action;
        let sampler = if cfg.sample { Some(&mut *rng) } else { None };
        let out = model
            .forward_chain(&window, action, sampler)
            .map_err(|_| ModelError::NonFinite {
                step: trace.predicted.len(),
            })?;
        let next_real = &traj.records[t + 1].obs;
        let obs = compose_next_observation(
            &out.realized,
            next_real.f_brake_n,
            next_real.f_acc_n,
            next_real.delta_rad,
        );
        trace.predicted.push(obs);
        let next_window_frame = if cfg.teacher_forcing { *next_real } else { obs };
        window.push(&next_window_frame);
        t += 1;
        if !cfg.teacher_forcing && terminated(obs.v_kmh, reward_cfg) {
            break;
        }
    }
    Ok(trace)
}

/// Mean absolute error of the roll-out against the source trajectory for
/// vehicle speed and (averaged over the four wheels) wheel speed, km/h.
pub fn rollout_speed_mae(traj: &Trajectory, trace: &RolloutTrace) -> (f64, f64) {
    let mut v_err = 0.0;
    let mut w_err = 0.0;
    let mut n = 0usize;
    for (k, pred) in trace.predicted.iter().enumerate() {
        let actual = &traj.records[trace.start_t + 1 + k].obs;
        v_err += (pred.v_kmh - actual.v_kmh).abs();
        for i in 0..4 {
            w_err += (pred.wheel_kmh[i] - actual.wheel_kmh[i]).abs() / 4.0;
        }
        n += 1;
    }
    let n = n.max(1) as f64;
    (v_err / n, w_err / n)
}

/// Full-length mean roll-out scores on one dataset split.
#[derive(Clone, Debug)]
pub struct ValRollout {
    pub scenario: String,
    pub policy: String,
    pub steps: usize,
    pub v_mae_kmh: f64,
    pub w_mae_kmh: f64,
}

/// Replays every trajectory of the split through the model (mean
/// predictions, full length) and reports vehicle/wheel speed MAE.
pub fn evaluate_rollouts(
    model: &DynamicsModel,
    trajs: &[Trajectory],
    reward_cfg: &RewardConfig,
) -> Result<Vec<ValRollout>, ModelError> {
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let cfg = RolloutConfig {
        max_len: usize::MAX,
        sample: false,
        teacher_forcing: false,
    };
    let mut out = Vec::new();
    for traj in trajs {
        if traj.len() <= model.h {
            continue;
        }
        let start = model.h - 1;
        let trace = rollout_on_trajectory(model, traj, start, &cfg, reward_cfg, &mut rng)?;
        let (v_mae, w_mae) = rollout_speed_mae(traj, &trace);
        out.push(ValRollout {
            scenario: traj.scenario.clone(),
            policy: traj.policy.clone(),
            steps: trace.predicted.len(),
            v_mae_kmh: v_mae,
            w_mae_kmh: w_mae,
        });
    }
    Ok(out)
}

pub fn rollout_eval_to_csv(rows: &[ValRollout]) -> String {
    let mut out = String::from("scenario,policy,steps,v_mae_kmh,w_mae_kmh\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario, r.policy, r.steps, r.v_mae_kmh, r.w_mae_kmh
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StepRecord;
    use crate::mdp::JointAction;
    use crate::model::spec::{CausalGraph, NetConfig};
    use rand::SeedableRng;

    fn tiny_model() -> DynamicsModel {
        DynamicsModel::new(
            NetConfig {
                gru_width: 8,
                fc1_width: 12,
                fc2_width: 12,
                dropout: 0.0,
            },
            CausalGraph::default(),
            20,
            3,
        )
    }

    fn tiny_traj(len: usize) -> Trajectory {
        let mut v = 40.0;
        let records = (0..len)
            .map(|i| {
                let mut o = Observation::zeros();
                o.v_kmh = v;
                o.wheel_kmh = [v - 1.0; 4];
                o.f_brake_n = 450.0;
                v = (v - 0.3).max(0.0);
                StepRecord {
                    t_s: i as f64 * 0.02,
                    obs: o,
                    action: JointAction::all_increase(),
                }
            })
            .collect();
        Trajectory {
            scenario: "s".into(),
            policy: "rule".into(),
            seed: 0,
            onset_index: 0,
            records,
        }
    }

    #[test]
    fn zero_budget_rollout_returns_no_predictions() {
        let model = tiny_model();
        let traj = tiny_traj(40);
        let cfg = RolloutConfig {
            max_len: 0,
            ..Default::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let trace =
            rollout_on_trajectory(&model, &traj, 19, &cfg, &RewardConfig::default(), &mut rng)
                .unwrap();
        assert!(trace.predicted.is_empty());
    }

    #[test]
    fn teacher_forcing_matches_independent_predictions() {
        // With ground-truth re-injection every step, the roll-out must equal
        // a sequence of independent predict() calls on data windows.
        let model = tiny_model();
        let traj = tiny_traj(40);
        let cfg = RolloutConfig {
            max_len: 15,
            sample: false,
            teacher_forcing: true,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let trace =
            rollout_on_trajectory(&model, &traj, 19, &cfg, &RewardConfig::default(), &mut rng)
                .unwrap();
        for (k, pred) in trace.predicted.iter().enumerate() {
            let t = 19 + k;
            let hist: Vec<Observation> = traj.records[..=t].iter().map(|r| r.obs).collect();
            let window = stack(&hist, model.h).unwrap();
            let direct = model.predict(&window, traj.records[t].action).unwrap();
            let composed = compose_next_observation(
                &direct.mean,
                traj.records[t + 1].obs.f_brake_n,
                traj.records[t + 1].obs.f_acc_n,
                traj.records[t + 1].obs.delta_rad,
            );
            assert_eq!(pred, &composed, "teacher-forced step {k} diverged");
        }
    }

    #[test]
    fn rollout_windows_contain_last_h_frames() {
        // After k steps the window used for step k+1 holds exactly the last
        // h predicted/spliced frames; verified indirectly: a roll-out of
        // length k, then restarting from its own outputs, continues
        // identically.
        let model = tiny_model();
        let traj = tiny_traj(60);
        let cfg = RolloutConfig {
            max_len: 10,
            sample: false,
            teacher_forcing: false,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let full = rollout_on_trajectory(&model, &traj, 19, &cfg, &RewardConfig::default(), &mut rng)
            .unwrap();
        // Rebuild the window by hand from source history + predictions, then
        // one more predict must equal an 11-step roll-out's last frame.
        let mut frames: Vec<Observation> = traj.records[..=19].iter().map(|r| r.obs).collect();
        frames.extend(full.predicted.iter().cloned());
        let window = stack(&frames, model.h).unwrap();
        let action = traj.records[29].action;
        let direct = model.predict(&window, action).unwrap();
        let composed = compose_next_observation(
            &direct.mean,
            traj.records[30].obs.f_brake_n,
            traj.records[30].obs.f_acc_n,
            traj.records[30].obs.delta_rad,
        );
        let cfg11 = RolloutConfig {
            max_len: 11,
            ..cfg
        };
        let longer =
            rollout_on_trajectory(&model, &traj, 19, &cfg11, &RewardConfig::default(), &mut rng)
                .unwrap();
        assert_eq!(longer.predicted[10], composed);
    }

    #[test]
    fn mae_of_identical_sequences_is_zero() {
        let traj = tiny_traj(30);
        let trace = RolloutTrace {
            start_t: 0,
            predicted: traj.records[1..].iter().map(|r| r.obs).collect(),
        };
        let (v, w) = rollout_speed_mae(&traj, &trace);
        assert_eq!(v, 0.0);
        assert_eq!(w, 0.0);
    }
}
