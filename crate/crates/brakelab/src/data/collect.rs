//! Running collection policies against the simulator to build the corpus.

use super::{rule_policy, random_policy, Dataset, StepRecord, Trajectory};
use crate::mdp::{slip_ratios, terminated, JointAction, RewardConfig};
use crate::scenario::{collection_scenarios, ScenarioSpec, TrialJitter};
use crate::sim::{PhysicsConfig, SensorNoise, SimError, VehicleParams};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// The two data-collection policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollectPolicy {
    Rule,
    Random,
}

impl CollectPolicy {
    pub fn name(self) -> &'static str {
        match self {
            CollectPolicy::Rule => "rule",
            CollectPolicy::Random => "random",
        }
    }
}

/// Knobs of corpus collection.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CollectionConfig {
    pub params: VehicleParams,
    pub physics: PhysicsConfig,
    pub noise: SensorNoise,
    pub reward: RewardConfig,
    /// Runs per (policy, scenario); the last run goes to validation.
    pub runs_per_cell: usize,
    /// Hard cap on episode length, control steps.
    pub max_steps: usize,
}

impl Default for CollectionConfig {
    fn default() -> Self {
        Self {
            params: VehicleParams::default(),
            physics: PhysicsConfig::default(),
            noise: SensorNoise::default(),
            reward: RewardConfig::default(),
            runs_per_cell: 6,
            max_steps: 3000,
        }
    }
}

/// Runs one policy on one scenario at 50 Hz until termination, recording
/// every control step. The policy idles (no-control) before brake onset.
pub fn collect(
    scenario: &ScenarioSpec,
    policy: CollectPolicy,
    seed: u64,
    cfg: &CollectionConfig,
) -> Result<Trajectory, SimError> {
    use rand::SeedableRng;
    let mut sim = scenario.build_simulation(
        cfg.params,
        cfg.physics,
        cfg.noise,
        seed,
        TrialJitter::all(),
    );
    let mut action_rng =
        ChaCha12Rng::seed_from_u64(crate::derive_seed(seed, &format!("collect-{}", policy.name())));
    let onset_s = sim.driver.brake_onset_s;
    let mut records = Vec::new();
    let mut onset_index = None;
    for step in 0..cfg.max_steps {
        let obs = sim.sense();
        let braking = obs.f_brake_n > 0.0;
        if braking && onset_index.is_none() {
            onset_index = Some(step);
        }
        let action = if !braking {
            JointAction::no_control()
        } else {
            match policy {
                CollectPolicy::Rule => rule_policy(slip_ratios(&obs)),
                CollectPolicy::Random => random_policy(&mut action_rng),
            }
        };
        records.push(StepRecord {
            t_s: sim.state.time_s,
            obs,
            action,
        });
        if braking && terminated(obs.v_kmh, &cfg.reward) {
            break;
        }
        sim.control_step(action)?;
    }
    Ok(Trajectory {
        scenario: scenario.name.clone(),
        policy: policy.name().to_string(),
        seed,
        onset_index: onset_index.unwrap_or_else(|| (onset_s / 0.02) as usize),
        records,
    })
}

/// Collects the default corpus: both policies on the three collection
/// scenarios, `runs_per_cell` runs each, last run held out for validation.
pub fn collect_corpus(master_seed: u64, cfg: &CollectionConfig) -> Result<Dataset, SimError> {
    let mut dataset = Dataset::default();
    for policy in [CollectPolicy::Rule, CollectPolicy::Random] {
        for scenario in collection_scenarios() {
            for run in 0..cfg.runs_per_cell {
                let seed = crate::derive_seed(
                    master_seed,
                    &format!("collect/{}/{}/{run}", policy.name(), scenario.name),
                );
                let traj = collect(&scenario, policy, seed, cfg)?;
                if run + 1 == cfg.runs_per_cell {
                    dataset.val.push(traj);
                } else {
                    dataset.train.push(traj);
                }
            }
        }
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::slip_ratio;
    use crate::scenario::collection_scenarios;

    fn cfg() -> CollectionConfig {
        CollectionConfig::default()
    }

    #[test]
    fn rule_trajectory_terminates_and_marks_onset() {
        let scenario = &collection_scenarios()[0];
        let traj = collect(scenario, CollectPolicy::Rule, 0, &cfg()).unwrap();
        assert!(traj.len() > 30);
        let last = traj.records.last().unwrap();
        assert!(terminated(last.obs.v_kmh, &cfg().reward));
        // f_brake is zero before onset and at the profile force after.
        for (i, rec) in traj.records.iter().enumerate() {
            if i < traj.onset_index {
                assert_eq!(rec.obs.f_brake_n, 0.0);
            } else {
                assert!(rec.obs.f_brake_n >= 450.0);
            }
        }
    }

    #[test]
    fn rule_trajectory_actions_replay_the_rule() {
        for scenario in collection_scenarios().iter() {
            let traj = collect(scenario, CollectPolicy::Rule, 1, &cfg()).unwrap();
            for rec in traj.records.iter().skip(traj.onset_index) {
                assert_eq!(rec.action, rule_policy(slip_ratios(&rec.obs)));
            }
            for rec in traj.records.iter().take(traj.onset_index) {
                assert_eq!(rec.action, JointAction::no_control());
            }
        }
    }

    #[test]
    fn random_icy_run_exceeds_band() {
        // Random valve play on a low-adhesion straight lets some wheel slip
        // beyond the safe band.
        let scenario = &collection_scenarios()[1];
        let traj = collect(scenario, CollectPolicy::Random, 2, &cfg()).unwrap();
        let mut seen = false;
        for rec in traj.records.iter().skip(traj.onset_index) {
            for w in rec.obs.wheel_kmh {
                if slip_ratio(rec.obs.v_kmh, w).map(|e| e > 0.2).unwrap_or(false) {
                    seen = true;
                }
            }
        }
        assert!(seen, "random policy never exceeded the slip band");
    }

    #[test]
    fn collect_is_deterministic() {
        let scenario = &collection_scenarios()[2];
        let a = collect(scenario, CollectPolicy::Random, 9, &cfg()).unwrap();
        let b = collect(scenario, CollectPolicy::Random, 9, &cfg()).unwrap();
        assert_eq!(a, b);
        let c = collect(scenario, CollectPolicy::Random, 10, &cfg()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corpus_shape_is_36_trajectories() {
        let mut small = cfg();
        small.runs_per_cell = 6;
        let ds = collect_corpus(0, &small).unwrap();
        assert_eq!(ds.train.len(), 30);
        assert_eq!(ds.val.len(), 6);
        // 2 policies x 3 scenarios in each split.
        let mut cells: std::collections::BTreeSet<(String, String)> = Default::default();
        for t in &ds.train {
            cells.insert((t.policy.clone(), t.scenario.clone()));
        }
        assert_eq!(cells.len(), 6);
    }
}
