//! Policy optimization inside the learned dynamics model with speed
//! augmentation: sample an initial window from the corpus, roll out with
//! sampled model predictions, store augmented transitions, and interleave
//! critic/actor updates.

use super::nets::{Critics, Policy};
use super::replay::ReplayBuffer;
use super::sac::{actor_update, bellman_target, critic_update, SacConfig};
use crate::data::Dataset;
use crate::mdp::{
    expected_yaw_rate, reward, slip_ratio, stack, terminated, Observation, RewardConfig,
    RewardInputs, RewardTerms,
};
use crate::model::{DynamicsModel, ModelError, VEHICLE_BLOCK, WHEEL_BLOCK};
use crate::nn::Adam;
use crate::sim::VehicleParams;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug)]
pub enum PolicyError {
    Model(ModelError),
    EmptyDataset,
    /// An update produced a non-finite loss or objective.
    Diverged { step: u64 },
}

impl std::fmt::Display for PolicyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyError::Model(e) => write!(f, "{e}"),
            PolicyError::EmptyDataset => write!(f, "no post-onset windows to start episodes from"),
            PolicyError::Diverged { step } => {
                write!(f, "policy optimization diverged at model step {step}")
            }
        }
    }
}

impl std::error::Error for PolicyError {}

impl From<ModelError> for PolicyError {
    fn from(e: ModelError) -> Self {
        PolicyError::Model(e)
    }
}

/// One logged training row (written as the learning-curves CSV).
#[derive(Clone, Copy, Debug)]
pub struct CurveRow {
    pub step: u64,
    pub critic_loss: f64,
    pub actor_obj: f64,
    pub r_speed: f64,
    pub r_yaw: f64,
    pub r_slip: f64,
}

/// Per-episode summary.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeStat {
    pub episode: usize,
    pub ret: f64,
    pub length: usize,
    pub v_aug: f64,
}

pub struct PolicyTrainOutput {
    pub policy: Policy,
    pub critics: Critics,
    pub curves: Vec<CurveRow>,
    pub episodes: Vec<EpisodeStat>,
    /// Final entropy temperature (fixed unless auto-tuned).
    pub alpha: f64,
}

pub fn curves_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("step,critic_loss,actor_obj,r_speed,r_yaw,r_slip\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step, r.critic_loss, r.actor_obj, r.r_speed, r.r_yaw, r.r_slip
        ));
    }
    out
}

pub fn episodes_to_csv(rows: &[EpisodeStat]) -> String {
    let mut out = String::from("episode,return,length,v_aug\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.episode, r.ret, r.length, r.v_aug));
    }
    out
}

/// Post-onset (trajectory, step) pairs usable as episode starts.
fn episode_starts(dataset: &Dataset) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, t) in dataset.train.iter().enumerate() {
        if t.len() < 2 {
            continue;
        }
        for step in t.onset_index..t.len() - 1 {
            out.push((i, step));
        }
    }
    out
}

/// Trains a braking policy entirely inside the dynamics model.
pub fn train_policy(
    model: &DynamicsModel,
    dataset: &Dataset,
    cfg: &SacConfig,
    reward_cfg: &RewardConfig,
    params: &VehicleParams,
    seed: u64,
) -> Result<PolicyTrainOutput, PolicyError> {
    let starts = episode_starts(dataset);
    if starts.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    let stats = model.stats.clone();
    let mut policy = Policy::new(cfg.hidden, stats.clone(), model.h, crate::derive_seed(seed, "actor"));
    let mut critics = Critics::new(cfg.hidden, stats, model.h, crate::derive_seed(seed, "critic"));
    let mut actor_adam = Adam::new(&policy.store, cfg.lr);
    let mut critic_adam = Adam::new(&critics.online, cfg.lr);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, model.h);
    let mut rng = ChaCha12Rng::seed_from_u64(crate::derive_seed(seed, "policy-train"));
    let mut alpha = cfg.alpha;

    let mut curves = Vec::new();
    let mut episodes = Vec::new();
    let mut global_step: u64 = 0;

    for _epoch in 0..cfg.epochs {
        for _ep in 0..cfg.episodes_per_epoch {
            let (ti, t0) = starts[rng.random_range(0..starts.len())];
            let traj = &dataset.train[ti];
            let v_aug = rng.random_range(cfg.aug_low_kmh..=cfg.aug_high_kmh);
            let history: Vec<Observation> =
                traj.records[..=t0].iter().map(|r| r.obs).collect();
            let mut window = stack(&history, model.h).expect("non-empty history");
            buffer.start_episode(&window, v_aug);

            let mut ep_return = 0.0;
            let mut ep_len = 0usize;
            for t in 0..cfg.h_max {
                // Act on the un-augmented model state.
                let (action, _logp) = policy.sample_action(&window, &mut rng);
                // Step the model with a sampled prediction.
                let out = model.forward_chain(&window, action, Some(&mut rng))?;
                // Operational inputs spliced from the source trajectory,
                // holding the last values if the episode outlives it.
                let op_idx = (t0 + t + 1).min(traj.len() - 1);
                let op = &traj.records[op_idx].obs;
                let next_obs = crate::model::compose_next_observation(
                    &out.realized,
                    op.f_brake_n,
                    op.f_acc_n,
                    op.delta_rad,
                );
                // Reward from model-predicted next-step quantities.
                let v_next = out.realized[VEHICLE_BLOCK.start].max(0.0);
                let yaw_next = out.realized[10];
                let mut slips = [None; 4];
                for (k, d_idx) in WHEEL_BLOCK.enumerate() {
                    slips[k] = slip_ratio(v_next, out.realized[d_idx].max(0.0));
                }
                let expected = expected_yaw_rate(v_next, op.delta_rad, params)
                    .unwrap_or(0.0);
                let terms: RewardTerms = reward(
                    &RewardInputs {
                        v_next_kmh: v_next,
                        yaw_rate_next: yaw_next,
                        slips,
                    },
                    expected,
                    reward_cfg,
                );
                let r = terms.total();
                let done = terminated(v_next, reward_cfg);
                buffer.push_step(action, &next_obs, r, done);
                ep_return += r;
                ep_len += 1;
                window.push(&next_obs);
                global_step += 1;

                // Interleaved updates.
                if buffer.len() >= cfg.warmup_transitions
                    && global_step % cfg.update_every as u64 == 0
                {
                    let batch = buffer.sample_batch(&mut rng, cfg.batch.min(buffer.len()));
                    let mode = cfg.expectation_mode();
                    let targets: Vec<f64> = batch
                        .iter()
                        .map(|tr| {
                            bellman_target(
                                &critics,
                                &policy,
                                tr.reward,
                                &tr.next_state,
                                tr.done,
                                alpha,
                                cfg.gamma,
                                mode,
                                &mut rng,
                            )
                        })
                        .collect();
                    let closs =
                        critic_update(&mut critics, &mut critic_adam, &batch, &targets, cfg.tau);
                    let aobj = actor_update(
                        &mut policy,
                        &critics,
                        &mut actor_adam,
                        &batch,
                        alpha,
                        mode,
                        &mut rng,
                    );
                    if !closs.is_finite() || !aobj.is_finite() {
                        return Err(PolicyError::Diverged { step: global_step });
                    }
                    if cfg.auto_alpha {
                        // Move the temperature toward the target entropy.
                        let mut ent = 0.0;
                        for tr in batch.iter().take(16) {
                            let lp = policy.log_probs(&tr.state);
                            ent += Policy::wheel_entropies(&lp).iter().sum::<f64>();
                        }
                        let ent = ent / batch.len().min(16) as f64;
                        let log_alpha = alpha.max(1e-8).ln()
                            + cfg.lr * 10.0 * (cfg.target_entropy - ent);
                        alpha = log_alpha.exp().clamp(1e-6, 10.0);
                    }
                    curves.push(CurveRow {
                        step: global_step,
                        critic_loss: closs,
                        actor_obj: aobj,
                        r_speed: terms.speed,
                        r_yaw: terms.yaw,
                        r_slip: terms.slip,
                    });
                }
                if done {
                    break;
                }
            }
            buffer.end_episode();
            episodes.push(EpisodeStat {
                episode: episodes.len(),
                ret: ep_return,
                length: ep_len,
                v_aug,
            });
        }
    }
    Ok(PolicyTrainOutput {
        policy,
        critics,
        curves,
        episodes,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{StepRecord, Trajectory};
    use crate::mdp::JointAction;
    use crate::model::{CausalGraph, NetConfig};

    fn tiny_dataset() -> Dataset {
        let mut train = Vec::new();
        for k in 0..3 {
            let mut v: f64 = 40.0;
            let records = (0..80)
                .map(|i| {
                    let mut o = Observation::zeros();
                    o.v_kmh = v;
                    o.wheel_kmh = [v * 0.9; 4];
                    o.pressure_mpa = [3.0; 4];
                    o.f_brake_n = if i >= 5 { 450.0 } else { 0.0 };
                    if i >= 5 {
                        v = (v - 0.5).max(0.0);
                    }
                    StepRecord {
                        t_s: i as f64 * 0.02,
                        obs: o,
                        action: JointAction::all_increase(),
                    }
                })
                .collect();
            train.push(Trajectory {
                scenario: "s".into(),
                policy: "rule".into(),
                seed: k,
                onset_index: 5,
                records,
            });
        }
        Dataset {
            train,
            val: Vec::new(),
        }
    }

    fn tiny_model() -> DynamicsModel {
        DynamicsModel::new(
            NetConfig {
                gru_width: 6,
                fc1_width: 8,
                fc2_width: 8,
                dropout: 0.0,
            },
            CausalGraph::default(),
            20,
            0,
        )
    }

    fn tiny_cfg() -> SacConfig {
        SacConfig {
            batch: 8,
            epochs: 1,
            episodes_per_epoch: 2,
            h_max: 15,
            warmup_transitions: 5,
            hidden: (8, 8),
            update_every: 2,
            k_samples: 2,
            ..SacConfig::default()
        }
    }

    #[test]
    fn zero_episodes_leave_policy_untouched() {
        let model = tiny_model();
        let ds = tiny_dataset();
        let mut cfg = tiny_cfg();
        cfg.episodes_per_epoch = 0;
        let out = train_policy(
            &model,
            &ds,
            &cfg,
            &RewardConfig::default(),
            &VehicleParams::default(),
            3,
        )
        .unwrap();
        assert!(out.curves.is_empty());
        assert!(out.episodes.is_empty());
        let fresh = Policy::new(cfg.hidden, model.stats.clone(), model.h, crate::derive_seed(3, "actor"));
        assert_eq!(out.policy.store.flatten(), fresh.store.flatten());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let model = tiny_model();
        let ds = tiny_dataset();
        let cfg = tiny_cfg();
        let run = || {
            let out = train_policy(
                &model,
                &ds,
                &cfg,
                &RewardConfig::default(),
                &VehicleParams::default(),
                7,
            )
            .unwrap();
            (
                out.policy.store.flatten(),
                out.curves.iter().map(|c| c.critic_loss).collect::<Vec<_>>(),
                out.episodes.iter().map(|e| e.ret).collect::<Vec<_>>(),
            )
        };
        let a = run();
        let b = run();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn episodes_record_returns_and_lengths() {
        let model = tiny_model();
        let ds = tiny_dataset();
        let cfg = tiny_cfg();
        let out = train_policy(
            &model,
            &ds,
            &cfg,
            &RewardConfig::default(),
            &VehicleParams::default(),
            9,
        )
        .unwrap();
        assert_eq!(out.episodes.len(), 2);
        for e in &out.episodes {
            assert!(e.ret <= 0.0);
            assert!(e.length >= 1 && e.length <= 15);
            assert!((0.0..=80.0).contains(&e.v_aug));
        }
        assert!(!out.curves.is_empty());
    }
}
