//! Mixed single-step + roll-out likelihood training of the dynamics model.
//!
//! The single-step phase maximizes the likelihood of observed transitions
//! with upstream blocks teacher-forced to their true values (the exact
//! autoregressive factorization). The roll-out phase replays dataset action
//! sequences through the model's own chained mean predictions and maximizes
//! the likelihood of the observed future, with backpropagation truncated
//! every `tbptt` steps. The two terms are optimized as alternating Adam
//! steps within an epoch.

use super::net::{block_nll, DynamicsModel, ModelError};
use super::spec::{ChannelStats, ModuleKind, D_CHANNELS};
use crate::data::{Dataset, Trajectory};
use crate::nn::{Adam, Binder, GradBuffer, Graph, NodeId, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// Maximum roll-out length m; 1 disables the roll-out term.
    pub rollout_len: usize,
    /// Backpropagation-through-time truncation window.
    pub tbptt: usize,
    pub single_batches_per_epoch: usize,
    /// Roll-out sequences per batched roll-out.
    pub rollout_sequences: usize,
    /// Batched roll-outs per epoch.
    pub rollout_batches_per_epoch: usize,
    /// Fixed validation transitions scored each epoch.
    pub val_samples: usize,
    /// Global L2 gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    /// Epochs of single-step-only training before the roll-out term joins.
    pub rollout_warmup_epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            epochs: 200,
            lr: 1e-4,
            batch: 128,
            rollout_len: 50,
            tbptt: 25,
            single_batches_per_epoch: 10,
            rollout_sequences: 6,
            rollout_batches_per_epoch: 3,
            val_samples: 512,
            grad_clip: 100.0,
            rollout_warmup_epochs: 10,
            seed: 0,
        }
    }

    pub fn paper() -> Self {
        Self {
            epochs: 1000,
            lr: 1e-4,
            batch: 128,
            rollout_len: 500,
            tbptt: 25,
            single_batches_per_epoch: 40,
            rollout_sequences: 8,
            rollout_batches_per_epoch: 4,
            val_samples: 2048,
            grad_clip: 100.0,
            rollout_warmup_epochs: 10,
            seed: 0,
        }
    }
}

/// Scales the buffer down to the clip norm when it exceeds it.
fn clip_grad_norm(buf: &mut GradBuffer, clip: f64) {
    if clip <= 0.0 {
        return;
    }
    let norm2: f64 = buf
        .tensors
        .iter()
        .map(|t| t.data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = norm2.sqrt();
    if norm > clip {
        buf.scale(clip / norm);
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LossHistory {
    pub epochs: Vec<EpochLoss>,
}

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_nll,val_nll\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_nll, e.val_nll));
        }
        out
    }
}

/// Observation channel value at window slot `j` for the state at step `t`,
/// padding before the trajectory start by repeating the first frame.
fn window_value(traj: &Trajectory, t: usize, h: usize, j: usize, channel: usize) -> f64 {
    let idx = (t + 1 + j).saturating_sub(h).min(t);
    traj.records[idx].obs.to_array()[channel]
}

/// A (trajectory, step) transition reference.
type Sample = (usize, usize);

fn all_transitions(trajs: &[Trajectory]) -> Vec<Sample> {
    let mut out = Vec::new();
    for (i, t) in trajs.iter().enumerate() {
        for step in 0..t.len().saturating_sub(1) {
            out.push((i, step));
        }
    }
    out
}

/// Builds the summed single-step NLL over a batch, upstream blocks teacher
/// forced. Returns the scalar node (sum over samples and all 15 dims).
fn batch_nll_graph(
    model: &DynamicsModel,
    trajs: &[Trajectory],
    batch: &[Sample],
    training: bool,
    rng: &mut ChaCha12Rng,
) -> (Graph, Binder, NodeId) {
    let b = batch.len();
    let h = model.h;
    let stats = &model.stats;
    let mut g = Graph::new();
    let mut binder = Binder::new(&model.store);
    let mut total: Option<NodeId> = None;
    for kind in ModuleKind::ALL {
        let inputs = model.graph_spec.inputs(kind);
        let steps: Vec<NodeId> = (0..h)
            .map(|j| {
                let mut data = Vec::with_capacity(b * inputs.window_channels.len());
                for (ti, t) in batch.iter() {
                    for c in &inputs.window_channels {
                        data.push(stats.normalize(*c, window_value(&trajs[*ti], *t, h, j, *c)));
                    }
                }
                g.leaf(Tensor::from_vec(b, inputs.window_channels.len(), data))
            })
            .collect();
        // Side input: action one-hot for the pressure head, true next-step
        // z values of the upstream block otherwise.
        let extra = {
            let width = kind.extra_dim();
            let mut data = Vec::with_capacity(b * width);
            for (ti, t) in batch.iter() {
                let traj = &trajs[*ti];
                match kind {
                    ModuleKind::Pressure => {
                        data.extend_from_slice(&traj.records[*t].action.one_hot())
                    }
                    ModuleKind::WheelSpeed => {
                        let next = traj.records[*t + 1].obs.to_array();
                        for d_idx in super::spec::PRESSURE_BLOCK {
                            let c = D_CHANNELS[d_idx];
                            data.push(stats.normalize(c, next[c]));
                        }
                    }
                    ModuleKind::BodyMotion => {
                        let next = traj.records[*t + 1].obs.to_array();
                        for d_idx in super::spec::WHEEL_BLOCK {
                            let c = D_CHANNELS[d_idx];
                            data.push(stats.normalize(c, next[c]));
                        }
                    }
                    ModuleKind::VehicleSpeed => {
                        let next = traj.records[*t + 1].obs.to_array();
                        for d_idx in 11..14 {
                            let c = D_CHANNELS[d_idx];
                            data.push(stats.normalize(c, next[c]));
                        }
                    }
                }
            }
            g.leaf(Tensor::from_vec(b, width, data))
        };
        let (mean, log_sigma) = model.module_forward(&mut g, &mut binder, kind, &steps, extra, training, rng);
        // Targets in z-space; residual modules predict the one-step delta.
        let width = kind.out_dim();
        let mut tdata = Vec::with_capacity(b * width);
        for (ti, t) in batch.iter() {
            let traj = &trajs[*ti];
            let next = traj.records[*t + 1].obs.to_array();
            let cur = traj.records[*t].obs.to_array();
            for d_idx in kind.block() {
                let c = D_CHANNELS[d_idx];
                let z_next = stats.normalize(c, next[c]);
                if inputs.residual {
                    tdata.push(z_next - stats.normalize(c, cur[c]));
                } else {
                    tdata.push(z_next);
                }
            }
        }
        let target = g.leaf(Tensor::from_vec(b, width, tdata));
        let nll = block_nll(&mut g, mean, log_sigma, target);
        let s = g.sum_all(nll);
        total = Some(match total {
            Some(acc) => g.add(acc, s),
            None => s,
        });
    }
    let total = total.unwrap();
    (g, binder, total)
}

/// Mean per-transition NLL over a sample set, forward only.
pub fn mean_single_step_nll(
    model: &DynamicsModel,
    trajs: &[Trajectory],
    samples: &[Sample],
) -> Result<f64, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let mut total = 0.0;
    for chunk in samples.chunks(256) {
        let (g, _, loss) = batch_nll_graph(model, trajs, chunk, false, &mut rng);
        total += g.value(loss).item();
    }
    let mean = total / samples.len() as f64;
    if mean.is_finite() {
        Ok(mean)
    } else {
        Err(ModelError::NonFinite { step: 0 })
    }
}

/// Differentiable roll-out state: per-channel window columns, possibly graph
/// nodes once predictions have been pushed in.
struct RolloutWindows {
    channels: Vec<usize>,
    cols: Vec<std::collections::VecDeque<NodeId>>,
}

impl RolloutWindows {
    fn channel_pos(&self, c: usize) -> usize {
        self.channels.iter().position(|x| *x == c).expect("rollout channel")
    }

    fn last(&self, c: usize) -> NodeId {
        *self.cols[self.channel_pos(c)].back().unwrap()
    }

    fn push(&mut self, c: usize, node: NodeId) {
        let pos = self.channel_pos(c);
        self.cols[pos].pop_front();
        self.cols[pos].push_back(node);
    }

    /// Reads every column's current value so the windows can be re-seeded
    /// into a fresh graph after a truncation boundary.
    fn detach(&self, g: &Graph) -> Vec<Vec<Tensor>> {
        self.cols
            .iter()
            .map(|dq| dq.iter().map(|n| g.value(*n).clone()).collect())
            .collect()
    }
}

/// Trains the model in place; returns per-epoch train/validation NLL.
pub fn train_model(
    model: &mut DynamicsModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<LossHistory, ModelError> {
    let train_transitions = all_transitions(&dataset.train);
    if train_transitions.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    model.stats = ChannelStats::from_trajectories(&dataset.train);

    // Fixed validation sample, drawn once.
    let val_trajs: &[Trajectory] = if dataset.val.is_empty() {
        &dataset.train
    } else {
        &dataset.val
    };
    let mut val_samples = all_transitions(val_trajs);
    let mut val_rng = ChaCha12Rng::seed_from_u64(crate::derive_seed(cfg.seed, "model-val"));
    val_samples.shuffle(&mut val_rng);
    val_samples.truncate(cfg.val_samples.max(1));

    let mut adam = Adam::new(&model.store, cfg.lr);
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        let mut rng =
            ChaCha12Rng::seed_from_u64(crate::derive_seed(cfg.seed, &format!("model-epoch-{epoch}")));
        // Single-step phase.
        let mut order = train_transitions.clone();
        order.shuffle(&mut rng);
        let mut train_nll_sum = 0.0;
        let mut train_nll_count = 0usize;
        for bi in 0..cfg.single_batches_per_epoch {
            let start = (bi * cfg.batch) % order.len();
            let batch: Vec<Sample> = (0..cfg.batch.min(order.len()))
                .map(|k| order[(start + k) % order.len()])
                .collect();
            let (g, binder, total) =
                batch_nll_graph(model, &dataset.train, &batch, true, &mut rng);
            let loss_value = g.value(total).item() / batch.len() as f64;
            if !loss_value.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            train_nll_sum += loss_value;
            train_nll_count += 1;
            let scaled = {
                let mut g = g;
                let s = g.scale(total, 1.0 / batch.len() as f64);
                let grads = g.backward(s);
                let mut buf = GradBuffer::zeros_like(&model.store);
                binder.accumulate_grads(&g, &grads, &mut buf);
                buf
            };
            if !scaled.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            let mut scaled = scaled;
            clip_grad_norm(&mut scaled, cfg.grad_clip);
            adam.step(&mut model.store, &scaled);
        }

        // Roll-out phase, after the single-step warm-up.
        if cfg.rollout_len > 1 && cfg.rollout_sequences > 0 && epoch >= cfg.rollout_warmup_epochs {
            let eligible: Vec<usize> = dataset
                .train
                .iter()
                .enumerate()
                .filter(|(_, t)| t.len() > cfg.rollout_len + 1)
                .map(|(i, _)| i)
                .collect();
            if !eligible.is_empty() {
                for _ in 0..cfg.rollout_batches_per_epoch.max(1) {
                    let starts: Vec<Sample> = (0..cfg.rollout_sequences)
                        .map(|_| {
                            let ti = eligible[rng.random_range(0..eligible.len())];
                            let max_start = dataset.train[ti].len() - 1 - cfg.rollout_len;
                            (ti, rng.random_range(0..=max_start))
                        })
                        .collect();
                    let nll =
                        rollout_phase(model, &mut adam, &dataset.train, &starts, cfg, epoch, &mut rng)?;
                    train_nll_sum += nll;
                    train_nll_count += 1;
                }
            }
        }

        let val_nll = mean_single_step_nll(model, val_trajs, &val_samples)?;
        history.epochs.push(EpochLoss {
            epoch,
            train_nll: train_nll_sum / train_nll_count.max(1) as f64,
            val_nll,
        });
    }
    Ok(history)
}

/// One batched differentiable roll-out with truncated backpropagation.
/// Returns the mean per-step NLL for reporting.
fn rollout_phase(
    model: &mut DynamicsModel,
    adam: &mut Adam,
    trajs: &[Trajectory],
    starts: &[Sample],
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut ChaCha12Rng,
) -> Result<f64, ModelError> {
    let b = starts.len();
    let h = model.h;
    let channels = model.graph_spec.rollout_channels();
    // Seed windows with data at the start steps (z-space constants).
    let mut g = Graph::new();
    let mut binder = Binder::new(&model.store);
    let mut windows = RolloutWindows {
        channels: channels.clone(),
        cols: channels
            .iter()
            .map(|c| {
                (0..h)
                    .map(|j| {
                        let col: Vec<f64> = starts
                            .iter()
                            .map(|(ti, t0)| {
                                model
                                    .stats
                                    .normalize(*c, window_value(&trajs[*ti], *t0, h, j, *c))
                            })
                            .collect();
                        g.leaf(Tensor::from_vec(b, 1, col))
                    })
                    .collect()
            })
            .collect(),
    };

    let mut window_nlls: Vec<NodeId> = Vec::new();
    let mut report_sum = 0.0;
    let mut report_steps = 0usize;

    for k in 1..=cfg.rollout_len {
        // Forward the four modules on the current (partly predicted) windows.
        let mut realized: Vec<Option<NodeId>> = vec![None; super::spec::D_DIM];
        for kind in ModuleKind::ALL {
            let inputs = model.graph_spec.inputs(kind);
            let steps: Vec<NodeId> = (0..h)
                .map(|j| {
                    let parts: Vec<NodeId> = inputs
                        .window_channels
                        .iter()
                        .map(|c| windows.cols[windows.channel_pos(*c)][j])
                        .collect();
                    g.concat_cols(&parts)
                })
                .collect();
            let extra = match kind {
                ModuleKind::Pressure => {
                    let mut data = Vec::with_capacity(b * 16);
                    for (ti, t0) in starts.iter() {
                        data.extend_from_slice(&trajs[*ti].records[t0 + k - 1].action.one_hot());
                    }
                    g.leaf(Tensor::from_vec(b, 16, data))
                }
                ModuleKind::WheelSpeed => {
                    let parts: Vec<NodeId> = super::spec::PRESSURE_BLOCK
                        .map(|i| realized[i].unwrap())
                        .collect();
                    g.concat_cols(&parts)
                }
                ModuleKind::BodyMotion => {
                    let parts: Vec<NodeId> = super::spec::WHEEL_BLOCK
                        .map(|i| realized[i].unwrap())
                        .collect();
                    g.concat_cols(&parts)
                }
                ModuleKind::VehicleSpeed => {
                    let parts: Vec<NodeId> = (11..14).map(|i| realized[i].unwrap()).collect();
                    g.concat_cols(&parts)
                }
            };
            let (mean, log_sigma) =
                model.module_forward(&mut g, &mut binder, kind, &steps, extra, true, rng);
            // Absolute z-space mean per dimension (residual heads add the
            // newest window column).
            for (col, d_idx) in kind.block().enumerate() {
                let delta = g.slice_cols(mean, col, 1);
                let abs = if inputs.residual {
                    let base = windows.last(D_CHANNELS[d_idx]);
                    g.add(base, delta)
                } else {
                    delta
                };
                realized[d_idx] = Some(abs);
            }
            // NLL against the observed step t0 + k.
            let width = kind.out_dim();
            let mut tdata = Vec::with_capacity(b * width);
            for (ti, t0) in starts.iter() {
                let next = trajs[*ti].records[t0 + k].obs.to_array();
                for d_idx in kind.block() {
                    let c = D_CHANNELS[d_idx];
                    tdata.push(model.stats.normalize(c, next[c]));
                }
            }
            let target = g.leaf(Tensor::from_vec(b, width, tdata));
            // Mean node must be absolute for the NLL as well.
            let abs_mean_parts: Vec<NodeId> = kind.block().map(|i| realized[i].unwrap()).collect();
            let abs_mean = g.concat_cols(&abs_mean_parts);
            let nll = block_nll(&mut g, abs_mean, log_sigma, target);
            let s = g.sum_all(nll);
            window_nlls.push(s);
        }

        // Advance the windows: predicted channels get their absolute mean
        // node, operational channels get spliced data constants.
        for c in channels.iter() {
            if let Some(d_idx) = D_CHANNELS.iter().position(|dc| dc == c) {
                windows.push(*c, realized[d_idx].unwrap());
            } else {
                let col: Vec<f64> = starts
                    .iter()
                    .map(|(ti, t0)| {
                        model
                            .stats
                            .normalize(*c, trajs[*ti].records[t0 + k].obs.to_array()[*c])
                    })
                    .collect();
                let node = g.leaf(Tensor::from_vec(b, 1, col));
                windows.push(*c, node);
            }
        }

        // Truncation boundary: optimize and detach.
        if k % cfg.tbptt == 0 || k == cfg.rollout_len {
            let steps_in_window = window_nlls.len() / 4;
            let mut total = window_nlls[0];
            for s in window_nlls.iter().skip(1) {
                total = g.add(total, *s);
            }
            let scale = 1.0 / (b * steps_in_window) as f64;
            let loss = g.scale(total, scale);
            let loss_value = g.value(loss).item();
            if !loss_value.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            report_sum += loss_value * steps_in_window as f64;
            report_steps += steps_in_window;
            let grads = g.backward(loss);
            let mut buf = GradBuffer::zeros_like(&model.store);
            binder.accumulate_grads(&g, &grads, &mut buf);
            if !buf.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            clip_grad_norm(&mut buf, cfg.grad_clip);
            adam.step(&mut model.store, &buf);

            // Rebuild windows as constants in a fresh graph.
            let detached = windows.detach(&g);
            g = Graph::new();
            binder = Binder::new(&model.store);
            windows.cols = detached
                .into_iter()
                .map(|cols| cols.into_iter().map(|t| g.leaf(t)).collect())
                .collect();
            window_nlls.clear();
        }
    }
    Ok(report_sum / report_steps.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StepRecord;
    use crate::mdp::{JointAction, Observation};
    use crate::model::spec::{CausalGraph, NetConfig};

    /// Synthetic corpus with known linear dynamics v' = 0.99 v; wheels track
    /// v, everything else stays zero.
    fn synthetic_dataset(n_traj: usize, len: usize) -> Dataset {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for k in 0..n_traj {
            let mut v = 40.0 + k as f64;
            let mut records = Vec::new();
            for i in 0..len {
                let mut o = Observation::zeros();
                o.v_kmh = v;
                o.wheel_kmh = [v * 0.98; 4];
                o.accel[0] = -(v * 0.01) / 3.6 / 0.02;
                o.f_brake_n = 450.0;
                records.push(StepRecord {
                    t_s: i as f64 * 0.02,
                    obs: o,
                    action: JointAction::no_control(),
                });
                v *= 0.99;
            }
            let traj = Trajectory {
                scenario: "synthetic".into(),
                policy: "rule".into(),
                seed: k as u64,
                onset_index: 0,
                records,
            };
            if k % 5 == 4 {
                val.push(traj);
            } else {
                train.push(traj);
            }
        }
        Dataset { train, val }
    }

    fn tiny_net() -> NetConfig {
        NetConfig {
            gru_width: 8,
            fc1_width: 16,
            fc2_width: 16,
            dropout: 0.0,
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let mut model = DynamicsModel::new(tiny_net(), CausalGraph::default(), 20, 0);
        let err = train_model(&mut model, &Dataset::default(), &TrainConfig::desk());
        assert!(matches!(err, Err(ModelError::EmptyDataset)));
    }

    #[test]
    fn m1_objective_equals_mean_single_step_nll() {
        // With rollout disabled the reported train NLL is exactly the mean
        // single-step NLL of the batches it saw; verify on a fixed batch by
        // comparing the graph loss against per-sample forward NLL.
        let ds = synthetic_dataset(5, 40);
        let mut model = DynamicsModel::new(tiny_net(), CausalGraph::default(), 20, 1);
        model.stats = ChannelStats::from_trajectories(&ds.train);
        let samples: Vec<Sample> = all_transitions(&ds.train).into_iter().take(16).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (g, _, total) = batch_nll_graph(&model, &ds.train, &samples, false, &mut rng);
        let via_graph = g.value(total).item() / samples.len() as f64;
        let via_helper = mean_single_step_nll(&model, &ds.train, &samples).unwrap();
        assert!((via_graph - via_helper).abs() < 1e-9);
    }

    #[test]
    fn toy_linear_system_learned_to_half_kmh() {
        // v' = 0.99 v: after brief training the single-step vehicle-speed
        // prediction error should drop well below 0.5 km/h RMSE.
        let ds = synthetic_dataset(10, 60);
        let mut model = DynamicsModel::new(tiny_net(), CausalGraph::default(), 20, 2);
        let cfg = TrainConfig {
            epochs: 200,
            lr: 3e-3,
            batch: 64,
            rollout_len: 1,
            tbptt: 25,
            single_batches_per_epoch: 2,
            rollout_sequences: 0,
            rollout_batches_per_epoch: 0,
            val_samples: 128,
            grad_clip: 100.0,
            rollout_warmup_epochs: 0,
            seed: 3,
        };
        let history = train_model(&mut model, &ds, &cfg).unwrap();
        assert_eq!(history.epochs.len(), 200);
        // RMSE of v on validation transitions.
        let mut se = 0.0;
        let mut n = 0;
        for traj in &ds.val {
            for t in 19..traj.len() - 1 {
                let hist: Vec<Observation> =
                    traj.records[..=t].iter().map(|r| r.obs).collect();
                let state = crate::mdp::stack(&hist, 20).unwrap();
                let pred = model.predict(&state, traj.records[t].action).unwrap();
                let err = pred.mean[14] - traj.records[t + 1].obs.v_kmh;
                se += err * err;
                n += 1;
            }
        }
        let rmse = (se / n as f64).sqrt();
        assert!(rmse <= 0.5, "validation v RMSE {rmse} km/h");
        // Training reduced the validation NLL.
        let first = history.epochs.first().unwrap().val_nll;
        let last = history.epochs.last().unwrap().val_nll;
        assert!(last < first, "val NLL did not improve: {first} -> {last}");
    }

    #[test]
    fn rollout_phase_runs_and_stays_finite() {
        let ds = synthetic_dataset(6, 80);
        let mut model = DynamicsModel::new(tiny_net(), CausalGraph::default(), 20, 4);
        let cfg = TrainConfig {
            epochs: 3,
            lr: 1e-3,
            batch: 32,
            rollout_len: 20,
            tbptt: 8,
            single_batches_per_epoch: 2,
            rollout_sequences: 3,
            rollout_batches_per_epoch: 1,
            val_samples: 64,
            grad_clip: 100.0,
            rollout_warmup_epochs: 0,
            seed: 5,
        };
        let history = train_model(&mut model, &ds, &cfg).unwrap();
        assert_eq!(history.epochs.len(), 3);
        for e in &history.epochs {
            assert!(e.train_nll.is_finite());
            assert!(e.val_nll.is_finite());
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let ds = synthetic_dataset(4, 40);
        let run = || {
            let mut model = DynamicsModel::new(tiny_net(), CausalGraph::default(), 20, 9);
            let cfg = TrainConfig {
                epochs: 3,
                lr: 1e-3,
                batch: 16,
                rollout_len: 10,
                tbptt: 5,
                single_batches_per_epoch: 2,
                rollout_sequences: 2,
                rollout_batches_per_epoch: 1,
                val_samples: 32,
                grad_clip: 100.0,
                rollout_warmup_epochs: 1,
                seed: 11,
            };
            let h = train_model(&mut model, &ds, &cfg).unwrap();
            (model.store.flatten(), h.epochs.last().unwrap().val_nll)
        };
        let (p1, v1) = run();
        let (p2, v2) = run();
        assert_eq!(p1, p2);
        assert_eq!(v1.to_bits(), v2.to_bits());
    }
}
