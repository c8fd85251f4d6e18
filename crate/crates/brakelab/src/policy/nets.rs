//! Actor and critic networks over stacked states.
//!
//! The actor maps a normalized stacked state to four independent 4-way
//! categorical distributions (one per wheel). The critics map state plus a
//! 16-dim one-hot joint-action encoding to a scalar value; two critics share
//! one parameter store, and the target store is a smoothed copy of it.

use crate::mdp::{JointAction, StackedState, NUM_CHANNELS};
use crate::model::ChannelStats;
use crate::nn::{Binder, Graph, Linear, NodeId, ParamStore, Tensor};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Flattens a stacked state into normalized channel-major inputs.
pub(crate) fn state_input(stats: &ChannelStats, state: &StackedState) -> Vec<f64> {
    let h = state.h();
    let mut out = Vec::with_capacity(NUM_CHANNELS * h);
    for c in 0..NUM_CHANNELS {
        for j in 0..h {
            out.push(stats.normalize(c, state.at(c, j)));
        }
    }
    out
}

/// Factored discrete policy: stacked state -> 16 logits -> per-wheel
/// log-softmax.
pub struct Policy {
    pub store: ParamStore,
    pub stats: ChannelStats,
    pub h: usize,
    pub hidden: (usize, usize),
    l1: Linear,
    l2: Linear,
    head: Linear,
}

impl Policy {
    pub fn new(hidden: (usize, usize), stats: ChannelStats, h: usize, seed: u64) -> Self {
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(crate::derive_seed(seed, "policy-init"));
        let in_dim = NUM_CHANNELS * h;
        let l1 = Linear::new(&mut store, &mut rng, "pi.l1", in_dim, hidden.0);
        let l2 = Linear::new(&mut store, &mut rng, "pi.l2", hidden.0, hidden.1);
        let head = Linear::new(&mut store, &mut rng, "pi.head", hidden.1, 16);
        // Zero logit head: the initial policy is exactly uniform per wheel.
        for v in store.get_mut(head.w).data_mut() {
            *v = 0.0;
        }
        Self {
            store,
            stats,
            h,
            hidden,
            l1,
            l2,
            head,
        }
    }

    /// Graph forward to per-wheel log-probabilities [B, 16].
    pub(crate) fn log_probs_graph(
        &self,
        g: &mut Graph,
        binder: &mut Binder,
        store: &ParamStore,
        x: NodeId,
    ) -> NodeId {
        let z = self.l1.forward(g, binder, store, x);
        let z = g.relu(z);
        let z = self.l2.forward(g, binder, store, z);
        let z = g.relu(z);
        let logits = self.head.forward(g, binder, store, z);
        g.log_softmax_groups(logits, 4)
    }

    /// Per-wheel log-probabilities for one state.
    pub fn log_probs(&self, state: &StackedState) -> [f64; 16] {
        let mut g = Graph::new();
        let mut binder = Binder::new(&self.store);
        let x = g.leaf(Tensor::row(&state_input(&self.stats, state)));
        let lp = self.log_probs_graph(&mut g, &mut binder, &self.store, x);
        let mut out = [0.0; 16];
        out.copy_from_slice(g.value(lp).data());
        out
    }

    /// Log-probability of a specific joint action under given log-probs.
    pub fn joint_log_prob(log_probs: &[f64; 16], action: JointAction) -> f64 {
        (0..4)
            .map(|w| log_probs[w * 4 + action.0[w].index()])
            .sum()
    }

    /// Independent categorical draw per wheel; returns the joint action and
    /// its log-probability.
    pub fn sample_action(
        &self,
        state: &StackedState,
        rng: &mut ChaCha12Rng,
    ) -> (JointAction, f64) {
        let lp = self.log_probs(state);
        let mut wheels = [crate::mdp::WheelAction::Hold; 4];
        for w in 0..4 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = 3;
            for c in 0..4 {
                acc += lp[w * 4 + c].exp();
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            wheels[w] = crate::mdp::WheelAction::from_index(chosen).unwrap();
        }
        let action = JointAction(wheels);
        (action, Self::joint_log_prob(&lp, action))
    }

    /// Deterministic mode: argmax per wheel.
    pub fn greedy_action(&self, state: &StackedState) -> JointAction {
        let lp = self.log_probs(state);
        let mut wheels = [crate::mdp::WheelAction::Hold; 4];
        for w in 0..4 {
            let mut best = 0;
            for c in 1..4 {
                if lp[w * 4 + c] > lp[w * 4 + best] {
                    best = c;
                }
            }
            wheels[w] = crate::mdp::WheelAction::from_index(best).unwrap();
        }
        JointAction(wheels)
    }

    /// Per-wheel entropies, nats.
    pub fn wheel_entropies(log_probs: &[f64; 16]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for w in 0..4 {
            out[w] = -(0..4)
                .map(|c| {
                    let lp = log_probs[w * 4 + c];
                    lp.exp() * lp
                })
                .sum::<f64>();
        }
        out
    }
}

/// Architecture handles of one critic MLP inside a shared store.
#[derive(Clone, Copy)]
pub(crate) struct CriticArch {
    l1: Linear,
    l2: Linear,
    out: Linear,
}

impl CriticArch {
    fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha12Rng,
        name: &str,
        in_dim: usize,
        hidden: (usize, usize),
    ) -> Self {
        Self {
            l1: Linear::new(store, rng, &format!("{name}.l1"), in_dim, hidden.0),
            l2: Linear::new(store, rng, &format!("{name}.l2"), hidden.0, hidden.1),
            out: Linear::new(store, rng, &format!("{name}.out"), hidden.1, 1),
        }
    }

    pub(crate) fn forward(
        &self,
        g: &mut Graph,
        binder: &mut Binder,
        store: &ParamStore,
        x: NodeId,
    ) -> NodeId {
        let z = self.l1.forward(g, binder, store, x);
        let z = g.relu(z);
        let z = self.l2.forward(g, binder, store, z);
        let z = g.relu(z);
        self.out.forward(g, binder, store, z)
    }
}

/// Double critic with target copies updated only by tau-smoothing.
pub struct Critics {
    pub online: ParamStore,
    pub target: ParamStore,
    pub stats: ChannelStats,
    pub h: usize,
    pub hidden: (usize, usize),
    pub(crate) arch1: CriticArch,
    pub(crate) arch2: CriticArch,
}

impl Critics {
    pub fn new(hidden: (usize, usize), stats: ChannelStats, h: usize, seed: u64) -> Self {
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(crate::derive_seed(seed, "critic-init"));
        let in_dim = NUM_CHANNELS * h + 16;
        let arch1 = CriticArch::new(&mut store, &mut rng, "q1", in_dim, hidden);
        let arch2 = CriticArch::new(&mut store, &mut rng, "q2", in_dim, hidden);
        let target = store.clone();
        Self {
            online: store,
            target,
            stats,
            h,
            hidden,
            arch1,
            arch2,
        }
    }

    pub(crate) fn input(&self, state: &StackedState, action: JointAction) -> Vec<f64> {
        let mut x = state_input(&self.stats, state);
        x.extend_from_slice(&action.one_hot());
        x
    }

    fn q_with(&self, store: &ParamStore, x: &[f64]) -> (f64, f64) {
        let mut g = Graph::new();
        let mut binder = Binder::new(store);
        let xn = g.leaf(Tensor::row(x));
        let q1 = self.arch1.forward(&mut g, &mut binder, store, xn);
        let q2 = self.arch2.forward(&mut g, &mut binder, store, xn);
        (g.value(q1).item(), g.value(q2).item())
    }

    /// Online critic pair.
    pub fn q_online(&self, state: &StackedState, action: JointAction) -> (f64, f64) {
        self.q_with(&self.online, &self.input(state, action))
    }

    /// Target critic pair.
    pub fn q_target(&self, state: &StackedState, action: JointAction) -> (f64, f64) {
        self.q_with(&self.target, &self.input(state, action))
    }

    pub fn min_q_online(&self, state: &StackedState, action: JointAction) -> f64 {
        let (a, b) = self.q_online(state, action);
        a.min(b)
    }

    pub fn min_q_target(&self, state: &StackedState, action: JointAction) -> f64 {
        let (a, b) = self.q_target(state, action);
        a.min(b)
    }

    /// `target = (1 - tau) * target + tau * online`, elementwise.
    pub fn sync_target(&mut self, tau: f64) {
        let online = self.online.flatten();
        let mut tgt = self.target.flatten();
        for (t, o) in tgt.iter_mut().zip(online.iter()) {
            *t = (1.0 - tau) * *t + tau * *o;
        }
        self.target.unflatten(&tgt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{stack, Observation};

    fn state() -> StackedState {
        let frames: Vec<Observation> = (0..20)
            .map(|i| {
                let mut o = Observation::zeros();
                o.v_kmh = 40.0 - i as f64;
                o.wheel_kmh = [o.v_kmh - 2.0; 4];
                o.pressure_mpa = [3.0; 4];
                o.f_brake_n = 450.0;
                o
            })
            .collect();
        stack(&frames, 20).unwrap()
    }

    #[test]
    fn wheel_probabilities_sum_to_one() {
        let p = Policy::new((16, 16), ChannelStats::identity(), 20, 0);
        let lp = p.log_probs(&state());
        for w in 0..4 {
            let sum: f64 = (0..4).map(|c| lp[w * 4 + c].exp()).sum();
            assert!((sum - 1.0).abs() < 1e-9, "wheel {w} sums to {sum}");
        }
    }

    #[test]
    fn joint_log_prob_is_sum_of_wheel_terms() {
        let p = Policy::new((16, 16), ChannelStats::identity(), 20, 1);
        let st = state();
        let lp = p.log_probs(&st);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (a, logp) = p.sample_action(&st, &mut rng);
            let recomputed: f64 = (0..4).map(|w| lp[w * 4 + a.0[w].index()]).sum();
            assert!((logp - recomputed).abs() < 1e-12);
        }
    }

    #[test]
    fn fresh_policy_marginals_are_near_uniform() {
        // Zero-initialized bias head keeps logits small; over many draws each
        // wheel marginal is close to 1/4.
        let p = Policy::new((16, 16), ChannelStats::identity(), 20, 2);
        let st = state();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut counts = [[0u32; 4]; 4];
        let n = 20_000;
        for _ in 0..n {
            let (a, _) = p.sample_action(&st, &mut rng);
            for w in 0..4 {
                counts[w][a.0[w].index()] += 1;
            }
        }
        for w in 0..4 {
            for c in 0..4 {
                let f = counts[w][c] as f64 / n as f64;
                assert!((f - 0.25).abs() < 0.08, "wheel {w} choice {c}: {f}");
            }
        }
    }

    #[test]
    fn greedy_is_seed_independent_and_entropy_bounded() {
        let p = Policy::new((16, 16), ChannelStats::identity(), 20, 3);
        let st = state();
        let a = p.greedy_action(&st);
        let b = p.greedy_action(&st);
        assert_eq!(a, b);
        let lp = p.log_probs(&st);
        let ent = Policy::wheel_entropies(&lp);
        for e in ent {
            assert!(e <= (4.0f64).ln() + 1e-12);
            assert!(e >= 0.0);
        }
        assert!(ent.iter().sum::<f64>() <= 4.0 * (4.0f64).ln() + 1e-9);
    }

    #[test]
    fn target_sync_is_exact_interpolation() {
        let mut c = Critics::new((8, 8), ChannelStats::identity(), 20, 5);
        // Shift online params away from the target copy.
        let mut flat = c.online.flatten();
        for v in flat.iter_mut() {
            *v += 1.0;
        }
        c.online.unflatten(&flat);
        let old_target = c.target.flatten();
        let online = c.online.flatten();
        let tau = 5e-3;
        c.sync_target(tau);
        let new_target = c.target.flatten();
        for ((nt, ot), on) in new_target.iter().zip(old_target.iter()).zip(online.iter()) {
            let expected = (1.0 - tau) * ot + tau * on;
            assert!((nt - expected).abs() < 1e-15);
        }
        // Contraction of the gap.
        let gap_old: f64 = old_target
            .iter()
            .zip(online.iter())
            .map(|(t, o)| (t - o).abs())
            .fold(0.0, f64::max);
        let gap_new: f64 = new_target
            .iter()
            .zip(online.iter())
            .map(|(t, o)| (t - o).abs())
            .fold(0.0, f64::max);
        assert!(gap_new <= (1.0 - tau) * gap_old + 1e-12);
    }

    #[test]
    fn double_critics_are_independent() {
        let c = Critics::new((8, 8), ChannelStats::identity(), 20, 6);
        let st = state();
        let (q1, q2) = c.q_online(&st, JointAction::no_control());
        assert_ne!(q1, q2);
        let (t1, t2) = c.q_target(&st, JointAction::no_control());
        // Fresh targets are exact copies.
        assert_eq!(q1, t1);
        assert_eq!(q2, t2);
    }
}
