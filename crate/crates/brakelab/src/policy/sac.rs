//! Soft actor-critic updates over the factored discrete action space.

use super::nets::{state_input, Critics, Policy};
use super::replay::Transition;
use crate::mdp::{JointAction, StackedState};
use crate::nn::{Adam, Binder, GradBuffer, Graph, Tensor};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Soft actor-critic hyper-parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SacConfig {
    pub gamma: f64,
    /// Target-network smoothing coefficient.
    pub tau: f64,
    pub lr: f64,
    pub batch: usize,
    /// Entropy temperature; fixed unless `auto_alpha`.
    pub alpha: f64,
    pub auto_alpha: bool,
    /// Target joint entropy for automatic temperature tuning, nats.
    pub target_entropy: f64,
    /// Speed augmentation range [l_aug, h_aug], km/h.
    pub aug_low_kmh: f64,
    pub aug_high_kmh: f64,
    /// Interaction epochs N and episodes per epoch E.
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    /// Maximum steps per imagined episode.
    pub h_max: usize,
    pub buffer_capacity: usize,
    /// One critic + one actor update every this many model steps.
    pub update_every: usize,
    /// Monte-Carlo samples for soft-value expectations.
    pub k_samples: usize,
    /// Use exact 256-action enumeration instead of sampling.
    pub exact_expectation: bool,
    /// Transitions required in the buffer before updates begin.
    pub warmup_transitions: usize,
    /// Actor/critic hidden widths.
    pub hidden: (usize, usize),
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 5e-3,
            lr: 3e-4,
            batch: 256,
            alpha: 0.05,
            auto_alpha: false,
            target_entropy: 0.5 * 4.0 * (4.0f64).ln(),
            aug_low_kmh: 0.0,
            aug_high_kmh: 80.0,
            epochs: 50,
            episodes_per_epoch: 20,
            h_max: 400,
            buffer_capacity: 500_000,
            update_every: 1,
            k_samples: 4,
            exact_expectation: false,
            warmup_transitions: 1000,
            hidden: (256, 256),
        }
    }
}

impl SacConfig {
    /// Desk-scale overrides: smaller nets and batches, updates every other
    /// model step, shorter schedule.
    pub fn desk() -> Self {
        Self {
            batch: 64,
            epochs: 20,
            episodes_per_epoch: 20,
            update_every: 2,
            hidden: (64, 64),
            warmup_transitions: 500,
            ..Self::default()
        }
    }
}

/// How soft-value expectations over the 256 joint actions are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectationMode {
    /// Average over K actions sampled from the policy.
    Sampled(usize),
    /// Exact enumeration of all 256 joint actions, weighted by the factored
    /// probabilities.
    Exact,
}

impl SacConfig {
    pub fn expectation_mode(&self) -> ExpectationMode {
        if self.exact_expectation {
            ExpectationMode::Exact
        } else {
            ExpectationMode::Sampled(self.k_samples)
        }
    }
}

/// Soft state value under the target critics:
/// `E_{a ~ pi}[ min_i targetQ_i(s, a) - alpha log pi(a|s) ]`.
pub fn soft_value_target(
    critics: &Critics,
    policy: &Policy,
    state: &StackedState,
    alpha: f64,
    mode: ExpectationMode,
    rng: &mut ChaCha12Rng,
) -> f64 {
    let lp = policy.log_probs(state);
    match mode {
        ExpectationMode::Sampled(k) => {
            let mut acc = 0.0;
            for _ in 0..k.max(1) {
                let (a, logp) = sample_from_log_probs(&lp, rng);
                acc += critics.min_q_target(state, a) - alpha * logp;
            }
            acc / k.max(1) as f64
        }
        ExpectationMode::Exact => {
            let mut acc = 0.0;
            for a in JointAction::all() {
                let logp = Policy::joint_log_prob(&lp, a);
                let w = logp.exp();
                if w > 0.0 {
                    acc += w * (critics.min_q_target(state, a) - alpha * logp);
                }
            }
            acc
        }
    }
}

fn sample_from_log_probs(lp: &[f64; 16], rng: &mut ChaCha12Rng) -> (JointAction, f64) {
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
    let a = JointAction(wheels);
    (a, Policy::joint_log_prob(lp, a))
}

/// Soft Bellman target `y = r + gamma * softV(s')`, masked at termination.
pub fn bellman_target(
    critics: &Critics,
    policy: &Policy,
    reward: f64,
    next_state: &StackedState,
    done: bool,
    alpha: f64,
    gamma: f64,
    mode: ExpectationMode,
    rng: &mut ChaCha12Rng,
) -> f64 {
    if done {
        return reward;
    }
    reward + gamma * soft_value_target(critics, policy, next_state, alpha, mode, rng)
}

/// One optimizer step on both critics toward precomputed targets; syncs the
/// target store. Returns the mean soft Bellman residual
/// `0.5 (Q - y)^2` over the batch and both critics.
pub fn critic_update(
    critics: &mut Critics,
    adam: &mut Adam,
    batch: &[Transition],
    targets: &[f64],
    tau: f64,
) -> f64 {
    assert_eq!(batch.len(), targets.len());
    let b = batch.len();
    let in_dim = crate::mdp::NUM_CHANNELS * critics.h + 16;
    let mut xdata = Vec::with_capacity(b * in_dim);
    for tr in batch {
        xdata.extend_from_slice(&critics.input(&tr.state, tr.action));
    }
    let mut g = Graph::new();
    let mut binder = Binder::new(&critics.online);
    let x = g.leaf(Tensor::from_vec(b, in_dim, xdata));
    let q1 = critics.arch1.forward(&mut g, &mut binder, &critics.online, x);
    let q2 = critics.arch2.forward(&mut g, &mut binder, &critics.online, x);
    let y = g.leaf(Tensor::from_vec(b, 1, targets.to_vec()));
    let d1 = g.sub(q1, y);
    let sq1 = g.mul(d1, d1);
    let d2 = g.sub(q2, y);
    let sq2 = g.mul(d2, d2);
    let s1 = g.sum_all(sq1);
    let s2 = g.sum_all(sq2);
    let total = g.add(s1, s2);
    // Mean of 0.5 (q - y)^2 over batch entries and both critics.
    let loss = g.scale(total, 0.5 / (2.0 * b as f64));
    let loss_value = g.value(loss).item();
    let grads = g.backward(loss);
    let mut buf = GradBuffer::zeros_like(&critics.online);
    binder.accumulate_grads(&g, &grads, &mut buf);
    adam.step(&mut critics.online, &buf);
    critics.sync_target(tau);
    loss_value
}

/// One actor ascent step on `E_{a~pi}[ Q(s,a) - alpha log pi(a|s) ]` with Q
/// supplied by a caller-chosen evaluator (the online min-critic in training,
/// a toy function in tests). Returns the estimated objective value.
pub fn actor_update_with(
    policy: &mut Policy,
    q_fn: &dyn Fn(&StackedState, JointAction) -> f64,
    adam: &mut Adam,
    states: &[&StackedState],
    alpha: f64,
    mode: ExpectationMode,
    rng: &mut ChaCha12Rng,
) -> f64 {
    let b = states.len();
    let in_dim = crate::mdp::NUM_CHANNELS * policy.h;
    match mode {
        ExpectationMode::Sampled(k) => {
            let k = k.max(1);
            // Draw actions and compute score-function coefficients.
            let mut picks = Vec::with_capacity(b * k * 4);
            let mut coefs = Vec::with_capacity(b * k);
            let mut xrep = Vec::with_capacity(b * k * in_dim);
            let mut objective = 0.0;
            for s in states {
                let lp = policy.log_probs(s);
                let x = state_input(&policy.stats, s);
                let mut fs = Vec::with_capacity(k);
                let mut actions = Vec::with_capacity(k);
                for _ in 0..k {
                    let (a, logp) = sample_from_log_probs(&lp, rng);
                    fs.push(q_fn(s, a) - alpha * logp);
                    actions.push(a);
                }
                let sum_f: f64 = fs.iter().sum();
                objective += sum_f / k as f64;
                for (i, a) in actions.iter().enumerate() {
                    // Leave-one-out baseline keeps the estimator unbiased.
                    let baseline = if k > 1 {
                        (sum_f - fs[i]) / (k - 1) as f64
                    } else {
                        0.0
                    };
                    coefs.push(fs[i] - alpha - baseline);
                    for w in 0..4 {
                        picks.push(w * 4 + a.0[w].index());
                    }
                    xrep.extend_from_slice(&x);
                }
            }
            objective /= b as f64;
            let mut g = Graph::new();
            let mut binder = Binder::new(&policy.store);
            let x = g.leaf(Tensor::from_vec(b * k, in_dim, xrep));
            let logp = policy.log_probs_graph(&mut g, &mut binder, &policy.store, x);
            let selected = g.select_sum(logp, &picks, 4);
            let coef = g.leaf(Tensor::from_vec(b * k, 1, coefs));
            let weighted = g.mul(coef, selected);
            let surrogate = g.sum_all(weighted);
            // Maximize: descend the negated surrogate, averaged per draw.
            let loss = g.scale(surrogate, -1.0 / (b * k) as f64);
            let grads = g.backward(loss);
            let mut buf = GradBuffer::zeros_like(&policy.store);
            binder.accumulate_grads(&g, &grads, &mut buf);
            adam.step(&mut policy.store, &buf);
            objective
        }
        ExpectationMode::Exact => {
            // Fully differentiable enumeration over all 256 joint actions.
            let mut xdata = Vec::with_capacity(b * in_dim);
            let mut qvals = vec![0.0; 256 * b];
            for (i, s) in states.iter().enumerate() {
                xdata.extend_from_slice(&state_input(&policy.stats, s));
                for (ai, a) in JointAction::all().enumerate() {
                    qvals[ai * b + i] = q_fn(s, a);
                }
            }
            let mut g = Graph::new();
            let mut binder = Binder::new(&policy.store);
            let x = g.leaf(Tensor::from_vec(b, in_dim, xdata));
            let logp = policy.log_probs_graph(&mut g, &mut binder, &policy.store, x);
            let mut total = None;
            for (ai, a) in JointAction::all().enumerate() {
                let picks: Vec<usize> = (0..b)
                    .flat_map(|_| (0..4).map(|w| w * 4 + a.0[w].index()).collect::<Vec<_>>())
                    .collect();
                let sel = g.select_sum(logp, &picks, 4);
                let w = g.exp(sel);
                let q = g.leaf(Tensor::from_vec(b, 1, qvals[ai * b..(ai + 1) * b].to_vec()));
                let ent = g.scale(sel, -alpha);
                let inner = g.add(q, ent);
                let term = g.mul(w, inner);
                let s = g.sum_all(term);
                total = Some(match total {
                    Some(acc) => g.add(acc, s),
                    None => s,
                });
            }
            let j = total.unwrap();
            let j_mean = g.scale(j, 1.0 / b as f64);
            let objective = g.value(j_mean).item();
            let loss = g.scale(j_mean, -1.0);
            let grads = g.backward(loss);
            let mut buf = GradBuffer::zeros_like(&policy.store);
            binder.accumulate_grads(&g, &grads, &mut buf);
            adam.step(&mut policy.store, &buf);
            objective
        }
    }
}

/// Production actor update against the online min-critic.
pub fn actor_update(
    policy: &mut Policy,
    critics: &Critics,
    adam: &mut Adam,
    batch: &[Transition],
    alpha: f64,
    mode: ExpectationMode,
    rng: &mut ChaCha12Rng,
) -> f64 {
    let states: Vec<&StackedState> = batch.iter().map(|t| &t.state).collect();
    let q = |s: &StackedState, a: JointAction| critics.min_q_online(s, a);
    actor_update_with(policy, &q, adam, &states, alpha, mode, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{stack, Observation};
    use crate::model::ChannelStats;
    use rand::SeedableRng;

    fn state(v0: f64) -> StackedState {
        let frames: Vec<Observation> = (0..20)
            .map(|i| {
                let mut o = Observation::zeros();
                o.v_kmh = v0 - i as f64 * 0.2;
                o.wheel_kmh = [o.v_kmh - 1.0; 4];
                o.pressure_mpa = [2.0; 4];
                o
            })
            .collect();
        stack(&frames, 20).unwrap()
    }

    fn small_policy(seed: u64) -> Policy {
        Policy::new((16, 16), ChannelStats::identity(), 20, seed)
    }

    fn small_critics(seed: u64) -> Critics {
        Critics::new((12, 12), ChannelStats::identity(), 20, seed)
    }

    #[test]
    fn terminal_transition_target_is_reward() {
        let critics = small_critics(0);
        let policy = small_policy(0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let y = bellman_target(
            &critics,
            &policy,
            -1.25,
            &state(30.0),
            true,
            0.05,
            0.99,
            ExpectationMode::Sampled(4),
            &mut rng,
        );
        assert_eq!(y, -1.25);
    }

    #[test]
    fn alpha_zero_near_deterministic_policy_reduces_to_q_bootstrap() {
        // Forcing one action per wheel via the head bias makes the policy
        // essentially deterministic; with alpha = 0 the exact target equals
        // r + gamma * minQ(s', a_det).
        let critics = small_critics(1);
        let mut policy = small_policy(1);
        let head_b = policy.store.ids().last().unwrap();
        {
            let t = policy.store.get_mut(head_b);
            for w in 0..4 {
                t.set(0, w * 4 + 2, 60.0); // favor Decrease on every wheel
            }
        }
        let s = state(40.0);
        let det = policy.greedy_action(&s);
        assert_eq!(det, JointAction([crate::mdp::WheelAction::Decrease; 4]));
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let y = bellman_target(
            &critics,
            &policy,
            0.5,
            &s,
            false,
            0.0,
            0.99,
            ExpectationMode::Exact,
            &mut rng,
        );
        let expected = 0.5 + 0.99 * critics.min_q_target(&s, det);
        assert!((y - expected).abs() < 1e-9, "{y} vs {expected}");
    }

    #[test]
    fn exact_matches_monte_carlo_within_three_standard_errors() {
        let critics = small_critics(2);
        let policy = small_policy(2);
        let s = state(35.0);
        let alpha = 0.05;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let exact = soft_value_target(
            &critics,
            &policy,
            &s,
            alpha,
            ExpectationMode::Exact,
            &mut rng,
        );
        // 1024 independent single draws for mean and standard error.
        let lp = policy.log_probs(&s);
        let mut draws = Vec::with_capacity(1024);
        for _ in 0..1024 {
            let (a, logp) = sample_from_log_probs(&lp, &mut rng);
            draws.push(critics.min_q_target(&s, a) - alpha * logp);
        }
        let mean: f64 = draws.iter().sum::<f64>() / draws.len() as f64;
        let var: f64 =
            draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (draws.len() - 1) as f64;
        let se = (var / draws.len() as f64).sqrt();
        assert!(
            (exact - mean).abs() <= 3.0 * se.max(1e-9),
            "exact {exact}, MC {mean} +/- {se}"
        );
    }

    #[test]
    fn critic_update_with_matching_targets_takes_a_zero_step() {
        // Make the two critics identical so a target equal to their shared
        // output zeroes every residual; the update must not move parameters.
        let mut critics = small_critics(3);
        let half = critics.online.len() / 2;
        for i in 0..half {
            let src = critics.online.get(crate::nn::ParamId(i)).clone();
            *critics.online.get_mut(crate::nn::ParamId(half + i)) = src;
        }
        critics.target = critics.online.clone();
        let mut adam = Adam::new(&critics.online, 3e-4);
        let s = state(30.0);
        let a = JointAction::no_control();
        let (q1, q2) = critics.q_online(&s, a);
        assert_eq!(q1, q2);
        let batch = vec![Transition {
            state: s.clone(),
            action: a,
            reward: -1.0,
            next_state: state(29.0),
            done: false,
        }];
        let before = critics.online.flatten();
        let loss = critic_update(&mut critics, &mut adam, &batch, &[q1], 0.0);
        assert_eq!(loss, 0.0);
        assert_eq!(critics.online.flatten(), before);
        // A non-matching target moves them.
        critic_update(&mut critics, &mut adam, &batch, &[q1 + 1.0], 0.0);
        assert_ne!(critics.online.flatten(), before);
    }

    #[test]
    fn critic_loss_decreases_on_a_fixed_batch() {
        let mut critics = small_critics(4);
        let mut adam = Adam::new(&critics.online, 1e-3);
        let batch: Vec<Transition> = (0..8)
            .map(|i| Transition {
                state: state(30.0 + i as f64),
                action: JointAction::decode((i * 31) as u8),
                reward: -0.5,
                next_state: state(29.0 + i as f64),
                done: false,
            })
            .collect();
        let targets: Vec<f64> = (0..8).map(|i| -10.0 - i as f64).collect();
        let first = critic_update(&mut critics, &mut adam, &batch, &targets, 0.0);
        let mut last = first;
        for _ in 0..99 {
            last = critic_update(&mut critics, &mut adam, &batch, &targets, 0.0);
        }
        assert!(
            last < first * 0.5,
            "loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn high_alpha_drives_policy_toward_uniform() {
        let mut policy = small_policy(5);
        // Bias the policy away from uniform first.
        let head_b = policy.store.ids().last().unwrap();
        {
            let t = policy.store.get_mut(head_b);
            for w in 0..4 {
                t.set(0, w * 4, 1.5);
            }
        }
        let mut adam = Adam::new(&policy.store, 1e-2);
        let s = state(30.0);
        let states = [&s];
        let q = |_: &StackedState, _: JointAction| 0.0;
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let kl_to_uniform = |p: &Policy| {
            let lp = p.log_probs(&s);
            let mut kl = 0.0;
            for w in 0..4 {
                for c in 0..4 {
                    let pw = lp[w * 4 + c].exp();
                    kl += pw * (lp[w * 4 + c] - (0.25f64).ln());
                }
            }
            kl
        };
        let before = kl_to_uniform(&policy);
        for _ in 0..200 {
            actor_update_with(
                &mut policy,
                &q,
                &mut adam,
                &states,
                50.0,
                ExpectationMode::Exact,
                &mut rng,
            );
        }
        let after = kl_to_uniform(&policy);
        assert!(
            after < before * 0.2,
            "KL to uniform did not shrink: {before} -> {after}"
        );
    }

    #[test]
    fn bandit_critic_dominant_action_probability_rises_monotonically() {
        let mut policy = small_policy(6);
        let mut adam = Adam::new(&policy.store, 3e-3);
        let s = state(25.0);
        let states = [&s];
        let star = JointAction::decode(141);
        let q = move |_: &StackedState, a: JointAction| if a == star { 10.0 } else { 0.0 };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let prob_star = |p: &Policy| Policy::joint_log_prob(&p.log_probs(&s), star).exp();
        let mut prev = prob_star(&policy);
        for step in 0..150 {
            actor_update_with(
                &mut policy,
                &q,
                &mut adam,
                &states,
                0.0,
                ExpectationMode::Exact,
                &mut rng,
            );
            let now = prob_star(&policy);
            assert!(
                now >= prev - 1e-9,
                "step {step}: probability fell {prev} -> {now}"
            );
            prev = now;
        }
        assert!(prev > 0.2, "dominant action probability only reached {prev}");
    }

    #[test]
    fn sampled_objective_agrees_with_exact_within_mc_error() {
        let policy = small_policy(7);
        let critics = small_critics(7);
        let s = state(33.0);
        let alpha = 0.05;
        // Exact objective value.
        let lp = policy.log_probs(&s);
        let mut exact = 0.0;
        for a in JointAction::all() {
            let logp = Policy::joint_log_prob(&lp, a);
            exact += logp.exp() * (critics.min_q_online(&s, a) - alpha * logp);
        }
        // Monte-Carlo estimate with many draws.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut draws = Vec::with_capacity(2000);
        for _ in 0..2000 {
            let (a, logp) = sample_from_log_probs(&lp, &mut rng);
            draws.push(critics.min_q_online(&s, a) - alpha * logp);
        }
        let mean: f64 = draws.iter().sum::<f64>() / draws.len() as f64;
        let var: f64 =
            draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (draws.len() - 1) as f64;
        let se = (var / draws.len() as f64).sqrt();
        assert!(
            (exact - mean).abs() <= 3.0 * se.max(1e-9),
            "exact {exact}, sampled {mean} +/- {se}"
        );
    }
}
