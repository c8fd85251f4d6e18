//! Episode-structured replay buffer.
//!
//! Imagined episodes are stored as frame sequences plus a per-episode speed
//! augmentation offset; stacked-state windows are materialized (and
//! augmented) at sample time. This keeps the buffer at one frame per step
//! instead of two full windows per transition.

use crate::mdp::{JointAction, Observation, StackedState, NUM_CHANNELS};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::collections::VecDeque;

struct Episode {
    /// Window frames: the h-frame initial window followed by one frame per
    /// step; transition t spans frames [t, t+h].
    frames: Vec<[f64; NUM_CHANNELS]>,
    actions: Vec<u8>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    v_aug: f64,
}

impl Episode {
    fn transitions(&self) -> usize {
        self.actions.len()
    }
}

/// One materialized (augmented) transition.
pub struct Transition {
    pub state: StackedState,
    pub action: JointAction,
    pub reward: f64,
    pub next_state: StackedState,
    pub done: bool,
}

/// FIFO ring of episodes with uniform transition sampling.
pub struct ReplayBuffer {
    episodes: VecDeque<Episode>,
    /// Cumulative transition counts aligned with `episodes`.
    offsets: Vec<usize>,
    capacity: usize,
    h: usize,
    open: Option<Episode>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, h: usize) -> Self {
        Self {
            episodes: VecDeque::new(),
            offsets: Vec::new(),
            capacity,
            h,
            open: None,
        }
    }

    /// Transitions available for sampling (sealed episodes plus the open one).
    pub fn len(&self) -> usize {
        self.sealed_len() + self.open.as_ref().map(|e| e.transitions()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sealed_len(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0)
    }

    /// Begins a new episode from its initial h-frame window.
    pub fn start_episode(&mut self, window: &StackedState, v_aug: f64) {
        assert!(self.open.is_none(), "previous episode not sealed");
        let mut frames = Vec::with_capacity(self.h + 64);
        for j in 0..self.h {
            let mut f = [0.0; NUM_CHANNELS];
            for (c, slot) in f.iter_mut().enumerate() {
                *slot = window.at(c, j);
            }
            frames.push(f);
        }
        self.open = Some(Episode {
            frames,
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            v_aug,
        });
    }

    /// Appends one step: the action taken, the resulting frame, its reward,
    /// and the termination flag.
    pub fn push_step(&mut self, action: JointAction, next: &Observation, reward: f64, done: bool) {
        let ep = self.open.as_mut().expect("no open episode");
        ep.frames.push(next.to_array());
        ep.actions.push(action.encode());
        ep.rewards.push(reward);
        ep.dones.push(done);
    }

    /// Seals the open episode and evicts oldest sealed episodes over capacity.
    pub fn end_episode(&mut self) {
        let ep = self.open.take().expect("no open episode");
        if ep.transitions() > 0 {
            self.episodes.push_back(ep);
        }
        while self.sealed_len_recount() > self.capacity && self.episodes.len() > 1 {
            self.episodes.pop_front();
        }
        self.rebuild_offsets();
    }

    fn sealed_len_recount(&self) -> usize {
        self.episodes.iter().map(|e| e.transitions()).sum()
    }

    fn rebuild_offsets(&mut self) {
        self.offsets.clear();
        let mut acc = 0;
        for e in &self.episodes {
            acc += e.transitions();
            self.offsets.push(acc);
        }
    }

    fn episode_at(&self, global: usize) -> (&Episode, usize) {
        let sealed = self.sealed_len();
        if global < sealed {
            let ep_idx = self.offsets.partition_point(|o| *o <= global);
            let start = if ep_idx == 0 { 0 } else { self.offsets[ep_idx - 1] };
            (&self.episodes[ep_idx], global - start)
        } else {
            (self.open.as_ref().expect("open episode"), global - sealed)
        }
    }

    fn materialize_window(&self, ep: &Episode, t: usize) -> StackedState {
        let mut data = vec![0.0; NUM_CHANNELS * self.h];
        for c in 0..NUM_CHANNELS {
            for j in 0..self.h {
                data[c * self.h + j] = ep.frames[t + j][c];
            }
        }
        StackedState::from_flat(self.h, data).speed_augmented(ep.v_aug)
    }

    /// Uniform sample over all stored transitions.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> Transition {
        assert!(!self.is_empty(), "sampling from empty buffer");
        let idx = rng.random_range(0..self.len());
        let (ep, t) = self.episode_at(idx);
        Transition {
            state: self.materialize_window(ep, t),
            action: JointAction::decode(ep.actions[t]),
            reward: ep.rewards[t],
            next_state: self.materialize_window(ep, t + 1),
            done: ep.dones[t],
        }
    }

    pub fn sample_batch(&self, rng: &mut ChaCha12Rng, n: usize) -> Vec<Transition> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::stack;
    use rand::SeedableRng;

    fn frame(v: f64) -> Observation {
        let mut o = Observation::zeros();
        o.v_kmh = v;
        o.wheel_kmh = [v - 1.0; 4];
        o
    }

    fn window(v0: f64) -> StackedState {
        let frames: Vec<Observation> = (0..20).map(|i| frame(v0 + i as f64 * 0.1)).collect();
        stack(&frames, 20).unwrap()
    }

    fn push_episode(buf: &mut ReplayBuffer, v0: f64, steps: usize, v_aug: f64) {
        buf.start_episode(&window(v0), v_aug);
        for k in 0..steps {
            buf.push_step(
                JointAction::decode((k % 256) as u8),
                &frame(v0 - k as f64),
                -0.1 * k as f64,
                k + 1 == steps,
            );
        }
        buf.end_episode();
    }

    #[test]
    fn windows_shift_across_the_episode() {
        let mut buf = ReplayBuffer::new(1000, 20);
        push_episode(&mut buf, 40.0, 5, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..50 {
            let tr = buf.sample(&mut rng);
            // next_state is state shifted by one frame.
            for c in 0..NUM_CHANNELS {
                for j in 0..19 {
                    assert_eq!(tr.state.at(c, j + 1), tr.next_state.at(c, j));
                }
            }
            assert!(tr.reward <= 0.0);
        }
    }

    #[test]
    fn augmentation_applies_at_sample_time() {
        let mut buf = ReplayBuffer::new(1000, 20);
        push_episode(&mut buf, 40.0, 3, 25.0);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let tr = buf.sample(&mut rng);
        // Newest speed channel is the stored frame value plus v_aug.
        assert!(tr.state.at(0, 19) >= 25.0 + 35.0);
        // Pressure channels untouched.
        assert_eq!(tr.state.at(11, 19), 0.0);
    }

    #[test]
    fn fifo_eviction_by_whole_episodes() {
        let mut buf = ReplayBuffer::new(10, 20);
        push_episode(&mut buf, 40.0, 6, 0.0);
        push_episode(&mut buf, 50.0, 6, 0.0);
        push_episode(&mut buf, 60.0, 6, 0.0);
        // Capacity 10 holds at most one sealed 6-step episode plus the newest.
        assert!(buf.len() <= 12);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        // The oldest episode (starting at 40) must be gone: all sampled
        // newest-frame speeds come from the later episodes.
        for _ in 0..100 {
            let tr = buf.sample(&mut rng);
            assert!(tr.state.at(0, 19) > 42.0);
        }
    }

    #[test]
    fn open_episode_is_sampleable_immediately() {
        let mut buf = ReplayBuffer::new(100, 20);
        buf.start_episode(&window(30.0), 0.0);
        buf.push_step(JointAction::no_control(), &frame(29.0), -1.0, false);
        assert_eq!(buf.len(), 1);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let tr = buf.sample(&mut rng);
        assert_eq!(tr.reward, -1.0);
        assert!(!tr.done);
        buf.end_episode();
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn sampling_is_uniform_over_transitions() {
        let mut buf = ReplayBuffer::new(1000, 20);
        push_episode(&mut buf, 40.0, 10, 0.0);
        push_episode(&mut buf, 80.0, 30, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 40_000;
        let mut from_second = 0;
        for _ in 0..n {
            let tr = buf.sample(&mut rng);
            if tr.state.at(0, 0) > 42.0 {
                from_second += 1;
            }
        }
        let frac = from_second as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.02, "second-episode fraction {frac}");
    }
}
