//! Desk-scale laboratory for learned vehicle braking control.
//!
//! The pipeline has four stages: collect braking trajectories from a
//! ground-truth longitudinal/yaw simulator driven by weak baseline policies,
//! fit a recurrent dynamics model to the offline corpus, optimize a discrete
//! per-wheel valve policy with soft actor-critic entirely inside the learned
//! model, and evaluate the result against baselines across in-distribution
//! and out-of-distribution braking scenarios.
//!
//! Module map:
//! - [`sim`]: four-wheel vehicle dynamics, slip-dependent friction, hydraulic
//!   control unit, sensor frame extraction.
//! - [`mdp`]: observation stacking, action encoding, slip ratio, reward,
//!   termination.
//! - [`scenario`]: surface/speed/steering scenario specs and their JSON form.
//! - [`data`]: rule/random collection policies, trajectory recording, JSONL
//!   dataset persistence.
//! - [`nn`]: minimal reverse-mode autodiff kernel (fully connected, GRU,
//!   Gaussian heads, dropout, Adam) with finite-difference verification
//!   helpers.
//! - [`model`]: the four-module recurrent dynamics model, mixed single-step +
//!   roll-out likelihood training, and the roll-out engine.
//! - [`policy`]: factored discrete soft actor-critic with speed augmentation
//!   trained on model roll-outs.
//! - [`eval`]: scenario matrix, controllers under test, metric extraction,
//!   nominal-vs-perturbed gap report, SVG plots.
//! - [`cli`]: stage dispatch and reproducible run configuration.

pub mod cli;
pub mod data;
pub mod eval;
pub mod mdp;
pub mod model;
pub mod nn;
pub mod policy;
pub mod scenario;
pub mod sim;

/// Derives a stream-specific RNG seed from a master seed and a tag, so each
/// pipeline stage draws from an independent deterministic stream.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ master.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
