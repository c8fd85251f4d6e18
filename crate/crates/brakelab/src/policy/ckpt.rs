//! Policy bundle persistence: parameter checkpoint plus a JSON manifest with
//! the architecture and frozen normalization statistics.

use super::nets::Policy;
use crate::model::{ChannelStats, ModelError};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct PolicyMeta {
    version: u32,
    h: usize,
    hidden: (usize, usize),
    stats: ChannelStats,
    alpha: f64,
}

const META_VERSION: u32 = 1;

/// Writes `<stem>.ckpt` and `<stem>.json`.
pub fn save_policy(policy: &Policy, alpha: f64, stem: &Path) -> Result<(), ModelError> {
    let meta = PolicyMeta {
        version: META_VERSION,
        h: policy.h,
        hidden: policy.hidden,
        stats: policy.stats.clone(),
        alpha,
    };
    if let Some(dir) = stem.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&meta).expect("policy meta"),
    )?;
    crate::nn::save_params(&policy.store, &stem.with_extension("ckpt"))?;
    Ok(())
}

/// Loads a policy bundle written by [`save_policy`].
pub fn load_policy(stem: &Path) -> Result<(Policy, f64), ModelError> {
    let meta_path = stem.with_extension("json");
    let text = std::fs::read_to_string(&meta_path)?;
    let meta: PolicyMeta = serde_json::from_str(&text)
        .map_err(|e| ModelError::Meta(format!("{}: {e}", meta_path.display())))?;
    if meta.version != META_VERSION {
        return Err(ModelError::Meta(format!(
            "{}: unsupported policy meta version {}",
            meta_path.display(),
            meta.version
        )));
    }
    if meta.stats.mean.len() != crate::mdp::NUM_CHANNELS
        || meta.stats.std.len() != crate::mdp::NUM_CHANNELS
        || meta.stats.std.iter().any(|s| !(*s > 0.0) || !s.is_finite())
    {
        return Err(ModelError::Meta(format!(
            "{}: invalid normalization stats",
            meta_path.display()
        )));
    }
    let mut policy = Policy::new(meta.hidden, meta.stats, meta.h, 0);
    let loaded = crate::nn::load_params(&stem.with_extension("ckpt"))?;
    if loaded.len() != policy.store.len() {
        return Err(ModelError::Meta(format!(
            "policy checkpoint has {} parameters, architecture needs {}",
            loaded.len(),
            policy.store.len()
        )));
    }
    for (a, b) in policy.store.iter().zip(loaded.iter()) {
        if a.0 != b.0 || a.1.rows() != b.1.rows() || a.1.cols() != b.1.cols() {
            return Err(ModelError::Meta(format!(
                "policy checkpoint parameter {} does not match architecture",
                b.0
            )));
        }
    }
    policy.store = loaded;
    Ok((policy, meta.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{stack, Observation};

    #[test]
    fn policy_bundle_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("policy");
        let policy = Policy::new((16, 16), ChannelStats::identity(), 20, 5);
        save_policy(&policy, 0.05, &stem).unwrap();
        let (back, alpha) = load_policy(&stem).unwrap();
        assert_eq!(alpha, 0.05);
        let frames: Vec<Observation> = (0..20)
            .map(|i| {
                let mut o = Observation::zeros();
                o.v_kmh = 50.0 - i as f64;
                o
            })
            .collect();
        let s = stack(&frames, 20).unwrap();
        assert_eq!(policy.log_probs(&s), back.log_probs(&s));
        assert_eq!(policy.greedy_action(&s), back.greedy_action(&s));
    }

    #[test]
    fn wrong_architecture_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("policy");
        save_policy(&Policy::new((16, 16), ChannelStats::identity(), 20, 5), 0.05, &stem).unwrap();
        let other = Policy::new((8, 8), ChannelStats::identity(), 20, 5);
        crate::nn::save_params(&other.store, &stem.with_extension("ckpt")).unwrap();
        assert!(load_policy(&stem).is_err());
    }
}
