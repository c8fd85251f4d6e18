//! Model bundle persistence: parameter checkpoint plus a JSON metadata file
//! carrying the causal graph, network sizes, window length, and the frozen
//! normalization statistics.

use super::net::{DynamicsModel, ModelError};
use super::spec::{CausalGraph, ChannelStats, NetConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    version: u32,
    h: usize,
    net: NetConfig,
    graph: CausalGraph,
    stats: ChannelStats,
}

const META_VERSION: u32 = 1;

/// Writes `<stem>.ckpt` (parameters) and `<stem>.json` (metadata).
pub fn save_model(model: &DynamicsModel, stem: &Path) -> Result<(), ModelError> {
    let meta = ModelMeta {
        version: META_VERSION,
        h: model.h,
        net: model.net,
        graph: model.graph_spec.clone(),
        stats: model.stats.clone(),
    };
    if let Some(dir) = stem.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string_pretty(&meta).expect("meta serialization");
    std::fs::write(stem.with_extension("json"), json)?;
    crate::nn::save_params(&model.store, &stem.with_extension("ckpt"))?;
    Ok(())
}

/// Loads a model bundle written by [`save_model`], validating that the
/// checkpoint matches the metadata's architecture.
pub fn load_model(stem: &Path) -> Result<DynamicsModel, ModelError> {
    let meta_path = stem.with_extension("json");
    let text = std::fs::read_to_string(&meta_path)?;
    let meta: ModelMeta = serde_json::from_str(&text)
        .map_err(|e| ModelError::Meta(format!("{}: {e}", meta_path.display())))?;
    if meta.version != META_VERSION {
        return Err(ModelError::Meta(format!(
            "{}: unsupported model meta version {}",
            meta_path.display(),
            meta.version
        )));
    }
    meta.graph
        .validate()
        .map_err(|e| ModelError::Meta(format!("{}: {e}", meta_path.display())))?;
    if meta.stats.mean.len() != crate::mdp::NUM_CHANNELS
        || meta.stats.std.len() != crate::mdp::NUM_CHANNELS
    {
        return Err(ModelError::Meta(format!(
            "{}: stats must cover {} channels",
            meta_path.display(),
            crate::mdp::NUM_CHANNELS
        )));
    }
    if meta.stats.std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(ModelError::Meta(format!(
            "{}: non-positive channel std",
            meta_path.display()
        )));
    }
    let mut model = DynamicsModel::new(meta.net, meta.graph, meta.h, 0);
    let loaded = crate::nn::load_params(&stem.with_extension("ckpt"))?;
    if loaded.len() != model.store.len() {
        return Err(ModelError::Meta(format!(
            "checkpoint has {} parameters, architecture needs {}",
            loaded.len(),
            model.store.len()
        )));
    }
    for (a, b) in model.store.iter().zip(loaded.iter()) {
        if a.0 != b.0 || a.1.rows() != b.1.rows() || a.1.cols() != b.1.cols() {
            return Err(ModelError::Meta(format!(
                "checkpoint parameter {} ({}x{}) does not match architecture {} ({}x{})",
                b.0,
                b.1.rows(),
                b.1.cols(),
                a.0,
                a.1.rows(),
                a.1.cols()
            )));
        }
    }
    model.store = loaded;
    model.stats = meta.stats;
    Ok(model)
}
