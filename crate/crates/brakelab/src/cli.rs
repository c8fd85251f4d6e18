//! Pipeline orchestration: stage dispatch with a fully resolved, reproducible
//! run configuration. Every stage writes a `run_config.json` snapshot next to
//! its outputs; re-running from a snapshot reproduces the outputs byte for
//! byte.

use crate::data::{collect_corpus, CollectionConfig, Dataset};
use crate::eval::{
    compare, gap_report, gap_to_csv, plot_learning_curves, plot_model_loss, plot_speed_traces,
    results_to_csv, Controller, EvalSetup, Perturbation,
};
use crate::mdp::RewardConfig;
use crate::model::{
    load_model, save_model, train_model, CausalGraph, DynamicsModel, NetConfig, TrainConfig,
};
use crate::policy::{
    curves_to_csv, episodes_to_csv, load_policy, save_policy, train_policy, CurveRow, SacConfig,
};
use crate::scenario::{collection_scenarios, ood_scenarios};
use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Collect,
    TrainModel,
    TrainPolicy,
    Evaluate,
    GapReport,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Small networks and schedules; the full pipeline runs on a laptop.
    Desk,
    /// Reference sizes and schedules.
    Paper,
}

/// Everything a run needs, resolved and serializable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub scale: Scale,
    pub jobs: usize,
    pub data_dir: PathBuf,
    pub model_stem: PathBuf,
    pub policy_stem: PathBuf,
    pub out_dir: PathBuf,
    pub collection: CollectionConfig,
    pub reward: RewardConfig,
    pub model_net: NetConfig,
    pub model_graph: CausalGraph,
    pub model_train: TrainConfig,
    pub stack_len: usize,
    pub sac: SacConfig,
    pub eval_repeats: usize,
    pub eval_setup: EvalSetup,
    pub perturbation: Perturbation,
}

impl RunConfig {
    pub fn for_scale(scale: Scale, seed: u64) -> Self {
        let (model_net, model_train, sac) = match scale {
            Scale::Desk => (NetConfig::desk(), TrainConfig::desk(), SacConfig::desk()),
            Scale::Paper => (NetConfig::paper(), TrainConfig::paper(), SacConfig::default()),
        };
        Self {
            seed,
            scale,
            jobs: 1,
            data_dir: PathBuf::from("data"),
            model_stem: PathBuf::from("runs/model/model"),
            policy_stem: PathBuf::from("runs/policy/policy"),
            out_dir: PathBuf::from("runs"),
            collection: CollectionConfig::default(),
            reward: RewardConfig::default(),
            model_net,
            model_graph: CausalGraph::default(),
            model_train,
            stack_len: crate::mdp::STACK_LEN,
            sac,
            eval_repeats: 5,
            eval_setup: EvalSetup::default(),
            perturbation: Perturbation::default(),
        }
    }
}

/// Deep-merges `patch` onto `base`: objects merge key-wise, everything else
/// is replaced.
pub fn merge_json(base: serde_json::Value, patch: serde_json::Value) -> serde_json::Value {
    match (base, patch) {
        (serde_json::Value::Object(mut b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                let merged = match b.remove(&k) {
                    Some(existing) => merge_json(existing, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            serde_json::Value::Object(b)
        }
        (_, p) => p,
    }
}

/// Applies a JSON override file onto a resolved config.
pub fn apply_overrides(cfg: &RunConfig, overrides: &str) -> Result<RunConfig> {
    let base = serde_json::to_value(cfg).expect("config serializes");
    let patch: serde_json::Value =
        serde_json::from_str(overrides).context("parsing --config JSON")?;
    let merged = merge_json(base, patch);
    serde_json::from_value(merged).context("merged config is not a valid run configuration")
}

fn write_snapshot(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(dir.join("run_config.json"), json)?;
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("missing {what}: {} (run the producing stage first)", path.display());
    }
    Ok(())
}

/// Exit status 2 marks usage errors / missing inputs, 1 runtime failures.
pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<()> {
    match stage {
        Stage::Collect => stage_collect(cfg),
        Stage::TrainModel => stage_train_model(cfg),
        Stage::TrainPolicy => stage_train_policy(cfg),
        Stage::Evaluate => stage_evaluate(cfg),
        Stage::GapReport => stage_gap_report(cfg),
        Stage::All => {
            stage_collect(cfg)?;
            stage_train_model(cfg)?;
            stage_train_policy(cfg)?;
            stage_evaluate(cfg)
        }
    }
}

fn stage_collect(cfg: &RunConfig) -> Result<()> {
    let started = std::time::Instant::now();
    let dataset = collect_corpus(crate::derive_seed(cfg.seed, "collect"), &cfg.collection)
        .map_err(|e| anyhow!("collection failed: {e}"))?;
    dataset
        .save(&cfg.data_dir)
        .map_err(|e| anyhow!("saving dataset: {e}"))?;
    write_snapshot(cfg, &cfg.data_dir)?;
    eprintln!(
        "collect: {} train + {} val trajectories ({} transitions) -> {} [{:.1?}]",
        dataset.train.len(),
        dataset.val.len(),
        dataset.total_transitions(),
        cfg.data_dir.display(),
        started.elapsed()
    );
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    if !cfg.data_dir.join("train").is_dir() {
        bail!(
            "missing dataset directory: {} (run --stage collect first)",
            cfg.data_dir.display()
        );
    }
    Dataset::load(&cfg.data_dir).map_err(|e| anyhow!("loading dataset: {e}"))
}

fn stage_train_model(cfg: &RunConfig) -> Result<()> {
    let started = std::time::Instant::now();
    let dataset = load_dataset(cfg)?;
    let mut model = DynamicsModel::new(
        cfg.model_net,
        cfg.model_graph.clone(),
        cfg.stack_len,
        crate::derive_seed(cfg.seed, "model"),
    );
    let mut train_cfg = cfg.model_train;
    train_cfg.seed = crate::derive_seed(cfg.seed, "model-train");
    let history =
        train_model(&mut model, &dataset, &train_cfg).map_err(|e| anyhow!("model training: {e}"))?;
    save_model(&model, &cfg.model_stem).map_err(|e| anyhow!("saving model: {e}"))?;
    let dir = cfg
        .model_stem
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("loss_history.csv"), history.to_csv())?;
    let _ = plot_model_loss(&history, &dir.join("loss_history.svg"));
    // Full-length mean roll-outs on the held-out trajectories.
    let val_rollouts = crate::model::evaluate_rollouts(&model, &dataset.val, &cfg.reward)
        .map_err(|e| anyhow!("validation roll-outs: {e}"))?;
    std::fs::write(
        dir.join("rollout_eval.csv"),
        crate::model::rollout_eval_to_csv(&val_rollouts),
    )?;
    for r in &val_rollouts {
        eprintln!(
            "  rollout {} {} ({} steps): v MAE {:.2} km/h, wheel MAE {:.2} km/h",
            r.policy, r.scenario, r.steps, r.v_mae_kmh, r.w_mae_kmh
        );
    }
    write_snapshot(cfg, &dir)?;
    let last = history.epochs.last();
    eprintln!(
        "train-model: {} epochs, final train NLL {:.3}, val NLL {:.3} -> {} [{:.1?}]",
        history.epochs.len(),
        last.map(|e| e.train_nll).unwrap_or(f64::NAN),
        last.map(|e| e.val_nll).unwrap_or(f64::NAN),
        cfg.model_stem.display(),
        started.elapsed()
    );
    Ok(())
}

fn stage_train_policy(cfg: &RunConfig) -> Result<()> {
    let started = std::time::Instant::now();
    require_file(&cfg.model_stem.with_extension("ckpt"), "model checkpoint")?;
    let model = load_model(&cfg.model_stem).map_err(|e| anyhow!("loading model: {e}"))?;
    let dataset = load_dataset(cfg)?;
    let out = train_policy(
        &model,
        &dataset,
        &cfg.sac,
        &cfg.reward,
        &cfg.eval_setup.params,
        crate::derive_seed(cfg.seed, "policy"),
    )
    .map_err(|e| anyhow!("policy training: {e}"))?;
    save_policy(&out.policy, out.alpha, &cfg.policy_stem)
        .map_err(|e| anyhow!("saving policy: {e}"))?;
    let dir = cfg
        .policy_stem
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("curves.csv"), curves_to_csv(&out.curves))?;
    std::fs::write(dir.join("episodes.csv"), episodes_to_csv(&out.episodes))?;
    let _ = plot_learning_curves(&out.curves, &dir);
    write_snapshot(cfg, &dir)?;
    let first: f64 = out.episodes.iter().take(10).map(|e| e.ret).sum::<f64>() / 10.0;
    let last: f64 = out.episodes.iter().rev().take(10).map(|e| e.ret).sum::<f64>() / 10.0;
    eprintln!(
        "train-policy: {} episodes ({} updates), mean return first10 {:.1} -> last10 {:.1} [{:.1?}]",
        out.episodes.len(),
        out.curves.len(),
        first,
        last,
        started.elapsed()
    );
    Ok(())
}

fn load_learned_controller(cfg: &RunConfig) -> Result<Controller> {
    require_file(&cfg.policy_stem.with_extension("ckpt"), "policy checkpoint")?;
    let (policy, _alpha) =
        load_policy(&cfg.policy_stem).map_err(|e| anyhow!("loading policy: {e}"))?;
    Ok(Controller::Learned(Arc::new(policy)))
}

/// Reads back a curves CSV written by the policy stage.
pub fn read_curves_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            bail!("{}:{}: expected 6 columns", path.display(), i + 1);
        }
        rows.push(CurveRow {
            step: cols[0].parse()?,
            critic_loss: cols[1].parse()?,
            actor_obj: cols[2].parse()?,
            r_speed: cols[3].parse()?,
            r_yaw: cols[4].parse()?,
            r_slip: cols[5].parse()?,
        });
    }
    Ok(rows)
}

fn stage_evaluate(cfg: &RunConfig) -> Result<()> {
    let started = std::time::Instant::now();
    let learned = load_learned_controller(cfg)?;
    let controllers = [
        learned,
        Controller::Rule,
        Controller::ReferenceAbs,
        Controller::NoControl,
    ];
    let eval_dir = cfg.out_dir.join("eval");
    std::fs::create_dir_all(&eval_dir)?;

    let in_dist = compare(
        &controllers,
        &collection_scenarios(),
        cfg.eval_repeats,
        &cfg.eval_setup,
        crate::derive_seed(cfg.seed, "eval-in-dist"),
        cfg.jobs,
    );
    std::fs::write(
        eval_dir.join("results_in_distribution.csv"),
        results_to_csv(&in_dist),
    )?;

    let ood = compare(
        &controllers,
        &ood_scenarios(),
        cfg.eval_repeats,
        &cfg.eval_setup,
        crate::derive_seed(cfg.seed, "eval-ood"),
        cfg.jobs,
    );
    std::fs::write(eval_dir.join("results_ood.csv"), results_to_csv(&ood))?;

    let mut failures = 0;
    for row in in_dist.iter().chain(ood.iter()) {
        failures += row.failures;
        if row.failures > 0 {
            eprintln!(
                "evaluate: {} on {}: {} failed trial(s) excluded",
                row.controller, row.scenario, row.failures
            );
        }
    }
    // Speed plots from the learned controller's sample trials.
    let plots = eval_dir.join("plots");
    for row in ood.iter().filter(|r| r.controller == "learned") {
        if let Some(m) = &row.sample_metrics {
            plot_speed_traces(&row.scenario, m, &plots.join(format!("{}.svg", row.scenario)))
                .map_err(|e| anyhow!("plotting {}: {e}", row.scenario))?;
        }
    }
    // Learning-curve plots from the policy stage, when its CSV is present.
    if let Some(dir) = cfg.policy_stem.parent() {
        let curves_path = dir.join("curves.csv");
        if curves_path.is_file() {
            let rows = read_curves_csv(&curves_path)?;
            if !rows.is_empty() {
                plot_learning_curves(&rows, &plots).map_err(|e| anyhow!("learning curves: {e}"))?;
            }
        }
    }
    write_snapshot(cfg, &eval_dir)?;
    eprintln!(
        "evaluate: {} rows in-distribution, {} rows OOD, {failures} failed trials [{:.1?}]",
        in_dist.len(),
        ood.len(),
        started.elapsed()
    );
    Ok(())
}

fn stage_gap_report(cfg: &RunConfig) -> Result<()> {
    let started = std::time::Instant::now();
    let learned = load_learned_controller(cfg)?;
    let rows = gap_report(
        &learned,
        &ood_scenarios(),
        &cfg.perturbation,
        &cfg.eval_setup,
        crate::derive_seed(cfg.seed, "gap"),
    );
    let dir = cfg.out_dir.join("gap");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("gap_report.csv"), gap_to_csv(&rows))?;
    write_snapshot(cfg, &dir)?;
    eprintln!("gap-report: {} scenarios -> {} [{:.1?}]", rows.len(), dir.display(), started.elapsed());
    Ok(())
}
