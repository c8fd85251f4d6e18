use anyhow::Result;
use brakelab::cli::{apply_overrides, run_stage, RunConfig, Scale, Stage};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Offline model-based reinforcement learning laboratory for vehicle braking
/// control: collect trajectories, learn a dynamics model, optimize a braking
/// policy inside it, and evaluate against baselines.
#[derive(Parser, Debug)]
#[command(name = "brakelab", version, about)]
struct Args {
    /// Pipeline stage to run.
    #[arg(long, value_enum)]
    stage: Stage,

    /// Master seed; every stage derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Problem scale: desk (fast) or paper (reference sizes).
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,

    /// Dataset directory (written by collect, read by later stages).
    #[arg(long)]
    data: Option<PathBuf>,

    /// Model bundle stem (<stem>.ckpt / <stem>.json).
    #[arg(long)]
    model: Option<PathBuf>,

    /// Policy bundle stem (<stem>.ckpt / <stem>.json).
    #[arg(long)]
    policy: Option<PathBuf>,

    /// Output root for stage artifacts.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Trial/batch parallelism bound (1 = fully serial).
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// JSON file with configuration overrides (deep-merged onto defaults).
    #[arg(long)]
    config: Option<PathBuf>,
}

fn resolve(args: &Args) -> Result<RunConfig> {
    let mut cfg = RunConfig::for_scale(args.scale, args.seed);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading --config {}: {e}", path.display()))?;
        cfg = apply_overrides(&cfg, &text)?;
        // Command-line basics always win over the config file.
        cfg.seed = args.seed;
        cfg.scale = args.scale;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    cfg.out_dir = out.clone();
    cfg.jobs = args.jobs;
    cfg.data_dir = match (&args.data, args.stage) {
        (Some(d), _) => d.clone(),
        // `--stage collect --out X` writes the dataset into X itself.
        (None, Stage::Collect) if args.out.is_some() => out.clone(),
        (None, Stage::All) => out.join("data"),
        (None, _) => cfg.data_dir.clone(),
    };
    if args.out.is_some() || args.stage == Stage::All {
        cfg.model_stem = out.join("model").join("model");
        cfg.policy_stem = out.join("policy").join("policy");
    }
    if let Some(m) = &args.model {
        cfg.model_stem = m.clone();
    }
    if let Some(p) = &args.policy {
        cfg.policy_stem = p.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match resolve(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run_stage(args.stage, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Missing inputs and unusable arguments exit 2, runtime faults 1.
            if e.to_string().starts_with("missing") {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
