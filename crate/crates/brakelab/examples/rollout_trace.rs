//! Dumps a full-length mean roll-out of the dynamics model against one
//! validation trajectory as CSV, for inspecting drift.
//!
//! Usage: rollout_trace <model-stem> <data-dir> <val-index> [tf]

use brakelab::mdp::RewardConfig;
use brakelab::model::{load_model, rollout_on_trajectory, RolloutConfig};
use rand::SeedableRng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 4 {
        eprintln!("usage: rollout_trace <model-stem> <data-dir> <val-index> [tf]");
        std::process::exit(2);
    }
    let model = load_model(std::path::Path::new(&args[1])).expect("load model");
    let dataset = brakelab::data::Dataset::load(std::path::Path::new(&args[2])).expect("load data");
    let idx: usize = args[3].parse().expect("val index");
    let traj = &dataset.val[idx];
    eprintln!("trajectory: {} {} ({} steps)", traj.policy, traj.scenario, traj.len());
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
    let cfg = RolloutConfig {
        max_len: usize::MAX,
        sample: false,
        teacher_forcing: args.get(4).map(|a| a == "tf").unwrap_or(false),
    };
    let start = model.h - 1;
    let trace = rollout_on_trajectory(&model, traj, start, &cfg, &RewardConfig::default(), &mut rng)
        .expect("rollout");
    println!("k,v_real,v_pred,w1_real,w1_pred,ax_real,ax_pred,p1_real,p1_pred");
    for (k, pred) in trace.predicted.iter().enumerate() {
        let real = &traj.records[start + 1 + k].obs;
        println!(
            "{k},{},{},{},{},{},{},{},{}",
            real.v_kmh,
            pred.v_kmh,
            real.wheel_kmh[0],
            pred.wheel_kmh[0],
            real.accel[0],
            pred.accel[0],
            real.pressure_mpa[0],
            pred.pressure_mpa[0]
        );
    }
}
