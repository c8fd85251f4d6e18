//! Controller-by-scenario comparison tables.

use super::controller::Controller;
use super::trial::{run_trial, EvalSetup, Metrics};
use crate::scenario::ScenarioSpec;

/// Aggregated results of one (controller, scenario) cell.
#[derive(Clone, Debug)]
pub struct CompareRow {
    pub controller: String,
    pub scenario: String,
    pub speed_kmh: f64,
    pub dist_mean_m: f64,
    pub dist_std_m: f64,
    pub dev_mean_deg: f64,
    pub dev_std_deg: f64,
    pub lockup: bool,
    /// Trials that faulted or timed out; excluded from the aggregates.
    pub failures: usize,
    /// Trace of the first successful trial, for plotting.
    pub sample_metrics: Option<Metrics>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `repeats` seeded trials for every (controller, scenario) pair.
/// `jobs` bounds thread parallelism; results are aggregated in a fixed
/// order regardless of it.
pub fn compare(
    controllers: &[Controller],
    scenarios: &[ScenarioSpec],
    repeats: usize,
    setup: &EvalSetup,
    base_seed: u64,
    jobs: usize,
) -> Vec<CompareRow> {
    assert!(!controllers.is_empty() && !scenarios.is_empty());
    // Flatten the trial list; each entry is independent and seeded.
    struct Cell {
        controller: usize,
        scenario: usize,
        rep: usize,
    }
    let mut cells = Vec::new();
    for (ci, _) in controllers.iter().enumerate() {
        for (si, _) in scenarios.iter().enumerate() {
            for rep in 0..repeats {
                cells.push(Cell {
                    controller: ci,
                    scenario: si,
                    rep,
                });
            }
        }
    }
    let run_cell = |cell: &Cell| -> Result<Metrics, super::trial::TrialError> {
        let controller = &controllers[cell.controller];
        let scenario = &scenarios[cell.scenario];
        let seed = crate::derive_seed(
            base_seed,
            &format!("trial/{}/{}/{}", controller.name(), scenario.name, cell.rep),
        );
        run_trial(controller, scenario, seed, setup)
    };

    let results: Vec<Result<Metrics, super::trial::TrialError>> = if jobs <= 1 {
        cells.iter().map(run_cell).collect()
    } else {
        // Fixed chunking; join order preserves determinism.
        let chunk = cells.len().div_ceil(jobs);
        let mut out: Vec<Option<Result<Metrics, super::trial::TrialError>>> =
            (0..cells.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (idx, chunk_cells) in cells.chunks(chunk).enumerate() {
                let run_cell = &run_cell;
                handles.push((
                    idx * chunk,
                    scope.spawn(move || chunk_cells.iter().map(run_cell).collect::<Vec<_>>()),
                ));
            }
            for (offset, handle) in handles {
                for (k, r) in handle.join().expect("trial thread").into_iter().enumerate() {
                    out[offset + k] = Some(r);
                }
            }
        });
        out.into_iter().map(|r| r.unwrap()).collect()
    };

    let mut rows = Vec::new();
    for (ci, controller) in controllers.iter().enumerate() {
        for (si, scenario) in scenarios.iter().enumerate() {
            let mut dists = Vec::new();
            let mut devs = Vec::new();
            let mut lockup = false;
            let mut failures = 0;
            let mut sample = None;
            for (cell, result) in cells.iter().zip(results.iter()) {
                if cell.controller != ci || cell.scenario != si {
                    continue;
                }
                match result {
                    Ok(m) => {
                        dists.push(m.braking_distance_m);
                        devs.push(m.deviation_deg);
                        lockup |= m.lockup;
                        if sample.is_none() {
                            sample = Some(m.clone());
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
            let (dist_mean_m, dist_std_m) = mean_std(&dists);
            let (dev_mean_deg, dev_std_deg) = mean_std(&devs);
            rows.push(CompareRow {
                controller: controller.name().to_string(),
                scenario: scenario.name.clone(),
                speed_kmh: scenario.braking_speed_kmh,
                dist_mean_m,
                dist_std_m,
                dev_mean_deg,
                dev_std_deg,
                lockup,
                failures,
                sample_metrics: sample,
            });
        }
    }
    rows.sort_by(|a, b| (&a.controller, &a.scenario).cmp(&(&b.controller, &b.scenario)));
    rows
}

/// CSV with the fixed header
/// `controller,scenario,speed_kmh,dist_mean_m,dist_std_m,dev_mean_deg,dev_std_deg,lockup`.
pub fn results_to_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "controller,scenario,speed_kmh,dist_mean_m,dist_std_m,dev_mean_deg,dev_std_deg,lockup\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.controller,
            r.scenario,
            r.speed_kmh,
            r.dist_mean_m,
            r.dist_std_m,
            r.dev_mean_deg,
            r.dev_std_deg,
            if r.lockup { "yes" } else { "no" }
        ));
    }
    out
}
