//! Evaluation harness: the scenario matrix, controllers under test, metric
//! extraction, baseline comparison tables, the nominal-vs-perturbed gap
//! report, and SVG plots.

mod compare;
mod controller;
mod gap;
mod svg;
mod trial;

pub use compare::{compare, results_to_csv, CompareRow};
pub use controller::{reference_abs, Controller};
pub use gap::{gap_report, gap_to_csv, GapRow, Perturbation};
pub use svg::{plot_learning_curves, plot_model_loss, plot_speed_traces, EvalError};
pub use trial::{run_trial, EvalSetup, Metrics, TracePoint, TrialError};
