//! Nominal-vs-perturbed simulator gap report.

use super::controller::Controller;
use super::trial::{run_trial, EvalSetup};
use crate::scenario::ScenarioSpec;
use serde::{Deserialize, Serialize};

/// Relative parameter perturbation applied to the simulator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Perturbation {
    /// Curb mass change, fraction.
    pub mass_frac: f64,
    /// Friction-coefficient change, fraction.
    pub friction_frac: f64,
    /// Brake-gain change, fraction.
    pub brake_gain_frac: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            mass_frac: 0.10,
            friction_frac: -0.15,
            brake_gain_frac: 0.10,
        }
    }
}

impl Perturbation {
    pub fn zero() -> Self {
        Self {
            mass_frac: 0.0,
            friction_frac: 0.0,
            brake_gain_frac: 0.0,
        }
    }

    pub fn apply(&self, setup: &EvalSetup) -> EvalSetup {
        let mut out = setup.clone();
        out.params.curb_mass_kg *= 1.0 + self.mass_frac;
        out.params.brake_gain_nm_per_mpa *= 1.0 + self.brake_gain_frac;
        out.friction_scale = setup.friction_scale * (1.0 + self.friction_frac);
        out
    }
}

/// One scenario's nominal/perturbed pairing.
#[derive(Clone, Debug)]
pub struct GapRow {
    pub scenario: String,
    pub speed_kmh: f64,
    pub dist_nominal_m: f64,
    pub dist_perturbed_m: f64,
    pub dist_gap_m: f64,
    pub dev_nominal_deg: f64,
    pub dev_perturbed_deg: f64,
    pub dev_gap_deg: f64,
    pub lockup_nominal: bool,
    pub lockup_perturbed: bool,
}

/// Runs the same controller and seeds under the nominal and perturbed
/// simulators and tabulates the per-scenario gaps.
pub fn gap_report(
    controller: &Controller,
    scenarios: &[ScenarioSpec],
    perturbation: &Perturbation,
    setup: &EvalSetup,
    base_seed: u64,
) -> Vec<GapRow> {
    let perturbed_setup = perturbation.apply(setup);
    let mut rows = Vec::new();
    for scenario in scenarios {
        let seed = crate::derive_seed(base_seed, &format!("gap/{}", scenario.name));
        let nominal = run_trial(controller, scenario, seed, setup);
        let perturbed = run_trial(controller, scenario, seed, &perturbed_setup);
        let (dn, vn, ln) = match &nominal {
            Ok(m) => (m.braking_distance_m, m.deviation_deg, m.lockup),
            Err(_) => (f64::NAN, f64::NAN, false),
        };
        let (dp, vp, lp) = match &perturbed {
            Ok(m) => (m.braking_distance_m, m.deviation_deg, m.lockup),
            Err(_) => (f64::NAN, f64::NAN, false),
        };
        rows.push(GapRow {
            scenario: scenario.name.clone(),
            speed_kmh: scenario.braking_speed_kmh,
            dist_nominal_m: dn,
            dist_perturbed_m: dp,
            dist_gap_m: dp - dn,
            dev_nominal_deg: vn,
            dev_perturbed_deg: vp,
            dev_gap_deg: vp - vn,
            lockup_nominal: ln,
            lockup_perturbed: lp,
        });
    }
    rows
}

pub fn gap_to_csv(rows: &[GapRow]) -> String {
    let mut out = String::from(
        "scenario,speed_kmh,dist_nominal_m,dist_perturbed_m,dist_gap_m,dev_nominal_deg,dev_perturbed_deg,dev_gap_deg,lockup_nominal,lockup_perturbed\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.speed_kmh,
            r.dist_nominal_m,
            r.dist_perturbed_m,
            r.dist_gap_m,
            r.dev_nominal_deg,
            r.dev_perturbed_deg,
            r.dev_gap_deg,
            if r.lockup_nominal { "yes" } else { "no" },
            if r.lockup_perturbed { "yes" } else { "no" },
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::collection_scenarios;

    #[test]
    fn zero_perturbation_gives_zero_gaps() {
        let rows = gap_report(
            &Controller::Rule,
            &collection_scenarios(),
            &Perturbation::zero(),
            &EvalSetup::default(),
            0,
        );
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert_eq!(r.dist_gap_m, 0.0);
            assert_eq!(r.dev_gap_deg, 0.0);
            assert_eq!(r.lockup_nominal, r.lockup_perturbed);
        }
    }

    #[test]
    fn report_has_one_signed_row_per_scenario() {
        let rows = gap_report(
            &Controller::Rule,
            &collection_scenarios(),
            &Perturbation::default(),
            &EvalSetup::default(),
            1,
        );
        assert_eq!(rows.len(), 3);
        // Lower friction lengthens braking distance.
        for r in &rows {
            assert!(r.dist_gap_m > 0.0, "{}: {}", r.scenario, r.dist_gap_m);
        }
        let csv = gap_to_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
    }
}
