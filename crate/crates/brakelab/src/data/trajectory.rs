//! Recorded braking trajectories and the train/validation corpus.

use crate::mdp::{JointAction, Observation};

/// One 50 Hz control-step record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// Simulation time at the control boundary, s.
    pub t_s: f64,
    /// Observation at the boundary, before the action takes effect.
    pub obs: Observation,
    /// Action held for the following 20 ms.
    pub action: JointAction,
}

/// A timestamped (observation, action) sequence with scenario provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    /// Index of the first control step at or after brake onset.
    pub onset_index: usize,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Observations only, in time order.
    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.records.iter().map(|r| &r.obs)
    }

    /// File stem used in the dataset directory layout.
    pub fn file_stem(&self, run: usize) -> String {
        format!("{}_{}_{}", self.policy, self.scenario, run)
    }
}

/// The offline corpus: disjoint train and validation trajectories.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Trajectory>,
    pub val: Vec<Trajectory>,
}

impl Dataset {
    pub fn total_trajectories(&self) -> usize {
        self.train.len() + self.val.len()
    }

    pub fn total_transitions(&self) -> usize {
        self.train
            .iter()
            .map(|t| t.len().saturating_sub(1))
            .sum::<usize>()
    }
}
