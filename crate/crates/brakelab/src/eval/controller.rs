//! Controllers under test.

use crate::data::rule_policy;
use crate::mdp::{slip_ratios, JointAction, Observation, StackedState, WheelAction};
use crate::policy::Policy;
use std::sync::Arc;

/// A braking controller specification; per-trial mutable state (the
/// reference-ABS latches) is created fresh for every trial.
#[derive(Clone)]
pub enum Controller {
    /// Direct braking: every wheel in no-pressure-control mode.
    NoControl,
    /// The slip-band rule used for data collection.
    Rule,
    /// Hysteresis slip controller standing in for a production ABS.
    ReferenceAbs,
    /// Greedy learned policy.
    Learned(Arc<Policy>),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::NoControl => "no_control",
            Controller::Rule => "rule",
            Controller::ReferenceAbs => "reference_abs",
            Controller::Learned(_) => "learned",
        }
    }

    pub(crate) fn make_state(&self) -> ControllerState {
        ControllerState {
            latched: [false; 4],
        }
    }

    pub(crate) fn act(
        &self,
        state: &mut ControllerState,
        stacked: &StackedState,
        obs: &Observation,
    ) -> JointAction {
        match self {
            Controller::NoControl => JointAction::no_control(),
            Controller::Rule => rule_policy(slip_ratios(obs)),
            Controller::ReferenceAbs => reference_abs(slip_ratios(obs), &mut state.latched),
            Controller::Learned(policy) => policy.greedy_action(stacked),
        }
    }
}

pub(crate) struct ControllerState {
    latched: [bool; 4],
}

/// Per-wheel hysteresis controller: build pressure below the band, hold
/// inside it, release above it, and keep releasing (latched) until the slip
/// falls back below the band's lower edge.
pub fn reference_abs(slips: [Option<f64>; 4], latched: &mut [bool; 4]) -> JointAction {
    let mut wheels = [WheelAction::NoControl; 4];
    for i in 0..4 {
        let Some(eta) = slips[i] else {
            latched[i] = false;
            continue;
        };
        if latched[i] {
            if eta < 0.1 {
                latched[i] = false;
            } else {
                wheels[i] = WheelAction::Decrease;
                continue;
            }
        }
        wheels[i] = if eta < 0.03 {
            WheelAction::NoControl
        } else if eta < 0.1 {
            WheelAction::Increase
        } else if eta <= 0.15 {
            WheelAction::Hold
        } else {
            latched[i] = true;
            WheelAction::Decrease
        };
    }
    JointAction(wheels)
}
