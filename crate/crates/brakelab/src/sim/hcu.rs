//! Hydraulic control unit: valve semantics for one wheel cylinder.

use crate::mdp::WheelAction;
use serde::{Deserialize, Serialize};

/// Pressure-change rates of the hydraulic control unit. Defaults traverse the
/// full [0, 16] MPa range in roughly 0.2 s.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HcuConfig {
    /// Pressure build rate with the inlet valve open, MPa/s.
    pub k_inc_mpa_per_s: f64,
    /// Pressure release rate with the outlet valve open, MPa/s.
    pub k_dec_mpa_per_s: f64,
    /// First-order time constant toward master pressure in normal mode, s.
    pub tau_no_control_s: f64,
}

impl Default for HcuConfig {
    fn default() -> Self {
        Self {
            k_inc_mpa_per_s: 80.0,
            k_dec_mpa_per_s: 120.0,
            tau_no_control_s: 0.05,
        }
    }
}

/// Advances one wheel-cylinder pressure by `dt` under a valve action.
/// The result is always within [0, p_master].
pub fn hcu_step(p_mpa: f64, action: WheelAction, p_master_mpa: f64, dt_s: f64, cfg: &HcuConfig) -> f64 {
    let p = match action {
        WheelAction::Hold => p_mpa,
        WheelAction::Increase => p_mpa + cfg.k_inc_mpa_per_s * dt_s,
        WheelAction::Decrease => p_mpa - cfg.k_dec_mpa_per_s * dt_s,
        WheelAction::NoControl => {
            // Exact first-order relaxation toward the master cylinder.
            p_master_mpa + (p_mpa - p_master_mpa) * (-dt_s / cfg.tau_no_control_s).exp()
        }
    };
    p.clamp(0.0, p_master_mpa.max(0.0))
}
