//! Central finite-difference gradient verification. This is the independent
//! oracle for the reverse-mode engine: it evaluates the forward pass only and
//! never touches the tape's backward path.

/// Central differences: `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)`.
pub fn central_diff_grad(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    eps: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(&probe);
        probe[i] = x[i] - eps;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * eps);
    }
    grad
}

/// Maximum scaled error between analytic and numeric gradients:
/// `|a - n| / max(|a|, |n|, 1e-6)` so vanishing entries are compared
/// absolutely at the 1e-6 scale.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths");
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Default probe size for central differences at f64 precision.
pub const FD_EPS: f64 = 1e-5;

/// Acceptance threshold for layer gradient checks.
pub const FD_TOLERANCE: f64 = 1e-4;
