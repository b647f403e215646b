//! The statistical side of the SPI guarantee: the inverse regularized
//! incomplete beta function and the N∧/ζ bounds derived from it.

use statrs::function::beta::beta_reg;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("no N below the closed-form bound {upper} reaches zeta {target} (best {best})")]
    TargetUnreachable { target: f64, upper: u64, best: f64 },
}

/// Inverse of the regularized incomplete beta function: the x with
/// I_x(alpha, beta) = p, found by bisection to |I_x - p| <= 1e-10.
pub fn inc_beta_inv(p: f64, alpha: f64, beta: f64) -> Result<f64, BoundsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundsError::OutOfRange(format!("p = {p}")));
    }
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(BoundsError::OutOfRange(format!(
            "alpha = {alpha}, beta = {beta}"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(alpha, beta, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Admissible performance loss for a given N∧ and confidence delta:
///
///   zeta = 4 V_max / (1 - gamma) * (1 - 2 I^{-1}_{delta_T}(N/2+1, N/2+1)) + c
///
/// with delta_T = delta / (2 |S|^2 |A|^2). `c` is the caller-supplied
/// performance difference of the two policies on the MLE model (0 when not
/// available).
#[allow(clippy::too_many_arguments)]
pub fn zeta_bound(
    n_wedge: u64,
    delta: f64,
    v_max: f64,
    gamma: f64,
    c: f64,
    n_states: usize,
    n_actions: usize,
) -> Result<f64, BoundsError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::OutOfRange(format!("delta = {delta}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) || v_max <= 0.0 {
        return Err(BoundsError::OutOfRange(format!(
            "gamma = {gamma}, v_max = {v_max}"
        )));
    }
    let pairs = (n_states * n_states) as f64 * (n_actions * n_actions) as f64;
    let delta_t = delta / (2.0 * pairs);
    let arg = n_wedge as f64 / 2.0 + 1.0;
    let inv = inc_beta_inv(delta_t, arg, arg)?;
    // The width 1 - 2 I^{-1} is positive mathematically; clamp away the
    // floating-point noise floor reached for astronomically large N.
    let width = (1.0 - 2.0 * inv).max(0.0);
    Ok(4.0 * v_max / (1.0 - gamma) * width + c)
}

/// Closed-form upper bound on the N∧ needed for a target zeta:
/// 32 V_max^2 / (zeta (1-gamma)^2) * log(8 |S|^2 |A|^2 / delta).
pub fn n_wedge_upper_bound(
    zeta: f64,
    delta: f64,
    v_max: f64,
    gamma: f64,
    n_states: usize,
    n_actions: usize,
) -> f64 {
    let pairs = (n_states * n_states) as f64 * (n_actions * n_actions) as f64;
    32.0 * v_max * v_max / (zeta * (1.0 - gamma) * (1.0 - gamma)) * (8.0 * pairs / delta).ln()
}

/// Smallest integer N∧ whose [`zeta_bound`] (with c = 0) is at most the
/// target, found by binary search below the closed-form upper bound.
/// Returns `(n_wedge, closed_form_upper_bound)`.
pub fn n_wedge_bound(
    zeta: f64,
    delta: f64,
    v_max: f64,
    gamma: f64,
    n_states: usize,
    n_actions: usize,
) -> Result<(u64, u64), BoundsError> {
    if zeta <= 0.0 {
        return Err(BoundsError::OutOfRange(format!("zeta = {zeta}")));
    }
    let upper_f = n_wedge_upper_bound(zeta, delta, v_max, gamma, n_states, n_actions);
    let upper = upper_f.ceil().min(1e15) as u64;
    let zb = |n: u64| zeta_bound(n, delta, v_max, gamma, 0.0, n_states, n_actions);
    let at_upper = zb(upper)?;
    if at_upper > zeta {
        return Err(BoundsError::TargetUnreachable {
            target: zeta,
            upper,
            best: at_upper,
        });
    }
    let mut lo = 0u64;
    let mut hi = upper;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if zb(mid)? <= zeta {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((lo, upper))
}
