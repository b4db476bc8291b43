//! Self-consistent resolvent equation on the negative real axis.
//!
//! For a discrete spectrum and `z = -lambda` the normalized trace
//! `nu = (1/P) tr[Sigma G(z)]`, with `G(z) = (m Sigma - z)^{-1}` and
//! `m = 1 / (1 + gamma nu)`, solves
//!
//! ```text
//! nu = sum_i rho_i s_i / (m(nu) s_i + lambda)
//! ```
//!
//! The right-hand side is increasing and bounded in `nu`, and there is a
//! single positive root. Its `z`-derivative is available in closed form:
//!
//! ```text
//! nu' = T1 / (1 - gamma T2),  T1 = sum_i rho_i s_i g_i^2,  T2 = sum_i rho_i (m s_i g_i)^2
//! ```
//!
//! with `g_i = 1 / (m s_i + lambda)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::spectrum::SpectralModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Weight `alpha` of the new iterate in `nu <- (1 - alpha) nu + alpha F(nu)`.
    pub damping: f64,
    /// Stop when `|nu - F(nu)|` falls to this value (scaled by `nu` once `nu > 1`,
    /// where the absolute value would sit below the rounding floor).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { damping: 0.5, tolerance: 1e-12, max_iterations: 100_000 }
    }
}

/// Solved resolvent quantities at `z = -lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub lambda: f64,
    pub gamma: f64,
    pub nu: f64,
    /// `d nu / d z` at `z = -lambda` (so `d nu / d lambda = -nu_prime`).
    pub nu_prime: f64,
    /// `1 / (1 + gamma nu)`.
    pub m: f64,
    /// Per-atom `g_i = 1 / (m s_i + lambda)`, in spectrum order.
    pub g: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn fixed_point_map(spectrum: &SpectralModel, gamma: f64, lambda: f64, nu: f64) -> f64 {
    let m = 1.0 / (1.0 + gamma * nu);
    spectrum
        .atoms()
        .iter()
        .map(|a| a.weight * a.variance / (m * a.variance + lambda))
        .sum()
}

/// `gamma * T2`, the slope of the fixed-point map at `nu`.
fn map_slope(spectrum: &SpectralModel, gamma: f64, lambda: f64, nu: f64) -> f64 {
    let m = 1.0 / (1.0 + gamma * nu);
    gamma
        * spectrum
            .atoms()
            .iter()
            .map(|a| {
                let t = m * a.variance / (m * a.variance + lambda);
                a.weight * t * t
            })
            .sum::<f64>()
}

pub fn solve_state(spectrum: &SpectralModel, gamma: f64, lambda: f64) -> Result<SolverState> {
    solve_state_with(spectrum, gamma, lambda, &SolverOptions::default())
}

pub fn solve_state_with(
    spectrum: &SpectralModel,
    gamma: f64,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<SolverState> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::invalid(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }

    // gamma -> 0 solution as the starting point
    let mut nu: f64 = spectrum
        .atoms()
        .iter()
        .map(|a| a.weight * a.variance / (a.variance + lambda))
        .sum();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let f = fixed_point_map(spectrum, gamma, lambda, nu);
        residual = (nu - f).abs();
        if !residual.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite fixed-point residual at gamma={gamma}, lambda={lambda}"
            )));
        }
        if residual <= opts.tolerance * nu.max(1.0) {
            converged = true;
            break;
        }
        nu = (1.0 - opts.damping) * nu + opts.damping * f;
        iterations += 1;
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, residual });
    }

    // A few Newton steps on nu - F(nu) tighten the root well below the
    // stopping tolerance when the damped map contracts slowly.
    for _ in 0..3 {
        let step = (nu - fixed_point_map(spectrum, gamma, lambda, nu))
            / (1.0 - map_slope(spectrum, gamma, lambda, nu));
        let candidate = nu - step;
        if !(candidate.is_finite() && candidate > 0.0) {
            break;
        }
        let r = (candidate - fixed_point_map(spectrum, gamma, lambda, candidate)).abs();
        if r > residual {
            break;
        }
        nu = candidate;
        residual = r;
        if r == 0.0 {
            break;
        }
    }

    Ok(state_at(spectrum, gamma, lambda, nu, residual, iterations))
}

fn state_at(
    spectrum: &SpectralModel,
    gamma: f64,
    lambda: f64,
    nu: f64,
    residual: f64,
    iterations: usize,
) -> SolverState {
    let m = 1.0 / (1.0 + gamma * nu);
    let g: Vec<f64> = spectrum
        .atoms()
        .iter()
        .map(|a| 1.0 / (m * a.variance + lambda))
        .collect();
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for (a, &gi) in spectrum.atoms().iter().zip(&g) {
        t1 += a.weight * a.variance * gi * gi;
        let msg = m * a.variance * gi;
        t2 += a.weight * msg * msg;
    }
    let nu_prime = t1 / (1.0 - gamma * t2);
    SolverState { lambda, gamma, nu, nu_prime, m, g, residual, iterations }
}

/// Closed-form `nu(-lambda)` for the identity covariance.
///
/// With `a = 1 - gamma + lambda` and `D = sqrt(a^2 + 4 gamma lambda)` the root
/// is `(D - a) / (2 gamma lambda)`. For `a > 0` the numerator cancels, so the
/// equivalent `2 / (D + a)` is used instead.
pub fn closed_form_nu_iso(gamma: f64, lambda: f64) -> f64 {
    let a = 1.0 - gamma + lambda;
    let d = libm::sqrt(a * a + 4.0 * gamma * lambda);
    if a > 0.0 {
        2.0 / (d + a)
    } else {
        (d - a) / (2.0 * gamma * lambda)
    }
}
