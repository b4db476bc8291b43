//! Asymptotic bias, variance and risk, plus the derived quantities built on
//! them: data limits, optimal penalty, shift regime and risk profiles.
//!
//! For a spectrum with atoms `(s_t, rho_t, pi_t)` and shifts `(kappa_t, c_t)`,
//! in units of `signal = beta' Sigma beta`:
//!
//! ```text
//! B / signal = sum_t pi_t [ lambda^2 nu' g_t^2 / (sum_u rho_u s_u g_u^2)
//!                           - 2 lambda g_t (1 - kappa_t c_t)
//!                           + 1 - 2 kappa_t c_t + kappa_t^2 ]
//! V = sigma^2 gamma (nu - lambda nu')
//! ```
//!
//! Concept shift only enters the last two bias terms; the variance does not
//! depend on it at all.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::golden::golden_section_min;
use crate::resolvent::{solve_state_with, SolverOptions, SolverState};
use crate::spectrum::{LambdaPolicy, ProblemSpec, ShiftSpec, SpectralModel};

/// Half-width of the boundary band in [`classify_regime`].
pub const REGIME_EPS: f64 = 1e-12;

/// Search interval for the numerically tuned penalty.
pub const LAMBDA_SEARCH: (f64, f64) = (1e-8, 1e8);
/// Absolute tolerance on `ln lambda` for the numerically tuned penalty.
pub const LOG_LAMBDA_TOL: f64 = 1e-10;

/// Relative tolerance used by [`classify_profile`].
pub const PROFILE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// More data improves the risk.
    Weak,
    /// More data hurts.
    Strong,
    /// Risk does not depend on the sample size.
    Boundary,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Weak => "weak",
            Regime::Strong => "strong",
            Regime::Boundary => "boundary",
        }
    }
}

impl core::fmt::Display for Regime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub bias: f64,
    pub variance: f64,
    /// `bias + variance`.
    pub risk: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub regime: Option<Regime>,
    pub state: SolverState,
}

/// Resolves the penalty policy for `problem` at its own `gamma`.
pub fn resolve_lambda(problem: &ProblemSpec) -> Result<f64> {
    match problem.lambda {
        LambdaPolicy::Fixed(l) => Ok(l),
        LambdaPolicy::Optimal => {
            optimal_lambda_with(&problem.spectrum, problem.gamma, problem.snr, &problem.solver)
        }
    }
}

pub fn asymptotic_risk(problem: &ProblemSpec) -> Result<RiskReport> {
    problem.validate()?;
    let lambda = resolve_lambda(problem)?;
    let state = solve_state_with(&problem.spectrum, problem.gamma, lambda, &problem.solver)?;
    let bias = problem.signal * bias_per_signal(&problem.spectrum, &problem.shift, &state);
    let variance = variance_from_state(problem.noise_variance(), &state);
    if !(bias.is_finite() && variance.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite risk at gamma={}, lambda={lambda}",
            problem.gamma
        )));
    }
    Ok(RiskReport {
        bias,
        variance,
        risk: bias + variance,
        lambda,
        gamma: problem.gamma,
        regime: Some(classify_overlap(effective_overlap(&problem.spectrum, &problem.shift))),
        state,
    })
}

/// Asymptotic bias in units of the signal, from a solved state.
pub fn bias_per_signal(spectrum: &SpectralModel, shift: &ShiftSpec, state: &SolverState) -> f64 {
    let lambda = state.lambda;
    let denom: f64 = spectrum
        .atoms()
        .iter()
        .zip(&state.g)
        .map(|(a, &g)| a.weight * a.variance * g * g)
        .sum();
    let mut bias = 0.0;
    for ((a, s), &g) in spectrum.atoms().iter().zip(shift.atoms()).zip(&state.g) {
        let overlap = s.kappa * s.cos_theta;
        let k2 = s.kappa * s.kappa;
        let learned = lambda * lambda * state.nu_prime * g * g / denom;
        let cross = 2.0 * lambda * g * (1.0 - overlap);
        let mismatch = 1.0 - 2.0 * overlap + k2;
        bias += a.signal * (learned - cross + mismatch);
    }
    bias
}

pub fn variance_from_state(noise_variance: f64, state: &SolverState) -> f64 {
    noise_variance * state.gamma * (state.nu - state.lambda * state.nu_prime)
}

/// Risk with no data and with infinite data: `(R_{N=0}, R_{N->inf})`.
pub fn risk_limits(spectrum: &SpectralModel, shift: &ShiftSpec, signal: f64) -> Result<(f64, f64)> {
    if shift.len() != spectrum.len() {
        return Err(Error::invalid("shift length does not match spectrum"));
    }
    let mut r0 = 0.0;
    let mut rinf = 0.0;
    for (a, s) in spectrum.atoms().iter().zip(shift.atoms()) {
        let k2 = s.kappa * s.kappa;
        r0 += a.signal * k2;
        rinf += a.signal * (1.0 - 2.0 * s.kappa * s.cos_theta + k2);
    }
    Ok((signal * r0, signal * rinf))
}

/// `sum_t pi_t kappa_t cos theta_t`; the regime is decided by comparing it with 1/2.
pub fn effective_overlap(spectrum: &SpectralModel, shift: &ShiftSpec) -> f64 {
    spectrum
        .atoms()
        .iter()
        .zip(shift.atoms())
        .map(|(a, s)| a.signal * s.kappa * s.cos_theta)
        .sum()
}

pub fn classify_overlap(overlap: f64) -> Regime {
    if overlap > 0.5 + REGIME_EPS {
        Regime::Weak
    } else if overlap < 0.5 - REGIME_EPS {
        Regime::Strong
    } else {
        Regime::Boundary
    }
}

pub fn classify_regime(kappa: f64, cos_theta: f64) -> Regime {
    classify_overlap(kappa * cos_theta)
}

/// Penalty minimizing the in-distribution asymptotic risk.
///
/// For the identity covariance this is exactly `gamma / snr`.
pub fn optimal_lambda(spectrum: &SpectralModel, gamma: f64, snr: f64) -> Result<f64> {
    optimal_lambda_with(spectrum, gamma, snr, &SolverOptions::default())
}

pub fn optimal_lambda_with(
    spectrum: &SpectralModel,
    gamma: f64,
    snr: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    check_gamma_snr(gamma, snr)?;
    if spectrum.is_isotropic() {
        Ok(gamma / snr)
    } else {
        optimal_lambda_numeric(spectrum, gamma, snr, opts)
    }
}

/// Golden-section search on `ln lambda` over [`LAMBDA_SEARCH`], used for
/// every anisotropic spectrum and available for isotropic ones as a check.
pub fn optimal_lambda_numeric(
    spectrum: &SpectralModel,
    gamma: f64,
    snr: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    check_gamma_snr(gamma, snr)?;
    let identity = ShiftSpec::none(spectrum);
    let noise = 1.0 / snr;
    let objective = |log_lambda: f64| -> Result<f64> {
        let state = solve_state_with(spectrum, gamma, libm::exp(log_lambda), opts)?;
        Ok(bias_per_signal(spectrum, &identity, &state) + variance_from_state(noise, &state))
    };
    let (lo, hi) = LAMBDA_SEARCH;
    let best = golden_section_min(objective, libm::log(lo), libm::log(hi), LOG_LAMBDA_TOL)?;
    Ok(libm::exp(best.x))
}

fn check_gamma_snr(gamma: f64, snr: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::invalid(format!("snr must be > 0, got {snr}")));
    }
    Ok(())
}

/// Minimum over the sample size of the optimally tuned isotropic risk.
///
/// The optimally tuned isotropic risk is monotonic in `gamma`, so the minimum
/// is the smaller of the two data limits.
pub fn min_risk(kappa: f64, cos_theta: f64, signal: f64) -> f64 {
    let k2 = kappa * kappa;
    signal * k2.min(1.0 - 2.0 * kappa * cos_theta + k2)
}

/// Grid-scan counterpart of [`min_risk`]: the smallest isotropic risk at
/// `lambda = gamma / snr` over the given `gamma` values.
pub fn min_risk_scan(kappa: f64, cos_theta: f64, snr: f64, signal: f64, gammas: &[f64]) -> Result<f64> {
    let spectrum = SpectralModel::isotropic();
    let shift = ShiftSpec::uniform(&spectrum, kappa, cos_theta)?;
    let base = ProblemSpec::new(spectrum, shift, 1.0, snr, LambdaPolicy::Optimal)?.with_signal(signal)?;
    let mut best = f64::INFINITY;
    for &g in gammas {
        let r = asymptotic_risk(&base.with_gamma(g)?).map_err(|e| e.at_gamma(g))?;
        best = best.min(r.risk);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileShape {
    /// Risk falls with more data everywhere (rises with `gamma`).
    MonotoneDecreasingInN,
    /// Risk rises with more data everywhere (falls with `gamma`).
    MonotoneIncreasingInN,
    /// Risk has a local maximum at an intermediate sample size.
    InteriorMax,
    /// Risk has a local minimum at an intermediate sample size, and no interior maximum.
    InteriorMin,
    Flat,
}

impl ProfileShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileShape::MonotoneDecreasingInN => "monotone_decreasing_in_N",
            ProfileShape::MonotoneIncreasingInN => "monotone_increasing_in_N",
            ProfileShape::InteriorMax => "interior_max",
            ProfileShape::InteriorMin => "interior_min",
            ProfileShape::Flat => "flat",
        }
    }
}

impl core::fmt::Display for ProfileShape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a risk curve sampled on an increasing `gamma` grid.
///
/// Consecutive differences smaller than `PROFILE_REL_TOL * max|R|` are
/// treated as zero. A curve whose total variation is below that tolerance
/// is flat, and a curve whose remaining differences share one sign is
/// monotone. Otherwise the global extrema decide: a minimum below both
/// endpoints makes `InteriorMin`, a maximum above both makes `InteriorMax`,
/// and when both occur the one further from the endpoints wins. If neither
/// global extremum is interior the first interior turning point decides.
pub fn classify_profile(risks: &[f64]) -> ProfileShape {
    let scale = risks.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let tol = PROFILE_REL_TOL * scale;
    let diffs: Vec<f64> = risks.windows(2).map(|w| w[1] - w[0]).collect();
    let total: f64 = diffs.iter().map(|d| d.abs()).sum();
    if total < tol || scale == 0.0 {
        return ProfileShape::Flat;
    }
    let signs: Vec<i8> = diffs
        .iter()
        .filter(|d| d.abs() > tol)
        .map(|&d| if d > 0.0 { 1 } else { -1 })
        .collect();
    if signs.iter().all(|&s| s > 0) {
        return ProfileShape::MonotoneDecreasingInN;
    }
    if signs.iter().all(|&s| s < 0) {
        return ProfileShape::MonotoneIncreasingInN;
    }

    let (first, last) = (risks[0], risks[risks.len() - 1]);
    let lo = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let depth = first.min(last) - lo;
    let height = hi - first.max(last);
    match (depth > tol, height > tol) {
        (true, false) => ProfileShape::InteriorMin,
        (false, true) => ProfileShape::InteriorMax,
        (true, true) if depth >= height => ProfileShape::InteriorMin,
        (true, true) => ProfileShape::InteriorMax,
        (false, false) => {
            if signs[0] > 0 {
                ProfileShape::InteriorMax
            } else {
                ProfileShape::InteriorMin
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub gammas: Vec<f64>,
    pub risks: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub shape: ProfileShape,
    pub argmin_gamma: f64,
    pub argmax_gamma: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl ProfileReport {
    pub fn from_curve(gammas: Vec<f64>, risks: Vec<f64>, lambdas: Vec<f64>) -> Result<Self> {
        check_grid(&gammas)?;
        if risks.len() != gammas.len() || lambdas.len() != gammas.len() {
            return Err(Error::invalid("profile arrays differ in length"));
        }
        let mut imin = 0;
        let mut imax = 0;
        for (i, &r) in risks.iter().enumerate() {
            if r < risks[imin] {
                imin = i;
            }
            if r > risks[imax] {
                imax = i;
            }
        }
        Ok(ProfileReport {
            shape: classify_profile(&risks),
            argmin_gamma: gammas[imin],
            argmax_gamma: gammas[imax],
            r_min: risks[imin],
            r_max: risks[imax],
            gammas,
            risks,
            lambdas,
        })
    }
}

/// Strictly increasing, positive, at least three points.
pub fn check_grid(gammas: &[f64]) -> Result<()> {
    if gammas.len() < 3 {
        return Err(Error::invalid("profile grid needs at least 3 points"));
    }
    if gammas.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::invalid("profile grid must be positive and finite"));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("profile grid must be strictly increasing"));
    }
    Ok(())
}

/// Evaluates the risk along a `gamma` grid (re-tuning `lambda` per point
/// under the optimal policy) and classifies the curve.
pub fn profile(problem: &ProblemSpec, gammas: &[f64]) -> Result<ProfileReport> {
    check_grid(gammas)?;
    let mut risks = Vec::with_capacity(gammas.len());
    let mut lambdas = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let r = asymptotic_risk(&problem.with_gamma(g)?).map_err(|e| e.at_gamma(g))?;
        risks.push(r.risk);
        lambdas.push(r.lambda);
    }
    ProfileReport::from_curve(gammas.to_vec(), risks, lambdas)
}

/// `n` log-spaced points from `lo` to `hi`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (libm::log(lo), libm::log(hi));
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        let t = i as f64 / (n - 1) as f64;
                        libm::exp(a + (b - a) * t)
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{AtomShift, SpectralModel};

    fn iso(kappa: f64, cos_theta: f64, gamma: f64, lambda: LambdaPolicy) -> ProblemSpec {
        let m = SpectralModel::isotropic();
        let s = ShiftSpec::uniform(&m, kappa, cos_theta).unwrap();
        ProblemSpec::new(m, s, gamma, 1.0, lambda).unwrap()
    }

    #[test]
    fn isotropic_no_shift_point() {
        let r = asymptotic_risk(&iso(1.0, 1.0, 1.0, LambdaPolicy::Fixed(1.0))).unwrap();
        let s5 = libm::sqrt(5.0);
        // B = lambda^2 nu', V = nu - lambda nu'
        assert!((r.bias - 1.0 / s5).abs() < 1e-12);
        assert!((r.variance - ((s5 - 1.0) / 2.0 - 1.0 / s5)).abs() < 1e-12);
        assert!((r.risk - (s5 - 1.0) / 2.0).abs() < 1e-12);
        assert_eq!(r.risk, r.bias + r.variance);
        assert_eq!(r.regime, Some(Regime::Weak));
    }

    #[test]
    fn isotropic_null_test_coefficients() {
        let r = asymptotic_risk(&iso(0.0, 1.0, 1.0, LambdaPolicy::Fixed(1.0))).unwrap();
        assert!((r.bias - 0.211_145_618_000_168).abs() < 1e-12, "{}", r.bias);
        assert!((r.variance - 0.170_820_393_249_937).abs() < 1e-12);
        assert!((r.risk - 0.381_966_011_250_105).abs() < 1e-12);
        assert_eq!(r.regime, Some(Regime::Strong));
    }

    #[test]
    fn boundary_risk_is_a_quarter() {
        for g in [0.25, 1.0, 4.0] {
            let r = asymptotic_risk(&iso(0.5, 1.0, g, LambdaPolicy::Optimal)).unwrap();
            assert!((r.risk - 0.25).abs() < 1e-10, "gamma {g}: {}", r.risk);
            assert_eq!(r.lambda, g);
        }
    }

    #[test]
    fn limits() {
        let m = SpectralModel::isotropic();
        assert_eq!(risk_limits(&m, &ShiftSpec::none(&m), 2.0).unwrap(), (2.0, 0.0));
        let zero = ShiftSpec::uniform(&m, 0.0, 1.0).unwrap();
        assert_eq!(risk_limits(&m, &zero, 1.0).unwrap(), (0.0, 1.0));
        let two = SpectralModel::two_scale(0.1, 1.0, 0.5, 0.5).unwrap();
        let s = ShiftSpec::new(
            alloc::vec![AtomShift::NONE, AtomShift::new(0.5, 1.0).unwrap()],
            &two,
        )
        .unwrap();
        let (r0, rinf) = risk_limits(&two, &s, 1.0).unwrap();
        assert!((r0 - 0.625).abs() < 1e-15);
        assert!((rinf - 0.125).abs() < 1e-15);
    }

    #[test]
    fn optimal_lambda_rules() {
        let m = SpectralModel::isotropic();
        assert_eq!(optimal_lambda(&m, 2.0, 4.0).unwrap(), 0.5);
        let numeric = optimal_lambda_numeric(&m, 2.0, 4.0, &SolverOptions::default()).unwrap();
        assert!((numeric / 0.5 - 1.0).abs() < 1e-6, "{numeric}");
        assert!(optimal_lambda(&m, 0.0, 1.0).is_err());
    }

    #[test]
    fn two_scale_optimal_lambda_is_a_local_minimum() {
        let m = SpectralModel::two_scale(0.1, 1.0, 0.5, 0.5).unwrap();
        let lam = optimal_lambda(&m, 1.0, 1.0).unwrap();
        // frozen from an independent bounded scalar minimizer (xatol 1e-10 on ln lambda)
        assert!((lam - 0.938_848).abs() < 1e-5, "{lam}");
        let at = |l: f64| {
            let p = ProblemSpec::new(m.clone(), ShiftSpec::none(&m), 1.0, 1.0, LambdaPolicy::Fixed(l))
                .unwrap();
            asymptotic_risk(&p).unwrap().risk
        };
        let r = at(lam);
        assert!(r <= at(lam * (1.0 + 1e-3)));
        assert!(r <= at(lam * (1.0 - 1e-3)));
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(1.0, 1.0), Regime::Weak);
        assert_eq!(classify_regime(0.4, 1.0), Regime::Strong);
        assert_eq!(classify_regime(0.5, 1.0), Regime::Boundary);
        assert_eq!(classify_regime(1.0, -1.0), Regime::Strong);
    }

    #[test]
    fn min_risk_examples() {
        assert_eq!(min_risk(1.0, 1.0, 1.0), 0.0);
        assert_eq!(min_risk(0.5, 1.0, 1.0), 0.25);
        assert_eq!(min_risk(1.0, 0.0, 1.0), 1.0);
        assert_eq!(min_risk(0.5, 1.0, 4.0), 1.0);
    }

    #[test]
    fn profile_shapes_isotropic() {
        let grid = log_grid(1e-2, 1e2, 50);
        let p = profile(&iso(1.0, 1.0, 1.0, LambdaPolicy::Optimal), &grid).unwrap();
        assert_eq!(p.shape, ProfileShape::MonotoneDecreasingInN);
        let p = profile(&iso(0.5, 1.0, 1.0, LambdaPolicy::Optimal), &grid).unwrap();
        assert_eq!(p.shape, ProfileShape::Flat);
        let p = profile(&iso(0.0, 1.0, 1.0, LambdaPolicy::Optimal), &grid).unwrap();
        assert_eq!(p.shape, ProfileShape::MonotoneIncreasingInN);
        assert_eq!(p.argmax_gamma, 1e-2);
    }

    #[test]
    fn classify_profile_rules() {
        assert_eq!(classify_profile(&[1.0, 1.0, 1.0]), ProfileShape::Flat);
        assert_eq!(classify_profile(&[1.0, 2.0, 3.0]), ProfileShape::MonotoneDecreasingInN);
        assert_eq!(classify_profile(&[3.0, 2.0, 1.0]), ProfileShape::MonotoneIncreasingInN);
        assert_eq!(classify_profile(&[1.0, 3.0, 2.0]), ProfileShape::InteriorMax);
        assert_eq!(classify_profile(&[3.0, 1.0, 2.0]), ProfileShape::InteriorMin);
        // local bump on a rising curve still counts as an interior maximum
        assert_eq!(classify_profile(&[1.0, 2.0, 1.9, 3.0]), ProfileShape::InteriorMax);
        assert_eq!(classify_profile(&[3.0, 2.0, 2.1, 1.0]), ProfileShape::InteriorMin);
        // a dip below both ends outranks a smaller bump
        assert_eq!(classify_profile(&[2.0, 2.2, 1.0, 3.0]), ProfileShape::InteriorMin);
        assert_eq!(classify_profile(&[2.0, 5.0, 1.5, 3.0]), ProfileShape::InteriorMax);
        // differences at rounding level are ignored
        assert_eq!(
            classify_profile(&[1.0, 2.0, 2.0 - 1e-15, 3.0]),
            ProfileShape::MonotoneDecreasingInN
        );
    }

    #[test]
    fn profile_rejects_bad_grid() {
        let p = iso(1.0, 1.0, 1.0, LambdaPolicy::Optimal);
        assert!(profile(&p, &[1.0, 2.0]).is_err());
        assert!(profile(&p, &[1.0, 0.5, 2.0]).is_err());
    }

    #[test]
    fn profile_reports_offending_gamma() {
        let mut p = iso(1.0, 1.0, 1.0, LambdaPolicy::Optimal);
        p.solver.max_iterations = 1;
        let err = profile(&p, &[0.5, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::AtGamma { gamma, .. } if gamma == 0.5));
        assert!(err.is_numeric());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-2, 1e2, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[49], 1e2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
