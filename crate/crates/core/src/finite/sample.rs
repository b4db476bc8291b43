//! Finite-`(P, N)` Gaussian regression: coefficient construction, data
//! sampling, ridge fitting and the exact conditional bias and variance.
//!
//! The covariance is realized as a diagonal matrix. Atom `t` owns a
//! contiguous block of coordinates whose size is `rho_t P` rounded by the
//! largest-remainder rule, so the blocks always add up to `P`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::linalg::{dot, gram, norm, Cholesky, SquareMatrix};
use super::rng::{CounterRng, Stream, GENERATOR_TAG};
use crate::error::{Error, Result};
use crate::spectrum::{AtomShift, ShiftSpec, SpectralModel};

/// Splits `p` coordinates among the atoms in proportion to their weights.
///
/// Each atom first gets `floor(rho_t p)`; the leftover coordinates go to the
/// largest fractional parts, ties broken by atom order.
pub fn allocate_dims(spectrum: &SpectralModel, p: usize) -> Vec<usize> {
    let quotas: Vec<f64> = spectrum.atoms().iter().map(|a| a.weight * p as f64).collect();
    let mut dims: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let assigned: usize = dims.iter().sum();
    let mut order: Vec<usize> = (0..dims.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = quotas[i] - libm::floor(quotas[i]);
        let fj = quotas[j] - libm::floor(quotas[j]);
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().cycle().take(p.saturating_sub(assigned)) {
        dims[i] += 1;
    }
    dims
}

/// Contiguous coordinate blocks for the given block sizes.
pub fn blocks_for(dims: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    dims.iter()
        .map(|&d| {
            let r = start..start + d;
            start += d;
            r
        })
        .collect()
}

/// Diagonal of the covariance for a block layout.
pub fn variances_for(spectrum: &SpectralModel, blocks: &[Range<usize>]) -> Vec<f64> {
    let p = blocks.last().map_or(0, |b| b.end);
    let mut v = vec![0.0; p];
    for (a, b) in spectrum.atoms().iter().zip(blocks) {
        v[b.clone()].fill(a.variance);
    }
    v
}

/// Training and test coefficients with their per-atom coordinate blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub beta: Vec<f64>,
    pub beta_test: Vec<f64>,
    pub blocks: Vec<Range<usize>>,
    /// Diagonal covariance the pair was built against.
    pub variances: Vec<f64>,
}

impl CoefficientPair {
    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Measured `(kappa, cos theta)` per atom; `None` where `beta_t = 0`.
    /// The alignment is reported as 1 where `beta~_t = 0`.
    pub fn measured_shift(&self) -> Vec<Option<AtomShift>> {
        self.blocks
            .iter()
            .map(|b| {
                let (u, v) = (&self.beta[b.clone()], &self.beta_test[b.clone()]);
                let (nu, nv) = (norm(u), norm(v));
                if nu == 0.0 {
                    return None;
                }
                let cos_theta = if nv == 0.0 { 1.0 } else { dot(u, v) / (nu * nv) };
                Some(AtomShift { kappa: nv / nu, cos_theta })
            })
            .collect()
    }

    /// Per-atom `beta_t' Sigma beta_t / beta' Sigma beta`.
    pub fn signal_fractions(&self) -> Vec<f64> {
        let parts: Vec<f64> = self
            .blocks
            .iter()
            .map(|b| b.clone().map(|i| self.variances[i] * self.beta[i] * self.beta[i]).sum())
            .collect();
        let total: f64 = parts.iter().sum();
        parts.into_iter().map(|x| x / total).collect()
    }

    /// `beta' Sigma beta`.
    pub fn signal(&self) -> f64 {
        quad_form(&self.variances, &self.beta)
    }

    /// Coefficients seen after whitening the features: `beta -> Sigma^{1/2} beta`.
    pub fn whitened(&self) -> CoefficientPair {
        let scale = |x: &[f64]| -> Vec<f64> {
            x.iter().zip(&self.variances).map(|(b, s)| b * libm::sqrt(*s)).collect()
        };
        CoefficientPair {
            beta: scale(&self.beta),
            beta_test: scale(&self.beta_test),
            blocks: self.blocks.clone(),
            variances: vec![1.0; self.variances.len()],
        }
    }
}

fn quad_form(diag: &[f64], x: &[f64]) -> f64 {
    diag.iter().zip(x).map(|(s, v)| s * v * v).sum()
}

/// Builds `beta` and `beta~` in `p` dimensions realizing the requested
/// per-atom signal fractions and shifts exactly.
///
/// Within atom `t`, `beta_t` points along a random unit direction `b` with
/// `|beta_t|^2 = pi_t signal / s_t`, and
/// `beta~_t = kappa_t (cos theta_t b + sin theta_t u) |beta_t|` where `u` is a
/// second random direction orthonormalized against `b`.
pub fn build_coefficients(
    spectrum: &SpectralModel,
    shift: &ShiftSpec,
    p: usize,
    seed: u64,
    signal: f64,
) -> Result<CoefficientPair> {
    if shift.len() != spectrum.len() {
        return Err(Error::invalid("shift length does not match spectrum"));
    }
    if p < 2 * spectrum.len() {
        return Err(Error::invalid(format!(
            "dimension {p} is too small for {} atoms (need at least {})",
            spectrum.len(),
            2 * spectrum.len()
        )));
    }
    if !(signal.is_finite() && signal > 0.0) {
        return Err(Error::invalid(format!("signal must be > 0, got {signal}")));
    }
    let dims = allocate_dims(spectrum, p);
    let blocks = blocks_for(&dims);
    let variances = variances_for(spectrum, &blocks);
    let mut rng = CounterRng::for_stream(seed, Stream::Coefficients);
    let mut beta = vec![0.0; p];
    let mut beta_test = vec![0.0; p];

    for (t, ((atom, s), block)) in spectrum.atoms().iter().zip(shift.atoms()).zip(&blocks).enumerate() {
        let d = block.len();
        let needs_rotation = s.kappa > 0.0 && s.cos_theta.abs() != 1.0;
        if d == 0 && atom.signal > 0.0 {
            return Err(Error::invalid(format!(
                "atom {t} carries signal but received no dimensions at P = {p}"
            )));
        }
        if d < 2 && needs_rotation {
            return Err(Error::invalid(format!(
                "atom {t} has {d} dimension(s); a rotated test coefficient needs at least 2"
            )));
        }
        if d == 0 {
            continue;
        }
        let mut dir = vec![0.0; d];
        rng.fill_normal(&mut dir);
        normalize(&mut dir)?;
        let length = libm::sqrt(atom.signal * signal / atom.variance);

        let sin_theta = libm::sqrt((1.0 - s.cos_theta * s.cos_theta).max(0.0));
        let mut ortho = vec![0.0; d];
        if d >= 2 {
            rng.fill_normal(&mut ortho);
            // two Gram-Schmidt passes keep the result orthogonal to rounding
            for _ in 0..2 {
                let c = dot(&ortho, &dir);
                for (o, b) in ortho.iter_mut().zip(&dir) {
                    *o -= c * b;
                }
            }
            normalize(&mut ortho)?;
        }
        for (k, i) in block.clone().enumerate() {
            beta[i] = length * dir[k];
            beta_test[i] = s.kappa * length * (s.cos_theta * dir[k] + sin_theta * ortho[k]);
        }
    }
    Ok(CoefficientPair { beta, beta_test, blocks, variances })
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = norm(v);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Numeric("degenerate random direction".into()));
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(())
}

/// Training sample: `X` is `p x n` (features by samples, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub p: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Empirical covariance `X X' / n` (zero when `n = 0`).
    pub psi: SquareMatrix,
    /// Diagonal of the population covariance.
    pub variances: Vec<f64>,
    pub seed: u64,
    pub generator: &'static str,
}

impl Dataset {
    /// The same sample with every feature scaled to unit variance.
    pub fn whitened(&self) -> Dataset {
        let inv: Vec<f64> = self.variances.iter().map(|s| 1.0 / libm::sqrt(*s)).collect();
        let mut x = self.x.clone();
        for (i, row) in x.chunks_mut(self.n.max(1)).enumerate().take(self.p) {
            for v in row {
                *v *= inv[i];
            }
        }
        let mut psi = self.psi.clone();
        for i in 0..self.p {
            for j in 0..self.p {
                psi[(i, j)] *= inv[i] * inv[j];
            }
        }
        Dataset {
            x,
            psi,
            variances: vec![1.0; self.p],
            y: self.y.clone(),
            ..*self
        }
    }

    /// `X Y`.
    pub fn xy(&self) -> Vec<f64> {
        (0..self.p)
            .map(|i| dot(&self.x[i * self.n..(i + 1) * self.n], &self.y))
            .collect()
    }
}

/// Draws `n` samples `x ~ N(0, Sigma)`, `y = beta' x + xi`, `xi ~ N(0, sigma^2)`.
pub fn sample_dataset(
    spectrum: &SpectralModel,
    beta: &[f64],
    noise_variance: f64,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::invalid(format!("noise variance must be >= 0, got {noise_variance}")));
    }
    let p = beta.len();
    let blocks = blocks_for(&allocate_dims(spectrum, p));
    let variances = variances_for(spectrum, &blocks);
    let sd: Vec<f64> = variances.iter().map(|s| libm::sqrt(*s)).collect();

    let mut cov_rng = CounterRng::for_stream(seed, Stream::Covariates);
    let mut noise_rng = CounterRng::for_stream(seed, Stream::Noise);
    let noise_sd = libm::sqrt(noise_variance);
    let mut x = vec![0.0; p * n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        let mut yj = 0.0;
        for i in 0..p {
            let v = sd[i] * cov_rng.normal();
            x[i * n + j] = v;
            yj += beta[i] * v;
        }
        y[j] = yj + noise_sd * noise_rng.normal();
    }
    let psi = gram(&x, p, n, n as f64);
    Ok(Dataset { p, n, x, y, psi, variances, seed, generator: GENERATOR_TAG })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(())
}

fn regularized(psi: &SquareMatrix, lambda: f64) -> Result<Cholesky> {
    let mut a = psi.clone();
    a.add_diagonal(lambda);
    Cholesky::factor(&a)
}

/// Ridge estimate `(X X' + lambda n I)^{-1} X Y`; zero when `n = 0`.
pub fn ridge_fit(data: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if data.n == 0 {
        return Ok(vec![0.0; data.p]);
    }
    let chol = regularized(&data.psi, lambda)?;
    let scale = data.n as f64;
    let rhs: Vec<f64> = data.xy().into_iter().map(|v| v / scale).collect();
    let mut sol = chol.solve(&rhs);
    // one step of iterative refinement
    let mut a = data.psi.clone();
    a.add_diagonal(lambda);
    let ax = a.mul_vec(&sol);
    let resid: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    for (s, c) in sol.iter_mut().zip(chol.solve(&resid)) {
        *s += c;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("ridge solution is not finite".into()));
    }
    Ok(sol)
}

/// Exact conditional bias and variance given the training covariates:
///
/// ```text
/// B(X) = (Psi (Psi + lambda)^{-1} beta - beta~)' Sigma (...)
/// V(X) = sigma^2 / n tr(Sigma Psi (Psi + lambda)^{-2})
/// ```
///
/// The test covariance is the training covariance.
pub fn conditional_risk(
    data: &Dataset,
    coeffs: &CoefficientPair,
    lambda: f64,
    noise_variance: f64,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    if coeffs.dim() != data.p {
        return Err(Error::invalid("coefficient and data dimensions differ"));
    }
    let sigma = &data.variances;
    if data.n == 0 {
        return Ok((quad_form(sigma, &coeffs.beta_test), 0.0));
    }
    let inv = regularized(&data.psi, lambda)?.inverse();
    let m_beta = inv.mul_vec(&coeffs.beta);
    let diff: Vec<f64> = coeffs
        .beta
        .iter()
        .zip(&m_beta)
        .zip(&coeffs.beta_test)
        .map(|((b, mb), bt)| b - lambda * mb - bt)
        .collect();
    let bias = quad_form(sigma, &diff);

    // tr(Sigma Psi (Psi+l)^{-2}) = tr(Sigma M) - lambda tr(Sigma M^2), M = (Psi+l)^{-1}
    let mut tr_m = 0.0;
    let mut tr_m2 = 0.0;
    for i in 0..data.p {
        let row = inv.row(i);
        tr_m += sigma[i] * row[i];
        tr_m2 += sigma[i] * dot(row, row);
    }
    let variance = noise_variance / data.n as f64 * (tr_m - lambda * tr_m2);
    if !(bias.is_finite() && variance.is_finite()) {
        return Err(Error::Numeric("conditional risk is not finite".into()));
    }
    Ok((bias, variance.max(0.0)))
}

/// Test-set estimate of `E[(beta_hat' x - beta~' x)^2]` over `n_test` fresh
/// draws `x ~ N(0, Sigma)`.
pub fn empirical_risk_estimate(
    beta_hat: &[f64],
    coeffs: &CoefficientPair,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::invalid("n_test must be >= 1"));
    }
    if beta_hat.len() != coeffs.dim() {
        return Err(Error::invalid("estimate and coefficient dimensions differ"));
    }
    let w: Vec<f64> = beta_hat
        .iter()
        .zip(&coeffs.beta_test)
        .zip(&coeffs.variances)
        .map(|((b, t), s)| (b - t) * libm::sqrt(*s))
        .collect();
    let mut rng = CounterRng::for_stream(seed, Stream::TestPoints);
    let mut acc = 0.0;
    for _ in 0..n_test {
        let e: f64 = w.iter().map(|wi| wi * rng.normal()).sum();
        acc += e * e;
    }
    Ok(acc / n_test as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Atom;

    #[test]
    fn largest_remainder_allocation() {
        let m = SpectralModel::new([Atom::new(1.0, 0.5, 0.5), Atom::new(0.1, 0.5, 0.5)]).unwrap();
        assert_eq!(allocate_dims(&m, 64), vec![32, 32]);
        let m = SpectralModel::new([
            Atom::new(1.0, 1.0 / 3.0, 0.5),
            Atom::new(2.0, 1.0 / 3.0, 0.25),
            Atom::new(3.0, 1.0 / 3.0, 0.25),
        ])
        .unwrap();
        let d = allocate_dims(&m, 10);
        assert_eq!(d.iter().sum::<usize>(), 10);
        assert_eq!(d, vec![4, 3, 3]);
        let m = SpectralModel::new([Atom::new(1.0, 0.7, 0.5), Atom::new(2.0, 0.3, 0.5)]).unwrap();
        assert_eq!(allocate_dims(&m, 5), vec![4, 1]);
    }

    #[test]
    fn planar_rotation() {
        let m = SpectralModel::isotropic();
        let s = ShiftSpec::uniform(&m, 1.0, 0.0).unwrap();
        let c = build_coefficients(&m, &s, 2, 3, 1.0).unwrap();
        assert!(dot(&c.beta, &c.beta_test).abs() < 1e-15);
        assert!((norm(&c.beta_test) - norm(&c.beta)).abs() < 1e-15);
        // beta~ is beta rotated by a right angle in the plane
        let rotated = [-c.beta[1], c.beta[0]];
        let flipped = [c.beta[1], -c.beta[0]];
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(&c.beta_test, &rotated) || close(&c.beta_test, &flipped));
    }

    #[test]
    fn no_shift_copies_beta() {
        let m = SpectralModel::isotropic();
        let c = build_coefficients(&m, &ShiftSpec::none(&m), 16, 0, 1.0).unwrap();
        assert_eq!(c.beta, c.beta_test);
        assert!((c.signal() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_scale_measured_shift() {
        let m = SpectralModel::two_scale(0.1, 1.0, 0.5, 0.5).unwrap();
        let s = ShiftSpec::new(
            vec![AtomShift::new(0.3, -0.4).unwrap(), AtomShift::new(1.7, 0.8).unwrap()],
            &m,
        )
        .unwrap();
        let c = build_coefficients(&m, &s, 64, 11, 2.0).unwrap();
        assert_eq!(c.blocks, vec![0..32, 32..64]);
        for (got, want) in c.measured_shift().iter().zip(s.atoms()) {
            let got = got.unwrap();
            assert!((got.kappa - want.kappa).abs() <= 1e-12);
            assert!((got.cos_theta - want.cos_theta).abs() <= 1e-12);
        }
        for f in c.signal_fractions() {
            assert!((f - 0.5).abs() < 1e-12);
        }
        assert!((c.signal() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_needs_two_dimensions() {
        let m = SpectralModel::new([Atom::new(1.0, 0.9, 0.5), Atom::new(2.0, 0.1, 0.5)]).unwrap();
        let s = ShiftSpec::new(vec![AtomShift::NONE, AtomShift::new(1.0, 0.5).unwrap()], &m).unwrap();
        // 0.1 * 8 rounds to one dimension for the second atom
        assert!(build_coefficients(&m, &s, 8, 0, 1.0).is_err());
        let flip = ShiftSpec::new(vec![AtomShift::NONE, AtomShift::new(1.0, -1.0).unwrap()], &m).unwrap();
        assert!(build_coefficients(&m, &flip, 8, 0, 1.0).is_ok());
        assert!(build_coefficients(&m, &flip, 3, 0, 1.0).is_err());
    }

    #[test]
    fn empty_dataset() {
        let m = SpectralModel::isotropic();
        let s = ShiftSpec::uniform(&m, 0.7, 0.2).unwrap();
        let c = build_coefficients(&m, &s, 8, 1, 1.0).unwrap();
        let d = sample_dataset(&m, &c.beta, 1.0, 0, 5).unwrap();
        assert_eq!(d.psi, SquareMatrix::zeros(8));
        assert_eq!(ridge_fit(&d, 1.0).unwrap(), vec![0.0; 8]);
        let (b, v) = conditional_risk(&d, &c, 1.0, 1.0).unwrap();
        assert!((b - quad_form(&c.variances, &c.beta_test)).abs() < 1e-15);
        assert!((b - 0.49).abs() < 1e-12);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn scalar_ridge() {
        let d = Dataset {
            p: 1,
            n: 1,
            x: vec![2.0],
            y: vec![3.0],
            psi: SquareMatrix::from_rows(1, vec![4.0]),
            variances: vec![1.0],
            seed: 0,
            generator: GENERATOR_TAG,
        };
        let b = ridge_fit(&d, 0.5).unwrap();
        assert!((b[0] - 6.0 / 4.5).abs() < 1e-15);
        assert!(ridge_fit(&d, 0.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = SpectralModel::two_scale(0.1, 1.0, 0.5, 0.5).unwrap();
        let c = build_coefficients(&m, &ShiftSpec::none(&m), 16, 9, 1.0).unwrap();
        let a = sample_dataset(&m, &c.beta, 0.5, 20, 9).unwrap();
        let b = sample_dataset(&m, &c.beta, 0.5, 20, 9).unwrap();
        assert_eq!(a, b);
        let other = sample_dataset(&m, &c.beta, 0.5, 20, 10).unwrap();
        assert_ne!(a.x, other.x);
    }

    #[test]
    fn heavy_shrinkage() {
        let m = SpectralModel::isotropic();
        let s = ShiftSpec::uniform(&m, 0.8, 0.6).unwrap();
        let c = build_coefficients(&m, &s, 16, 2, 1.0).unwrap();
        let d = sample_dataset(&m, &c.beta, 1.0, 24, 2).unwrap();
        let lambda = 1e12;
        let bh = ridge_fit(&d, lambda).unwrap();
        let xy = norm(&d.xy());
        assert!(norm(&bh) <= 1.000_001 * xy / (lambda * d.n as f64));
        let (b, v) = conditional_risk(&d, &c, lambda, 1.0).unwrap();
        let target = quad_form(&c.variances, &c.beta_test);
        assert!((b / target - 1.0).abs() < 1e-6);
        assert!(v <= 1e-6);
    }

    #[test]
    fn whitening_dataset() {
        let m = SpectralModel::two_scale(0.1, 1.0, 0.5, 0.5).unwrap();
        let c = build_coefficients(&m, &ShiftSpec::none(&m), 8, 4, 1.0).unwrap();
        let d = sample_dataset(&m, &c.beta, 0.0, 12, 4).unwrap();
        let w = d.whitened();
        let direct = gram(&w.x, w.p, w.n, w.n as f64);
        for (a, b) in direct.as_slice().iter().zip(w.psi.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        // noiseless responses are unchanged by whitening: X'beta = (S^-1/2 X)'(S^1/2 beta)
        let cw = c.whitened();
        for j in 0..w.n {
            let yj: f64 = (0..w.p).map(|i| w.x[i * w.n + j] * cw.beta[i]).sum();
            assert!((yj - w.y[j]).abs() < 1e-12);
        }
    }
}
