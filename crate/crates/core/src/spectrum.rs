//! Covariance spectra, concept-shift parameters and problem definitions.
//!
//! A covariance is described by a finite set of atoms. Atom `i` has variance
//! `s_i`, spectral weight `rho_i` (the fraction of feature dimensions with
//! that variance) and signal fraction `pi_i` (the share of `beta' Sigma beta`
//! carried by those dimensions). Concept shift is described per atom by a
//! scaling factor `kappa_i = |beta~_i| / |beta_i|` and an alignment
//! `cos theta_i = beta_i . beta~_i / (|beta_i| |beta~_i|)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::resolvent::SolverOptions;

/// Tolerance on the weight and signal-fraction sums accepted at construction.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// Feature variance `s`.
    pub variance: f64,
    /// Spectral weight `rho`.
    pub weight: f64,
    /// Signal fraction `pi`.
    pub signal: f64,
}

impl Atom {
    pub const fn new(variance: f64, weight: f64, signal: f64) -> Self {
        Atom { variance, weight, signal }
    }
}

/// A discrete covariance spectrum with signal allocation.
///
/// Atoms are kept sorted by strictly increasing variance, and the weights
/// and signal fractions each sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    atoms: Vec<Atom>,
}

impl SpectralModel {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<Self> {
        let pairs = atoms
            .into_iter()
            .map(|a| (a, AtomShift::NONE))
            .collect::<Vec<_>>();
        Self::with_shift(pairs).map(|(model, _)| model)
    }

    /// Canonicalizes a spectrum together with its per-atom shifts, keeping
    /// each shift attached to its atom through sorting and pruning.
    pub fn with_shift(
        pairs: impl IntoIterator<Item = (Atom, AtomShift)>,
    ) -> Result<(Self, ShiftSpec)> {
        let mut pairs: Vec<(Atom, AtomShift)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::invalid("spectrum must have at least one atom"));
        }
        for (a, shift) in &pairs {
            if !(a.variance.is_finite() && a.weight.is_finite() && a.signal.is_finite()) {
                return Err(Error::invalid("spectrum entries must be finite"));
            }
            if a.variance <= 0.0 {
                return Err(Error::invalid(format!("atom variance must be > 0, got {}", a.variance)));
            }
            if a.weight < 0.0 {
                return Err(Error::invalid(format!("spectral weight must be >= 0, got {}", a.weight)));
            }
            if a.signal < 0.0 {
                return Err(Error::invalid(format!("signal fraction must be >= 0, got {}", a.signal)));
            }
            shift.validate()?;
        }

        let weight_sum: f64 = pairs.iter().map(|(a, _)| a.weight).sum();
        let signal_sum: f64 = pairs.iter().map(|(a, _)| a.signal).sum();
        if (weight_sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("spectral weights sum to {weight_sum}, expected 1")));
        }
        if (signal_sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("signal fractions sum to {signal_sum}, expected 1")));
        }

        pairs.retain(|(a, _)| !(a.weight == 0.0 && a.signal == 0.0));
        pairs.sort_by(|(a, _), (b, _)| a.variance.total_cmp(&b.variance));
        if pairs.windows(2).any(|w| w[0].0.variance == w[1].0.variance) {
            return Err(Error::invalid("duplicate atom variance"));
        }

        // Renormalize only when the sums are visibly off, so that a canonical
        // model passes through unchanged.
        let weight_sum: f64 = pairs.iter().map(|(a, _)| a.weight).sum();
        let signal_sum: f64 = pairs.iter().map(|(a, _)| a.signal).sum();
        for (a, _) in pairs.iter_mut() {
            if (weight_sum - 1.0).abs() > 1e-14 {
                a.weight /= weight_sum;
            }
            if (signal_sum - 1.0).abs() > 1e-14 {
                a.signal /= signal_sum;
            }
        }

        let (atoms, shifts) = pairs.into_iter().unzip();
        Ok((SpectralModel { atoms }, ShiftSpec { atoms: shifts }))
    }

    /// The identity covariance: a single atom `(1, 1, 1)`.
    pub fn isotropic() -> Self {
        SpectralModel { atoms: alloc::vec![Atom::new(1.0, 1.0, 1.0)] }
    }

    /// Two point masses at `s_minus < s_plus` with weights `(1 - rho_plus, rho_plus)`
    /// and signal fractions `(1 - pi_plus, pi_plus)`.
    pub fn two_scale(s_minus: f64, s_plus: f64, rho_plus: f64, pi_plus: f64) -> Result<Self> {
        Self::new([
            Atom::new(s_minus, 1.0 - rho_plus, 1.0 - pi_plus),
            Atom::new(s_plus, rho_plus, pi_plus),
        ])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_isotropic(&self) -> bool {
        self.atoms.len() == 1
    }

    /// `sum_i rho_i s_i`, the normalized trace of the covariance.
    pub fn mean_variance(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.variance).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomShift {
    pub kappa: f64,
    pub cos_theta: f64,
}

impl AtomShift {
    pub const NONE: AtomShift = AtomShift { kappa: 1.0, cos_theta: 1.0 };

    pub fn new(kappa: f64, cos_theta: f64) -> Result<Self> {
        let s = AtomShift { kappa, cos_theta };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid(format!("kappa must be finite and >= 0, got {}", self.kappa)));
        }
        if !(self.cos_theta.is_finite() && self.cos_theta.abs() <= 1.0) {
            return Err(Error::invalid(format!(
                "cos(theta) must lie in [-1, 1], got {}",
                self.cos_theta
            )));
        }
        Ok(())
    }

    /// `kappa cos(theta)`.
    pub fn overlap(&self) -> f64 {
        self.kappa * self.cos_theta
    }
}

/// Per-atom concept shift, in the canonical atom order of its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    atoms: Vec<AtomShift>,
}

impl ShiftSpec {
    pub fn new(shifts: Vec<AtomShift>, spectrum: &SpectralModel) -> Result<Self> {
        if shifts.len() != spectrum.len() {
            return Err(Error::invalid(format!(
                "shift has {} entries but the spectrum has {} atoms",
                shifts.len(),
                spectrum.len()
            )));
        }
        for s in &shifts {
            s.validate()?;
        }
        Ok(ShiftSpec { atoms: shifts })
    }

    /// No shift on any atom.
    pub fn none(spectrum: &SpectralModel) -> Self {
        ShiftSpec { atoms: alloc::vec![AtomShift::NONE; spectrum.len()] }
    }

    /// The same `(kappa, cos theta)` on every atom.
    pub fn uniform(spectrum: &SpectralModel, kappa: f64, cos_theta: f64) -> Result<Self> {
        let s = AtomShift::new(kappa, cos_theta)?;
        Ok(ShiftSpec { atoms: alloc::vec![s; spectrum.len()] })
    }

    pub fn atoms(&self) -> &[AtomShift] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub(crate) fn check_matches(&self, spectrum: &SpectralModel) -> Result<()> {
        if self.atoms.len() != spectrum.len() {
            return Err(Error::invalid(format!(
                "shift has {} entries but the spectrum has {} atoms",
                self.atoms.len(),
                spectrum.len()
            )));
        }
        Ok(())
    }
}

/// Shift parameters for a fraction `q` of robust features, the rest having
/// their test coefficients zeroed: `kappa = cos theta = sqrt(q)`.
///
/// At `q = 0` the alignment is undefined; it is reported as 1.
pub fn shift_from_robust_fraction(q: f64) -> Result<AtomShift> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("robust fraction must lie in [0, 1], got {q}")));
    }
    if q == 0.0 {
        return Ok(AtomShift { kappa: 0.0, cos_theta: 1.0 });
    }
    let r = libm::sqrt(q);
    Ok(AtomShift { kappa: r, cos_theta: r })
}

/// Maps an anisotropic problem onto the isotropic problem seen after
/// whitening the features, `x -> Sigma^{-1/2} x`.
///
/// Whitening sends `beta_i -> sqrt(s_i) beta_i`, so the effective scaling is
/// `kappa_eff^2 = sum_i pi_i kappa_i^2` and the effective overlap is
/// `kappa_eff cos_eff = sum_i pi_i kappa_i cos theta_i`.
pub fn whiten_equivalent(
    spectrum: &SpectralModel,
    shift: &ShiftSpec,
) -> Result<(SpectralModel, ShiftSpec)> {
    shift.check_matches(spectrum)?;
    let iso = SpectralModel::isotropic();
    if shift.atoms().iter().all(|s| *s == AtomShift::NONE) {
        return Ok((iso, ShiftSpec { atoms: alloc::vec![AtomShift::NONE] }));
    }
    let mut k2 = 0.0;
    let mut overlap = 0.0;
    for (a, s) in spectrum.atoms().iter().zip(shift.atoms()) {
        k2 += a.signal * s.kappa * s.kappa;
        overlap += a.signal * s.kappa * s.cos_theta;
    }
    let kappa = libm::sqrt(k2);
    let cos_theta = if kappa == 0.0 { 1.0 } else { (overlap / kappa).clamp(-1.0, 1.0) };
    let shift = ShiftSpec { atoms: alloc::vec![AtomShift { kappa, cos_theta }] };
    Ok((iso, shift))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Fixed(f64),
    /// Minimize the in-distribution asymptotic risk at each evaluation.
    Optimal,
}

/// Everything needed for one asymptotic risk evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub spectrum: SpectralModel,
    pub shift: ShiftSpec,
    /// Aspect ratio `P / N`.
    pub gamma: f64,
    pub snr: f64,
    pub lambda: LambdaPolicy,
    /// `beta' Sigma beta`; risks are reported in the same units.
    pub signal: f64,
    pub solver: SolverOptions,
}

impl ProblemSpec {
    pub fn new(
        spectrum: SpectralModel,
        shift: ShiftSpec,
        gamma: f64,
        snr: f64,
        lambda: LambdaPolicy,
    ) -> Result<Self> {
        let p = ProblemSpec {
            spectrum,
            shift,
            gamma,
            snr,
            lambda,
            signal: 1.0,
            solver: SolverOptions::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_signal(mut self, signal: f64) -> Result<Self> {
        self.signal = signal;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut p = self.clone();
        p.gamma = gamma;
        p.validate()?;
        Ok(p)
    }

    pub fn with_shift(&self, shift: ShiftSpec) -> Result<Self> {
        let mut p = self.clone();
        p.shift = shift;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.shift.check_matches(&self.spectrum)?;
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::invalid(format!("snr must be > 0, got {}", self.snr)));
        }
        if !(self.signal.is_finite() && self.signal > 0.0) {
            return Err(Error::invalid(format!("signal must be > 0, got {}", self.signal)));
        }
        if let LambdaPolicy::Fixed(l) = self.lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::invalid(format!("lambda must be > 0, got {l}")));
            }
        }
        Ok(())
    }

    /// Noise variance `sigma^2 = signal / snr`.
    pub fn noise_variance(&self) -> f64 {
        self.signal / self.snr
    }
}
