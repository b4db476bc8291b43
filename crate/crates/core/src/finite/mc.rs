//! Seed-level Monte Carlo evaluation and its aggregation.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use super::sample::{build_coefficients, conditional_risk, sample_dataset};
use crate::error::{Error, Result};
use crate::risk::{asymptotic_risk, RiskReport};
use crate::spectrum::{whiten_equivalent, LambdaPolicy, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    /// Feature dimension `P`.
    pub dim: usize,
    /// Whiten the covariates before fitting, comparing against the
    /// isotropic problem with the effective shift.
    pub whiten: bool,
}

impl McOptions {
    pub fn new(dim: usize) -> Self {
        McOptions { dim, whiten: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedRisk {
    pub seed: u64,
    pub bias: f64,
    pub variance: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Sample mean and `sd / sqrt(n)`, with pairwise summation so the result
    /// depends only on the order of `values`.
    pub fn of(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::invalid("at least two values are needed for a standard error"));
        }
        let mean = pairwise_sum(values) / n as f64;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Ok(MeanStderr { mean, stderr: libm::sqrt(var / n as f64) })
    }

    /// `(mean - reference) / stderr`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference) / self.stderr
    }
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub runs: Vec<SeedRisk>,
    pub bias: MeanStderr,
    pub variance: MeanStderr,
    pub risk: MeanStderr,
    pub count: usize,
    pub dim: usize,
    pub n_samples: usize,
    pub lambda: f64,
    /// Asymptotic reference at the same parameters.
    pub theory: RiskReport,
}

impl McSummary {
    /// Aggregates per-seed results, in the order given.
    pub fn from_runs(runs: Vec<SeedRisk>, plan: &McPlan) -> Result<Self> {
        let col = |f: fn(&SeedRisk) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        Ok(McSummary {
            bias: MeanStderr::of(&col(|r| r.bias))?,
            variance: MeanStderr::of(&col(|r| r.variance))?,
            risk: MeanStderr::of(&col(|r| r.risk))?,
            count: runs.len(),
            runs,
            dim: plan.options.dim,
            n_samples: plan.n_samples,
            lambda: plan.theory.lambda,
            theory: plan.theory.clone(),
        })
    }
}

/// Per-point quantities shared by all seeds: sample size, penalty and the
/// asymptotic reference.
#[derive(Debug, Clone, PartialEq)]
pub struct McPlan {
    pub problem: ProblemSpec,
    pub options: McOptions,
    pub n_samples: usize,
    pub theory: RiskReport,
}

/// `N = round(P / gamma)`.
pub fn sample_count(dim: usize, gamma: f64) -> usize {
    libm::round(dim as f64 / gamma) as usize
}

impl McPlan {
    pub fn new(problem: &ProblemSpec, options: McOptions) -> Result<Self> {
        problem.validate()?;
        if options.dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        let theory = if options.whiten {
            let (spectrum, shift) = whiten_equivalent(&problem.spectrum, &problem.shift)?;
            let mut iso = problem.clone();
            iso.spectrum = spectrum;
            iso.shift = shift;
            asymptotic_risk(&iso)?
        } else {
            asymptotic_risk(problem)?
        };
        Ok(McPlan {
            problem: problem.clone(),
            options,
            n_samples: sample_count(options.dim, problem.gamma),
            theory,
        })
    }

    pub fn lambda(&self) -> f64 {
        match self.problem.lambda {
            LambdaPolicy::Fixed(l) => l,
            LambdaPolicy::Optimal => self.theory.lambda,
        }
    }
}

/// One Monte Carlo replicate: coefficients, data, and the exact conditional risk.
pub fn mc_seed(plan: &McPlan, seed: u64) -> Result<SeedRisk> {
    let run = || -> Result<SeedRisk> {
        let p = &plan.problem;
        let noise = p.noise_variance();
        let mut coeffs = build_coefficients(&p.spectrum, &p.shift, plan.options.dim, seed, p.signal)?;
        let mut data = sample_dataset(&p.spectrum, &coeffs.beta, noise, plan.n_samples, seed)?;
        if plan.options.whiten {
            data = data.whitened();
            coeffs = coeffs.whitened();
        }
        let (bias, variance) = conditional_risk(&data, &coeffs, plan.lambda(), noise)?;
        Ok(SeedRisk { seed, bias, variance, risk: bias + variance })
    };
    run().map_err(|e| Error::Seed { seed, source: Box::new(e) })
}

pub fn mc_risk(problem: &ProblemSpec, dim: usize, n_seeds: usize, base_seed: u64) -> Result<McSummary> {
    mc_risk_with(problem, McOptions::new(dim), n_seeds, base_seed)
}

/// Runs seeds `base_seed .. base_seed + n_seeds` one after another.
pub fn mc_risk_with(
    problem: &ProblemSpec,
    options: McOptions,
    n_seeds: usize,
    base_seed: u64,
) -> Result<McSummary> {
    if n_seeds < 2 {
        return Err(Error::invalid(format!("n_seeds must be >= 2, got {n_seeds}")));
    }
    let plan = McPlan::new(problem, options)?;
    let runs = (0..n_seeds as u64)
        .map(|i| mc_seed(&plan, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    McSummary::from_runs(runs, &plan)
}
