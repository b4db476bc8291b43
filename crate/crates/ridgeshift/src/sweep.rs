//! Figure-style experiments: gamma sweeps, the isotropic phase grid and
//! Monte Carlo comparisons.
//!
//! Grid points run on the current rayon pool; results are collected in
//! canonical order so the output does not depend on the schedule.

use rayon::prelude::*;
use ridgeshift_core::finite::mc::McPlan;
use ridgeshift_core::finite::{mc_seed, McOptions, McSummary, SeedRisk};
use ridgeshift_core::risk::{classify_regime, min_risk, REGIME_EPS};
use ridgeshift_core::{
    asymptotic_risk, risk_limits, Error, ProblemSpec, ProfileReport, Regime, Result, ShiftSpec, SpectralModel,
};

use crate::table::{Cell, Table};

/// One asymptotic evaluation inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub shift_index: usize,
    pub gamma: f64,
    pub shift: ShiftSpec,
    pub lambda: f64,
    pub bias: f64,
    pub variance: f64,
    pub risk: f64,
}

/// Evaluates every `(shift, gamma)` pair, shift-major. `template.gamma` and
/// `template.shift` are replaced; the lambda policy is applied per point.
pub fn gamma_sweep(template: &ProblemSpec, gammas: &[f64], shifts: &[ShiftSpec]) -> Result<Vec<RiskRow>> {
    if gammas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("gamma grid must be strictly increasing".into()));
    }
    let points: Vec<(usize, f64)> =
        (0..shifts.len()).flat_map(|s| gammas.iter().map(move |&g| (s, g))).collect();
    points
        .par_iter()
        .map(|&(s, g)| {
            let eval = || -> Result<RiskRow> {
                let p = template.with_shift(shifts[s].clone())?.with_gamma(g)?;
                let r = asymptotic_risk(&p)?;
                Ok(RiskRow {
                    shift_index: s,
                    gamma: g,
                    shift: shifts[s].clone(),
                    lambda: r.lambda,
                    bias: r.bias,
                    variance: r.variance,
                    risk: r.risk,
                })
            };
            eval().map_err(|e| e.at_gamma(g))
        })
        .collect()
}

/// Splits sweep rows back into one profile per shift.
pub fn profiles(rows: &[RiskRow], n_shifts: usize) -> Result<Vec<ProfileReport>> {
    (0..n_shifts)
        .map(|s| {
            let mine: Vec<&RiskRow> = rows.iter().filter(|r| r.shift_index == s).collect();
            ProfileReport::from_curve(
                mine.iter().map(|r| r.gamma).collect(),
                mine.iter().map(|r| r.risk).collect(),
                mine.iter().map(|r| r.lambda).collect(),
            )
        })
        .collect()
}

fn shift_columns(n_atoms: usize) -> Vec<String> {
    if n_atoms == 1 {
        return vec!["kappa".into(), "costheta".into()];
    }
    let mut cols: Vec<String> = (1..=n_atoms).map(|i| format!("kappa_{i}")).collect();
    cols.extend((1..=n_atoms).map(|i| format!("costheta_{i}")));
    cols
}

fn shift_cells(shift: &ShiftSpec) -> Vec<Cell> {
    let mut cells: Vec<Cell> = shift.atoms().iter().map(|a| a.kappa.into()).collect();
    cells.extend(shift.atoms().iter().map(|a| Cell::from(a.cos_theta)));
    cells
}

/// `gamma,kappa,costheta,lambda_used,B,V,R`, with per-atom shift columns for
/// multi-atom spectra and an optional leading `shift` index.
pub fn risk_table(rows: &[RiskRow], n_atoms: usize, with_index: bool) -> Table {
    let mut header: Vec<String> = Vec::new();
    if with_index {
        header.push("shift".into());
    }
    header.push("gamma".into());
    header.extend(shift_columns(n_atoms));
    header.extend(["lambda_used", "B", "V", "R"].map(String::from));
    let mut t = Table::new(header);
    for r in rows {
        let mut row: Vec<Cell> = Vec::new();
        if with_index {
            row.push(r.shift_index.into());
        }
        row.push(r.gamma.into());
        row.extend(shift_cells(&r.shift));
        row.extend([r.lambda, r.bias, r.variance, r.risk].map(Cell::from));
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub kappa: f64,
    pub cos_theta: f64,
    pub r0: f64,
    pub r_inf: f64,
    pub r_min: f64,
    pub regime: Regime,
    /// `kappa cos theta = 1/2` up to rounding.
    pub boundary: bool,
}

/// Isotropic minimum risk and regime over a `(kappa, cos theta)` grid, kappa-major.
pub fn phase_grid(kappas: &[f64], cosines: &[f64], signal: f64) -> Result<Vec<PhaseRow>> {
    let iso = SpectralModel::isotropic();
    let points: Vec<(f64, f64)> = kappas.iter().flat_map(|&k| cosines.iter().map(move |&c| (k, c))).collect();
    points
        .par_iter()
        .map(|&(k, c)| {
            let shift = ShiftSpec::uniform(&iso, k, c)?;
            let (r0, r_inf) = risk_limits(&iso, &shift, signal)?;
            Ok(PhaseRow {
                kappa: k,
                cos_theta: c,
                r0,
                r_inf,
                r_min: min_risk(k, c, signal),
                regime: classify_regime(k, c),
                boundary: (k * c - 0.5).abs() <= REGIME_EPS,
            })
        })
        .collect()
}

pub fn phase_table(rows: &[PhaseRow]) -> Table {
    let mut t = Table::new(["kappa", "costheta", "R0", "Rinf", "R_min", "regime", "boundary"]);
    for r in rows {
        t.push(vec![
            r.kappa.into(),
            r.cos_theta.into(),
            r.r0.into(),
            r.r_inf.into(),
            r.r_min.into(),
            r.regime.as_str().into(),
            Cell::Int(r.boundary as u64),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub gamma: f64,
    pub summary: McSummary,
}

impl McRow {
    /// `(mean R - theory R) / stderr R`.
    pub fn z(&self) -> f64 {
        self.summary.risk.z_score(self.summary.theory.risk)
    }
}

/// Monte Carlo against theory at each gamma. Every `(gamma, seed)` replicate
/// is an independent job; seeds are `base_seed .. base_seed + n_seeds`.
pub fn mc_compare(
    template: &ProblemSpec,
    gammas: &[f64],
    options: McOptions,
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<McRow>> {
    if n_seeds < 2 {
        return Err(Error::InvalidInput(format!("n_seeds must be >= 2, got {n_seeds}")));
    }
    let plans: Vec<McPlan> = gammas
        .par_iter()
        .map(|&g| {
            template
                .with_gamma(g)
                .and_then(|p| McPlan::new(&p, options))
                .map_err(|e| e.at_gamma(g))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..plans.len())
        .flat_map(|i| (0..n_seeds as u64).map(move |k| (i, base_seed.wrapping_add(k))))
        .collect();
    let runs: Vec<SeedRisk> = jobs
        .par_iter()
        .map(|&(i, seed)| mc_seed(&plans[i], seed).map_err(|e| e.at_gamma(gammas[i])))
        .collect::<Result<_>>()?;
    plans
        .iter()
        .zip(runs.chunks(n_seeds))
        .zip(gammas)
        .map(|((plan, chunk), &gamma)| {
            Ok(McRow { gamma, summary: McSummary::from_runs(chunk.to_vec(), plan)? })
        })
        .collect()
}

pub fn mc_table(rows: &[McRow], shift: &ShiftSpec) -> Table {
    let mut header: Vec<String> = vec!["gamma".into()];
    header.extend(shift_columns(shift.len()));
    header.extend(
        [
            "dim", "n_samples", "n_seeds", "lambda_used", "B_theory", "V_theory", "R_theory", "B_mean",
            "B_stderr", "V_mean", "V_stderr", "R_mean", "R_stderr", "z",
        ]
        .map(String::from),
    );
    let mut t = Table::new(header);
    for r in rows {
        let s = &r.summary;
        let mut row: Vec<Cell> = vec![r.gamma.into()];
        row.extend(shift_cells(shift));
        row.extend([s.dim.into(), s.n_samples.into(), s.count.into()]);
        row.extend(
            [
                s.lambda,
                s.theory.bias,
                s.theory.variance,
                s.theory.risk,
                s.bias.mean,
                s.bias.stderr,
                s.variance.mean,
                s.variance.stderr,
                s.risk.mean,
                s.risk.stderr,
                r.z(),
            ]
            .map(Cell::from),
        );
        t.push(row);
    }
    t
}

/// Isotropic equivalent of each shift after whitening.
pub fn whiten_table(spectrum: &SpectralModel, shifts: &[ShiftSpec]) -> Result<Table> {
    let mut t = Table::new(["shift", "kappa_eff", "costheta_eff", "regime"]);
    for (i, s) in shifts.iter().enumerate() {
        let (_, w) = ridgeshift_core::whiten_equivalent(spectrum, s)?;
        let w = w.atoms()[0];
        t.push(vec![
            i.into(),
            w.kappa.into(),
            w.cos_theta.into(),
            classify_regime(w.kappa, w.cos_theta).as_str().into(),
        ]);
    }
    Ok(t)
}
