//! Prediction risk of ridge regression under concept shift.
//!
//! The crate has two halves. The asymptotic half ([`resolvent`], [`risk`])
//! evaluates the exact risk in the proportional limit `P, N -> inf`,
//! `P/N -> gamma`, for a covariance with a finite number of spectral atoms.
//! The finite half ([`finite`]) samples Gaussian data at finite `(P, N)`,
//! fits ridge, and evaluates the exact conditional risk so the limit can be
//! checked by Monte Carlo.
//!
//! Everything here is `no_std` with `alloc`. IO, parallel sweeps and the
//! command line live in the `ridgeshift` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod finite;
pub mod golden;
pub mod resolvent;
pub mod risk;
pub mod spectrum;

pub use error::{Error, Result};
pub use resolvent::{closed_form_nu_iso, solve_state, SolverOptions, SolverState};
pub use risk::{
    asymptotic_risk, classify_regime, min_risk, min_risk_scan, optimal_lambda,
    optimal_lambda_numeric, profile, risk_limits, ProfileReport, ProfileShape, Regime,
    RiskReport,
};
pub use spectrum::{
    shift_from_robust_fraction, whiten_equivalent, Atom, AtomShift, LambdaPolicy, ProblemSpec,
    ShiftSpec, SpectralModel,
};
