//! Finite-size Monte Carlo oracle for the asymptotic risk.

pub mod linalg;
pub mod mc;
pub mod rng;
pub mod sample;

pub use mc::{mc_risk, mc_risk_with, mc_seed, McOptions, McSummary, MeanStderr, SeedRisk};
pub use sample::{
    allocate_dims, build_coefficients, conditional_risk, empirical_risk_estimate, ridge_fit,
    sample_dataset, CoefficientPair, Dataset,
};
