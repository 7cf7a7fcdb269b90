//! Independent numerical ground truth.
//!
//! Everything here is computed without reference to the certificate
//! formulas: adaptive quadrature (1-D, and polar iterated 1-D for m = 2),
//! truncation sequences for divergence detection, log-space series
//! summation, random-walk Metropolis for m ≥ 3, and finite-difference audits
//! of the symbolic layer.

mod audit;
mod mc;
mod quad;
mod series;
mod tail;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;

pub use audit::{finite_diff_audit, random_smooth_expression, AuditReport, CoordinateAudit};
pub use mc::{mc_expectation, mc_expectation_with, McOptions};
pub use quad::{
    adaptive_simpson, integrate_1d, integrate_disk, log_integral_1d, log_integral_disk, LogQuad,
    Quadrature,
};
pub use series::{series_sum, SeriesOptions, SeriesSummary};
pub use tail::{
    expectation, gaussian_tail_integral, truncation_verdict, weighted_tail_integral, TailOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Finite,
    Divergent,
    Inconclusive,
}

/// Supporting data behind a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    None,
    /// `(T, value)` per truncation radius; `ln_value` kept for overflow.
    Truncation { t: Vec<f64>, value: Vec<f64>, ln_value: Vec<f64> },
    /// `(n, S_n)` checkpoints of a partial-sum sequence.
    PartialSums {
        n: Vec<usize>,
        sum: Vec<f64>,
        tail_slope: f64,
        decade_ratio: f64,
        tail_correction: f64,
    },
    /// Metropolis chain summary.
    Samples {
        steps: usize,
        batches: usize,
        acceptance: f64,
        step_size: f64,
        acceptance_flagged: bool,
    },
    Quadrature { evaluations: usize, converged: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// NaN when divergent.
    pub value: f64,
    pub error_estimate: f64,
    pub verdict: Verdict,
    pub evidence: Evidence,
}

impl OracleReport {
    pub fn is_finite(&self) -> bool {
        self.verdict == Verdict::Finite
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("normalisation ∫e^(-V) is not finite: {0}")]
    NotProbability(String),
    #[error("quadrature supports dimensions 1 and 2 (got {0}); use mc_expectation")]
    UnsupportedDimension(usize),
    #[error("invalid oracle input: {0}")]
    Invalid(String),
}
