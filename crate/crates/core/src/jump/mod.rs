//! Birth-death chains on ℕ: stationary measure, intrinsic metric `ρ`,
//! jump-size constant `K`, the Lyapunov condition `L_νW ≤ (−cρ² + b)W`
//! and convergence of `Σ μ(i) e^{δρ²(i,0)}`.

mod admissibility;
mod lyapunov;
mod metric;
mod series;

use thiserror::Error;

use crate::expr::{parse_with, EvalError, Expr, ParseError};

pub use admissibility::{delta_search, eta1, eta2, min_eta2_over_n, JumpAdmissibility};
pub use lyapunov::{fit_jump_lyapunov, generator_nu_apply, JumpFit, JumpFunction};
pub use metric::{carre_du_champ_rho, intrinsic_rho, jump_metric_k, KEstimate, Trend};
pub use series::{dirichlet_form, gaussian_series, series_rows, stationary_measure, GaussianSeries, SeriesRow, StationaryMeasure};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum JumpError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{which} rate at i = {i} must be positive (got {value})")]
    NonPositiveRate { which: &'static str, i: usize, value: f64 },
    #[error("{which} rate table has {len} entries; index {i} requested")]
    OutOfTable { which: &'static str, i: usize, len: usize },
    #[error("r_i = Π b/Π d does not sum: {0}")]
    NoStationaryMeasure(String),
    #[error("W = {value} < 1 at i = {i}")]
    WBelowOne { i: usize, value: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// A rate sequence `i ↦ q_i`.
#[derive(Clone, Debug, PartialEq)]
pub enum Rate {
    /// Expression in the variable `i`, optionally overridden for the first
    /// few indices (e.g. `b_0 = 1` when the formula vanishes at 0).
    Formula { expr: Expr, head: Vec<f64> },
    Table(Vec<f64>),
}

impl Rate {
    pub fn formula(text: &str) -> Result<Self, JumpError> {
        Ok(Rate::Formula {
            expr: parse_with(text, &["i"])?,
            head: Vec::new(),
        })
    }

    pub fn with_head(self, head: Vec<f64>) -> Self {
        match self {
            Rate::Formula { expr, .. } => Rate::Formula { expr, head },
            t => t,
        }
    }

    fn at(&self, which: &'static str, i: usize) -> Result<f64, JumpError> {
        match self {
            Rate::Formula { expr, head } => match head.get(i) {
                Some(v) => Ok(*v),
                None => Ok(expr.eval(&[i as f64])?),
            },
            Rate::Table(t) => t.get(i).copied().ok_or(JumpError::OutOfTable { which, i, len: t.len() }),
        }
    }
}

/// Birth rates `b_i > 0` and death rates `d_i` (`d_0 = 0`, `d_i > 0` for
/// `i ≥ 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct BirthDeathChain {
    pub birth: Rate,
    pub death: Rate,
}

impl BirthDeathChain {
    pub fn new(birth: Rate, death: Rate) -> Self {
        BirthDeathChain { birth, death }
    }

    /// `b_i = d_i = i^a log^α(i+1)` for `i ≥ 1`, `b_0 = 1`.
    pub fn log_family(a: f64, alpha: f64) -> Self {
        let text = format!("i^{a} * log(i + 1)^{alpha}");
        let rate = Rate::formula(&text).expect("static formula parses");
        BirthDeathChain {
            birth: rate.clone().with_head(vec![1.0]),
            death: rate.with_head(vec![0.0]),
        }
    }

    pub fn birth(&self, i: usize) -> Result<f64, JumpError> {
        let v = self.birth.at("birth", i)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(JumpError::NonPositiveRate { which: "birth", i, value: v });
        }
        Ok(v)
    }

    pub fn death(&self, i: usize) -> Result<f64, JumpError> {
        if i == 0 {
            return Ok(0.0);
        }
        let v = self.death.at("death", i)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(JumpError::NonPositiveRate { which: "death", i, value: v });
        }
        Ok(v)
    }

    /// Rates, `ln r_i` and `ρ(i, 0)` for `0 ≤ i ≤ i_max + 1`.
    pub fn tabulate(&self, i_max: usize) -> Result<ChainTable, JumpError> {
        if i_max == 0 {
            return Err(JumpError::Invalid("iMax must be at least 1".into()));
        }
        let n = i_max + 2;
        let mut b = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            b.push(self.birth(i)?);
            d.push(self.death(i)?);
        }
        let mut ln_r = Vec::with_capacity(n);
        ln_r.push(0.0);
        for i in 1..n {
            ln_r.push(ln_r[i - 1] + b[i - 1].ln() - d[i].ln());
        }
        let rho = metric::quantised_prefix(&b);
        Ok(ChainTable { b, d, ln_r, rho, i_max })
    }
}

/// Tabulated chain on `0..=i_max + 1`.
#[derive(Clone, Debug)]
pub struct ChainTable {
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    /// `ln r_i`, `r_0 = 1`, `r_i = Π_{k<i} b_k / Π_{k=1}^{i} d_k`.
    pub ln_r: Vec<f64>,
    /// `ρ(i, 0) = Σ_{k<i} b_k^{−1/2}`.
    pub rho: Vec<f64>,
    pub i_max: usize,
}

impl ChainTable {
    pub fn rho(&self, i: usize) -> f64 {
        self.rho[i]
    }

    /// `ρ(i, j) = |ρ(j, 0) − ρ(i, 0)|`.
    pub fn rho_between(&self, i: usize, j: usize) -> f64 {
        (self.rho[j] - self.rho[i]).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_and_table() {
        let ch = BirthDeathChain::log_family(2.0, 1.0);
        assert_eq!(ch.birth(0).unwrap(), 1.0);
        assert_eq!(ch.death(0).unwrap(), 0.0);
        assert!((ch.birth(4).unwrap() - 16.0 * 5f64.ln()).abs() < 1e-12);
        let t = ch.tabulate(10).unwrap();
        assert!((t.ln_r[1].exp() - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!((t.ln_r[2].exp() - 1.0 / (4.0 * 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn bad_rates() {
        let ch = BirthDeathChain::new(Rate::formula("i").unwrap(), Rate::formula("1").unwrap());
        assert!(matches!(ch.birth(0), Err(JumpError::NonPositiveRate { which: "birth", .. })));
        let ch = BirthDeathChain::new(Rate::Table(vec![1.0, 1.0]), Rate::Table(vec![0.0, 1.0]));
        assert!(matches!(ch.tabulate(5), Err(JumpError::OutOfTable { .. })));
    }
}
