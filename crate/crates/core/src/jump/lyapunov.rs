use serde::{Deserialize, Serialize};

use super::metric::log_log_slope;
use super::{ChainTable, JumpError};
use crate::expr::{parse_with, Expr};

/// A test function on ℕ, given either directly or through its logarithm
/// (the latter keeps `W = 2^i` usable far beyond `f64` range).
#[derive(Clone, Debug, PartialEq)]
pub enum JumpFunction {
    Value(Expr),
    Log(Expr),
}

impl JumpFunction {
    pub fn value(text: &str) -> Result<Self, JumpError> {
        Ok(JumpFunction::Value(parse_with(text, &["i"])?))
    }

    pub fn log(text: &str) -> Result<Self, JumpError> {
        Ok(JumpFunction::Log(parse_with(text, &["i"])?))
    }

    pub fn at(&self, i: usize) -> Result<f64, JumpError> {
        Ok(match self {
            JumpFunction::Value(e) => e.eval(&[i as f64])?,
            JumpFunction::Log(e) => e.eval(&[i as f64])?.exp(),
        })
    }

    fn check(&self, i: usize) -> Result<(), JumpError> {
        let ok = match self {
            JumpFunction::Value(e) => {
                let v = e.eval(&[i as f64])?;
                if v < 1.0 {
                    return Err(JumpError::WBelowOne { i, value: v });
                }
                v.is_finite()
            }
            JumpFunction::Log(e) => {
                let l = e.eval(&[i as f64])?;
                if l < 0.0 {
                    return Err(JumpError::WBelowOne { i, value: l.exp() });
                }
                l.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(JumpError::Invalid(format!("W is not finite at i = {i}")))
        }
    }

    /// `W(j)/W(i) − 1`.
    fn rel_step(&self, i: usize, j: usize) -> Result<f64, JumpError> {
        Ok(match self {
            JumpFunction::Value(e) => {
                let wi = e.eval(&[i as f64])?;
                (e.eval(&[j as f64])? - wi) / wi
            }
            JumpFunction::Log(e) => (e.eval(&[j as f64])? - e.eval(&[i as f64])?).exp_m1(),
        })
    }
}

/// `L_νW(i) = b_i(W(i+1) − W(i)) + d_i(W(i−1) − W(i))`.
pub fn generator_nu_apply(t: &ChainTable, w: &JumpFunction, i: usize) -> Result<f64, JumpError> {
    if i > t.i_max {
        return Err(JumpError::Invalid(format!("i = {i} beyond the tabulated range {}", t.i_max)));
    }
    let wi = w.at(i)?;
    let mut v = t.b[i] * (w.at(i + 1)? - wi);
    if i > 0 {
        v += t.d[i] * (w.at(i - 1)? - wi);
    }
    Ok(v)
}

/// `L_νW(i) / W(i)`, computed from ratios.
pub(crate) fn normalised_generator(t: &ChainTable, w: &JumpFunction, i: usize) -> Result<f64, JumpError> {
    let mut v = t.b[i] * w.rel_step(i, i + 1)?;
    if i > 0 {
        v += t.d[i] * w.rel_step(i, i - 1)?;
    }
    Ok(v)
}

/// Result of fitting `L_νW ≤ (−cρ² + b)W` on an index range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpFit {
    pub c: f64,
    pub b: f64,
    /// Infimum of the ratio over the tail before the trend rule is applied.
    pub c_raw: f64,
    /// Slope of `ln q_i` against `ln ln i` over the tail; `q ~ (log i)^p`.
    pub trend_exponent: f64,
    pub decaying: bool,
    pub passed: bool,
    pub range: (usize, usize),
    /// `(i, q_i)` with `q_i = (−L_νW/W)(i)/ρ²(i,0)`, about 20 points per decade.
    pub profile: Vec<(usize, f64)>,
}

/// Ratio exponents below this count as decay to zero.
const DECAY_EXPONENT: f64 = -0.25;

/// `c` is the infimum of `q_i` over the last decade of the range, set to
/// zero when `q` decays like a negative power of `log i` there; `b` is the
/// supremum of `L_νW/W + cρ²` over `0..=hi`.
pub fn fit_jump_lyapunov(t: &ChainTable, w: &JumpFunction, lo: usize, hi: usize) -> Result<JumpFit, JumpError> {
    if lo < 1 || lo >= hi || hi > t.i_max {
        return Err(JumpError::Invalid(format!(
            "range [{lo}, {hi}] must satisfy 1 ≤ lo < hi ≤ {}",
            t.i_max
        )));
    }
    let tail_from = (hi / 10).max(lo);
    let mut g = Vec::with_capacity(hi + 1);
    for i in 0..=hi {
        w.check(i)?;
        g.push(normalised_generator(t, w, i)?);
    }
    let q = |i: usize| -g[i] / (t.rho[i] * t.rho[i]);

    let c_raw = (tail_from..=hi).map(q).fold(f64::INFINITY, f64::min);
    let trend_exponent = if c_raw > 0.0 {
        log_log_slope((tail_from..=hi).map(|i| ((i as f64).ln(), q(i))))
    } else {
        f64::NAN
    };
    let decaying = !(trend_exponent >= DECAY_EXPONENT);
    let c = if decaying || !(c_raw > 0.0) { 0.0 } else { c_raw };
    let b = (0..=hi)
        .map(|i| g[i] + c * t.rho[i] * t.rho[i])
        .fold(0.0, f64::max);

    let mut profile = Vec::new();
    let mut next = lo as f64;
    for i in lo..=hi {
        if i as f64 >= next || i == hi {
            profile.push((i, q(i)));
            next = (next * 10f64.powf(0.05)).max(i as f64 + 1.0);
        }
    }
    Ok(JumpFit {
        c,
        b,
        c_raw,
        trend_exponent,
        decaying,
        passed: c > 0.0,
        range: (lo, hi),
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{BirthDeathChain, Rate};
    use super::*;

    #[test]
    fn generator_examples() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(100).unwrap();
        let one = JumpFunction::value("3").unwrap();
        assert_eq!(generator_nu_apply(&t, &one, 7).unwrap(), 0.0);
        let w = JumpFunction::value("1 + sqrt(i)").unwrap();
        let v = generator_nu_apply(&t, &w, 4).unwrap();
        let exact = 16.0 * 5f64.ln() * (5f64.sqrt() + 3f64.sqrt() - 4.0);
        assert!((v - exact).abs() < 1e-12, "{v}");
        assert_eq!(generator_nu_apply(&t, &w, 0).unwrap(), 1.0);
        let r = normalised_generator(&t, &w, 4).unwrap();
        assert!((r - exact / 3.0).abs() < 1e-12);
    }

    #[test]
    fn log_form_matches_value_form() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(100).unwrap();
        let a = JumpFunction::value("2^i").unwrap();
        let b = JumpFunction::log("i*log(2)").unwrap();
        for i in [0, 1, 5, 40] {
            let x = normalised_generator(&t, &a, i).unwrap();
            let y = normalised_generator(&t, &b, i).unwrap();
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn log_chain_passes() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(100_000).unwrap();
        let w = JumpFunction::value("1 + sqrt(i)").unwrap();
        let fit = fit_jump_lyapunov(&t, &w, 10, 100_000).unwrap();
        assert!(fit.passed, "{fit:?}");
        assert!(fit.c > 0.04 && fit.c < 1.0 / 16.0, "{}", fit.c);
        assert!(fit.trend_exponent > 0.0);
    }

    #[test]
    fn half_log_chain_fails() {
        let t = BirthDeathChain::log_family(2.0, 0.5).tabulate(100_000).unwrap();
        let w = JumpFunction::value("1 + sqrt(i)").unwrap();
        let fit = fit_jump_lyapunov(&t, &w, 10, 100_000).unwrap();
        assert!(!fit.passed);
        assert!(fit.decaying);
        assert!(fit.c_raw > 0.0 && fit.trend_exponent < -0.5, "{fit:?}");
    }

    #[test]
    fn exponential_w_passes_on_fast_chain() {
        let ch = BirthDeathChain::new(
            Rate::formula("(i+1)^0.5").unwrap(),
            Rate::formula("i*(i+1)^0.5").unwrap(),
        );
        let t = ch.tabulate(5000).unwrap();
        let w = JumpFunction::log("i*log(2)").unwrap();
        let fit = fit_jump_lyapunov(&t, &w, 10, 5000).unwrap();
        assert!(fit.passed, "{fit:?}");
        assert!((fit.c - 9.0 / 32.0).abs() < 0.05, "{}", fit.c);
    }

    #[test]
    fn w_below_one() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(100).unwrap();
        let w = JumpFunction::value("sqrt(i)").unwrap();
        assert!(matches!(fit_jump_lyapunov(&t, &w, 1, 50), Err(JumpError::WBelowOne { i: 0, .. })));
    }
}
