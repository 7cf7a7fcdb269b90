use serde::{Deserialize, Serialize};

use super::quad::{adaptive_simpson, integrate_disk, log_integral_1d, log_integral_disk};
use super::{Evidence, OracleError, OracleReport, Verdict};
use crate::expr::{EvalError, Expr};

/// Truncation schedule for integrals over ℝ^m, m ∈ {1, 2}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    /// Increasing truncation radii `T` around `x0`.
    pub t_sequence: Vec<f64>,
    /// While the verdict is inconclusive, keep doubling the last radius up
    /// to this bound.
    pub extend_to: f64,
    /// Relative Cauchy tolerance between the last two truncations; also
    /// the relative quadrature tolerance.
    pub rel_tol: f64,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            t_sequence: vec![5.0, 10.0, 20.0, 40.0],
            extend_to: 640.0,
            rel_tol: 1e-10,
        }
    }
}

impl TailOptions {
    pub fn with_sequence(t: impl Into<Vec<f64>>) -> Self {
        let t_sequence = t.into();
        let last = t_sequence.last().copied().unwrap_or(40.0);
        TailOptions {
            t_sequence,
            extend_to: last,
            ..Default::default()
        }
    }
}

const DIVERGENCE_LEVEL: f64 = 1e9;

/// Verdict from a truncation sequence given as logarithms.
///
/// Divergent: the last value exceeds 10⁹ and each of the last three steps
/// grew at least tenfold. Finite: the last two values agree to `rel_tol`
/// and the integrand is not increasing outward at the last radius.
pub fn truncation_verdict(ln_values: &[f64], rel_tol: f64, outward_increasing: bool) -> Verdict {
    let n = ln_values.len();
    if n >= 4 {
        let last = ln_values[n - 1];
        let grew = (n - 3..n).all(|k| ln_values[k] - ln_values[k - 1] >= 10f64.ln());
        if last > DIVERGENCE_LEVEL.ln() && grew {
            return Verdict::Divergent;
        }
    }
    if n >= 2 && !outward_increasing {
        let d = ln_values[n - 1] - ln_values[n - 2];
        if d.is_finite() && d.exp_m1().abs() <= rel_tol {
            return Verdict::Finite;
        }
        if ln_values[n - 1] == f64::NEG_INFINITY && ln_values[n - 2] == f64::NEG_INFINITY {
            return Verdict::Finite;
        }
    }
    Verdict::Inconclusive
}

type Field<'a> = &'a dyn Fn(&[f64]) -> Result<f64, EvalError>;

/// `∫ e^{δ|x−x0|²} dμ` for `μ ∝ e^{−V}`, reported per truncation radius.
pub fn gaussian_tail_integral(
    v: &Expr,
    delta: f64,
    x0: &[f64],
    opts: &TailOptions,
) -> Result<OracleReport, OracleError> {
    weighted_tail_integral(v, delta, x0, None, opts)
}

/// As [`gaussian_tail_integral`] with an extra weight `e^{lw(x)}` in the
/// numerator (e.g. `lw = ln λ_max`).
pub fn weighted_tail_integral(
    v: &Expr,
    delta: f64,
    x0: &[f64],
    log_weight: Option<Field<'_>>,
    opts: &TailOptions,
) -> Result<OracleReport, OracleError> {
    let m = x0.len();
    if m == 0 || m > 2 {
        return Err(OracleError::UnsupportedDimension(m));
    }
    if opts.t_sequence.is_empty() || opts.t_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OracleError::Invalid("truncation radii must be increasing".into()));
    }
    let d2 = |x: &[f64]| -> f64 { x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum() };
    let phi = |x: &[f64]| -> Result<f64, EvalError> {
        let mut p = delta * d2(x) - v.eval(x)?;
        if let Some(lw) = log_weight {
            p += lw(x)?;
        }
        Ok(p)
    };
    let neg_v = |x: &[f64]| -> Result<f64, EvalError> { Ok(-v.eval(x)?) };
    let ln_ball = |f: &dyn Fn(&[f64]) -> Result<f64, EvalError>, t: f64| -> Result<f64, EvalError> {
        if m == 1 {
            Ok(log_integral_1d(|x| f(&[x]), x0[0] - t, x0[0] + t, opts.rel_tol)?.ln_value)
        } else {
            Ok(log_integral_disk(f, [x0[0], x0[1]], t, opts.rel_tol)?.ln_value)
        }
    };

    let mut ts = opts.t_sequence.clone();
    let mut ln_i = Vec::new();
    for &t in &ts {
        ln_i.push(ln_ball(&phi, t)?);
    }
    loop {
        let t_last = *ts.last().unwrap();
        let ln_z = normalisation(&ln_ball, &neg_v, t_last, opts.rel_tol)?;
        let ln_vals: Vec<f64> = ln_i.iter().map(|l| l - ln_z).collect();
        let outward = increasing_outward(&phi, x0, t_last)?;
        let verdict = truncation_verdict(&ln_vals, opts.rel_tol, outward);
        if verdict == Verdict::Inconclusive && 2.0 * t_last <= opts.extend_to {
            ts.push(2.0 * t_last);
            ln_i.push(ln_ball(&phi, 2.0 * t_last)?);
            continue;
        }
        let values: Vec<f64> = ln_vals.iter().map(|l| l.exp()).collect();
        let n = values.len();
        let (value, err) = match verdict {
            Verdict::Divergent => (f64::NAN, f64::INFINITY),
            _ if n >= 2 => (values[n - 1], (values[n - 1] - values[n - 2]).abs() + opts.rel_tol * values[n - 1]),
            _ => (values[n - 1], f64::INFINITY),
        };
        return Ok(OracleReport {
            value,
            error_estimate: err,
            verdict,
            evidence: Evidence::Truncation {
                t: ts,
                value: values,
                ln_value: ln_vals,
            },
        });
    }
}

fn normalisation(
    ln_ball: &dyn Fn(&dyn Fn(&[f64]) -> Result<f64, EvalError>, f64) -> Result<f64, EvalError>,
    neg_v: &dyn Fn(&[f64]) -> Result<f64, EvalError>,
    t: f64,
    rel_tol: f64,
) -> Result<f64, OracleError> {
    let outer = ln_ball(neg_v, t)?;
    let inner = ln_ball(neg_v, 0.5 * t)?;
    if !outer.is_finite() {
        return Err(OracleError::NotProbability(format!("ln Z = {outer} at T = {t}")));
    }
    // the mass must have settled between T/2 and T
    if (outer - inner).exp_m1().abs() > rel_tol.max(1e-8) {
        return Err(OracleError::NotProbability(format!(
            "∫e^(-V) still changing between T = {} and T = {t} (ln ratio {})",
            0.5 * t,
            outer - inner
        )));
    }
    Ok(outer)
}

fn increasing_outward(
    phi: &dyn Fn(&[f64]) -> Result<f64, EvalError>,
    x0: &[f64],
    t: f64,
) -> Result<bool, EvalError> {
    let dirs: Vec<Vec<f64>> = if x0.len() == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        (0..64)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 64.0;
                vec![a.cos(), a.sin()]
            })
            .collect()
    };
    for u in dirs {
        let at = |r: f64| -> Vec<f64> { x0.iter().zip(&u).map(|(c, d)| c + r * d).collect() };
        let outer = phi(&at(t))?;
        let inner = phi(&at(0.99 * t))?;
        if outer > inner && outer.is_finite() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// `∫ f dμ` for `μ ∝ e^{−V}` (f may change sign), by truncation.
pub fn expectation(
    v: &Expr,
    f: Field<'_>,
    x0: &[f64],
    opts: &TailOptions,
) -> Result<OracleReport, OracleError> {
    let m = x0.len();
    if m == 0 || m > 2 {
        return Err(OracleError::UnsupportedDimension(m));
    }
    let mut ts = opts.t_sequence.clone();
    loop {
        let t_max = *ts.last().unwrap();
        let shift = min_potential(v, x0, t_max)?;
        let weight = |x: &[f64]| -> Result<f64, EvalError> { Ok((shift - v.eval(x)?).exp()) };
        let ball = |g: &dyn Fn(&[f64]) -> Result<f64, EvalError>, t: f64, tol: f64| -> Result<f64, EvalError> {
            if m == 1 {
                Ok(adaptive_simpson(|x| g(&[x]), x0[0] - t, x0[0] + t, tol)?.value)
            } else {
                Ok(integrate_disk(g, [x0[0], x0[1]], t, tol)?.value)
            }
        };
        let z_rough = ball(&weight, t_max, 1e-6)?;
        let z = ball(&weight, t_max, opts.rel_tol * z_rough)?;
        if !(z.is_finite() && z > 0.0) {
            return Err(OracleError::NotProbability(format!("Z = {z}")));
        }
        let integrand = |x: &[f64]| -> Result<f64, EvalError> {
            let w = weight(x)?;
            if w == 0.0 {
                return Ok(0.0);
            }
            Ok(f(x)? * w)
        };
        let mut values = Vec::with_capacity(ts.len());
        for &t in &ts {
            values.push(ball(&integrand, t, opts.rel_tol * z)? / z);
        }
        let n = values.len();
        let settled = n >= 2 && (values[n - 1] - values[n - 2]).abs() <= opts.rel_tol * values[n - 1].abs().max(1.0);
        if !settled && 2.0 * t_max <= opts.extend_to {
            ts.push(2.0 * t_max);
            continue;
        }
        let err = if n >= 2 { (values[n - 1] - values[n - 2]).abs() } else { f64::INFINITY };
        let ln_value = values.iter().map(|x| x.abs().ln()).collect();
        return Ok(OracleReport {
            value: values[n - 1],
            error_estimate: err + opts.rel_tol * values[n - 1].abs(),
            verdict: if settled { Verdict::Finite } else { Verdict::Inconclusive },
            evidence: Evidence::Truncation {
                t: ts,
                value: values,
                ln_value,
            },
        });
    }
}

fn min_potential(v: &Expr, x0: &[f64], t: f64) -> Result<f64, EvalError> {
    let mut best = f64::INFINITY;
    const K: usize = 400;
    if x0.len() == 1 {
        for k in 0..=K {
            let x = x0[0] - t + 2.0 * t * k as f64 / K as f64;
            best = best.min(v.eval(&[x])?);
        }
    } else {
        for i in 0..=K / 4 {
            for j in 0..=K / 4 {
                let x = x0[0] - t + 2.0 * t * i as f64 / (K / 4) as f64;
                let y = x0[1] - t + 2.0 * t * j as f64 / (K / 4) as f64;
                best = best.min(v.eval(&[x, y])?);
            }
        }
    }
    Ok(best)
}
