use std::f64::consts::PI;

use super::{Evidence, OracleError, OracleReport, Verdict};
use crate::expr::{EvalError, Expr};

const PANELS: usize = 16;
const MAX_DEPTH: u32 = 40;

/// Result of adaptive Simpson integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    /// False when some subinterval hit the depth limit before meeting its
    /// share of the tolerance.
    pub converged: bool,
}

struct Acc {
    value: f64,
    comp: f64,
    error: f64,
    evaluations: usize,
    converged: bool,
}

impl Acc {
    // Neumaier summation keeps thousands of small panel values exact enough.
    fn push(&mut self, v: f64) {
        let t = self.value + v;
        if self.value.abs() >= v.abs() {
            self.comp += (self.value - t) + v;
        } else {
            self.comp += (v - t) + self.value;
        }
        self.value = t;
    }
}

/// Adaptive Simpson with Richardson correction on `[a, b]`, pre-split into
/// fixed panels so narrow peaks between the first sample points are seen.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature, EvalError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    let mut acc = Acc {
        value: 0.0,
        comp: 0.0,
        error: 0.0,
        evaluations: 0,
        converged: true,
    };
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        });
    }
    let h = (b - a) / PANELS as f64;
    let panel_tol = tol / PANELS as f64;
    let mut fa = f(a)?;
    acc.evaluations += 1;
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == PANELS { b } else { a + (k + 1) as f64 * h };
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        let fb = f(hi)?;
        acc.evaluations += 2;
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        refine(&mut f, lo, fa, mid, fm, hi, fb, whole, panel_tol, MAX_DEPTH, &mut acc)?;
        fa = fb;
    }
    Ok(Quadrature {
        value: acc.value + acc.comp,
        error: acc.error,
        evaluations: acc.evaluations,
        converged: acc.converged,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &mut F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    acc: &mut Acc,
) -> Result<(), EvalError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    acc.evaluations += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let roundoff = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if delta.abs() <= 15.0 * tol || delta.abs() <= roundoff || depth == 0 {
        if depth == 0 && delta.abs() > 15.0 * tol && delta.abs() > roundoff {
            acc.converged = false;
        }
        acc.push(left + right + delta / 15.0);
        acc.error += delta.abs() / 15.0;
        return Ok(());
    }
    refine(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, acc)?;
    refine(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, acc)
}

/// `∫_lo^hi f(x1) dx1` for an expression in one variable.
pub fn integrate_1d(f: &Expr, lo: f64, hi: f64, tol: f64) -> Result<OracleReport, OracleError> {
    let q = adaptive_simpson(|x| f.eval(&[x]), lo, hi, tol)?;
    if !q.converged {
        return Err(OracleError::Invalid(format!(
            "adaptive refinement hit depth limit (value {}, error {})",
            q.value, q.error
        )));
    }
    Ok(OracleReport {
        value: q.value,
        error_estimate: q.error,
        verdict: Verdict::Finite,
        evidence: Evidence::Quadrature {
            evaluations: q.evaluations,
            converged: q.converged,
        },
    })
}

/// Integral of `exp(φ)` carried as its logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogQuad {
    pub ln_value: f64,
    pub rel_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const SCAN: usize = 2048;

/// `ln ∫_lo^hi exp(φ(x)) dx`, integrating `exp(φ − max φ)` so that neither
/// huge nor tiny integrands leave floating-point range.
pub fn log_integral_1d<F>(phi: F, lo: f64, hi: f64, rel_tol: f64) -> Result<LogQuad, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let h = (hi - lo) / SCAN as f64;
    let mut samples = Vec::with_capacity(SCAN + 1);
    for k in 0..=SCAN {
        let x = if k == SCAN { hi } else { lo + k as f64 * h };
        samples.push(phi(x)?);
    }
    let shift = samples.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Ok(LogQuad {
            ln_value: f64::NEG_INFINITY,
            rel_error: 0.0,
            evaluations: SCAN + 1,
            converged: true,
        });
    }
    // composite Simpson on the scan gives the tolerance scale
    let coarse: f64 = samples
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = if k == 0 || k == SCAN { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            w * (v - shift).exp()
        })
        .sum::<f64>()
        * h
        / 3.0;
    let scale = coarse.max(h * 1e-3);
    let q = adaptive_simpson(|x| Ok((phi(x)? - shift).exp()), lo, hi, rel_tol * scale)?;
    Ok(LogQuad {
        ln_value: shift + q.value.ln(),
        rel_error: q.error / q.value,
        evaluations: q.evaluations + SCAN + 1,
        converged: q.converged,
    })
}

/// `ln ∫_{|x−c|≤R} exp(φ(x)) dx` in two dimensions, as iterated 1-D
/// adaptive Simpson in polar coordinates about `c`.
pub fn log_integral_disk<F>(phi: F, center: [f64; 2], radius: f64, rel_tol: f64) -> Result<LogQuad, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let at = |r: f64, t: f64| phi(&[center[0] + r * t.cos(), center[1] + r * t.sin()]);
    const NR: usize = 256;
    const NT: usize = 256;
    let mut shift = f64::NEG_INFINITY;
    let mut coarse = 0.0;
    let mut grid = vec![vec![0.0; NT]; NR + 1];
    for (i, row) in grid.iter_mut().enumerate() {
        let r = radius * i as f64 / NR as f64;
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = at(r, 2.0 * PI * j as f64 / NT as f64)?;
            if cell.is_finite() {
                shift = shift.max(*cell);
            }
        }
    }
    if shift == f64::NEG_INFINITY {
        return Ok(LogQuad {
            ln_value: f64::NEG_INFINITY,
            rel_error: 0.0,
            evaluations: (NR + 1) * NT,
            converged: true,
        });
    }
    for (i, row) in grid.iter().enumerate() {
        let r = radius * i as f64 / NR as f64;
        let ring: f64 = row.iter().map(|v| (v - shift).exp()).sum::<f64>() * 2.0 * PI / NT as f64;
        let w = if i == 0 || i == NR { 0.5 } else { 1.0 };
        coarse += w * ring * r * radius / NR as f64;
    }
    let scale = coarse.max(1e-300);
    let q = integrate_disk(|p| Ok((phi(p)? - shift).exp()), center, radius, rel_tol * scale)?;
    Ok(LogQuad {
        ln_value: shift + q.value.ln(),
        rel_error: q.error / q.value,
        evaluations: q.evaluations + (NR + 1) * NT,
        converged: q.converged,
    })
}

/// `∫_{|x−c|≤R} g(x) dx` in two dimensions, iterated adaptive Simpson over
/// `θ` (inner) and `r` (outer).
pub fn integrate_disk<F>(g: F, center: [f64; 2], radius: f64, tol: f64) -> Result<Quadrature, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let inner_tol = tol / (radius * radius).max(1e-300);
    let mut evaluations = 0;
    let mut converged = true;
    let mut ring = |r: f64| -> Result<f64, EvalError> {
        if r == 0.0 {
            return Ok(0.0);
        }
        let q = adaptive_simpson(
            |t| g(&[center[0] + r * t.cos(), center[1] + r * t.sin()]),
            0.0,
            2.0 * PI,
            inner_tol,
        )?;
        evaluations += q.evaluations;
        converged &= q.converged;
        Ok(q.value * r)
    };
    let q = adaptive_simpson(&mut ring, 0.0, radius, 0.5 * tol)?;
    Ok(Quadrature {
        value: q.value,
        error: q.error,
        evaluations: evaluations + q.evaluations,
        converged: converged && q.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn gaussian_over_wide_interval() {
        let f = parse("exp(-x1^2)", 1).unwrap();
        let r = integrate_1d(&f, -10.0, 10.0, 1e-12).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn trivial_integrals() {
        let one = parse("1", 1).unwrap();
        assert_eq!(integrate_1d(&one, 0.0, 1.0, 1e-12).unwrap().value, 1.0);
        let x = parse("x1", 1).unwrap();
        assert!(integrate_1d(&x, -1.0, 1.0, 1e-12).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn log_integral_handles_huge_values() {
        // ∫_0^1 e^{1000 + x} dx = e^1000 (e − 1)
        let q = log_integral_1d(|x| Ok(1000.0 + x), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.ln_value - (1000.0 + (std::f64::consts::E - 1.0).ln())).abs() < 1e-10);
    }

    #[test]
    fn disk_integral_of_gaussian() {
        // ∫_{|x|≤R} e^{-|x|²} = π(1 − e^{-R²})
        let q = log_integral_disk(|p| Ok(-(p[0] * p[0] + p[1] * p[1])), [0.0, 0.0], 3.0, 1e-10).unwrap();
        let exact = PI * (1.0 - (-9.0f64).exp());
        assert!((q.ln_value.exp() - exact).abs() < 1e-8, "{}", q.ln_value.exp());
    }
}
