use serde::{Deserialize, Serialize};

use super::JumpError;

/// Outcome of the `(δ, N)` admissibility search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpAdmissibility {
    pub c: f64,
    pub k: f64,
    pub delta_star: f64,
    pub n_star: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// `η₁ + 2η₂` at `(δ*, N*)`.
    pub objective: f64,
    /// Time horizon `t = 2/δ*`.
    pub t: f64,
}

/// `η₁ = δ²e^{δK}/(2c)`.
pub fn eta1(delta: f64, c: f64, k: f64) -> f64 {
    delta * delta * (delta * k).exp() / (2.0 * c)
}

fn ln_eta2(delta: f64, n: f64, c: f64, k: f64) -> f64 {
    18f64.ln() + delta * (2.0 * n + 3.0 * k) - 2.0 * n.ln() - c.ln()
}

/// `η₂ = 18e^{δ(2N+3K)}/(N²c)`.
pub fn eta2(delta: f64, n: f64, c: f64, k: f64) -> f64 {
    ln_eta2(delta, n, c, k).exp()
}

/// Golden-section search over `ln N` for the minimum of `η₂(δ, ·)`.
/// Returns `(N*, η₂(N*))`.
pub fn min_eta2_over_n(delta: f64, c: f64, k: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |u: f64| ln_eta2(delta, u.exp(), c, k);
    let centre = -delta.ln();
    let (mut a, mut b) = (centre - 8.0, centre + 8.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-10 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let u = 0.5 * (a + b);
    (u.exp(), f(u).exp())
}

/// Largest `δ` with `min_N η₁ + 2η₂ < 1`, located by bisection to within
/// `1e−6` of the boundary.
pub fn delta_search(c: f64, k: f64) -> Result<JumpAdmissibility, JumpError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(JumpError::Invalid(format!("c must be positive and finite, got {c}")));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(JumpError::Invalid(format!("K must be finite and nonnegative, got {k}")));
    }
    let objective = |d: f64| {
        let (n, e2) = min_eta2_over_n(d, c, k);
        (eta1(d, c, k) + 2.0 * e2, n, e2)
    };
    // min_N η₂ ≥ 18e²δ²/c, so the objective exceeds 1 here
    let mut hi = (c / (36.0 * std::f64::consts::E.powi(2))).sqrt() * 1.01;
    let mut lo = 0.0;
    let mut best = None;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let (f, n, e2) = objective(mid);
        if f < 1.0 {
            lo = mid;
            best = Some((f, n, e2));
            if f >= 1.0 - 1e-6 {
                break;
            }
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let (f, n, e2) = best.ok_or_else(|| JumpError::Invalid("no admissible δ found".into()))?;
    if f < 1.0 - 1e-6 {
        return Err(JumpError::Invalid(format!("search stalled at η₁ + 2η₂ = {f}")));
    }
    Ok(JumpAdmissibility {
        c,
        k,
        delta_star: lo,
        n_star: n,
        eta1: eta1(lo, c, k),
        eta2: e2,
        objective: f,
        t: 2.0 / lo,
    })
}
