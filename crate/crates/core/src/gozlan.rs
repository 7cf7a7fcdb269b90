//! The cost `ω(t) = (t/2)√(1+t²) + ½ asinh t`, the Gozlan-type condition
//! `liminf Σ_i [a(∂_iV)² − ∂²_iiV]/(1+x_i²) ≥ m`, the constants `λ₁, λ₂`
//! of the associated weighted Poincaré inequality, and certificates built
//! from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_with, Derivatives, EvalError, Expr};
use crate::moments::{gozlan_certify, MomentCertificate, MomentsError};

/// Default weight `a` on `(∂_iV)²`.
pub const A_DEFAULT: f64 = 23.0 / 27.0;

/// `sup_t t²/(1+t²)³`.
const FOUR_27: f64 = 4.0 / 27.0;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GozlanError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error("{name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("ε₁ + 3ε₂ + ε₃ = {sum}, expected 1 − a = {target}")]
    SumConstraint { sum: f64, target: f64 },
    #[error("ε₁ = {eps1} must stay below {bound}")]
    Eps1TooLarge { eps1: f64, bound: f64 },
    #[error("4(m−1)/(27ε₃) + 2ε = {lhs} is not below m = {m}")]
    Infeasible { lhs: f64, m: usize },
    #[error("a = {a} must lie in (0, {bound})")]
    AOutOfRange { a: f64, bound: f64 },
    #[error("condition fails: liminf estimate {liminf} < m = {m}")]
    ConditionFails { liminf: f64, m: usize },
    #[error("condition inconclusive: shell minima are not monotone")]
    ConditionInconclusive,
    #[error("δ = {delta} not below (λ₁m)^(-1/2) = {bound}")]
    DeltaTooLarge { delta: f64, bound: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub fn omega(t: f64) -> f64 {
    0.5 * t * (1.0 + t * t).sqrt() + 0.5 * t.asinh()
}

/// `ω` as an expression in `t`.
pub fn omega_expr() -> Expr {
    parse_with("t/2*sqrt(1+t^2) + 0.5*log(t + sqrt(1+t^2))", &["t"]).expect("static formula parses")
}

/// Properties of `ω` measured through its symbolic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaProps {
    pub omega_prime_at_0: f64,
    /// `sup_t |ω‴/ω′³|` over a grid on `[−50, 50]` containing 0.
    pub sup_ratio: f64,
    pub argmax: f64,
    /// Constant `M` of the cost criterion for this `ω`.
    pub m_constant: f64,
}

pub fn omega_props() -> Result<OmegaProps, GozlanError> {
    let w = omega_expr();
    let d1 = w.differentiate(0);
    let d3 = d1.differentiate(0).differentiate(0);
    let omega_prime_at_0 = d1.eval(&[0.0])?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in -5000..=5000 {
        let t = k as f64 / 100.0;
        let r = (d3.eval(&[t])? / d1.eval(&[t])?.powi(3)).abs();
        if r > best.0 {
            best = (r, t);
        }
    }
    Ok(OmegaProps {
        omega_prime_at_0,
        sup_ratio: best.0,
        argmax: best.1,
        m_constant: 1.0,
    })
}

/// `(Σ_i |ω(x_i) − ω(y_i)|²)^{1/2}`.
pub fn d_omega(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (omega(*a) - omega(*b)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Gradient and Hessian diagonal of `V`, prepared once.
pub struct GozlanPotential {
    d: Derivatives,
    pub a: f64,
}

impl GozlanPotential {
    pub fn new(v: &Expr, m: usize) -> Self {
        GozlanPotential {
            d: Derivatives::new(v, m),
            a: A_DEFAULT,
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }

    /// `Σ_i [a(∂_iV)² − ∂²_iiV](x)/(1+x_i²)`.
    pub fn condition_value(&self, x: &[f64]) -> Result<f64, GozlanError> {
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let g = self.d.grad[i].eval(x)?;
            let h = self.d.hess[i][i].eval(x)?;
            s += (self.a * g * g - h) / (1.0 + xi * xi);
        }
        Ok(s)
    }
}

pub fn condition_value(v: &Expr, x: &[f64]) -> Result<f64, GozlanError> {
    GozlanPotential::new(v, x.len()).condition_value(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellMinimum {
    pub radius: f64,
    pub minimum: f64,
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub shells: Vec<ShellMinimum>,
    /// Minimum over the two outermost shells.
    pub liminf: f64,
    pub verdict: ConditionVerdict,
    /// Smallest shell radius from which every shell minimum is at least
    /// `m − tolerance`.
    pub r_pass: Option<f64>,
    pub tolerance: f64,
}

pub fn default_shells() -> Vec<f64> {
    vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0]
}

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

/// `±e_i` followed by `count` Halton points pushed to the unit sphere.
pub fn sphere_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let mut dirs = Vec::new();
    for i in 0..m {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; m];
            e[i] = s;
            dirs.push(e);
        }
    }
    if m == 1 {
        return dirs;
    }
    let mut k = 1;
    while dirs.len() < 2 * m + count {
        let p: Vec<f64> = (0..m).map(|j| 2.0 * radical_inverse(k, PRIMES[j % PRIMES.len()]) - 1.0).collect();
        k += 1;
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-3 {
            dirs.push(p.into_iter().map(|v| v / norm).collect());
        }
    }
    dirs
}

/// Shell scan of the condition. Pass when the two outermost shells stay at
/// or above `m − tolerance`; inconclusive when the last three shell minima
/// are not monotone.
pub fn check_condition(
    p: &GozlanPotential,
    shells: &[f64],
    directions: usize,
    tolerance: f64,
) -> Result<ConditionReport, GozlanError> {
    if shells.len() < 3 || shells.windows(2).any(|w| !(w[1] > w[0])) || shells[0] <= 0.0 {
        return Err(GozlanError::Invalid("need at least three increasing positive shell radii".into()));
    }
    let m = p.dim();
    let dirs = sphere_directions(m, directions);
    let mut out = Vec::with_capacity(shells.len());
    for &r in shells {
        let mut best: Option<ShellMinimum> = None;
        for u in &dirs {
            let x: Vec<f64> = u.iter().map(|v| r * v).collect();
            let val = p.condition_value(&x)?;
            if best.as_ref().map_or(true, |b| val < b.minimum) {
                best = Some(ShellMinimum {
                    radius: r,
                    minimum: val,
                    direction: u.clone(),
                });
            }
        }
        out.push(best.expect("direction set is nonempty"));
    }
    let n = out.len();
    let liminf = out[n - 1].minimum.min(out[n - 2].minimum);
    let last3: Vec<f64> = out[n - 3..].iter().map(|s| s.minimum).collect();
    let slack = 1e-12 * last3.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let up = last3.windows(2).all(|w| w[1] >= w[0] - slack);
    let down = last3.windows(2).all(|w| w[1] <= w[0] + slack);
    let threshold = m as f64 - tolerance;
    let verdict = if !(up || down) {
        ConditionVerdict::Inconclusive
    } else if liminf >= threshold {
        ConditionVerdict::Pass
    } else {
        ConditionVerdict::Fail
    };
    let mut r_pass = None;
    for s in out.iter().rev() {
        if s.minimum >= threshold {
            r_pass = Some(s.radius);
        } else {
            break;
        }
    }
    Ok(ConditionReport {
        shells: out,
        liminf,
        verdict,
        r_pass,
        tolerance,
    })
}

/// `ε, ε₁, ε₂, ε₃`, the radius `R` and the weight `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GozlanParameters {
    pub m: usize,
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub r: f64,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GozlanConstants {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda1p: f64,
    pub lambda2p: f64,
    /// `(λ₁m)^{−1/2}`.
    pub delta_bound: f64,
}

/// Upper limit on `a` for dimension `m`.
pub fn a_bound(m: usize) -> f64 {
    1.0 - FOUR_27 * (m as f64 - 1.0) / m as f64
}

/// Upper limit on `ε₁ + 3ε₂`.
pub fn eps1_bound(m: usize, a: f64) -> f64 {
    (1.0 - a) - FOUR_27 * (m as f64 - 1.0) / m as f64
}

fn denominator(m: usize, eps: f64, eps3: f64) -> f64 {
    m as f64 - 2.0 * eps - FOUR_27 * (m as f64 - 1.0) / eps3
}

pub fn lambda_constants(p: &GozlanParameters) -> Result<GozlanConstants, GozlanError> {
    if p.m == 0 {
        return Err(GozlanError::Invalid("dimension must be at least 1".into()));
    }
    for (name, value) in [("ε", p.eps), ("ε₁", p.eps1), ("ε₂", p.eps2)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(GozlanError::NonPositive { name, value });
        }
    }
    if !(p.r >= 0.0 && p.r.is_finite()) {
        return Err(GozlanError::Invalid(format!("R = {} must be finite and nonnegative", p.r)));
    }
    let ab = a_bound(p.m);
    if !(p.a > 0.0 && p.a < ab) {
        return Err(GozlanError::AOutOfRange { a: p.a, bound: ab });
    }
    let bound = eps1_bound(p.m, p.a);
    if p.eps1 >= bound {
        return Err(GozlanError::Eps1TooLarge { eps1: p.eps1, bound });
    }
    if !(p.eps3 > 0.0 && p.eps3.is_finite()) {
        return Err(GozlanError::NonPositive { name: "ε₃", value: p.eps3 });
    }
    let target = 1.0 - p.a;
    let sum = p.eps1 + 3.0 * p.eps2 + p.eps3;
    if (sum - target).abs() > 1e-12 {
        return Err(GozlanError::SumConstraint { sum, target });
    }
    let d = denominator(p.m, p.eps, p.eps3);
    if !(d > 0.0) {
        return Err(GozlanError::Infeasible {
            lhs: p.m as f64 - d,
            m: p.m,
        });
    }
    let m = p.m as f64;
    let lambda1 = 1.0 / (p.eps1 * d);
    let lambda2 = (m - p.eps + 3.0 / p.eps2) / d;
    let lambda1p = lambda1 * m;
    Ok(GozlanConstants {
        lambda1,
        lambda2,
        lambda1p,
        lambda2p: lambda2 * (p.r + 1.0).powi(2),
        delta_bound: 1.0 / lambda1p.sqrt(),
    })
}

/// `2(√m − √(m−1))/(3√(3m))`.
pub fn closed_form_delta(m: usize) -> f64 {
    let m = m as f64;
    2.0 * (m.sqrt() - (m - 1.0).sqrt()) / (3.0 * (3.0 * m).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub m: usize,
    pub a: f64,
    pub eps1_star: f64,
    pub eps3_star: f64,
    pub delta_star: f64,
    /// Present for the default `a`.
    pub closed_form: Option<f64>,
    /// `(ε₁, δ(ε₁))` on the search grid.
    pub trace: Vec<(f64, f64)>,
}

const GRID_POINTS: usize = 10_000;

/// Maximises `δ(ε₁) = (λ₁m)^{−1/2}` over `ε₁ ∈ (0, 1 − a − 3ε₂)` with `ε`,
/// `ε₂` held fixed and `ε₃ = 1 − a − ε₁ − 3ε₂`. A `10⁴`-point grid locates
/// the maximum, golden-section search refines it.
pub fn optimize_with(m: usize, a: f64, eps: f64, eps2: f64) -> Result<OptimizeResult, GozlanError> {
    if m == 0 {
        return Err(GozlanError::Invalid("dimension must be at least 1".into()));
    }
    let ab = a_bound(m);
    if !(a > 0.0 && a < ab) {
        return Err(GozlanError::AOutOfRange { a, bound: ab });
    }
    let s = 1.0 - a - 3.0 * eps2;
    if !(s > 0.0) {
        return Err(GozlanError::Invalid(format!("ε₂ = {eps2} leaves no room for ε₁ and ε₃")));
    }
    let mf = m as f64;
    let delta_of = |e1: f64| {
        let d = denominator(m, eps, s - e1);
        if d > 0.0 && e1 > 0.0 {
            (e1 * d / mf).sqrt()
        } else {
            0.0
        }
    };
    let hi = s.min(eps1_bound(m, a) - 3.0 * eps2);
    let step = hi / (GRID_POINTS + 1) as f64;
    let trace: Vec<(f64, f64)> = (1..=GRID_POINTS)
        .map(|k| {
            let e1 = k as f64 * step;
            (e1, delta_of(e1))
        })
        .collect();
    let k_best = (0..trace.len())
        .max_by(|&i, &j| trace[i].1.total_cmp(&trace[j].1))
        .expect("grid is nonempty");
    let (mut lo_b, mut hi_b) = ((k_best as f64) * step, (k_best as f64 + 2.0) * step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi_b - inv_phi * (hi_b - lo_b);
    let mut x2 = lo_b + inv_phi * (hi_b - lo_b);
    let (mut f1, mut f2) = (delta_of(x1), delta_of(x2));
    for _ in 0..200 {
        if hi_b - lo_b <= 1e-15 * hi {
            break;
        }
        if f1 >= f2 {
            hi_b = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi_b - inv_phi * (hi_b - lo_b);
            f1 = delta_of(x1);
        } else {
            lo_b = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo_b + inv_phi * (hi_b - lo_b);
            f2 = delta_of(x2);
        }
    }
    let (eps1_star, delta_star) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok(OptimizeResult {
        m,
        a,
        eps1_star,
        eps3_star: s - eps1_star,
        delta_star,
        closed_form: (a == A_DEFAULT).then(|| closed_form_delta(m)),
        trace,
    })
}

/// Supremum configuration `ε = ε₂ = 0`.
pub fn optimize_parameters(m: usize) -> Result<OptimizeResult, GozlanError> {
    optimize_with(m, A_DEFAULT, 0.0, 0.0)
}

/// Settings for [`gozlan_certificate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GozlanSettings {
    pub eps: f64,
    pub eps2: f64,
    /// Overrides the near-optimal `ε₁`; `ε₃` follows from the sum rule.
    pub eps1: Option<f64>,
    pub a: f64,
    pub shells: Vec<f64>,
    pub directions: usize,
    pub n_max: usize,
}

impl Default for GozlanSettings {
    fn default() -> Self {
        GozlanSettings {
            eps: 1e-3,
            eps2: 1e-3,
            eps1: None,
            a: A_DEFAULT,
            shells: default_shells(),
            directions: 256,
            n_max: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GozlanCertificate {
    pub condition: ConditionReport,
    pub parameters: GozlanParameters,
    pub constants: GozlanConstants,
    pub certificate: MomentCertificate,
}

/// Checks the condition (tolerance `ε`), takes `R` as the smallest passing
/// shell radius, picks `ε₁` and builds the moment certificate.
pub fn gozlan_certificate(v: &Expr, m: usize, delta: f64, s: &GozlanSettings) -> Result<GozlanCertificate, GozlanError> {
    let pot = GozlanPotential::new(v, m).with_a(s.a);
    let condition = check_condition(&pot, &s.shells, s.directions, s.eps)?;
    match condition.verdict {
        ConditionVerdict::Pass => {}
        ConditionVerdict::Fail => {
            return Err(GozlanError::ConditionFails {
                liminf: condition.liminf,
                m,
            })
        }
        ConditionVerdict::Inconclusive => return Err(GozlanError::ConditionInconclusive),
    }
    let r = condition.r_pass.expect("passing scan has a passing shell");
    let eps1 = match s.eps1 {
        Some(e) => e,
        None => {
            // stay strictly inside the open interval
            let opt = optimize_with(m, s.a, s.eps, s.eps2)?;
            let hi = (1.0 - s.a - 3.0 * s.eps2).min(eps1_bound(m, s.a) - 3.0 * s.eps2);
            opt.eps1_star.min(hi * (1.0 - 1e-6))
        }
    };
    let parameters = GozlanParameters {
        m,
        eps: s.eps,
        eps1,
        eps2: s.eps2,
        eps3: 1.0 - s.a - eps1 - 3.0 * s.eps2,
        r,
        a: s.a,
    };
    let constants = lambda_constants(&parameters)?;
    if !(delta < constants.delta_bound) {
        return Err(GozlanError::DeltaTooLarge {
            delta,
            bound: constants.delta_bound,
        });
    }
    let certificate = gozlan_certify(constants.lambda1p, constants.lambda2p, delta, s.n_max)?;
    Ok(GozlanCertificate {
        condition,
        parameters,
        constants,
        certificate,
    })
}

/// The `C¹` cutoff: 1 below `r`, 0 above `r + N`, cubic blend between.
/// Returns `(φ(s), φ′(s))`.
pub fn cutoff_phi(s: f64, r: f64, n: f64) -> (f64, f64) {
    if s <= r {
        return (1.0, 0.0);
    }
    if s >= r + n {
        return (0.0, 0.0);
    }
    let u = (s - r) / n;
    (2.0 * u * u * u - 3.0 * u * u + 1.0, 6.0 * u * (u - 1.0) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn omega_values() {
        assert_eq!(omega(0.0), 0.0);
        let w1 = 0.5f64.sqrt() + 0.5 * (1.0 + 2f64.sqrt()).ln();
        assert!((omega(1.0) - w1).abs() < 1e-14);
        assert!((omega(1.0) - 1.14779).abs() < 1e-5);
        let e = omega_expr();
        for t in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            assert!((e.eval(&[t]).unwrap() - omega(t)).abs() < 1e-13);
        }
        let d1 = e.differentiate(0);
        let d3 = d1.differentiate(0).differentiate(0);
        let r = d3.eval(&[1.0]).unwrap() / d1.eval(&[1.0]).unwrap().powi(3);
        assert!((r - 0.125).abs() < 1e-13);
    }

    #[test]
    fn omega_properties() {
        let p = omega_props().unwrap();
        assert!((p.omega_prime_at_0 - 1.0).abs() < 1e-10);
        assert!((p.sup_ratio - 1.0).abs() < 1e-10);
        assert_eq!(p.argmax, 0.0);
    }

    #[test]
    fn cost_distance() {
        assert_eq!(d_omega(&[0.3, -2.0], &[0.3, -2.0]), 0.0);
        assert!((d_omega(&[1.0], &[0.0]) - omega(1.0)).abs() < 1e-15);
        assert_eq!(d_omega(&[1.0, 2.0], &[-0.5, 3.0]), d_omega(&[-0.5, 3.0], &[1.0, 2.0]));
    }

    #[test]
    fn condition_examples() {
        let v = parse("x^2", 1).unwrap();
        let c = condition_value(&v, &[10.0]).unwrap();
        assert!((c - (A_DEFAULT * 400.0 - 2.0) / 101.0).abs() < 1e-13);
        assert!((c - 3.35386).abs() < 1e-5);
        let g = parse("x^2/2", 1).unwrap();
        let far = condition_value(&g, &[1e6]).unwrap();
        assert!((far - A_DEFAULT).abs() < 1e-9);
    }

    #[test]
    fn condition_scans() {
        let shells = default_shells();
        let p = GozlanPotential::new(&parse("x^2", 1).unwrap(), 1);
        let r = check_condition(&p, &shells, 64, 1e-3).unwrap();
        assert_eq!(r.verdict, ConditionVerdict::Pass);
        assert!((r.liminf - 92.0 / 27.0).abs() < 1e-4);
        assert_eq!(r.r_pass, Some(2.0));

        let p = GozlanPotential::new(&parse("x1^2 + x2^2", 2).unwrap(), 2);
        let r = check_condition(&p, &shells, 64, 1e-3).unwrap();
        assert_eq!(r.verdict, ConditionVerdict::Fail);
        assert!((r.liminf - (92.0 / 27.0 - 2.0)).abs() < 1e-4);
        assert!(r.shells.last().unwrap().direction.iter().any(|v| v.abs() == 1.0));

        let p = GozlanPotential::new(&parse("1.2*(x1^2 + x2^2)", 2).unwrap(), 2);
        let r = check_condition(&p, &shells, 64, 1e-3).unwrap();
        assert_eq!(r.verdict, ConditionVerdict::Pass);
        assert!((r.liminf - (92.0 * 1.44 / 27.0 - 2.4)).abs() < 1e-4);

        let p = GozlanPotential::new(&parse("x^2/2", 1).unwrap(), 1);
        assert_eq!(check_condition(&p, &shells, 8, 1e-3).unwrap().verdict, ConditionVerdict::Fail);
    }

    fn params(m: usize, eps: f64, eps1: f64, eps2: f64) -> GozlanParameters {
        GozlanParameters {
            m,
            eps,
            eps1,
            eps2,
            eps3: 1.0 - A_DEFAULT - eps1 - 3.0 * eps2,
            r: 1.0,
            a: A_DEFAULT,
        }
    }

    #[test]
    fn lambda_examples() {
        let c = lambda_constants(&params(1, 0.1, 0.1, 0.01)).unwrap();
        assert!((c.lambda1 - 12.5).abs() < 1e-10);
        assert!((c.lambda2 - 376.125).abs() < 1e-9);
        assert!((c.lambda2p - 4.0 * 376.125).abs() < 1e-8);
        assert!(matches!(
            lambda_constants(&params(1, 0.1, 0.2, 0.01)),
            Err(GozlanError::Eps1TooLarge { .. })
        ));
        let mut p = params(1, 0.1, 0.1, 0.01);
        p.eps3 += 1e-6;
        assert!(matches!(lambda_constants(&p), Err(GozlanError::SumConstraint { .. })));
        let p = params(2, 1e-3, 4.0 / 27.0 - 1e-9 - 3e-3, 1e-3);
        assert!(matches!(lambda_constants(&p), Err(GozlanError::Eps1TooLarge { .. })));
        let p = params(2, 1e-3, 0.0735, 1e-3);
        assert!(matches!(lambda_constants(&p), Err(GozlanError::Infeasible { .. })));
        assert!(lambda_constants(&params(2, 1e-3, 0.07, 1e-3)).is_ok());
    }

    #[test]
    fn optimizer_matches_closed_form() {
        for m in 1..=5 {
            let o = optimize_parameters(m).unwrap();
            assert!((o.delta_star - closed_form_delta(m)).abs() < 1e-4, "m = {m}");
        }
        let o = optimize_parameters(2).unwrap();
        assert!((o.eps1_star - (4.0 - 2.0 * 2f64.sqrt()) / 27.0).abs() < 1e-6);
        assert!((o.delta_star - 0.1127347).abs() < 1e-6);
        let o = optimize_parameters(1).unwrap();
        assert!((o.delta_star - 0.38490).abs() < 1e-5);
    }

    #[test]
    fn certificate_examples() {
        let v = parse("x^2", 1).unwrap();
        let s = GozlanSettings::default();
        let c = gozlan_certificate(&v, 1, 0.3, &s).unwrap();
        assert!(c.certificate.exp_bound >= 1.0 / 0.7f64.sqrt());
        assert!(matches!(
            gozlan_certificate(&v, 1, 0.39, &s),
            Err(GozlanError::DeltaTooLarge { .. })
        ));
        let z = gozlan_certificate(&v, 1, 0.0, &s).unwrap();
        assert_eq!(z.certificate.exp_bound, 1.0);
        let g = parse("x^2/2", 1).unwrap();
        assert!(matches!(gozlan_certificate(&g, 1, 0.1, &s), Err(GozlanError::ConditionFails { .. })));
    }

    #[test]
    fn cutoff() {
        let (r, n) = (2.0, 0.5);
        assert_eq!(cutoff_phi(r, r, n).0, 1.0);
        assert_eq!(cutoff_phi(r + n, r, n).0, 0.0);
        assert!((cutoff_phi(r + n / 2.0, r, n).0 - 0.5).abs() < 1e-15);
        let (_, dmid) = cutoff_phi(r + n / 2.0, r, n);
        assert!((dmid.abs() - 1.5 / n).abs() < 1e-12);
    }
}
