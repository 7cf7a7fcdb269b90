//! Diffusions `L = Δ − ∇V·∇` with invariant measure `μ ∝ e^{−V}` and the
//! Lyapunov condition `LW ≤ (−c d² + b) W`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Derivatives, EvalError, Expr};
use crate::grid::GridSpec;
use crate::oracle::{expectation, OracleError, TailOptions};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DiffusionError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("expression uses x{used} but the problem has dimension {dim}")]
    Dimension { used: usize, dim: usize },
    #[error("W = {value} < 1 at {point:?}; Lyapunov functions must satisfy W ≥ 1")]
    WBelowOne { point: Vec<f64>, value: f64 },
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("no c > 0 fits: {reason} (worst sample {worst:?})")]
    Infeasible { reason: String, worst: Box<Violation> },
    #[error("empty sample grid")]
    EmptyGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub c: f64,
    pub b: f64,
}

impl LyapunovConstants {
    pub fn new(c: f64, b: f64) -> Result<Self, DiffusionError> {
        if !(c > 0.0 && c.is_finite()) || !(b >= 0.0 && b.is_finite()) {
            return Err(DiffusionError::InvalidConstants(format!("need c > 0 and b ≥ 0, got c = {c}, b = {b}")));
        }
        Ok(LyapunovConstants { c, b })
    }
}

/// `LW ≤ −c′W + b′·1_{B(x0, R)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakLyapunovConstants {
    pub c_prime: f64,
    pub b_prime: f64,
    pub r: f64,
}

/// A sample point together with the value of a condition there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub point: Vec<f64>,
    pub defect: f64,
}

/// Potential `V` on `ℝ^m` with base point `x0`; `d(x, x0) = |x − x0|`.
#[derive(Clone, Debug)]
pub struct DiffusionProblem {
    pub v: Expr,
    pub x0: Vec<f64>,
    grad_v: Vec<Expr>,
}

impl DiffusionProblem {
    pub fn new(v: Expr, x0: Vec<f64>) -> Result<Self, DiffusionError> {
        let m = x0.len();
        if v.arity() > m {
            return Err(DiffusionError::Dimension { used: v.arity(), dim: m });
        }
        let grad_v = (0..m).map(|i| v.differentiate(i)).collect();
        Ok(DiffusionProblem { v, x0, grad_v })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn dist2(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn grad_v_at(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.grad_v.iter().map(|g| g.eval(x)).collect()
    }

    /// Differentiates a candidate function once for repeated use.
    pub fn prepare(&self, f: &Expr) -> Result<Derivatives, DiffusionError> {
        if f.arity() > self.dim() {
            return Err(DiffusionError::Dimension { used: f.arity(), dim: self.dim() });
        }
        Ok(Derivatives::new(f, self.dim()))
    }

    /// `ΔW(x) − ∇V(x)·∇W(x)`.
    pub fn generator_apply(&self, w: &Derivatives, x: &[f64]) -> Result<f64, DiffusionError> {
        let lap = w.laplacian_at(x)?;
        let mut drift = 0.0;
        for (gv, gw) in self.grad_v.iter().zip(&w.grad) {
            let dw = gw.eval(x)?;
            if dw != 0.0 {
                drift += gv.eval(x)? * dw;
            }
        }
        Ok(lap - drift)
    }

    /// `LW − (−c d² + b) W`; the condition holds at `x` iff this is ≤ 0.
    pub fn lyapunov_defect(&self, w: &Derivatives, k: LyapunovConstants, x: &[f64]) -> Result<f64, DiffusionError> {
        let wx = w.value.eval(x)?;
        if !(wx >= 1.0) {
            return Err(DiffusionError::WBelowOne { point: x.to_vec(), value: wx });
        }
        let lw = self.generator_apply(w, x)?;
        Ok(lw - (-k.c * self.dist2(x) + k.b) * wx)
    }

    /// `LW/W + c d² − b`, the defect in units of `W`.
    pub fn normalised_defect(&self, w: &Derivatives, k: LyapunovConstants, x: &[f64]) -> Result<f64, DiffusionError> {
        let wx = w.value.eval(x)?;
        if !(wx >= 1.0) {
            return Err(DiffusionError::WBelowOne { point: x.to_vec(), value: wx });
        }
        Ok(self.generator_apply(w, x)? / wx + k.c * self.dist2(x) - k.b)
    }

    /// `LU + |∇U|² + c d² − b`.
    pub fn check_u_form(&self, u: &Derivatives, k: LyapunovConstants, x: &[f64]) -> Result<f64, DiffusionError> {
        Ok(self.u_form_drift(u, x)? + k.c * self.dist2(x) - k.b)
    }

    fn u_form_drift(&self, u: &Derivatives, x: &[f64]) -> Result<f64, DiffusionError> {
        let grad = u.gradient_at(x)?;
        let sq: f64 = grad.iter().map(|g| g * g).sum();
        Ok(self.generator_apply(u, x)? + sq)
    }

    /// Normalised defect on every grid point. A point fails when the defect
    /// exceeds `1e−12` times the size of the terms it is made of.
    pub fn scan_defect(&self, w: &Derivatives, k: LyapunovConstants, grid: &GridSpec) -> Result<DefectScan, DiffusionError> {
        let mut scan = DefectScan::default();
        for x in grid.points(self.dim()) {
            let wx = w.value.eval(&x)?;
            if !(wx >= 1.0) {
                return Err(DiffusionError::WBelowOne { point: x, value: wx });
            }
            let g = self.generator_apply(w, &x)? / wx;
            let cd2 = k.c * self.dist2(&x);
            scan.push(x, g, cd2, k.b);
        }
        Ok(scan.finish())
    }

    /// [`scan_defect`](Self::scan_defect) for `LU + |∇U|² ≤ −cd² + b`.
    pub fn scan_u_form(&self, u: &Derivatives, k: LyapunovConstants, grid: &GridSpec) -> Result<DefectScan, DiffusionError> {
        let mut scan = DefectScan::default();
        for x in grid.points(self.dim()) {
            let g = self.u_form_drift(u, &x)?;
            let cd2 = k.c * self.dist2(&x);
            scan.push(x, g, cd2, k.b);
        }
        Ok(scan.finish())
    }

    /// Largest `c` and smallest `b` with `LW ≤ (−cd² + b)W` on the grid.
    pub fn fit_constants(&self, w: &Derivatives, grid: &GridSpec) -> Result<FitReport, DiffusionError> {
        let mut samples = Vec::new();
        for x in grid.points(self.dim()) {
            let wx = w.value.eval(&x)?;
            if !(wx >= 1.0) {
                return Err(DiffusionError::WBelowOne { point: x, value: wx });
            }
            let g = self.generator_apply(w, &x)? / wx;
            samples.push(Sample { d2: self.dist2(&x), g, point: x });
        }
        fit_quadratic_decay(&samples, grid)
    }

    /// As [`fit_constants`](Self::fit_constants) for the form
    /// `LU + |∇U|² ≤ −cd² + b`.
    pub fn fit_constants_u(&self, u: &Derivatives, grid: &GridSpec) -> Result<FitReport, DiffusionError> {
        let mut samples = Vec::new();
        for x in grid.points(self.dim()) {
            let g = self.u_form_drift(u, &x)?;
            samples.push(Sample { d2: self.dist2(&x), g, point: x });
        }
        fit_quadratic_decay(&samples, grid)
    }

    /// Weak form with `c′ = factor·c`, `R = √((b + c′)/c)` and
    /// `b′ = sup_{B(x0,R) ∩ grid} (LW + c′W)`, plus the grid points where
    /// `LW ≤ −c′W + b′·1_B` fails.
    pub fn derive_weak_constants(
        &self,
        k: LyapunovConstants,
        w: &Derivatives,
        grid: &GridSpec,
        c_prime_factor: f64,
    ) -> Result<WeakReport, DiffusionError> {
        if !(c_prime_factor > 0.0) {
            return Err(DiffusionError::InvalidConstants(format!("c' factor must be positive, got {c_prime_factor}")));
        }
        let c_prime = c_prime_factor * k.c;
        let r = ((k.b + c_prime) / k.c).sqrt();
        let mut points = grid.points(self.dim());
        points.push(self.x0.clone());
        let mut values = Vec::with_capacity(points.len());
        let mut b_prime = 0.0f64;
        for x in points {
            let wx = w.value.eval(&x)?;
            let s = self.generator_apply(w, &x)? + c_prime * wx;
            let inside = self.dist2(&x).sqrt() <= r;
            if inside {
                b_prime = b_prime.max(s);
            }
            values.push((x, s, inside));
        }
        let violations = values
            .into_iter()
            .filter(|(_, s, inside)| *s > if *inside { b_prime } else { 0.0 })
            .map(|(point, s, inside)| Violation {
                defect: if inside { s - b_prime } else { s },
                point,
            })
            .collect();
        Ok(WeakReport {
            constants: WeakLyapunovConstants { c_prime, b_prime, r },
            violations,
        })
    }

    /// `(∫h²d²dμ, (1/c)∫|∇h|²dμ + (b/c)∫h²dμ)` by quadrature (m ≤ 2).
    pub fn weighted_poincare_residual(
        &self,
        h: &Expr,
        k: LyapunovConstants,
        opts: &TailOptions,
    ) -> Result<PoincareResidual, DiffusionError> {
        let hd = self.prepare(h)?;
        let h2d2 = |x: &[f64]| -> Result<f64, EvalError> {
            let v = hd.value.eval(x)?;
            Ok(v * v * self.dist2(x))
        };
        let grad2 = |x: &[f64]| -> Result<f64, EvalError> { Ok(hd.gradient_at(x)?.iter().map(|g| g * g).sum()) };
        let h2 = |x: &[f64]| -> Result<f64, EvalError> {
            let v = hd.value.eval(x)?;
            Ok(v * v)
        };
        let lhs = expectation(&self.v, &h2d2, &self.x0, opts)?;
        let g = expectation(&self.v, &grad2, &self.x0, opts)?;
        let m = expectation(&self.v, &h2, &self.x0, opts)?;
        let rhs = g.value / k.c + k.b / k.c * m.value;
        let rhs_error = g.error_estimate / k.c + k.b / k.c * m.error_estimate;
        Ok(PoincareResidual {
            lhs: lhs.value,
            rhs,
            lhs_error: lhs.error_estimate,
            rhs_error,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
}

impl PoincareResidual {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol + self.lhs_error + self.rhs_error
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectScan {
    pub passed: bool,
    pub points: usize,
    /// Largest `g + c d² − b` over the grid.
    pub max_defect: f64,
    pub violations: Vec<Violation>,
}

impl DefectScan {
    fn push(&mut self, x: Vec<f64>, g: f64, cd2: f64, b: f64) {
        let defect = g + cd2 - b;
        if self.points == 0 || defect > self.max_defect {
            self.max_defect = defect;
        }
        self.points += 1;
        if defect > 1e-12 * (g.abs() + cd2 + b.abs()).max(1.0) {
            self.violations.push(Violation { point: x, defect });
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.violations.is_empty();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakReport {
    pub constants: WeakLyapunovConstants,
    pub violations: Vec<Violation>,
}

/// Fitted constants and the evidence they rest on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub constants: LyapunovConstants,
    pub grid: GridSpec,
    pub samples: usize,
    /// Point where `g + c d²` attains `b`.
    pub argmax: Vec<f64>,
    /// `c` hit the top of the search range; the true supremum may be larger.
    pub capped: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct Sample {
    pub point: Vec<f64>,
    pub d2: f64,
    /// Growth rate: `LW/W` or its analogue.
    pub g: f64,
}

const C_MIN: f64 = 1e-6;
const C_MAX: f64 = 1e6;
const OUTER_SHELL: f64 = 0.9;

/// Fits `g(x) ≤ −c d²(x) + b` on samples.
///
/// A trial `c` is feasible when `g + c d²` over the outer shell
/// `d ≥ 0.9·d_max` does not exceed its maximum over the interior, i.e. the
/// function has stopped growing at the edge of the grid. `c` is located on
/// a logarithmic grid and then bisected to machine precision.
pub(crate) fn fit_quadratic_decay(samples: &[Sample], grid: &GridSpec) -> Result<FitReport, DiffusionError> {
    if samples.is_empty() {
        return Err(DiffusionError::EmptyGrid);
    }
    let d2_max = samples.iter().map(|s| s.d2).fold(0.0, f64::max);
    let shell = OUTER_SHELL * OUTER_SHELL * d2_max;
    let scale = samples.iter().map(|s| s.g.abs()).fold(0.0, f64::max);
    let excess = |c: f64| -> (f64, usize) {
        let mut inner = f64::NEG_INFINITY;
        let mut outer = (f64::NEG_INFINITY, 0);
        for (k, s) in samples.iter().enumerate() {
            let y = s.g + c * s.d2;
            if s.d2 >= shell {
                if y > outer.0 {
                    outer = (y, k);
                }
            } else {
                inner = inner.max(y);
            }
        }
        let tol = 4.0 * f64::EPSILON * (scale + c * d2_max);
        (outer.0 - inner - tol, outer.1)
    };
    let feasible = |c: f64| excess(c).0 <= 0.0;

    let (e, worst) = excess(C_MIN);
    if e > 0.0 {
        return Err(DiffusionError::Infeasible {
            reason: format!("LW/W + {C_MIN}·d² still increases at the edge of the grid"),
            worst: Box::new(Violation {
                point: samples[worst].point.clone(),
                defect: e,
            }),
        });
    }
    let mut lo = C_MIN;
    let mut hi = f64::NAN;
    let mut c = C_MIN;
    while c < C_MAX {
        let next = (c * 10f64.powf(0.25)).min(C_MAX);
        if feasible(next) {
            lo = next;
        } else {
            hi = next;
            break;
        }
        c = next;
    }
    let capped = hi.is_nan();
    if !capped {
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let c = lo;
    let (mut b, mut arg) = (f64::NEG_INFINITY, 0);
    for (k, s) in samples.iter().enumerate() {
        let y = s.g + c * s.d2;
        if y > b {
            b = y;
            arg = k;
        }
    }
    Ok(FitReport {
        constants: LyapunovConstants { c, b: b.max(0.0) },
        grid: grid.clone(),
        samples: samples.len(),
        argmax: samples[arg].point.clone(),
        capped,
    })
}

/// Pointwise scan used to audit `U`-form claims: `LU + |∇U|²` at the given
/// radii along the first axis, with the log-log slope between neighbours.
pub fn u_form_growth(p: &DiffusionProblem, u: &Derivatives, radii: &[f64]) -> Result<Vec<GrowthSample>, DiffusionError> {
    let mut out: Vec<GrowthSample> = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut x = p.x0.clone();
        x[0] += r;
        let value = p.u_form_drift(u, &x)?;
        let exponent = out.last().map(|prev| {
            ((value.abs()).ln() - prev.value.abs().ln()) / (r.ln() - prev.radius.ln())
        });
        out.push(GrowthSample {
            radius: r,
            value,
            sign: value.signum(),
            exponent,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    pub radius: f64,
    pub value: f64,
    pub sign: f64,
    /// Log-log slope of `|value|` against the previous radius.
    pub exponent: Option<f64>,
}
