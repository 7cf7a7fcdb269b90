//! Generators `L_a = ½Σa^{ij}∂_ij + Σb^i∂_i` with a position-dependent
//! diffusion matrix, and Gaussian integrability weighted by `λ_max(A)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffusion::{fit_quadratic_decay, DiffusionError, FitReport, LyapunovConstants, Sample, Violation};
use crate::expr::{Derivatives, EvalError, Expr};
use crate::grid::GridSpec;
use crate::moments::{certify, MomentCertificate, MomentsError};
use crate::oracle::{expectation, mc_expectation_with, weighted_tail_integral, McOptions, OracleError, OracleReport, TailOptions};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum UnboundedError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error(transparent)]
    Fit(#[from] DiffusionError),
    #[error("A must be given as m = {m} rows of an upper triangle (row i has m − i entries) or as a full matrix")]
    Shape { m: usize },
    #[error("expression uses x{used} but the problem has dimension {dim}")]
    Dimension { used: usize, dim: usize },
    #[error("A(x) is not positive definite at {point:?} (leading minor {minor} = {value})")]
    NotPositiveDefinite { point: Vec<f64>, minor: usize, value: f64 },
    #[error("W = {value} < 1 at {point:?}")]
    WBelowOne { point: Vec<f64>, value: f64 },
    #[error("μλ_max is not finite ({0})")]
    WeightDivergent(String),
}

/// Diffusion matrix `A` (symmetric, stored as its upper triangle), potential
/// `V` and base point `x0`.
#[derive(Clone, Debug)]
pub struct UnboundedProblem {
    pub v: Expr,
    pub x0: Vec<f64>,
    /// `upper[i][j − i] = a^{ij}` for `j ≥ i`.
    upper: Vec<Vec<Expr>>,
    drift: Vec<Expr>,
}

impl UnboundedProblem {
    /// `a` is either the upper triangle (row `i` holds `a^{ii}..a^{im}`) or
    /// a full matrix, of which only the upper triangle is read.
    pub fn new(a: Vec<Vec<Expr>>, v: Expr, x0: Vec<f64>) -> Result<Self, UnboundedError> {
        let m = x0.len();
        if a.len() != m {
            return Err(UnboundedError::Shape { m });
        }
        let full = a.iter().all(|row| row.len() == m);
        let triangle = a.iter().enumerate().all(|(i, row)| row.len() == m - i);
        if !full && !triangle {
            return Err(UnboundedError::Shape { m });
        }
        let upper: Vec<Vec<Expr>> = a
            .into_iter()
            .enumerate()
            .map(|(i, row)| if full && !triangle { row.into_iter().skip(i).collect() } else { row })
            .collect();
        for e in upper.iter().flatten().chain(std::iter::once(&v)) {
            if e.arity() > m {
                return Err(UnboundedError::Dimension { used: e.arity(), dim: m });
            }
        }
        let mut p = UnboundedProblem {
            v,
            x0,
            upper,
            drift: Vec::new(),
        };
        p.drift = (0..m).map(|i| p.drift_from_a_v(i)).collect();
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.upper[i][j - i]
    }

    pub fn dist2(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `b^i = ½(Σ_j ∂_j a^{ij} − a^{ij} ∂_j V)`, which makes `μ ∝ e^{−V}`
    /// invariant for `L_a`.
    pub fn drift_from_a_v(&self, i: usize) -> Expr {
        let mut sum = Expr::Const(0.0);
        for j in 0..self.dim() {
            let a = self.entry(i, j);
            let term = Expr::sub(a.differentiate(j), Expr::mul(a.clone(), self.v.differentiate(j)));
            sum = Expr::add(sum, term);
        }
        Expr::mul(Expr::Const(0.5), sum)
    }

    pub fn drift(&self) -> &[Expr] {
        &self.drift
    }

    pub fn matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let m = self.dim();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.entry(i, j).eval(x)?;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        Ok(a)
    }

    pub fn prepare(&self, f: &Expr) -> Result<Derivatives, UnboundedError> {
        if f.arity() > self.dim() {
            return Err(UnboundedError::Dimension { used: f.arity(), dim: self.dim() });
        }
        Ok(Derivatives::new(f, self.dim()))
    }

    /// `½Σa^{ij}∂_ijW + Σb^i∂_iW` at `x`.
    pub fn generator_a_apply(&self, w: &Derivatives, x: &[f64]) -> Result<f64, UnboundedError> {
        let m = self.dim();
        let mut second = 0.0;
        let mut first = 0.0;
        for i in 0..m {
            for j in 0..m {
                let h = w.hess[i][j].eval(x)?;
                if h != 0.0 {
                    second += self.entry(i, j).eval(x)? * h;
                }
            }
            let g = w.grad[i].eval(x)?;
            if g != 0.0 {
                first += self.drift[i].eval(x)? * g;
            }
        }
        Ok(0.5 * second + first)
    }

    /// Largest eigenvalue of `A(x)`, after checking positive definiteness
    /// through the leading principal minors.
    pub fn lambda_max(&self, x: &[f64]) -> Result<f64, UnboundedError> {
        let a = self.matrix_at(x)?;
        let m = self.dim();
        for k in 1..=m {
            let minor = a.view((0, 0), (k, k)).determinant();
            if !(minor > 0.0) {
                return Err(UnboundedError::NotPositiveDefinite {
                    point: x.to_vec(),
                    minor: k,
                    value: minor,
                });
            }
        }
        Ok(match m {
            1 => a[(0, 0)],
            2 => {
                let (p, q, r) = (a[(0, 0)], a[(1, 1)], a[(0, 1)]);
                0.5 * (p + q) + (0.25 * (p - q) * (p - q) + r * r).sqrt()
            }
            _ => SymmetricEigen::try_new(a, 1e-14, 10_000)
                .map(|e| e.eigenvalues.max())
                .unwrap_or(f64::NAN),
        })
    }

    /// `λ_max` at every grid node, replaced by the maximum over the node and
    /// its axis neighbours so that values between nodes are covered.
    pub fn conservative_lambda_max(&self, grid: &GridSpec) -> Result<Vec<(Vec<f64>, f64)>, UnboundedError> {
        let m = self.dim();
        let n = grid.axis().len();
        let points = grid.points(m);
        let raw: Vec<f64> = points.iter().map(|x| self.lambda_max(x)).collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(points.len());
        for (k, x) in points.into_iter().enumerate() {
            let mut best = raw[k];
            let mut stride = 1;
            for _ in 0..m {
                let coord = (k / stride) % n;
                if coord > 0 {
                    best = best.max(raw[k - stride]);
                }
                if coord + 1 < n {
                    best = best.max(raw[k + stride]);
                }
                stride *= n;
            }
            out.push((x, best));
        }
        Ok(out)
    }

    /// `L_aW − (−cd² + b)λ_max W` on every grid point.
    pub fn verify_unbounded_lyapunov(
        &self,
        w: &Derivatives,
        k: LyapunovConstants,
        grid: &GridSpec,
    ) -> Result<UnboundedReport, UnboundedError> {
        let mut samples = Vec::new();
        let mut violations = Vec::new();
        for x in grid.points(self.dim()) {
            let wx = w.value.eval(&x)?;
            if !(wx >= 1.0) {
                return Err(UnboundedError::WBelowOne { point: x, value: wx });
            }
            let law = self.generator_a_apply(w, &x)?;
            let lam = self.lambda_max(&x)?;
            let rhs = (-k.c * self.dist2(&x) + k.b) * lam * wx;
            let defect = law - rhs;
            let tol = 1e-12 * (law.abs() + rhs.abs());
            if defect > tol {
                violations.push(Violation {
                    point: x.clone(),
                    defect,
                });
            }
            samples.push(Violation { point: x, defect });
        }
        Ok(UnboundedReport {
            passed: violations.is_empty(),
            samples,
            violations,
        })
    }

    /// Fits `(c, b)` in `L_aW ≤ (−cd² + b)λ_max W` on the grid.
    pub fn fit_constants(&self, w: &Derivatives, grid: &GridSpec) -> Result<FitReport, UnboundedError> {
        let mut samples = Vec::new();
        for x in grid.points(self.dim()) {
            let wx = w.value.eval(&x)?;
            if !(wx >= 1.0) {
                return Err(UnboundedError::WBelowOne { point: x, value: wx });
            }
            let g = self.generator_a_apply(w, &x)? / (self.lambda_max(&x)? * wx);
            samples.push(Sample {
                d2: self.dist2(&x),
                g,
                point: x,
            });
        }
        Ok(fit_quadratic_decay(&samples, grid)?)
    }

    /// Certificate for `∫e^{δd²}λ_max dμ`.
    ///
    /// The moment recursion is run per unit of `μλ_max` (so `β̄_0 = 1`);
    /// `total_bound = μλ_max · exp_bound`, with `μλ_max` from the oracle.
    pub fn weighted_certificate(
        &self,
        k: LyapunovConstants,
        delta: f64,
        n_max: usize,
        opts: &WeightedOracleOptions,
    ) -> Result<WeightedCertificate, UnboundedError> {
        let certificate = certify(k.c, k.b, delta, n_max)?;
        let lam = |x: &[f64]| -> Result<f64, EvalError> {
            match self.lambda_max(x) {
                Ok(v) => Ok(v),
                Err(UnboundedError::Eval(e)) => Err(e),
                Err(e) => Err(EvalError::Domain {
                    op: "lambda_max",
                    arg: f64::NAN,
                    node: e.to_string(),
                }),
            }
        };
        let m = self.dim();
        let mu_lambda = if m <= 2 {
            expectation(&self.v, &lam, &self.x0, &opts.tail)?
        } else {
            mc_expectation_with(&self.v, &lam, m, &opts.mc)?
        };
        if !mu_lambda.value.is_finite() {
            return Err(UnboundedError::WeightDivergent(format!("{:?}", mu_lambda.verdict)));
        }
        let mu_upper = mu_lambda.value + mu_lambda.error_estimate;
        let oracle = if m <= 2 {
            let ln_lam = |x: &[f64]| -> Result<f64, EvalError> { Ok(lam(x)?.ln()) };
            Some(weighted_tail_integral(&self.v, delta, &self.x0, Some(&ln_lam), &opts.tail)?)
        } else {
            None
        };
        Ok(WeightedCertificate {
            total_bound: mu_upper * certificate.exp_bound,
            ln_total_bound: mu_upper.ln() + certificate.ln_exp_bound,
            certificate,
            mu_lambda,
            oracle,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnboundedReport {
    pub passed: bool,
    /// Defect at every grid point.
    pub samples: Vec<Violation>,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedOracleOptions {
    pub tail: TailOptions,
    /// Used for `m ≥ 3`.
    pub mc: McOptions,
}

impl Default for WeightedOracleOptions {
    fn default() -> Self {
        WeightedOracleOptions {
            tail: TailOptions::default(),
            mc: McOptions::new(0, 200_000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedCertificate {
    /// Normalised per unit `μλ_max`.
    pub certificate: MomentCertificate,
    pub mu_lambda: OracleReport,
    /// Bound on `∫e^{δd²}λ_max dμ`.
    pub total_bound: f64,
    pub ln_total_bound: f64,
    /// Oracle value of `∫e^{δd²}λ_max dμ` (m ≤ 2).
    pub oracle: Option<OracleReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::oracle::Verdict;

    fn worked() -> UnboundedProblem {
        UnboundedProblem::new(
            vec![vec![parse("1 + x1^2", 1).unwrap()]],
            parse("x1^2", 1).unwrap(),
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn drift_examples() {
        let p = worked();
        let b = p.drift_from_a_v(0);
        for x in [-2.0, 0.3, 1.7] {
            assert!((b.eval(&[x]).unwrap() + x * x * x).abs() < 1e-12);
        }
        let id = UnboundedProblem::new(
            vec![vec![parse("1", 2).unwrap(), parse("0", 2).unwrap()], vec![parse("1", 2).unwrap()]],
            parse("x1^2 + 3*x2^4", 2).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let x = [0.7, -1.1];
        assert!((id.drift_from_a_v(0).eval(&x).unwrap() + 0.7).abs() < 1e-14);
        assert!((id.drift_from_a_v(1).eval(&x).unwrap() + 6.0 * (-1.1f64).powi(3)).abs() < 1e-12);
        let kappa = UnboundedProblem::new(vec![vec![Expr::Const(3.0)]], parse("x1^2/2", 1).unwrap(), vec![0.0]).unwrap();
        assert!((kappa.drift_from_a_v(0).eval(&[2.0]).unwrap() + 3.0).abs() < 1e-14);
    }

    #[test]
    fn generator_examples() {
        let p = worked();
        let w = p.prepare(&parse("exp(x1^2/4)", 1).unwrap()).unwrap();
        assert!((p.generator_a_apply(&w, &[0.0]).unwrap() - 0.25).abs() < 1e-15);
        let at1 = p.generator_a_apply(&w, &[1.0]).unwrap();
        assert!((at1 - 0.25 * 0.25f64.exp()).abs() < 1e-12);
        let one = p.prepare(&Expr::Const(1.0)).unwrap();
        assert_eq!(p.generator_a_apply(&one, &[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn lambda_max_examples() {
        assert_eq!(worked().lambda_max(&[3.0]).unwrap(), 10.0);
        let diag = UnboundedProblem::new(
            vec![vec![parse("1 + x1^2", 2).unwrap(), Expr::Const(0.0)], vec![Expr::Const(2.0)]],
            parse("x1^2 + x2^2", 2).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(diag.lambda_max(&[1.0, 0.0]).unwrap(), 2.0);
        let c = |v: f64| Expr::Const(v);
        let two = UnboundedProblem::new(vec![vec![c(2.0), c(1.0)], vec![c(2.0)]], parse("x1^2", 2).unwrap(), vec![0.0, 0.0]).unwrap();
        assert!((two.lambda_max(&[0.0, 0.0]).unwrap() - 3.0).abs() < 1e-15);
        let three = UnboundedProblem::new(
            vec![vec![c(2.0), c(1.0), c(0.0)], vec![c(2.0), c(0.0)], vec![c(0.5)]],
            parse("x1^2", 3).unwrap(),
            vec![0.0; 3],
        )
        .unwrap();
        assert!((three.lambda_max(&[0.0; 3]).unwrap() - 3.0).abs() < 1e-10);
        let indefinite = UnboundedProblem::new(vec![vec![c(1.0), c(2.0)], vec![c(1.0)]], parse("x1^2", 2).unwrap(), vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            indefinite.lambda_max(&[0.0, 0.0]),
            Err(UnboundedError::NotPositiveDefinite { minor: 2, .. })
        ));
    }

    #[test]
    fn worked_example_defect() {
        let p = worked();
        let w = p.prepare(&parse("exp(x1^2/4)", 1).unwrap()).unwrap();
        let grid = GridSpec::new(-6.0, 6.0, 121);
        let k = LyapunovConstants::new(3.0 / 8.0, 0.75).unwrap();
        let r = p.verify_unbounded_lyapunov(&w, k, &grid).unwrap();
        assert!(r.passed);
        for s in &r.samples {
            let wx = w.value.eval(&s.point).unwrap();
            assert!((s.defect / (-0.5 * wx) - 1.0).abs() < 1e-10, "{s:?}");
        }
        let hot = p.verify_unbounded_lyapunov(&w, LyapunovConstants::new(0.5, 0.75).unwrap(), &grid).unwrap();
        assert!(!hot.passed);
        assert!(hot.violations.iter().all(|v| v.point[0].abs() > 1.0));
    }

    #[test]
    fn identity_matrix_halves_the_classical_generator() {
        let v = parse("x1^2/2", 1).unwrap();
        let p = UnboundedProblem::new(vec![vec![Expr::Const(1.0)]], v.clone(), vec![0.0]).unwrap();
        let w = p.prepare(&parse("exp(x1^2/4)", 1).unwrap()).unwrap();
        let k = LyapunovConstants::new(0.125, 0.25).unwrap();
        let r = p.verify_unbounded_lyapunov(&w, k, &GridSpec::new(-10.0, 10.0, 401)).unwrap();
        assert!(r.passed);
        let classical = crate::diffusion::DiffusionProblem::new(v, vec![0.0]).unwrap();
        let full = LyapunovConstants::new(0.25, 0.5).unwrap();
        for s in r.samples.iter().step_by(17) {
            let d = classical.lyapunov_defect(&w, full, &s.point).unwrap();
            assert!((s.defect - 0.5 * d).abs() <= 1e-12 * w.value.eval(&s.point).unwrap());
        }
    }

    #[test]
    fn weighted_certificate_worked_example() {
        let p = worked();
        let k = LyapunovConstants::new(3.0 / 8.0, 0.75).unwrap();
        let cert = p.weighted_certificate(k, 0.5, 30, &WeightedOracleOptions::default()).unwrap();
        let oracle = cert.oracle.as_ref().unwrap();
        assert_eq!(oracle.verdict, Verdict::Finite);
        assert!((oracle.value - 2.0 * 2f64.sqrt()).abs() < 1e-6, "{}", oracle.value);
        // μλ_max = 1 + E[x²] = 3/2
        assert!((cert.mu_lambda.value - 1.5).abs() < 1e-8);
        assert!(cert.total_bound >= oracle.value);
        assert!(matches!(
            p.weighted_certificate(k, 0.62, 30, &WeightedOracleOptions::default()),
            Err(UnboundedError::Moments(MomentsError::DeltaTooLarge { .. }))
        ));
    }

    #[test]
    fn conservative_lambda_covers_neighbours() {
        let p = worked();
        let grid = GridSpec::new(-2.0, 2.0, 5);
        let v = p.conservative_lambda_max(&grid).unwrap();
        // nodes -2,-1,0,1,2 with λ = 5,2,1,2,5
        let got: Vec<f64> = v.iter().map(|(_, l)| *l).collect();
        assert_eq!(got, vec![5.0, 5.0, 2.0, 5.0, 5.0]);
    }
}
