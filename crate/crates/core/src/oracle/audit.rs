use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{BinOp, EvalError, Expr, Func};

/// Finite-difference comparison for one partial derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateAudit {
    pub index: usize,
    pub symbolic: f64,
    pub central_h: f64,
    pub central_half_h: f64,
    /// `|D_sym − D_R| / max(|D_sym|, 1)` with the Richardson value
    /// `D_R = (4·D_{h/2} − D_h)/3`.
    pub rel_error: f64,
    /// `log₂(err_h / err_{h/2})`, present only when both errors sit well
    /// above the rounding floor.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub coordinates: Vec<CoordinateAudit>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl AuditReport {
    /// Coordinates where the convergence order could be measured.
    pub fn measured_orders(&self) -> impl Iterator<Item = f64> + '_ {
        self.coordinates.iter().filter_map(|c| c.order)
    }
}

const AUDIT_TOL: f64 = 1e-5;
const MIN_ORDER: f64 = 1.9;

/// Compares each symbolic partial derivative of `e` at `x` with central
/// differences at steps `h` and `h/2`.
///
/// A coordinate passes when the Richardson-extrapolated difference agrees
/// to 1e−5 relative and, where measurable, the error shrinks at order ≥ 1.9.
pub fn finite_diff_audit(e: &Expr, x: &[f64], h: f64) -> Result<AuditReport, EvalError> {
    let mut coordinates = Vec::with_capacity(x.len());
    let mut passed = true;
    let mut max_rel = 0.0f64;
    for i in 0..x.len() {
        let symbolic = e.differentiate(i).eval(x)?;
        let (central_h, mag_h) = central(e, x, i, h)?;
        let (central_half_h, mag_half) = central(e, x, i, 0.5 * h)?;
        let err_h = (central_h - symbolic).abs();
        let err_half = (central_half_h - symbolic).abs();
        // rounding in f(x ± h) is amplified by 1/h
        let floor_h = f64::EPSILON * mag_h / h;
        let floor_half = 2.0 * f64::EPSILON * mag_half / h;
        let order = (err_half > 10.0 * floor_half && err_h > 10.0 * floor_h).then(|| (err_h / err_half).log2());
        let richardson = (4.0 * central_half_h - central_h) / 3.0;
        let rel_error = ((richardson - symbolic).abs() - 2.0 * floor_half).max(0.0) / symbolic.abs().max(1.0);
        let ok = rel_error <= AUDIT_TOL && order.is_none_or(|p| p >= MIN_ORDER);
        passed &= ok;
        max_rel = max_rel.max(rel_error);
        coordinates.push(CoordinateAudit {
            index: i,
            symbolic,
            central_h,
            central_half_h,
            rel_error,
            order,
        });
    }
    Ok(AuditReport {
        coordinates,
        max_rel_error: max_rel,
        tolerance: AUDIT_TOL,
        passed,
    })
}

fn central(e: &Expr, x: &[f64], i: usize, h: f64) -> Result<(f64, f64), EvalError> {
    let mut p = x.to_vec();
    p[i] = x[i] + h;
    let fp = e.eval(&p)?;
    let mp = node_mass(e, &p)?;
    p[i] = x[i] - h;
    let fm = e.eval(&p)?;
    let mm = node_mass(e, &p)?;
    Ok(((fp - fm) / (2.0 * h), mp.max(mm)))
}

// Sum of |value| over every node: each rounding error is relative to the
// node it happens in, so this bounds the absolute noise in the result
// better than |f| when intermediate values cancel.
fn node_mass(e: &Expr, x: &[f64]) -> Result<f64, EvalError> {
    let own = e.eval(x)?.abs();
    Ok(own
        + match e {
            Expr::Const(_) | Expr::Var(_) => 0.0,
            Expr::Unary(_, a) => node_mass(a, x)?,
            Expr::Binary(_, a, b) => node_mass(a, x)? + node_mass(b, x)?,
        })
}

/// A random expression in `m` variables that is smooth and defined on all
/// of ℝ^m, built from guarded compositions such as `log(1+f²)` and
/// `f/(1+g²)`.
pub fn random_smooth_expression<R: Rng + ?Sized>(rng: &mut R, m: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return if m > 0 && rng.gen_bool(0.7) {
            Expr::Var(rng.gen_range(0..m))
        } else {
            Expr::Const((rng.gen_range(-8..=8) as f64) * 0.25)
        };
    }
    let sub = |rng: &mut R| random_smooth_expression(rng, m, depth - 1);
    let one_plus_sq = |f: Expr| Expr::add(Expr::Const(1.0), Expr::pow(f, Expr::Const(2.0)));
    match rng.gen_range(0..10) {
        0 => Expr::add(sub(rng), sub(rng)),
        1 => Expr::sub(sub(rng), sub(rng)),
        2 => Expr::mul(sub(rng), sub(rng)),
        3 => {
            let (f, g) = (sub(rng), sub(rng));
            Expr::div(f, one_plus_sq(g))
        }
        4 => {
            let f = sub(rng);
            Expr::apply(Func::Exp, Expr::div(f.clone(), one_plus_sq(f)))
        }
        5 => Expr::apply(Func::Log, one_plus_sq(sub(rng))),
        6 => Expr::apply(Func::Sqrt, one_plus_sq(sub(rng))),
        7 => Expr::pow(sub(rng), Expr::Const(rng.gen_range(2..=3) as f64)),
        8 => Expr::pow(one_plus_sq(sub(rng)), Expr::Const(1.5)),
        _ => Expr::Binary(BinOp::Mul, Box::new(Expr::Const(rng.gen_range(1..=4) as f64 * 0.5)), Box::new(sub(rng))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_weight_audit() {
        let e = parse("exp(x1^2/4)", 1).unwrap();
        let r = finite_diff_audit(&e, &[1.0], 1e-4).unwrap();
        assert!(r.passed);
        assert!(r.max_rel_error <= 1e-7, "{}", r.max_rel_error);
        let p = r.coordinates[0].order.expect("order measurable");
        assert!((1.9..=2.1).contains(&p), "{p}");
    }

    #[test]
    fn linear_is_exact_up_to_rounding() {
        let e = parse("3*x1 - 2*x2 + 1", 2).unwrap();
        let r = finite_diff_audit(&e, &[0.3, -1.7], 1e-4).unwrap();
        assert!(r.passed);
        assert!(r.max_rel_error < 1e-11, "{}", r.max_rel_error);
        assert_eq!(r.measured_orders().count(), 0);
    }

    #[test]
    fn random_expressions_are_smooth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let e = random_smooth_expression(&mut rng, 2, 4);
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            assert!(e.eval(&x).is_ok(), "{e} at {x:?}");
        }
    }

    #[test]
    fn random_expressions_pass_the_audit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut measured = 0;
        for _ in 0..1000 {
            let e = random_smooth_expression(&mut rng, 2, 4);
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let r = finite_diff_audit(&e, &x, 1e-3).unwrap();
            assert!(r.passed, "{e} at {x:?}: {r:?}");
            measured += r.measured_orders().count();
        }
        assert!(measured > 500, "{measured}");
    }
}
