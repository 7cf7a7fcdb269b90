use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Evidence, OracleError, OracleReport, Verdict};
use crate::expr::{EvalError, Expr};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub seed: u64,
    /// Recorded steps after warm-up; at least 10⁴.
    pub steps: usize,
    /// Starting point; the origin when absent.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default = "default_target")]
    pub target_acceptance: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_target() -> f64 {
    0.35
}

fn default_batches() -> usize {
    50
}

impl McOptions {
    pub fn new(seed: u64, steps: usize) -> Self {
        McOptions {
            seed,
            steps,
            start: None,
            target_acceptance: default_target(),
            batches: default_batches(),
        }
    }
}

const TUNE_WINDOW: usize = 100;

/// `E_μ[f]` for `μ ∝ e^{−V}` by random-walk Metropolis.
///
/// The proposal scale is adapted towards the target acceptance rate during
/// a warm-up of `steps / 5` moves and then frozen. The error estimate is
/// the batch-means standard error. An acceptance rate outside `[0.1, 0.7]`
/// makes the verdict inconclusive.
pub fn mc_expectation(v: &Expr, f: &Expr, m: usize, opts: &McOptions) -> Result<OracleReport, OracleError> {
    mc_expectation_with(v, &|x: &[f64]| f.eval(x), m, opts)
}

/// [`mc_expectation`] for an integrand given as a closure.
pub fn mc_expectation_with(
    v: &Expr,
    f: &dyn Fn(&[f64]) -> Result<f64, EvalError>,
    m: usize,
    opts: &McOptions,
) -> Result<OracleReport, OracleError> {
    if m == 0 {
        return Err(OracleError::UnsupportedDimension(0));
    }
    if opts.steps < 10_000 {
        return Err(OracleError::Invalid(format!("need at least 10^4 steps, got {}", opts.steps)));
    }
    if opts.batches < 2 || opts.steps < opts.batches {
        return Err(OracleError::Invalid("need at least two non-empty batches".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = opts.start.clone().unwrap_or_else(|| vec![0.0; m]);
    if x.len() != m {
        return Err(OracleError::Invalid(format!("start point has {} coordinates, expected {m}", x.len())));
    }
    let mut vx = v.eval(&x)?;
    if !vx.is_finite() {
        return Err(OracleError::Invalid(format!("V is not finite at the start point ({vx})")));
    }
    let mut scale = 2.4 / (m as f64).sqrt();
    let mut proposal = vec![0.0; m];

    let mut step = |x: &mut Vec<f64>, vx: &mut f64, scale: f64, rng: &mut ChaCha8Rng| -> Result<bool, OracleError> {
        for (p, xi) in proposal.iter_mut().zip(x.iter()) {
            let z: f64 = rng.sample(StandardNormal);
            *p = xi + scale * z;
        }
        let vp = v.eval(&proposal)?;
        let u: f64 = rng.gen();
        if vp.is_finite() && u.ln() < *vx - vp {
            x.copy_from_slice(&proposal);
            *vx = vp;
            Ok(true)
        } else {
            Ok(false)
        }
    };

    let warmup = opts.steps / 5;
    let mut window = 0usize;
    for k in 0..warmup {
        window += step(&mut x, &mut vx, scale, &mut rng)? as usize;
        if (k + 1) % TUNE_WINDOW == 0 {
            let rate = window as f64 / TUNE_WINDOW as f64;
            scale *= (2.0 * (rate - opts.target_acceptance)).exp();
            window = 0;
        }
    }

    let per_batch = opts.steps / opts.batches;
    let mut batch_means = Vec::with_capacity(opts.batches);
    let mut accepted = 0usize;
    for _ in 0..opts.batches {
        let mut s = 0.0;
        for _ in 0..per_batch {
            accepted += step(&mut x, &mut vx, scale, &mut rng)? as usize;
            s += f(&x)?;
        }
        batch_means.push(s / per_batch as f64);
    }
    let b = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / b;
    let var = batch_means.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let se = (var / b).sqrt();
    let steps = per_batch * opts.batches;
    let acceptance = accepted as f64 / steps as f64;
    let flagged = !(0.1..=0.7).contains(&acceptance);
    Ok(OracleReport {
        value: mean,
        error_estimate: se,
        verdict: if flagged { Verdict::Inconclusive } else { Verdict::Finite },
        evidence: Evidence::Samples {
            steps,
            batches: opts.batches,
            acceptance,
            step_size: scale,
            acceptance_flagged: flagged,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn gaussian_second_moment() {
        let v = parse("(x1^2 + x2^2 + x3^2)/2", 3).unwrap();
        let f = parse("x1^2", 3).unwrap();
        let r = mc_expectation(&v, &f, 3, &McOptions::new(7, 200_000)).unwrap();
        assert_eq!(r.verdict, Verdict::Finite);
        assert!((r.value - 1.0).abs() <= 3.0 * r.error_estimate, "{} ± {}", r.value, r.error_estimate);
        let Evidence::Samples { acceptance, .. } = r.evidence else { panic!() };
        assert!((acceptance - 0.35).abs() < 0.05, "{acceptance}");
    }

    #[test]
    fn constant_function_is_exact() {
        let v = parse("(x1^2 + x2^2 + x3^2)/2", 3).unwrap();
        let r = mc_expectation(&v, &Expr::Const(1.0), 3, &McOptions::new(1, 10_000)).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.error_estimate, 0.0);
    }

    #[test]
    fn reproducible() {
        let v = parse("x1^4/4", 1).unwrap();
        let f = parse("x1^2", 1).unwrap();
        let a = mc_expectation(&v, &f, 1, &McOptions::new(42, 20_000)).unwrap();
        let b = mc_expectation(&v, &f, 1, &McOptions::new(42, 20_000)).unwrap();
        assert_eq!(a, b);
        let c = mc_expectation(&v, &f, 1, &McOptions::new(43, 20_000)).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn heavy_tailed_integrand() {
        // E[e^{0.4x²}] = 1/√0.2 under N(0, 1). Since E[f²] = ∞ the batch-means
        // error bar is not a reliable scale, so only a relative band is checked.
        let v = parse("x1^2/2", 1).unwrap();
        let f = parse("exp(0.4*x1^2)", 1).unwrap();
        let exact = 5f64.sqrt();
        for seed in 0..4 {
            let r = mc_expectation(&v, &f, 1, &McOptions::new(seed, 500_000)).unwrap();
            assert!((r.value - exact).abs() < 0.1 * exact, "seed {seed}: {}", r.value);
        }
    }

    #[test]
    fn too_few_steps() {
        let v = parse("x1^2", 1).unwrap();
        assert!(mc_expectation(&v, &v, 1, &McOptions::new(0, 100)).is_err());
    }
}
