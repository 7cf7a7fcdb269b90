//! Moment bounds `β̄_n ≥ ∫ d^{2n} dμ`, factorial envelopes and exponential
//! moment certificates.
//!
//! All bound arithmetic rounds upward (see [`crate::rounding`]), so every
//! `β̄_n` is an upper bound on the exact-arithmetic recursion value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rounding::{add_up, div_up, mul_down, mul_up, sqrt_down, sqrt_up, sub_down};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MomentsError {
    #[error("c must be positive (got {0})")]
    NonPositiveC(f64),
    #[error("b must be non-negative (got {0})")]
    NegativeB(f64),
    #[error("λ1' must be positive (got {0})")]
    NonPositiveLambda1(f64),
    #[error("λ2' must be non-negative (got {0})")]
    NegativeLambda2(f64),
    #[error("gozlan recursion needs nMax ≥ 2 (got {0})")]
    TooFewTerms(usize),
    #[error("γ = {gamma} does not exceed the chain growth rate {slope}")]
    GammaTooSmall { gamma: f64, slope: f64 },
    #[error("δ = {delta} is not below the threshold {threshold} ({rule})")]
    DeltaTooLarge {
        delta: f64,
        threshold: f64,
        rule: &'static str,
    },
    #[error("δ must be non-negative (got {0})")]
    NegativeDelta(f64),
    #[error("δγ = {0} ≥ 1: the exponential series diverges")]
    SeriesDiverges(f64),
    #[error("envelope crossover n* = {0} exceeds the supported range")]
    CrossoverTooFar(f64),
    #[error("bound sequence is empty or contains a non-finite or negative entry")]
    BadBounds,
}

/// Upper bounds from the moment recursion
/// `β̄_n = ((n−1)²/c)β̄_{n−2} + (b/c)β̄_{n−1}`, `β̄_0 = 1`, `β̄_1 = b/c`.
pub fn recursion_bounds(c: f64, b: f64, n_max: usize) -> Result<Vec<f64>, MomentsError> {
    check_cb(c, b)?;
    let b_over_c = div_up(b, c);
    let mut beta = Vec::with_capacity(n_max + 1);
    beta.push(1.0);
    if n_max >= 1 {
        beta.push(b_over_c);
    }
    for n in 2..=n_max {
        let k = ((n - 1) * (n - 1)) as f64;
        let t1 = mul_up(div_up(k, c), beta[n - 2]);
        let t2 = mul_up(b_over_c, beta[n - 1]);
        beta.push(add_up(t1, t2));
    }
    Ok(beta)
}

/// Upper bounds from the one-step chain `β̄_n = (b/c + n/√c)β̄_{n−1}`.
pub fn chain_bounds(c: f64, b: f64, n_max: usize) -> Result<Vec<f64>, MomentsError> {
    check_cb(c, b)?;
    let g = Growth::lyapunov(c, b);
    Ok(chain_from(&g, n_max))
}

fn chain_from(g: &Growth, n_max: usize) -> Vec<f64> {
    let mut beta = Vec::with_capacity(n_max + 1);
    beta.push(1.0);
    for n in 1..=n_max {
        beta.push(mul_up(g.factor(n), beta[n - 1]));
    }
    beta
}

fn check_cb(c: f64, b: f64) -> Result<(), MomentsError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(MomentsError::NonPositiveC(c));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(MomentsError::NegativeB(b));
    }
    Ok(())
}

fn elementwise_min(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).collect()
}

/// Linear chain growth `β̄_n ≤ (offset + slope·n) β̄_{n−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub offset: f64,
    pub slope: f64,
}

impl Growth {
    /// `b/c + n/√c`.
    pub fn lyapunov(c: f64, b: f64) -> Self {
        Growth {
            offset: div_up(b, c),
            slope: div_up(1.0, sqrt_down(c)),
        }
    }

    /// `λ2' + √λ1'(n + 1)`.
    pub fn gozlan(lambda1p: f64, lambda2p: f64) -> Self {
        let r = sqrt_up(lambda1p);
        Growth {
            offset: add_up(lambda2p, r),
            slope: r,
        }
    }

    pub fn factor(&self, n: usize) -> f64 {
        add_up(self.offset, mul_up(self.slope, n as f64))
    }

    /// Smallest `n ≥ 1` with `offset + slope·n ≤ γ n`.
    pub fn crossover(&self, gamma: f64) -> Result<f64, MomentsError> {
        if !(gamma > self.slope) {
            return Err(MomentsError::GammaTooSmall {
                gamma,
                slope: self.slope,
            });
        }
        let gap = sub_down(gamma, self.slope);
        Ok(div_up(self.offset, gap).ceil().max(1.0))
    }
}

/// `max_n β̄_n / (γⁿ n!)` together with the crossover index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Maximum over `n ≥ 0`; at least `β̄_0`.
    pub c_env: f64,
    /// Maximum over `n ≥ 1`.
    pub c_env_from_one: f64,
    pub ln_c_env: f64,
    /// Index attaining `c_env`.
    pub argmax: usize,
    /// From `n*` on the chain factor is at most `γn`, so the ratios no
    /// longer increase.
    pub n_star: usize,
}

const MAX_CROSSOVER: f64 = 1e9;

/// Envelope constant `C` with `β̄_n ≤ Cγⁿn!` for every `n`.
///
/// Indices past the supplied bounds, or past the first overflowed bound,
/// are covered by extending the sequence with the chain factor up to the
/// crossover `n*`.
pub fn factorial_envelope(bounds: &[f64], gamma: f64, growth: Growth) -> Result<Envelope, MomentsError> {
    if bounds.is_empty() || bounds.iter().any(|b| b.is_nan() || *b < 0.0) {
        return Err(MomentsError::BadBounds);
    }
    let bounds = &bounds[..bounds.iter().take_while(|b| b.is_finite()).count()];
    if bounds.is_empty() {
        return Err(MomentsError::BadBounds);
    }
    let n_star_f = growth.crossover(gamma)?;
    if n_star_f > MAX_CROSSOVER {
        return Err(MomentsError::CrossoverTooFar(n_star_f));
    }
    let n_star = n_star_f as usize;
    let ln_gamma = gamma.ln();

    // (ln ratio, directed linear ratio when available, index)
    let mut best = (bounds[0].ln(), Some(bounds[0]), 0usize);
    let mut best_from_one: (f64, Option<f64>) = (f64::NEG_INFINITY, None);
    let mut consider = |ln_r: f64, lin: Option<f64>, n: usize| {
        if ln_r > best.0 {
            best = (ln_r, lin, n);
        }
        if n >= 1 && ln_r > best_from_one.0 {
            best_from_one = (ln_r, lin);
        }
    };

    // directed linear arithmetic while everything fits, log space after
    let mut den = 1.0f64;
    let mut ln_fact = 0.0f64;
    for (n, &beta) in bounds.iter().enumerate().skip(1) {
        den = mul_down(mul_down(den, gamma), n as f64);
        ln_fact += (n as f64).ln();
        let lin = (den.is_finite() && den > 0.0)
            .then(|| div_up(beta, den))
            .filter(|r| *r > 0.0 && r.is_finite());
        match lin {
            Some(r) => consider(r.ln(), Some(r), n),
            None => consider(log_ratio(beta.ln(), n, ln_gamma, ln_fact), None, n),
        }
    }
    let last = bounds.len() - 1;
    let mut ln_beta = bounds[last].ln();
    for n in last + 1..=n_star {
        ln_beta += growth.factor(n).ln();
        ln_fact += (n as f64).ln();
        consider(log_ratio(ln_beta, n, ln_gamma, ln_fact), None, n);
    }

    Ok(Envelope {
        c_env: best.1.unwrap_or_else(|| exp_up(best.0)),
        c_env_from_one: best_from_one.1.unwrap_or_else(|| exp_up(best_from_one.0)),
        ln_c_env: best.0,
        argmax: best.2,
        n_star,
    })
}

// Sums of logarithms carry relative error ~ n·ε; the slack covers it.
fn log_ratio(ln_beta: f64, n: usize, ln_gamma: f64, ln_fact: f64) -> f64 {
    let nf = n as f64;
    let r = ln_beta - nf * ln_gamma - ln_fact;
    let mass = ln_beta.abs() + nf * ln_gamma.abs() + ln_fact + 1.0;
    r + 8.0 * (nf + 1.0) * f64::EPSILON * mass
}

fn exp_up(l: f64) -> f64 {
    let v = l.exp();
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    // libm exp is faithful, so one ulp upward covers its error
    v.next_up()
}

/// `C/(1 − δγ)`, an upper bound on `∫e^{δd²}dμ` when `β̄_n ≤ Cγⁿn!`.
pub fn exp_moment_bound(delta: f64, gamma: f64, c_env: f64) -> Result<f64, MomentsError> {
    let (v, _) = exp_moment_bound_ln(delta, gamma, c_env, c_env.ln())?;
    Ok(v)
}

fn exp_moment_bound_ln(delta: f64, gamma: f64, c_env: f64, ln_c_env: f64) -> Result<(f64, f64), MomentsError> {
    if delta < 0.0 {
        return Err(MomentsError::NegativeDelta(delta));
    }
    if delta == 0.0 {
        return Ok((c_env, ln_c_env));
    }
    let dg = mul_up(delta, gamma);
    if dg >= 1.0 {
        return Err(MomentsError::SeriesDiverges(dg));
    }
    let slack = sub_down(1.0, dg);
    let ln = ln_c_env - slack.ln() + 4.0 * f64::EPSILON * (ln_c_env.abs() + slack.ln().abs());
    Ok((div_up(c_env, slack), ln))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Lyapunov,
    Gozlan,
}

/// Constants that produced a certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CertificateConstants {
    Lyapunov { c: f64, b: f64 },
    Gozlan { lambda1p: f64, lambda2p: f64 },
}

impl CertificateConstants {
    pub fn kind(&self) -> CertificateKind {
        match self {
            CertificateConstants::Lyapunov { .. } => CertificateKind::Lyapunov,
            CertificateConstants::Gozlan { .. } => CertificateKind::Gozlan,
        }
    }

    pub fn growth(&self) -> Growth {
        match *self {
            CertificateConstants::Lyapunov { c, b } => Growth::lyapunov(c, b),
            CertificateConstants::Gozlan { lambda1p, lambda2p } => Growth::gozlan(lambda1p, lambda2p),
        }
    }

    /// Supremum of admissible `δ`.
    pub fn delta_threshold(&self) -> f64 {
        match *self {
            CertificateConstants::Lyapunov { c, .. } => c.sqrt(),
            CertificateConstants::Gozlan { lambda1p, .. } => 1.0 / lambda1p.sqrt(),
        }
    }
}

/// Explicit bound `∫e^{δd²}dμ ≤ exp_bound`, with its moment bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCertificate {
    pub constants: CertificateConstants,
    pub delta: f64,
    pub gamma: f64,
    pub growth: Growth,
    pub c_env: f64,
    pub c_env_from_one: f64,
    pub ln_c_env: f64,
    pub n_star: usize,
    pub beta_bounds: Vec<f64>,
    /// `+∞` when the bound exceeds the double range; see `ln_exp_bound`.
    pub exp_bound: f64,
    pub ln_exp_bound: f64,
}

impl MomentCertificate {
    pub fn kind(&self) -> CertificateKind {
        self.constants.kind()
    }
}

/// Certificate from Lyapunov constants `(c, b)` for `0 ≤ δ < √c`, with
/// `γ` at the midpoint of `(1/√c, 1/δ)`.
pub fn certify(c: f64, b: f64, delta: f64, n_max: usize) -> Result<MomentCertificate, MomentsError> {
    check_cb(c, b)?;
    let rec = recursion_bounds(c, b, n_max)?;
    let chain = chain_bounds(c, b, n_max)?;
    assemble(
        CertificateConstants::Lyapunov { c, b },
        elementwise_min(&rec, &chain),
        delta,
        None,
        "δ < √c",
    )
}

/// As [`certify`] with an explicit `γ ∈ (1/√c, 1/δ)`.
pub fn certify_with_gamma(c: f64, b: f64, delta: f64, n_max: usize, gamma: f64) -> Result<MomentCertificate, MomentsError> {
    check_cb(c, b)?;
    let rec = recursion_bounds(c, b, n_max)?;
    let chain = chain_bounds(c, b, n_max)?;
    assemble(
        CertificateConstants::Lyapunov { c, b },
        elementwise_min(&rec, &chain),
        delta,
        Some(gamma),
        "δ < √c",
    )
}

fn assemble(
    constants: CertificateConstants,
    beta_bounds: Vec<f64>,
    delta: f64,
    gamma: Option<f64>,
    rule: &'static str,
) -> Result<MomentCertificate, MomentsError> {
    if !(delta >= 0.0) {
        return Err(MomentsError::NegativeDelta(delta));
    }
    let threshold = constants.delta_threshold();
    if delta >= threshold {
        return Err(MomentsError::DeltaTooLarge { delta, threshold, rule });
    }
    let growth = constants.growth();
    let gamma = match gamma {
        Some(g) => g,
        None if delta > 0.0 => 0.5 * (growth.slope + 1.0 / delta),
        None => trivial_gamma(&beta_bounds, growth),
    };
    if delta > 0.0 && mul_up(delta, gamma) >= 1.0 {
        return Err(MomentsError::SeriesDiverges(mul_up(delta, gamma)));
    }
    let env = factorial_envelope(&beta_bounds, gamma, growth)?;
    let (exp_bound, ln_exp_bound) = exp_moment_bound_ln(delta, gamma, env.c_env, env.ln_c_env)?;
    Ok(MomentCertificate {
        constants,
        delta,
        gamma,
        growth,
        c_env: env.c_env,
        c_env_from_one: env.c_env_from_one,
        ln_c_env: env.ln_c_env,
        n_star: env.n_star,
        beta_bounds,
        exp_bound,
        ln_exp_bound,
    })
}

// For δ = 0 any γ works; pick one with every ratio ≤ β̄_0 so the bound
// collapses to 1.
fn trivial_gamma(bounds: &[f64], growth: Growth) -> f64 {
    let mut g = add_up(growth.offset, growth.slope).max(2.0 * growth.slope);
    let mut ln_fact = 0.0;
    for (n, b) in bounds.iter().enumerate().skip(1) {
        ln_fact += (n as f64).ln();
        g = g.max(((b.ln() - ln_fact) / n as f64).exp());
    }
    g * (1.0 + 1e-9)
}

/// Gozlan-type recursion `β̄_n = λ1'n²β̄_{n−2} + λ2'β̄_{n−1}` for `n ≥ 3`,
/// started from the root `s` of `s² − λ2's − 4λ1' = 0`: `β̄_1 = s`,
/// `β̄_2 = s²`.
pub fn gozlan_recursion_bounds(lambda1p: f64, lambda2p: f64, n_max: usize) -> Result<Vec<f64>, MomentsError> {
    check_lambdas(lambda1p, lambda2p)?;
    if n_max < 2 {
        return Err(MomentsError::TooFewTerms(n_max));
    }
    let disc = add_up(mul_up(lambda2p, lambda2p), mul_up(16.0, lambda1p));
    let s = 0.5 * add_up(lambda2p, sqrt_up(disc));
    let mut beta = vec![1.0, s, mul_up(s, s)];
    for n in 3..=n_max {
        let k = (n * n) as f64;
        let t1 = mul_up(mul_up(lambda1p, k), beta[n - 2]);
        let t2 = mul_up(lambda2p, beta[n - 1]);
        beta.push(add_up(t1, t2));
    }
    Ok(beta)
}

/// Chain variant `β̄_n = (λ2' + √λ1'(n+1))β̄_{n−1}`.
pub fn gozlan_chain_bounds(lambda1p: f64, lambda2p: f64, n_max: usize) -> Result<Vec<f64>, MomentsError> {
    check_lambdas(lambda1p, lambda2p)?;
    Ok(chain_from(&Growth::gozlan(lambda1p, lambda2p), n_max))
}

fn check_lambdas(l1: f64, l2: f64) -> Result<(), MomentsError> {
    if !(l1 > 0.0 && l1.is_finite()) {
        return Err(MomentsError::NonPositiveLambda1(l1));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(MomentsError::NegativeLambda2(l2));
    }
    Ok(())
}

/// Certificate from Gozlan constants for `0 ≤ δ < 1/√λ1'`.
pub fn gozlan_certify(lambda1p: f64, lambda2p: f64, delta: f64, n_max: usize) -> Result<MomentCertificate, MomentsError> {
    let rec = gozlan_recursion_bounds(lambda1p, lambda2p, n_max.max(2))?;
    let chain = gozlan_chain_bounds(lambda1p, lambda2p, n_max.max(2))?;
    assemble(
        CertificateConstants::Gozlan { lambda1p, lambda2p },
        elementwise_min(&rec, &chain),
        delta,
        None,
        "δ < (λ1')^(-1/2)",
    )
}

/// `(2n − 1)!!`, the `n`-th even moment `E[X^{2n}]` of a standard normal.
pub fn double_factorial_odd(n: usize) -> f64 {
    (1..=n).map(|k| (2 * k - 1) as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: (f64, f64) = (0.25, 0.5);

    #[test]
    fn recursion_examples() {
        assert_eq!(recursion_bounds(OU.0, OU.1, 3).unwrap(), vec![1.0, 2.0, 8.0, 48.0]);
        assert_eq!(recursion_bounds(1.0, 0.0, 2).unwrap(), vec![1.0, 0.0, 1.0]);
        assert!(matches!(recursion_bounds(0.0, 1.0, 2), Err(MomentsError::NonPositiveC(_))));
    }

    #[test]
    fn recursion_dominates_gaussian_moments() {
        let b = recursion_bounds(OU.0, OU.1, 20).unwrap();
        for (n, beta) in b.iter().enumerate() {
            assert!(*beta >= double_factorial_odd(n), "n={n}: {beta}");
        }
    }

    #[test]
    fn chain_examples() {
        assert_eq!(chain_bounds(OU.0, OU.1, 2).unwrap(), vec![1.0, 4.0, 24.0]);
        assert_eq!(chain_bounds(1.0, 0.0, 3).unwrap(), vec![1.0, 1.0, 2.0, 6.0]);
        let r = recursion_bounds(OU.0, OU.1, 10).unwrap();
        let c = chain_bounds(OU.0, OU.1, 10).unwrap();
        assert!(r.iter().zip(&c).all(|(a, b)| b >= a));
    }

    #[test]
    fn envelope_examples() {
        let g = Growth::lyapunov(OU.0, OU.1);
        let e = factorial_envelope(&[1.0, 2.0, 8.0, 48.0], 2.5, g).unwrap();
        assert_eq!(e.n_star, 4);
        assert_eq!(e.c_env, 1.0);
        assert_eq!(e.c_env_from_one, 0.8);
        assert!(matches!(
            factorial_envelope(&[1.0, 2.0], 2.0, g),
            Err(MomentsError::GammaTooSmall { .. })
        ));

        let fact = Growth { offset: 0.0, slope: 1.0 };
        let bounds = [1.0, 1.0, 2.0, 6.0, 24.0];
        assert!(factorial_envelope(&bounds, 1.0, fact).is_err());
        assert_eq!(factorial_envelope(&bounds, 1.01, fact).unwrap().c_env, 1.0);
    }

    #[test]
    fn exp_bound_examples() {
        assert_eq!(exp_moment_bound(0.35, 2.5, 0.8).unwrap(), 6.4);
        assert_eq!(exp_moment_bound(0.0, 2.5, 0.8).unwrap(), 0.8);
        assert!(matches!(exp_moment_bound(0.4, 2.5, 0.8), Err(MomentsError::SeriesDiverges(_))));
    }

    #[test]
    fn certify_ou() {
        let cert = certify(OU.0, OU.1, 0.4, 20).unwrap();
        assert_eq!(cert.gamma, 2.25);
        assert!(cert.delta * cert.gamma < 1.0);
        assert!(cert.exp_bound.is_finite());
        assert!(cert.exp_bound >= 1.0 / 0.2f64.sqrt());
        assert!(matches!(certify(OU.0, OU.1, 0.5, 20), Err(MomentsError::DeltaTooLarge { .. })));
        let near = certify(OU.0, OU.1, 0.5 - 1e-6, 20).unwrap();
        assert!(near.exp_bound.is_finite() || near.ln_exp_bound.is_finite());
        assert!(certify(OU.0, OU.1, 0.499, 20).is_ok());
    }

    #[test]
    fn zero_delta_is_trivial() {
        let cert = certify(OU.0, OU.1, 0.0, 20).unwrap();
        assert_eq!(cert.c_env, 1.0);
        assert_eq!(cert.exp_bound, 1.0);
        let g = gozlan_certify(1.0, 1.0, 0.0, 20).unwrap();
        assert_eq!(g.exp_bound, 1.0);
    }

    #[test]
    fn gozlan_examples() {
        let b = gozlan_recursion_bounds(1.0, 1.0, 4).unwrap();
        let s = (1.0 + 17f64.sqrt()) / 2.0;
        assert!((b[1] - s).abs() < 1e-14);
        assert!((b[2] - (s + 4.0)).abs() < 1e-13);
        let b = gozlan_recursion_bounds(1.0, 0.0, 2).unwrap();
        assert_eq!(b, vec![1.0, 2.0, 4.0]);
        assert!(gozlan_recursion_bounds(0.0, 1.0, 3).is_err());
        assert!(gozlan_recursion_bounds(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn gozlan_chain_is_eventually_dominated() {
        let g = Growth::gozlan(4.0, 3.0);
        let n_star = g.crossover(2.5).unwrap() as usize;
        assert!(g.factor(n_star) <= 2.5 * n_star as f64);
        assert!(g.crossover(2.0).is_err());
    }

    #[test]
    fn huge_constants_stay_in_log_space() {
        let cert = gozlan_certify(50.0, 1e6, 0.1, 30).unwrap();
        assert!(cert.ln_exp_bound.is_finite());
        assert!(cert.ln_exp_bound > 700.0);
    }

    #[test]
    fn overflowing_bounds_fall_back_to_the_chain() {
        let cert = gozlan_certify(84.7, 189_612.95, 0.05, 64).unwrap();
        assert!(cert.beta_bounds.last().unwrap().is_infinite());
        assert!(cert.ln_exp_bound.is_finite());
        let short = gozlan_certify(84.7, 189_612.95, 0.05, 20).unwrap();
        assert!(cert.ln_exp_bound <= short.ln_exp_bound + 1e-9 * short.ln_exp_bound);
    }
}
