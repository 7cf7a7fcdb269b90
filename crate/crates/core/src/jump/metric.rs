use serde::{Deserialize, Serialize};

use super::{BirthDeathChain, ChainTable, JumpError};

/// Prefix sums of `b_k^{−1/2}` with every term rounded to a common power-of-
/// two quantum, chosen so that all partial sums are exact doubles. Path
/// additivity `ρ(i,j) + ρ(j,k) = ρ(i,k)` then holds without rounding.
pub(super) fn quantised_prefix(b: &[f64]) -> Vec<f64> {
    let terms: Vec<f64> = b.iter().map(|v| 1.0 / v.sqrt()).collect();
    let total: f64 = terms.iter().sum::<f64>() * (1.0 + 1e-9) + 1.0;
    let q = 2f64.powi(total.log2().ceil() as i32 - 52);
    let mut rho = Vec::with_capacity(b.len());
    let mut acc = 0.0;
    rho.push(acc);
    for t in &terms[..terms.len() - 1] {
        acc += (t / q).round() * q;
        rho.push(acc);
    }
    rho
}

/// `ρ(i, 0) = Σ_{k<i} b_k^{−1/2}`.
pub fn intrinsic_rho(ch: &BirthDeathChain, i: usize) -> Result<f64, JumpError> {
    if i == 0 {
        return Ok(0.0);
    }
    Ok(ch.tabulate(i)?.rho(i))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Bounded,
    Unbounded,
    Inconclusive,
}

/// `K = max_i |ρ²(i+1,0) − ρ²(i,0)|` over the scan, with a verdict on
/// whether the increments stay bounded beyond it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub k: f64,
    /// Index `i` of the maximising step `i → i+1`.
    pub argmax: usize,
    pub verdict: Trend,
    /// Log-log slope of the increments over the last decade.
    pub tail_slope: f64,
    pub horizon: usize,
}

const TREND_MARGIN: f64 = 0.05;

/// Scans increments up to `i_max`. Bounded: the increments decrease over
/// the last decade (slope below −0.05) and the maximum lies before it.
/// Unbounded: slope above +0.05.
pub fn jump_metric_k(t: &ChainTable) -> KEstimate {
    let i_max = t.i_max;
    let inc = |i: usize| {
        let (a, b) = (t.rho[i], t.rho[i + 1]);
        (b - a) * (b + a)
    };
    let mut k = 0.0;
    let mut argmax = 0;
    for i in 0..i_max {
        let v = inc(i);
        if v > k {
            k = v;
            argmax = i;
        }
    }
    let from = (i_max / 10).max(1);
    let tail_slope = log_log_slope((from..i_max).map(|i| (i as f64, inc(i))));
    let verdict = if tail_slope < -TREND_MARGIN && argmax < from {
        Trend::Bounded
    } else if tail_slope > TREND_MARGIN {
        Trend::Unbounded
    } else {
        Trend::Inconclusive
    };
    KEstimate {
        k,
        argmax,
        verdict,
        tail_slope,
        horizon: i_max,
    }
}

pub(super) fn log_log_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        if x > 0.0 && y > 0.0 {
            let (lx, ly) = (x.ln(), y.ln());
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            n += 1.0;
        }
    }
    if n < 2.0 {
        return f64::NAN;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// `sup_i Γ_ν(ρ, ρ)(i)` with `Γ_ν(ρ,ρ)(i) = ½[b_i(ρ(i+1)−ρ(i))² + d_i(ρ(i−1)−ρ(i))²]`,
/// over `0 ≤ i ≤ i_max`, and the index attaining it.
pub fn carre_du_champ_rho(t: &ChainTable) -> (f64, usize) {
    let mut best = (0.0, 0);
    for i in 0..=t.i_max {
        let up = t.rho[i + 1] - t.rho[i];
        let down = if i > 0 { t.rho[i - 1] - t.rho[i] } else { 0.0 };
        let g = 0.5 * (t.b[i] * up * up + t.d[i] * down * down);
        if g > best.0 {
            best = (g, i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::Rate;
    use super::*;

    #[test]
    fn rho_examples() {
        let ch = BirthDeathChain::log_family(2.0, 1.0);
        assert_eq!(intrinsic_rho(&ch, 0).unwrap(), 0.0);
        assert_eq!(intrinsic_rho(&ch, 1).unwrap(), 1.0);
        let r2 = intrinsic_rho(&ch, 2).unwrap();
        assert!((r2 - (1.0 + 1.0 / 2f64.ln().sqrt())).abs() < 1e-12, "{r2}");
    }

    #[test]
    fn path_additivity_is_exact() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(1000).unwrap();
        for (i, j, k) in [(0, 3, 7), (5, 50, 999), (1, 1, 2), (10, 400, 1001)] {
            assert_eq!(t.rho_between(i, j) + t.rho_between(j, k), t.rho_between(i, k));
        }
    }

    #[test]
    fn k_for_log_chain() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(10_000).unwrap();
        let k = jump_metric_k(&t);
        assert_eq!(k.verdict, Trend::Bounded);
        assert_eq!(k.argmax, 1);
        assert!((k.k - 3.84494).abs() < 1e-4, "{}", k.k);
    }

    #[test]
    fn k_unbounded_examples() {
        let sqrt = Rate::formula("(i+1)^0.5").unwrap();
        let ch = BirthDeathChain::new(sqrt, Rate::formula("i*(i+1)^0.5").unwrap());
        let k = jump_metric_k(&ch.tabulate(10_000).unwrap());
        assert_eq!(k.verdict, Trend::Unbounded);
        assert!((k.tail_slope - 0.5).abs() < 0.05, "{}", k.tail_slope);

        let walk = BirthDeathChain::new(Rate::formula("1").unwrap(), Rate::formula("1").unwrap());
        let t = walk.tabulate(1000).unwrap();
        assert_eq!(t.rho(17), 17.0);
        let k = jump_metric_k(&t);
        assert_eq!(k.verdict, Trend::Unbounded);
        assert_eq!(k.k, (2 * 999 + 1) as f64);
    }

    #[test]
    fn gamma_of_rho() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(10_000).unwrap();
        let (sup, at) = carre_du_champ_rho(&t);
        assert_eq!(at, 2);
        let exact = 0.5 * (1.0 + 4.0 * 3f64.ln() / 2f64.ln());
        assert!((sup - exact).abs() < 1e-9, "{sup}");
    }
}
