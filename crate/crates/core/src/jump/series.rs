use serde::{Deserialize, Serialize};

use super::{ChainTable, JumpError};
use crate::oracle::{series_sum, SeriesOptions, SeriesSummary, Verdict};

/// `μ` normalised over `0..=i_max`, with the verdict on `Σ r_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryMeasure {
    pub mu: Vec<f64>,
    pub ln_mu: Vec<f64>,
    /// `ln Σ_{i ≤ i_max} r_i`.
    pub ln_z: f64,
    pub summary: SeriesSummary,
}

pub fn stationary_measure(t: &ChainTable) -> Result<StationaryMeasure, JumpError> {
    let n = t.i_max;
    let summary = series_sum(|i| t.ln_r[i], 0, n, &SeriesOptions::default());
    let from = (n / 10).max(1);
    let ratio_at_least_one = (from..n).all(|i| t.ln_r[i + 1] >= t.ln_r[i]);
    if summary.report.verdict == Verdict::Divergent || ratio_at_least_one {
        return Err(JumpError::NoStationaryMeasure(format!(
            "tail slope {:.3}, r_(i+1)/r_i ≥ 1 over the last decade: {ratio_at_least_one}",
            summary.tail_slope
        )));
    }
    let ln_z = summary.ln_sum;
    let ln_mu: Vec<f64> = t.ln_r[..=n].iter().map(|l| l - ln_z).collect();
    let mu = ln_mu.iter().map(|l| l.exp()).collect();
    Ok(StationaryMeasure { mu, ln_mu, ln_z, summary })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSeries {
    pub delta: f64,
    pub i_max: usize,
    pub summary: SeriesSummary,
}

impl GaussianSeries {
    pub fn verdict(&self) -> Verdict {
        self.summary.report.verdict
    }
}

/// `S_n = Σ_{i ≤ n} μ(i) e^{δρ²(i,0)}` accumulated in log space.
pub fn gaussian_series(t: &ChainTable, mu: &StationaryMeasure, delta: f64) -> Result<GaussianSeries, JumpError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(JumpError::Invalid(format!("δ must be finite and nonnegative, got {delta}")));
    }
    let summary = series_sum(
        |i| mu.ln_mu[i] + delta * t.rho[i] * t.rho[i],
        0,
        t.i_max,
        &SeriesOptions::default(),
    );
    Ok(GaussianSeries {
        delta,
        i_max: t.i_max,
        summary,
    })
}

/// One CSV row of the Gaussian series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub i: usize,
    pub mu: f64,
    pub rho: f64,
    pub term: f64,
    pub partial_sum: f64,
}

/// Rows at every `stride`-th index and at `i_max`.
pub fn series_rows(t: &ChainTable, mu: &StationaryMeasure, delta: f64, stride: usize) -> Vec<SeriesRow> {
    let stride = stride.max(1);
    let mut ln_s = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for i in 0..=t.i_max {
        let l = mu.ln_mu[i] + delta * t.rho[i] * t.rho[i];
        let hi = ln_s.max(l);
        ln_s = if hi == f64::NEG_INFINITY {
            hi
        } else {
            hi + ((ln_s - hi).exp() + (l - hi).exp()).ln()
        };
        if i % stride == 0 || i == t.i_max {
            rows.push(SeriesRow {
                i,
                mu: mu.mu[i],
                rho: t.rho[i],
                term: l.exp(),
                partial_sum: ln_s.exp(),
            });
        }
    }
    rows
}

/// Both sides of `Σ −f·L_νg·μ = Σ (f(i+1)−f(i))(g(i+1)−g(i)) b_i μ(i)`
/// over `0..=i_max`. Exact for `f`, `g` vanishing beyond `i_max`.
pub fn dirichlet_form(
    t: &ChainTable,
    mu: &StationaryMeasure,
    f: &dyn Fn(usize) -> f64,
    g: &dyn Fn(usize) -> f64,
) -> (f64, f64) {
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for i in 0..=t.i_max {
        let mut lg = t.b[i] * (g(i + 1) - g(i));
        if i > 0 {
            lg += t.d[i] * (g(i - 1) - g(i));
        }
        lhs -= f(i) * lg * mu.mu[i];
        rhs += (f(i + 1) - f(i)) * (g(i + 1) - g(i)) * t.b[i] * mu.mu[i];
    }
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::super::{BirthDeathChain, Rate};
    use super::*;

    #[test]
    fn log_chain_weights() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(1000).unwrap();
        let m = stationary_measure(&t).unwrap();
        assert_eq!(m.summary.report.verdict, Verdict::Finite);
        let z = m.ln_z.exp();
        assert!((m.mu[1] * z - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!((m.mu[2] * z - 1.0 / (4.0 * 3f64.ln())).abs() < 1e-12);
        assert!((m.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_weights() {
        let ch = BirthDeathChain::new(Rate::formula("3").unwrap(), Rate::formula("1.5*i").unwrap());
        let t = ch.tabulate(200).unwrap();
        let m = stationary_measure(&t).unwrap();
        let lam = 2f64;
        let mut p = (-lam).exp();
        for i in 0..20 {
            assert!((m.mu[i] - p).abs() < 1e-14, "{i}");
            p *= lam / (i + 1) as f64;
        }
    }

    #[test]
    fn divergent_measure() {
        let ch = BirthDeathChain::new(Rate::formula("2").unwrap(), Rate::formula("1").unwrap());
        let t = ch.tabulate(1000).unwrap();
        assert!(matches!(stationary_measure(&t), Err(JumpError::NoStationaryMeasure(_))));
    }

    #[test]
    fn gaussian_series_verdicts() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(100_000).unwrap();
        let m = stationary_measure(&t).unwrap();
        let s0 = gaussian_series(&t, &m, 0.0).unwrap();
        assert_eq!(s0.verdict(), Verdict::Finite);
        assert!((s0.summary.report.value - 1.0).abs() < 1e-5);
        assert_eq!(gaussian_series(&t, &m, 0.2).unwrap().verdict(), Verdict::Finite);
        assert_eq!(gaussian_series(&t, &m, 0.3).unwrap().verdict(), Verdict::Divergent);
        let rows = series_rows(&t, &m, 0.2, 10_000);
        assert_eq!(rows.len(), 11);
        assert_eq!(rows.last().unwrap().i, 100_000);
        let ln_last = *m.summary.ln_checkpoints.last().map(|(_, l)| l).unwrap();
        assert!(ln_last.is_finite());
    }

    #[test]
    fn integration_by_parts() {
        let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(50).unwrap();
        let m = stationary_measure(&t).unwrap();
        let f = |i: usize| if i < 10 { (i as f64).sin() + 1.0 } else { 0.0 };
        let g = |i: usize| if i < 20 { (i * i) as f64 / 7.0 } else { 0.0 };
        let (l, r) = dirichlet_form(&t, &m, &f, &g);
        assert!((l - r).abs() <= 1e-10 * r.abs().max(1.0), "{l} {r}");
    }
}
