use serde::{Deserialize, Serialize};

use super::{Evidence, OracleReport, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Band around the critical tail slope −1 inside which no verdict is
    /// drawn from the slope alone.
    pub margin: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { margin: 0.05 }
    }
}

/// Full output of [`series_sum`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub report: OracleReport,
    /// `ln S_end` (before tail correction); finite even when `S` overflows.
    pub ln_sum: f64,
    /// `(n, ln S_n)` at powers of ten and at the last index.
    pub ln_checkpoints: Vec<(usize, f64)>,
    /// Least-squares slope of `ln t_i` against `ln i` over the last decade.
    pub tail_slope: f64,
    /// `(S_end − S_{end/10}) / (S_{end/10} − S_{end/100})`.
    pub decade_ratio: f64,
}

/// Running `ln Σ exp(l_i)` with a compensated mantissa.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    shift: f64,
    sum: f64,
    comp: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
            comp: 0.0,
        }
    }

    fn push(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.shift {
            let scale = (self.shift - l).exp();
            self.sum *= scale;
            self.comp *= scale;
            self.shift = l;
        }
        let v = (l - self.shift).exp();
        let t = self.sum + v;
        if self.sum.abs() >= v {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn ln(&self) -> f64 {
        self.shift + (self.sum + self.comp).ln()
    }
}

/// Sums `Σ_{i=start}^{end} exp(log_term(i))` in log space and classifies
/// the infinite series from its tail.
///
/// The verdict is `Finite` when the tail slope is below `−1 − margin` and
/// the last decade contributed less than the one before; `Divergent` when
/// the slope is above `−1 + margin`, or within the band while the decade
/// increments are not shrinking.
pub fn series_sum<F>(mut log_term: F, start: usize, end: usize, opts: &SeriesOptions) -> SeriesSummary
where
    F: FnMut(usize) -> f64,
{
    assert!(end > start, "series needs at least two terms");
    let fit_from = (end / 10).max(start).max(1);
    let mut acc = LogSum::new();
    let mut checkpoints = Vec::new();
    let mut next_decade = 1usize;
    while next_decade <= start {
        next_decade *= 10;
    }
    let (mut sx, mut sy, mut sxx, mut sxy, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut last_log = f64::NEG_INFINITY;
    for i in start..=end {
        let l = log_term(i);
        acc.push(l);
        if i >= fit_from && l.is_finite() {
            let x = (i as f64).ln();
            sx += x;
            sy += l;
            sxx += x * x;
            sxy += x * l;
            k += 1.0;
        }
        if i == next_decade || i == end / 100 || i == end / 10 {
            if checkpoints.last().map(|c: &(usize, f64)| c.0) != Some(i) {
                checkpoints.push((i, acc.ln()));
            }
            if i == next_decade {
                next_decade = next_decade.saturating_mul(10);
            }
        }
        if i == end {
            last_log = l;
        }
    }
    if checkpoints.last().map(|c| c.0) != Some(end) {
        checkpoints.push((end, acc.ln()));
    }
    let slope = if k >= 2.0 {
        (k * sxy - sx * sy) / (k * sxx - sx * sx)
    } else {
        f64::NAN
    };

    let ln_at = |n: usize| -> f64 {
        checkpoints
            .iter()
            .rev()
            .find(|c| c.0 <= n)
            .map(|c| c.1)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let ln_end = acc.ln();
    let s_end = ln_end.exp();
    let s1 = ln_at(end / 10).exp();
    let s2 = ln_at(end / 100).exp();
    let inc_last = s_end - s1;
    let inc_prev = s1 - s2;
    let decade_ratio = if inc_prev > 0.0 {
        inc_last / inc_prev
    } else if inc_last <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    // increments that vanish in double precision count as shrinking
    let negligible = inc_last <= 4.0 * f64::EPSILON * s_end;
    let shrinking = negligible || decade_ratio < 1.0;
    let steady = !negligible && decade_ratio >= 10f64.powf(-opts.margin);

    let verdict = if slope < -1.0 - opts.margin && shrinking {
        Verdict::Finite
    } else if slope > -1.0 + opts.margin || (slope >= -1.0 - opts.margin && steady) || ln_end == f64::INFINITY {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };

    // Euler–Maclaurin tail for t_i ≈ t_N (i/N)^s
    let tail = if verdict == Verdict::Finite && slope.is_finite() {
        let t_n = last_log.exp();
        t_n * end as f64 / (-slope - 1.0) - 0.5 * t_n
    } else {
        0.0
    };
    let tail = tail.max(0.0);

    let (value, error_estimate) = match verdict {
        Verdict::Divergent => (f64::NAN, f64::INFINITY),
        Verdict::Finite => (s_end + tail, 0.5 * tail + 4.0 * f64::EPSILON * s_end * (end - start) as f64),
        Verdict::Inconclusive => (s_end, f64::INFINITY),
    };
    let report = OracleReport {
        value,
        error_estimate,
        verdict,
        evidence: Evidence::PartialSums {
            n: checkpoints.iter().map(|c| c.0).collect(),
            sum: checkpoints.iter().map(|c| c.1.exp()).collect(),
            tail_slope: slope,
            decade_ratio,
            tail_correction: tail,
        },
    };
    SeriesSummary {
        report,
        ln_sum: ln_end,
        ln_checkpoints: checkpoints,
        tail_slope: slope,
        decade_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric() {
        let s = series_sum(|i| -(i as f64) * 2f64.ln(), 0, 200, &SeriesOptions::default());
        assert_eq!(s.report.verdict, Verdict::Finite);
        assert!((s.report.value - 2.0).abs() < 1e-14, "{}", s.report.value);
    }

    #[test]
    fn basel_with_tail_correction() {
        let s = series_sum(|i| -2.0 * (i as f64).ln(), 1, 10_000_000, &SeriesOptions::default());
        assert_eq!(s.report.verdict, Verdict::Finite);
        let exact = std::f64::consts::PI.powi(2) / 6.0;
        assert!((s.report.value - exact).abs() < 1e-6, "{}", s.report.value);
        assert!((s.tail_slope + 2.0).abs() < 1e-9);
        // the raw partial sum misses about 1e-7
        assert!(exact - s.ln_sum.exp() > 5e-8);
    }

    #[test]
    fn harmonic_diverges() {
        let s = series_sum(|i| -(i as f64).ln(), 1, 1_000_000, &SeriesOptions::default());
        assert_eq!(s.report.verdict, Verdict::Divergent);
        assert!(s.report.value.is_nan());
    }

    #[test]
    fn growing_terms_stay_in_log_space() {
        let s = series_sum(|i| 0.01 * i as f64 * i as f64, 0, 100_000, &SeriesOptions::default());
        assert_eq!(s.report.verdict, Verdict::Divergent);
        assert!(s.ln_sum.is_finite() && s.ln_sum > 1e7);
    }

    #[test]
    fn slow_convergence_is_finite() {
        // i^{-1.2}: slope outside the margin, decade increments shrink by 10^{-0.2}
        let s = series_sum(|i| -1.2 * (i as f64).ln(), 1, 1_000_000, &SeriesOptions::default());
        assert_eq!(s.report.verdict, Verdict::Finite);
        assert!((s.decade_ratio - 10f64.powf(-0.2)).abs() < 1e-3);
    }
}
