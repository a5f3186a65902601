//! Summary statistics, histograms, and Kolmogorov-Smirnov distances for the
//! Monte Carlo harness and the test suite.

use serde::Serialize;

/// Histogram with explicit bin edges; `counts.len() + 1 == edges.len()`.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Summary of one scalar sample.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
    /// `(p_hat, se)` for binomial outcomes, when the sample is one.
    pub proportion: Option<(f64, f64)>,
}

/// Summarize a sample: moments, extremes, and a Freedman-Diaconis histogram.
pub fn summarize(xs: &[f64]) -> SummaryStats {
    assert!(!xs.is_empty(), "cannot summarize an empty sample");
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let sd = var.sqrt();
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SummaryStats {
        n,
        mean,
        sd,
        se: sd / (n as f64).sqrt(),
        min,
        max,
        histogram: fd_histogram(xs),
        proportion: None,
    }
}

/// Summary of a binomial sample: `successes` out of `n`.
pub fn summarize_proportion(successes: u64, n: u64) -> (f64, f64) {
    let p = successes as f64 / n as f64;
    (p, binomial_se(p, n))
}

/// Normal-approximation standard error of a sample proportion.
pub fn binomial_se(p_hat: f64, n: u64) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Freedman-Diaconis histogram: bin width `2 IQR / n^(1/3)`, falling back to
/// a single bin for degenerate samples.
pub fn fd_histogram(xs: &[f64]) -> Histogram {
    let n = xs.len();
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (min, max) = (sorted[0], sorted[n - 1]);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let n_bins = if width > 0.0 && max > min {
        (((max - min) / width).ceil() as usize).clamp(1, 10_000)
    } else {
        1
    };
    let step = if max > min { (max - min) / n_bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=n_bins).map(|i| min + step * i as f64).collect();
    let mut counts = vec![0u64; n_bins];
    for &x in xs {
        let mut idx = ((x - min) / step) as usize;
        if idx >= n_bins {
            idx = n_bins - 1;
        }
        counts[idx] += 1;
    }
    debug_assert_eq!(counts.iter().sum::<u64>() as usize, n);
    Histogram { edges, counts }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Two-sample Kolmogorov-Smirnov statistic: the supremum distance between
/// the empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS p-value for the statistic `d`.
pub fn ks_p_value(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    kolmogorov_survival(lambda)
}

/// `Q(λ) = 2 Σ_{k>=1} (-1)^(k-1) exp(-2 k² λ²)`, clamped to [0, 1].
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
