//! Goodness-of-fit helpers used by the self-test harness and the statistical tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a chi-square test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_tail(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Pools consecutive bins until each pooled bin has expected count ≥ `min_expected`.
/// Any leftover tail is merged into the last pooled bin.
fn pool_bins(pairs: &[(f64, f64)], min_expected: f64) -> Vec<(f64, f64)> {
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for &(o, e) in pairs {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= min_expected {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    pooled
}

/// One-sample chi-square goodness of fit of `observed` counts against
/// `probs`. Mass not covered by `probs` (a truncated support) is added as a
/// final tail bin together with the observations that fell beyond it, which
/// the caller passes as `overflow`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], overflow: u64) -> ChiSquare {
    assert_eq!(observed.len(), probs.len());
    let n = observed.iter().sum::<u64>() + overflow;
    let n = n as f64;
    let mut pairs: Vec<(f64, f64)> = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| (o as f64, p * n))
        .collect();
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    pairs.push((overflow as f64, tail * n));
    let pooled = pool_bins(&pairs, 5.0);
    let statistic = pooled
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = pooled.len().saturating_sub(1);
    ChiSquare {
        statistic,
        dof,
        p_value: chi_square_tail(statistic, dof),
    }
}

/// Two-sample chi-square homogeneity test on histograms over the same bins.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let total = na + nb;
    // Pool on the combined expected count of the smaller sample.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        acc.0 += x as f64;
        acc.1 += y as f64;
        if (acc.0 + acc.1) * na.min(nb) / total >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    let mut statistic = 0.0;
    for &(x, y) in &pooled {
        let col = x + y;
        let ea = col * na / total;
        let eb = col * nb / total;
        if ea > 0.0 {
            statistic += (x - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            statistic += (y - eb).powi(2) / eb;
        }
    }
    let dof = pooled.len().saturating_sub(1);
    ChiSquare {
        statistic,
        dof,
        p_value: chi_square_tail(statistic, dof),
    }
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalizes a count histogram.
pub fn normalize_counts(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
