//! Log-domain helpers shared by the alignment kernels and the objectives.

/// `log(exp(a) + exp(b))`, treating `-inf` as an exact zero.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Natural log of the binomial coefficient C(n, k); `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    statrs::function::factorial::ln_binomial(n, k)
}

/// Log-softmax of raw scores.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(scores);
    scores.iter().map(|s| s - z).collect()
}
