//! Subsequence-embedding counts.
//!
//! `ali(x, y)` is the number of index sets `i₁ < … < i_|x|` with
//! `y[i₁] … y[i_|x|] = x`. Counts grow like binomial coefficients, so the
//! default path works in log space ([`LogCount`]); the same kernels run over
//! [`BigUint`] for exact checks.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::numerics::log_add_exp;

/// Largest `|y|` accepted by the exact big-integer routines.
pub const EXACT_MAX_LEN: usize = 64;

/// Natural log of a nonnegative integer count; `-inf` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogCount(f64);

impl LogCount {
    pub const ZERO: LogCount = LogCount(f64::NEG_INFINITY);
    pub const ONE: LogCount = LogCount(0.0);

    pub fn from_ln(value: f64) -> Self {
        LogCount(value)
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// The count as a float (may overflow to `inf` for huge counts).
    pub fn value(self) -> f64 {
        self.0.exp()
    }
}

/// Counting semiring the alignment recurrences are written against.
pub trait AlignmentCount: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
}

impl AlignmentCount for LogCount {
    fn zero() -> Self {
        LogCount::ZERO
    }
    fn one() -> Self {
        LogCount::ONE
    }
    fn plus(&self, other: &Self) -> Self {
        LogCount(log_add_exp(self.0, other.0))
    }
    fn times(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            LogCount::ZERO
        } else {
            LogCount(self.0 + other.0)
        }
    }
}

impl AlignmentCount for BigUint {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
}

/// Distinct-subsequence DP: one pass over `y`, updating prefix counts of `x`
/// from the back so each letter of `y` is used at most once per embedding.
pub fn count_alignments_in<C: AlignmentCount>(x: &[u8], y: &[u8]) -> C {
    let l = x.len();
    if l > y.len() {
        return C::zero();
    }
    let mut dp = vec![C::zero(); l + 1];
    dp[0] = C::one();
    for (j, &yj) in y.iter().enumerate() {
        // x[..i] can only use y[..=j], so i ≤ j + 1.
        for i in (1..=l.min(j + 1)).rev() {
            if x[i - 1] == yj {
                dp[i] = dp[i].plus(&dp[i - 1]);
            }
        }
    }
    dp.pop().expect("dp has l + 1 entries")
}

pub fn count_alignments(x: &[u8], y: &[u8]) -> LogCount {
    count_alignments_in(x, y)
}

pub fn count_alignments_exact(x: &[u8], y: &[u8]) -> Result<BigUint> {
    if y.len() > EXACT_MAX_LEN {
        return Err(Error::Domain(format!(
            "exact alignment count limited to |y| <= {EXACT_MAX_LEN}, got {}",
            y.len()
        )));
    }
    Ok(count_alignments_in(x, y))
}

/// Alignment counts of `x0` against `xt` and against every single deletion of `xt`.
#[derive(Debug, Clone)]
pub struct DeletionAlignments<C> {
    /// `ali(x0, xt)`.
    pub full: C,
    /// Entry `l` is `ali(x0, xt with position l removed)`.
    pub per_position: Vec<C>,
}

/// All-single-deletions kernel in `O(|x0|·|xt|)`.
///
/// `prefix[i][j]` counts embeddings of `x0[..i]` into `xt[..j]`,
/// `suffix[i][j]` embeddings of `x0[i..]` into `xt[j..]`. Each column is a
/// running sum over `j`. Deleting `xt[l]` splits every surviving embedding
/// into a prefix inside `xt[..l]` and a suffix inside `xt[l+1..]`, so
/// `ali(x0, xt⁽⁻ˡ⁾) = Σ_i prefix[i][l] · suffix[i][l+1]`.
pub fn all_deletion_counts<C: AlignmentCount>(x0: &[u8], xt: &[u8]) -> DeletionAlignments<C> {
    let l0 = x0.len();
    let n = xt.len();
    let width = n + 1;
    let idx = |i: usize, j: usize| i * width + j;

    let mut prefix = vec![C::zero(); (l0 + 1) * width];
    for j in 0..=n {
        prefix[idx(0, j)] = C::one();
    }
    for i in 1..=l0 {
        let mut running = C::zero();
        for j in 1..=n {
            if x0[i - 1] == xt[j - 1] {
                running = running.plus(&prefix[idx(i - 1, j - 1)]);
            }
            prefix[idx(i, j)] = running.clone();
        }
    }

    let mut suffix = vec![C::zero(); (l0 + 1) * width];
    for j in 0..=n {
        suffix[idx(l0, j)] = C::one();
    }
    for i in (0..l0).rev() {
        let mut running = C::zero();
        for j in (0..n).rev() {
            if x0[i] == xt[j] {
                running = running.plus(&suffix[idx(i + 1, j + 1)]);
            }
            suffix[idx(i, j)] = running.clone();
        }
    }

    let per_position = (0..n)
        .map(|pos| {
            (0..=l0).fold(C::zero(), |acc, i| {
                acc.plus(&prefix[idx(i, pos)].times(&suffix[idx(i, pos + 1)]))
            })
        })
        .collect();
    DeletionAlignments {
        full: prefix[idx(l0, n)].clone(),
        per_position,
    }
}

pub fn alignments_all_deletions(x0: &[u8], xt: &[u8]) -> Result<Vec<LogCount>> {
    if xt.is_empty() {
        return Err(Error::Domain("xt must be nonempty".into()));
    }
    Ok(all_deletion_counts::<LogCount>(x0, xt).per_position)
}

pub fn alignments_all_deletions_exact(x0: &[u8], xt: &[u8]) -> Result<Vec<BigUint>> {
    if xt.is_empty() {
        return Err(Error::Domain("xt must be nonempty".into()));
    }
    if xt.len() > EXACT_MAX_LEN {
        return Err(Error::Domain(format!(
            "exact alignment count limited to |xt| <= {EXACT_MAX_LEN}, got {}",
            xt.len()
        )));
    }
    Ok(all_deletion_counts::<BigUint>(x0, xt).per_position)
}
