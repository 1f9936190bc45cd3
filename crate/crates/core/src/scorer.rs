//! Deletion-effect scores from the denoiser.
//!
//! A single deletion is scored by `log q(X⁽⁻ⁱ⁾ | X, M = 1)`. A set of `m`
//! deletions is scored by summing, over every order in which the set can be
//! deleted, the product of per-step denoiser probabilities, where the step
//! that leaves `r` deletions to go conditions on `M = r`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::numerics::{log_add_exp, log_sum_exp};
use crate::seqcore::Sequence;

pub const DEFAULT_MAX_EXACT: usize = 5;
pub const DEFAULT_N_MC: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub position: usize,
    pub letter: u8,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub id: Option<String>,
    pub records: Vec<ScoreRecord>,
}

/// `log q(X⁽⁻ⁱ⁾ | X, M = 1)` for every position, from one model call.
pub fn score_single_deletions(x: &Sequence, model: &dyn Denoiser) -> Result<ScoreTable> {
    if x.len() < 2 {
        return Err(Error::Domain("scoring needs a sequence of length >= 2".into()));
    }
    let q = model.predict(x, 1)?;
    let records = q
        .log_probs()
        .iter()
        .enumerate()
        .map(|(i, &lp)| ScoreRecord {
            position: i,
            letter: x.letters()[i],
            log_prob: lp,
        })
        .collect();
    Ok(ScoreTable {
        id: x.id().map(str::to_string),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetScore {
    pub log_prob: f64,
    /// `false` when the value is a Monte-Carlo estimate over sampled orders.
    pub exact: bool,
}

/// Index of original position `p` once the original positions in `deleted` are gone.
pub fn remap_position(p: usize, deleted: &[usize]) -> usize {
    p - deleted.iter().filter(|&&d| d < p).count()
}

fn validate_set(x: &Sequence, positions: &[usize]) -> Result<()> {
    if positions.is_empty() || positions.len() >= x.len() {
        return Err(Error::Domain(format!(
            "deletion set size {} must satisfy 1 <= m < |x| = {}",
            positions.len(),
            x.len()
        )));
    }
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("duplicate positions in deletion set".into()));
    }
    if sorted.last().is_some_and(|&p| p >= x.len()) {
        return Err(Error::Domain("deletion position out of range".into()));
    }
    Ok(())
}

fn delete_originals(x: &[u8], deleted: &[usize]) -> Vec<u8> {
    x.iter()
        .enumerate()
        .filter(|(i, _)| !deleted.contains(i))
        .map(|(_, &c)| c)
        .collect()
}

/// Exact sum over all orders, shared across orders by memoizing on the set
/// of positions already deleted (`2^m` model calls instead of `m!·m`).
fn exact_set_score(x: &Sequence, positions: &[usize], model: &dyn Denoiser) -> Result<f64> {
    let m = positions.len();
    let full = (1usize << m) - 1;
    // memo[mask] = log Σ over orders of deleting the rest, given `mask` already deleted.
    let mut memo: HashMap<usize, f64> = HashMap::new();
    memo.insert(full, 0.0);
    // Process masks by decreasing popcount so successors are ready.
    let mut masks: Vec<usize> = (0..full).collect();
    masks.sort_by_key(|mask| std::cmp::Reverse(mask.count_ones()));
    for mask in masks {
        let deleted: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| positions[b]).collect();
        let current = Sequence::from_letters(delete_originals(x.letters(), &deleted));
        let remaining = (m - deleted.len()) as u64;
        let q = model.predict(&current, remaining)?;
        let mut acc = f64::NEG_INFINITY;
        for b in (0..m).filter(|b| mask >> b & 1 == 0) {
            let idx = remap_position(positions[b], &deleted);
            let rest = memo[&(mask | 1 << b)];
            acc = log_add_exp(acc, q.log_probs()[idx] + rest);
        }
        memo.insert(mask, acc);
    }
    Ok(memo[&0])
}

/// Log-probability of one deletion order, positions given in original coordinates.
pub fn order_log_prob(x: &Sequence, order: &[usize], model: &dyn Denoiser) -> Result<f64> {
    let m = order.len();
    let mut deleted: Vec<usize> = Vec::with_capacity(m);
    let mut total = 0.0;
    for (step, &p) in order.iter().enumerate() {
        let current = Sequence::from_letters(delete_originals(x.letters(), &deleted));
        let q = model.predict(&current, (m - step) as u64)?;
        total += q.log_probs()[remap_position(p, &deleted)];
        deleted.push(p);
    }
    Ok(total)
}

/// `log q(X₀ = x without positions | x, M = |positions|)`. Exact for sets of
/// at most `max_exact` positions, otherwise `log(m!) + log mean` of
/// `n_mc` uniformly drawn orders.
pub fn score_deletion_set<R: Rng + ?Sized>(
    x: &Sequence,
    positions: &[usize],
    model: &dyn Denoiser,
    max_exact: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<SetScore> {
    validate_set(x, positions)?;
    let m = positions.len();
    if m <= max_exact {
        return Ok(SetScore {
            log_prob: exact_set_score(x, positions, model)?,
            exact: true,
        });
    }
    if n_mc == 0 {
        return Err(Error::Domain("n_mc must be >= 1 for the sampled estimate".into()));
    }
    let mut order = positions.to_vec();
    let mut draws = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        order.shuffle(rng);
        draws.push(order_log_prob(x, &order, model)?);
    }
    let ln_m_factorial: f64 = (1..=m).map(|i| (i as f64).ln()).sum();
    Ok(SetScore {
        log_prob: ln_m_factorial + log_sum_exp(&draws) - (n_mc as f64).ln(),
        exact: false,
    })
}

/// Positions of `x` left out by the leftmost embedding of `sub` in `x`.
pub fn deletion_set_from_subsequence(x: &Sequence, sub: &Sequence) -> Result<Vec<usize>> {
    let mut kept = Vec::with_capacity(sub.len());
    let mut j = 0;
    for &c in sub.letters() {
        while j < x.len() && x.letters()[j] != c {
            j += 1;
        }
        if j == x.len() {
            return Err(Error::NoAlignment);
        }
        kept.push(j);
        j += 1;
    }
    Ok((0..x.len()).filter(|i| !kept.contains(i)).collect())
}
