mod common;

use common::*;
use insdiff::align::{alignments_all_deletions, alignments_all_deletions_exact, count_alignments, count_alignments_exact};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::Rng;

fn letters(k: u8, max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0..k, 0..=max)
}

#[test]
fn per_position_counts_match_naive_deletion() {
    let mut rng = rng(21);
    for _ in 0..1000 {
        let xt = random_letters(2, rng.random_range(1..=12), &mut rng);
        let x0 = random_letters(2, rng.random_range(0..=6.min(xt.len() - 1)), &mut rng);
        let dels = alignments_all_deletions_exact(&x0, &xt).unwrap();
        for (l, d) in dels.iter().enumerate() {
            assert_eq!(*d, BigUint::from(recurrence_alignments(&x0, &delete_at(&xt, l))));
        }
    }
}

#[test]
fn single_letter_closed_form() {
    for l in 0..=10usize {
        for m in 0..=10usize {
            let want: u128 = (1..=l as u128).fold(1, |acc, i| acc * (m as u128 + i) / i);
            assert_eq!(count_alignments_exact(&vec![0; l], &vec![0; l + m]).unwrap(), BigUint::from(want));
        }
    }
}

#[test]
fn examples() {
    assert_eq!(brute_alignments(b"A", b"AA"), 2);
    for (x, y, n) in [("A", "AA", 2u32), ("AB", "AABB", 4), ("AA", "ABA", 1), ("AB", "BA", 0)] {
        assert_eq!(count_alignments_exact(x.as_bytes(), y.as_bytes()).unwrap(), BigUint::from(n));
    }
    let d = alignments_all_deletions(b"A", b"AB").unwrap();
    assert!(d[0].is_zero());
    assert_eq!(d[1].ln(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn log_exact_and_recurrence_agree(x in letters(3, 6), y in letters(3, 14)) {
        let want = recurrence_alignments(&x, &y);
        prop_assert_eq!(count_alignments_exact(&x, &y).unwrap(), BigUint::from(want));
        let log = count_alignments(&x, &y);
        if want == 0 {
            prop_assert!(log.is_zero());
        } else {
            prop_assert!((log.ln() - (want as f64).ln()).abs() <= 1e-12 * (want as f64).ln().abs().max(1.0));
        }
    }

    #[test]
    fn deletion_sum_identity(x in letters(2, 5), extra in letters(2, 8), seed in any::<u64>()) {
        // Interleave x with extra letters so x embeds in y.
        let mut r = rng(seed);
        let mut y = x.clone();
        for c in extra {
            let at = r.random_range(0..=y.len());
            y.insert(at, c);
        }
        prop_assume!(y.len() > x.len());
        let m = (y.len() - x.len()) as u64;
        let sum: BigUint = alignments_all_deletions_exact(&x, &y).unwrap().iter().sum();
        prop_assert_eq!(sum, BigUint::from(recurrence_alignments(&x, &y)) * m);
    }

    #[test]
    fn reversal_invariant(x in letters(2, 5), y in letters(2, 12)) {
        let rx: Vec<u8> = x.iter().rev().copied().collect();
        let ry: Vec<u8> = y.iter().rev().copied().collect();
        prop_assert_eq!(count_alignments_exact(&x, &y).unwrap(), count_alignments_exact(&rx, &ry).unwrap());
    }

    #[test]
    fn zero_without_multiset_containment(x in letters(3, 6), y in letters(3, 10)) {
        let contained = (0..3u8).all(|c| x.iter().filter(|&&v| v == c).count() <= y.iter().filter(|&&v| v == c).count());
        if !contained {
            prop_assert!(count_alignments(&x, &y).is_zero());
        }
    }
}
