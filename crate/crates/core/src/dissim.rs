//! Peak-based dissimilarities.
//!
//! `peak_dissimilarity_within` compares two peaks of one distribution,
//! `peak_dissimilarity_between` compares peaks of two distributions, and
//! `distribution_dissimilarity` is the minimum over all peak matchings of
//! the summed between-distribution terms.

use thiserror::Error;

use crate::peaks::{Peak, PeakSet};

/// Exhaustive matching is used up to this many peaks.
pub const MAX_PEAKS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DissimError {
    #[error("distribution has no peak (strongest peak size is zero)")]
    Peakless,
    #[error("peak sets differ in size ({0} vs {1})")]
    MismatchedPeaks(usize, usize),
    #[error("at most {MAX_PEAKS} peaks supported for exact matching (got {0})")]
    TooManyPeaks(usize),
    #[error("peak sets are defined on different domains")]
    MismatchedRange,
}

/// Bandwidth, peak count and the distance domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissimilarityParams {
    pub h: usize,
    pub n: usize,
    pub domain_hi: u32,
}

impl Default for DissimilarityParams {
    fn default() -> Self {
        DissimilarityParams { h: 5, n: 3, domain_hi: 1000 }
    }
}

#[inline]
fn product_form(dl: f64, range: f64, dv: f64, norm: f64) -> f64 {
    (dl / range + 1.0) * (dv / norm + 1.0) - 1.0
}

/// `(|l1-l2|/R + 1)(|v1-v2|/v + 1) - 1` for two peaks of one distribution
/// whose strongest peak has size `v`.
pub fn peak_dissimilarity_within(p1: &Peak, p2: &Peak, range: f64, v: f64) -> Result<f64, DissimError> {
    if v <= 0.0 {
        return Err(DissimError::Peakless);
    }
    Ok(product_form(
        (p1.location - p2.location).abs(),
        range,
        (p1.size - p2.size).abs(),
        v,
    ))
}

/// Same product form normalised by `min(v, v_bar)`, the smaller of the two
/// strongest-peak sizes.
pub fn peak_dissimilarity_between(
    pi: &Peak,
    pj: &Peak,
    range: f64,
    v: f64,
    v_bar: f64,
) -> Result<f64, DissimError> {
    let norm = v.min(v_bar);
    if norm <= 0.0 {
        return Err(DissimError::Peakless);
    }
    Ok(product_form(
        (pi.location - pj.location).abs(),
        range,
        (pi.size - pj.size).abs(),
        norm,
    ))
}

/// Minimum and the matching that attains it; `matching[i]` is the index
/// of the peak in the second set paired with peak `i` of the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub value: f64,
    pub matching: Vec<usize>,
}

/// Advances `perm` to the next lexicographic permutation.
fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm.iter().rposition(|&x| x > perm[i]).expect("successor exists");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

pub fn distribution_dissimilarity(a: &PeakSet, b: &PeakSet) -> Result<Matching, DissimError> {
    let n = a.peaks.len();
    if n != b.peaks.len() {
        return Err(DissimError::MismatchedPeaks(n, b.peaks.len()));
    }
    if n > MAX_PEAKS {
        return Err(DissimError::TooManyPeaks(n));
    }
    if a.range != b.range {
        return Err(DissimError::MismatchedRange);
    }
    if a.is_peakless() || b.is_peakless() {
        return Err(DissimError::Peakless);
    }
    let mut cost = vec![0.0; n * n];
    for (i, pi) in a.peaks.iter().enumerate() {
        for (j, pj) in b.peaks.iter().enumerate() {
            cost[i * n + j] = peak_dissimilarity_between(pi, pj, a.range, a.v, b.v)?;
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = Matching { value: f64::INFINITY, matching: perm.clone() };
    loop {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        if total < best.value {
            best = Matching { value: total, matching: perm.clone() };
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best)
}

/// Matches peaks in rank order (strongest with strongest). Never below the
/// exhaustive minimum.
pub fn greedy_rank_dissimilarity(a: &PeakSet, b: &PeakSet) -> Result<f64, DissimError> {
    if a.peaks.len() != b.peaks.len() {
        return Err(DissimError::MismatchedPeaks(a.peaks.len(), b.peaks.len()));
    }
    a.peaks
        .iter()
        .zip(&b.peaks)
        .map(|(p, q)| peak_dissimilarity_between(p, q, a.range, a.v, b.v))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::WordCode;

    fn set(peaks: &[(f64, f64)]) -> PeakSet {
        let peaks: Vec<Peak> = peaks.iter().map(|&(l, s)| Peak::at(l, s)).collect();
        PeakSet {
            word: WordCode::new(0, 7).unwrap(),
            v: peaks.iter().map(|p| p.size).fold(0.0, f64::max),
            peaks,
            range: 992.0,
        }
    }

    #[test]
    fn within_examples() {
        let p = Peak::at(100.0, 0.05);
        assert_eq!(peak_dissimilarity_within(&p, &p, 992.0, 0.05).unwrap(), 0.0);
        let q = Peak::at(100.0, 0.03);
        assert!((peak_dissimilarity_within(&p, &q, 992.0, 0.05).unwrap() - 0.4).abs() < 1e-12);
        let r = Peak::at(150.0, 0.03);
        let expect = (50.0 / 992.0 + 1.0) * 1.4 - 1.0;
        let got = peak_dissimilarity_within(&p, &r, 992.0, 0.05).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.470564).abs() < 1e-6);
        assert_eq!(peak_dissimilarity_within(&p, &r, 992.0, 0.0), Err(DissimError::Peakless));
    }

    #[test]
    fn between_examples() {
        let p = Peak::at(100.0, 0.04);
        let q = Peak::at(300.0, 0.01);
        let got = peak_dissimilarity_between(&p, &q, 992.0, 0.05, 0.02).unwrap();
        assert!((got - ((200.0 / 992.0 + 1.0) * 2.5 - 1.0)).abs() < 1e-12);
        assert!((got - 2.004032).abs() < 1e-6);
        assert_eq!(peak_dissimilarity_between(&p, &p, 992.0, 0.05, 0.02).unwrap(), 0.0);
        let r = Peak::at(150.0, 0.03);
        assert_eq!(
            peak_dissimilarity_between(&p, &r, 992.0, 0.05, 0.05).unwrap(),
            peak_dissimilarity_within(&p, &r, 992.0, 0.05).unwrap()
        );
        assert_eq!(
            peak_dissimilarity_between(&p, &r, 992.0, 0.05, 0.0),
            Err(DissimError::Peakless)
        );
    }

    #[test]
    fn identical_sets_match_identically() {
        let a = set(&[(20.0, 0.05), (400.0, 0.02), (700.0, 0.01)]);
        let m = distribution_dissimilarity(&a, &a).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.matching, vec![0, 1, 2]);
    }

    #[test]
    fn single_peak_reduces_to_between() {
        let a = set(&[(20.0, 0.05)]);
        let b = set(&[(60.0, 0.02)]);
        let m = distribution_dissimilarity(&a, &b).unwrap();
        let d2 = peak_dissimilarity_between(&a.peaks[0], &b.peaks[0], 992.0, 0.05, 0.02).unwrap();
        assert_eq!(m.value, d2);
    }

    #[test]
    fn crossing_match_beats_rank_order() {
        let a = set(&[(20.0, 0.05), (500.0, 0.049)]);
        let b = set(&[(500.0, 0.05), (20.0, 0.049)]);
        let m = distribution_dissimilarity(&a, &b).unwrap();
        assert_eq!(m.matching, vec![1, 0]);
        assert!(m.value < greedy_rank_dissimilarity(&a, &b).unwrap());
    }

    #[test]
    fn errors() {
        let a = set(&[(20.0, 0.05), (40.0, 0.01)]);
        let b = set(&[(20.0, 0.05)]);
        assert_eq!(distribution_dissimilarity(&a, &b), Err(DissimError::MismatchedPeaks(2, 1)));
        let z = set(&[(20.0, 0.0), (40.0, 0.0)]);
        assert_eq!(distribution_dissimilarity(&a, &z), Err(DissimError::Peakless));
        let big = set(&[(1.0, 0.1); 9]);
        assert_eq!(distribution_dissimilarity(&big, &big), Err(DissimError::TooManyPeaks(9)));
    }

    #[test]
    fn permutations_enumerated() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(p, vec![3, 2, 1, 0]);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::words::WordCode;
    use proptest::prelude::*;

    fn peak_set(n: usize) -> impl Strategy<Value = PeakSet> {
        prop::collection::vec((8u32..=1000, 1e-6f64..0.05), n).prop_map(|v| {
            let mut peaks: Vec<Peak> = v.into_iter().map(|(l, s)| Peak::at(l as f64, s)).collect();
            peaks.sort_by(|a, b| b.size.total_cmp(&a.size));
            PeakSet { word: WordCode::new(0, 7).unwrap(), v: peaks[0].size, peaks, range: 992.0 }
        })
    }

    fn two_sets() -> impl Strategy<Value = (PeakSet, PeakSet)> {
        (1usize..=5).prop_flat_map(|n| (peak_set(n), peak_set(n)))
    }

    proptest! {
        #[test]
        fn semimetric((a, b) in two_sets()) {
            let ab = distribution_dissimilarity(&a, &b).unwrap().value;
            let ba = distribution_dissimilarity(&b, &a).unwrap().value;
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert_eq!(distribution_dissimilarity(&a, &a).unwrap().value, 0.0);
        }

        #[test]
        fn within_is_bounded(a in peak_set(4)) {
            for p in &a.peaks {
                for q in &a.peaks {
                    let d = peak_dissimilarity_within(p, q, a.range, a.v).unwrap();
                    prop_assert!((0.0..=3.0).contains(&d));
                }
            }
        }

        #[test]
        fn within_is_monotone(
            dl in 0.0f64..992.0, extra_l in 0.0f64..100.0,
            dv in 0.0f64..0.05, extra_v in 0.0f64..0.05,
        ) {
            let v = 0.1;
            let at = |l: f64, s: f64| peak_dissimilarity_within(&Peak::at(0.0, 0.0), &Peak::at(l, s), 992.0, v).unwrap();
            let base = at(dl, dv);
            prop_assert!(at(dl + extra_l, dv) >= base);
            prop_assert!(at(dl, dv + extra_v) >= base);
        }

        #[test]
        fn rank_order_is_upper_bound((a, b) in two_sets()) {
            let exact = distribution_dissimilarity(&a, &b).unwrap().value;
            prop_assert!(greedy_rank_dissimilarity(&a, &b).unwrap() >= exact);
        }
    }
}
