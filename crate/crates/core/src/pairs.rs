//! Enumeration of cross-series lag differences `y - x` inside a lag window.

use crate::series::BivariateSample;

/// Sorted multiset of lag differences `y - x` (`x` from series 1, `y` from
/// series 2) restricted to `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMultiset {
    diffs: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl DifferenceMultiset {
    /// Wraps differences that the caller guarantees lie in `[lo, hi]`; sorts them.
    pub fn from_unsorted(mut diffs: Vec<f64>, lo: f64, hi: f64) -> Self {
        debug_assert!(diffs.iter().all(|&d| lo <= d && d <= hi));
        diffs.sort_unstable_by(f64::total_cmp);
        Self { diffs, lo, hi }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.diffs
    }

    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Number of differences in the closed interval `[a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let start = self.diffs.partition_point(|&d| d < a);
        let end = self.diffs.partition_point(|&d| d <= b);
        end.saturating_sub(start)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.diffs
    }
}

/// Index range of `ys` whose difference to `x` lies in `[lo, hi]`.
///
/// The predicates are the exact subtractions used downstream, so the range is
/// consistent with any later test on `y - x`.
#[inline]
pub(crate) fn lag_range(ys: &[f64], x: f64, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let start = ys.partition_point(|&y| y - x < lo);
    let end = start + ys[start..].partition_point(|&y| y - x <= hi);
    start..end
}

/// All differences `y - x` with `lo <= y - x <= hi`, sorted ascending.
///
/// One binary search per `x` locates the matching block of series 2, so the
/// cost is `O(n1 log n2 + P log P)` for `P` output pairs.
pub fn pair_differences(sample: &BivariateSample, lo: f64, hi: f64) -> DifferenceMultiset {
    let ys = sample.s2().times();
    let mut diffs = Vec::new();
    for &x in sample.s1().times() {
        diffs.extend(ys[lag_range(ys, x, lo, hi)].iter().map(|&y| y - x));
    }
    DifferenceMultiset::from_unsorted(diffs, lo, hi)
}

/// Number of pairs with `lo <= y - x <= hi`, without materializing them.
pub fn count_pairs(sample: &BivariateSample, lo: f64, hi: f64) -> usize {
    let ys = sample.s2().times();
    sample
        .s1()
        .times()
        .iter()
        .map(|&x| lag_range(ys, x, lo, hi).len())
        .sum()
}
