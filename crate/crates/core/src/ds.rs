//! Bucket-based cross-market activity measures and the resulting lead-lag
//! estimator.
//!
//! The window `(0, T]` is cut into `B = floor(T/h)` buckets `(kh, (k+1)h]`;
//! a residual tail shorter than `h` is discarded. An event exactly at `kh`
//! belongs to bucket `k - 1`. For offset `l` the activity counts bucket
//! indices `k` in `|l| ..= B-1-|l|` where series 1 occupies bucket `k` and
//! series 2 occupies bucket `k + l`.

use crate::series::BivariateSample;
use crate::{Error, Result};

/// Bucket width and search half-range, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsConfig {
    pub h: f64,
    pub r: f64,
}

impl DsConfig {
    pub fn new(h: f64, r: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("bucket width must be positive, got {h}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!("search range must be positive, got {r}")));
        }
        if r < h {
            log::warn!("search range {r} is below the bucket width {h}; only offset 0 is searched");
        }
        Ok(Self { h, r })
    }

    /// Largest `L` with `|L h| <= r`.
    pub fn max_offset(&self) -> i64 {
        let ratio = self.r / self.h;
        (ratio * (1.0 + 1e-12)).floor() as i64
    }
}

/// Occupied bucket indices of both series at one bucket width.
#[derive(Debug, Clone)]
pub struct BucketOccupancy {
    h: f64,
    buckets: i64,
    occ1: Vec<i64>,
    occ2: Vec<i64>,
}

fn occupied(times: &[f64], h: f64, buckets: i64) -> Vec<i64> {
    let mut out: Vec<i64> = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / h).ceil() as i64 - 1;
        if k >= buckets {
            break;
        }
        let k = k.max(0);
        if out.last() != Some(&k) {
            out.push(k);
        }
    }
    out
}

fn count_in(sorted: &[i64], lo: i64, hi: i64) -> u64 {
    if hi < lo {
        return 0;
    }
    let a = sorted.partition_point(|&k| k < lo);
    let b = sorted.partition_point(|&k| k <= hi);
    (b - a) as u64
}

impl BucketOccupancy {
    pub fn new(sample: &BivariateSample, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("bucket width must be positive, got {h}")));
        }
        let ratio = sample.window_end() / h;
        let buckets = (ratio * (1.0 + 1e-12)).floor() as i64;
        Ok(Self {
            h,
            buckets,
            occ1: occupied(sample.s1().times(), h, buckets),
            occ2: occupied(sample.s2().times(), h, buckets),
        })
    }

    pub fn buckets(&self) -> i64 {
        self.buckets
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn check_range(&self, offset: i64) -> Result<(i64, i64)> {
        let needed = 2 * offset.unsigned_abs() + 1;
        if (self.buckets.max(0) as u64) < needed {
            return Err(Error::RangeTooNarrow {
                offset,
                needed,
                buckets: self.buckets.max(0) as u64,
            });
        }
        let a = offset.abs();
        Ok((a, self.buckets - 1 - a))
    }

    /// Raw activity at one offset, by direct lookup of each occupied bucket.
    pub fn raw(&self, offset: i64) -> Result<u64> {
        let (lo, hi) = self.check_range(offset)?;
        let start = self.occ1.partition_point(|&k| k < lo);
        let end = self.occ1.partition_point(|&k| k <= hi);
        Ok(self.occ1[start..end]
            .iter()
            .filter(|&&k| self.occ2.binary_search(&(k + offset)).is_ok())
            .count() as u64)
    }

    /// Occupancy sums of series 1 over `k` and of series 2 over `k + offset`.
    pub fn occupancy_sums(&self, offset: i64) -> Result<(u64, u64)> {
        let (lo, hi) = self.check_range(offset)?;
        Ok((
            count_in(&self.occ1, lo, hi),
            count_in(&self.occ2, lo + offset, hi + offset),
        ))
    }

    /// Relative activity: raw count over the smaller occupancy sum.
    pub fn rel(&self, offset: i64) -> Result<f64> {
        let raw = self.raw(offset)?;
        self.rel_from_raw(offset, raw)
    }

    fn rel_from_raw(&self, offset: i64, raw: u64) -> Result<f64> {
        let (s1, s2) = self.occupancy_sums(offset)?;
        let den = s1.min(s2);
        if den == 0 {
            return Err(Error::DegenerateDenominator { offset });
        }
        Ok(raw as f64 / den as f64)
    }

    /// Raw counts for every offset in `-max_offset ..= max_offset` in one pass
    /// over pairs of occupied buckets at most `max_offset` apart.
    pub fn raw_curve(&self, max_offset: i64) -> Vec<u64> {
        let width = (2 * max_offset + 1) as usize;
        let mut raw = vec![0u64; width];
        for &k1 in &self.occ1 {
            let start = self.occ2.partition_point(|&k| k < k1 - max_offset);
            for &k2 in &self.occ2[start..] {
                let l = k2 - k1;
                if l > max_offset {
                    break;
                }
                let a = l.abs();
                if a <= k1 && k1 <= self.buckets - 1 - a {
                    raw[(l + max_offset) as usize] += 1;
                }
            }
        }
        raw
    }
}

/// Raw cross-market activity at integer offset `offset`.
pub fn cross_activity_raw(sample: &BivariateSample, h: f64, offset: i64) -> Result<u64> {
    BucketOccupancy::new(sample, h)?.raw(offset)
}

/// Relative cross-market activity at integer offset `offset`, in `[0, 1]`.
pub fn cross_activity_rel(sample: &BivariateSample, h: f64, offset: i64) -> Result<f64> {
    BucketOccupancy::new(sample, h)?.rel(offset)
}

/// Activity curve over the searchable offsets. Offsets whose bucket range is
/// empty are dropped; `rel` is `None` where the denominator vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct DsCurve {
    pub h: f64,
    pub offsets: Vec<i64>,
    pub raw: Vec<u64>,
    pub rel: Vec<Option<f64>>,
}

impl DsCurve {
    pub fn compute(sample: &BivariateSample, cfg: &DsConfig) -> Result<Self> {
        let occ = BucketOccupancy::new(sample, cfg.h)?;
        let max_offset = cfg.max_offset();
        // offsets with B < 2|l| + 1 have no admissible bucket index
        let usable = max_offset.min((occ.buckets() - 1).max(-1) / 2);
        if usable < 0 {
            return Err(Error::RangeTooNarrow {
                offset: 0,
                needed: 1,
                buckets: 0,
            });
        }
        let raw_all = occ.raw_curve(usable);
        let mut offsets = Vec::with_capacity(raw_all.len());
        let mut raw = Vec::with_capacity(raw_all.len());
        let mut rel = Vec::with_capacity(raw_all.len());
        for (i, &count) in raw_all.iter().enumerate() {
            let l = i as i64 - usable;
            offsets.push(l);
            raw.push(count);
            rel.push(occ.rel_from_raw(l, count).ok());
        }
        Ok(Self {
            h: cfg.h,
            offsets,
            raw,
            rel,
        })
    }

    /// `(offset * h, rel)` for offsets with a defined relative activity.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.offsets
            .iter()
            .zip(&self.rel)
            .filter_map(|(&l, r)| r.map(|v| (l as f64 * self.h, v)))
    }
}

/// Result of the bucket estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct DsEstimate {
    /// Estimated lead-lag `offset * h`, seconds.
    pub theta: f64,
    pub offset: i64,
    pub curve: DsCurve,
}

/// Maximizes the relative activity over the offset grid; ties go to the
/// smallest offset.
pub fn ds_estimate(sample: &BivariateSample, cfg: &DsConfig) -> Result<DsEstimate> {
    let curve = DsCurve::compute(sample, cfg)?;
    let mut best: Option<(i64, f64)> = None;
    for (&l, r) in curve.offsets.iter().zip(&curve.rel) {
        if let Some(v) = *r {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((l, v));
            }
        }
    }
    let (offset, _) = best.ok_or(Error::DegenerateDenominator { offset: 0 })?;
    Ok(DsEstimate {
        theta: offset as f64 * cfg.h,
        offset,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t1: &[f64], t2: &[f64], window: f64) -> BivariateSample {
        BivariateSample::from_raw(t1, t2, window).unwrap()
    }

    #[test]
    fn raw_counts_by_hand() {
        let s = sample(&[1.5], &[2.5], 10.0);
        assert_eq!(cross_activity_raw(&s, 1.0, 1).unwrap(), 1);
        assert_eq!(cross_activity_raw(&s, 1.0, 0).unwrap(), 0);
        assert_eq!(cross_activity_raw(&s, 1.0, -1).unwrap(), 0);
    }

    #[test]
    fn rel_by_hand() {
        let s = sample(&[1.5], &[1.7], 10.0);
        assert_eq!(cross_activity_rel(&s, 1.0, 0).unwrap(), 1.0);
        let s = sample(&[1.5], &[2.5], 10.0);
        assert_eq!(cross_activity_rel(&s, 1.0, 1).unwrap(), 1.0);
    }

    #[test]
    fn range_too_narrow() {
        let s = sample(&[1.5], &[2.5], 10.0);
        // B = 10 buckets, |l| = 5 needs 11
        assert!(matches!(
            cross_activity_raw(&s, 1.0, 5),
            Err(Error::RangeTooNarrow { offset: 5, needed: 11, buckets: 10 })
        ));
        assert!(cross_activity_raw(&s, 1.0, 4).is_ok());
    }

    #[test]
    fn degenerate_denominator() {
        // only events in the first bucket, which offset 2 excludes from the k-range
        let s = sample(&[0.5], &[0.7], 10.0);
        assert_eq!(
            cross_activity_rel(&s, 1.0, 2),
            Err(Error::DegenerateDenominator { offset: 2 })
        );
    }

    #[test]
    fn half_open_bucket_convention() {
        // an event exactly at 2.0 lies in bucket (1, 2], so it pairs with 1.5 at offset 0
        let s = sample(&[1.5], &[2.0], 10.0);
        assert_eq!(cross_activity_raw(&s, 1.0, 0).unwrap(), 1);
        assert_eq!(cross_activity_raw(&s, 1.0, 1).unwrap(), 0);
        let occ = BucketOccupancy::new(&s, 1.0).unwrap();
        assert_eq!(occ.occ2, vec![1]);
    }

    #[test]
    fn residual_tail_is_discarded() {
        // T / h = 10.5 -> 10 buckets; the event at 10.3 falls in the dropped tail
        let s = sample(&[1.5, 10.3], &[2.5], 10.5);
        let occ = BucketOccupancy::new(&s, 1.0).unwrap();
        assert_eq!(occ.buckets(), 10);
        assert_eq!(occ.occ1, vec![1]);
    }

    #[test]
    fn estimate_by_hand() {
        // with two events per series, offsets 1 and -2 both reach rel = 1 and
        // the smallest-offset rule picks -2
        let s = sample(&[1.5, 4.5], &[2.5, 5.5], 20.0);
        let est = ds_estimate(&s, &DsConfig::new(1.0, 3.0).unwrap()).unwrap();
        assert_eq!(cross_activity_rel(&s, 1.0, 1).unwrap(), 1.0);
        assert_eq!(cross_activity_rel(&s, 1.0, -2).unwrap(), 1.0);
        assert_eq!(est.theta, -2.0);

        let s = sample(&[1.5, 4.5, 8.5], &[2.5, 5.5, 9.5], 20.0);
        let est = ds_estimate(&s, &DsConfig::new(1.0, 3.0).unwrap()).unwrap();
        assert_eq!(est.theta, 1.0);
        assert_eq!(est.offset, 1);
        assert_eq!(est.curve.offsets, vec![-3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn identical_series_peak_at_zero() {
        let t = [0.31, 1.77, 2.05, 4.4, 7.9, 8.25];
        let s = sample(&t, &t, 10.0);
        let est = ds_estimate(&s, &DsConfig::new(0.1, 1.0).unwrap()).unwrap();
        assert_eq!(est.theta, 0.0);
    }

    #[test]
    fn offsets_beyond_buckets_dropped() {
        let s = sample(&[1.5], &[2.5], 5.0);
        let curve = DsCurve::compute(&s, &DsConfig::new(1.0, 10.0).unwrap()).unwrap();
        assert_eq!(curve.offsets, vec![-2, -1, 0, 1, 2]);
    }

    fn arb_sample() -> impl Strategy<Value = BivariateSample> {
        (
            prop::collection::btree_set(1u32..50_000, 1..80),
            prop::collection::btree_set(1u32..50_000, 1..80),
        )
            .prop_map(|(a, b)| {
                let t1: Vec<f64> = a.into_iter().map(|v| v as f64 * 1e-3).collect();
                let t2: Vec<f64> = b.into_iter().map(|v| v as f64 * 1e-3 - 3e-4).collect();
                sample(&t1, &t2, 50.0)
            })
    }

    fn arb_interior_sample() -> impl Strategy<Value = BivariateSample> {
        (
            prop::collection::btree_set(20_000u32..30_000, 1..80),
            prop::collection::btree_set(20_000u32..30_000, 1..80),
        )
            .prop_map(|(a, b)| {
                let t1: Vec<f64> = a.into_iter().map(|v| v as f64 * 1e-3).collect();
                let t2: Vec<f64> = b.into_iter().map(|v| v as f64 * 1e-3 - 3e-4).collect();
                sample(&t1, &t2, 50.0)
            })
    }

    #[test]
    fn edge_buckets_break_swap_symmetry() {
        let s = sample(&[12.85], &[0.0007], 50.0);
        let h = 1.8356469967308304;
        assert_eq!(cross_activity_raw(&s, h, -7).unwrap(), 1);
        assert_eq!(cross_activity_raw(&s.swapped(), h, 7).unwrap(), 0);
    }

    proptest! {
        // The index range constrains only the series-1 bucket, so the identity
        // is exact once every event sits away from both window edges.
        #[test]
        fn swap_symmetry(s in arb_interior_sample(), h in 0.05f64..2.0, l in -8i64..8) {
            let a = cross_activity_raw(&s, h, l);
            let b = cross_activity_raw(&s.swapped(), h, -l);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn rel_in_unit_interval_and_curve_consistent(s in arb_sample(), h in 0.05f64..2.0) {
            let cfg = DsConfig::new(h, 5.0 * h).unwrap();
            let curve = DsCurve::compute(&s, &cfg).unwrap();
            let occ = BucketOccupancy::new(&s, h).unwrap();
            for (i, &l) in curve.offsets.iter().enumerate() {
                prop_assert_eq!(curve.raw[i], occ.raw(l).unwrap());
                let (s1, s2) = occ.occupancy_sums(l).unwrap();
                prop_assert!(curve.raw[i] <= s1.min(s2));
                if let Some(v) = curve.rel[i] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn estimate_is_multiple_of_h(s in arb_sample(), h in 0.05f64..2.0) {
            if let Ok(est) = ds_estimate(&s, &DsConfig::new(h, 4.0 * h).unwrap()) {
                prop_assert_eq!(est.theta, est.offset as f64 * h);
            }
        }
    }
}
