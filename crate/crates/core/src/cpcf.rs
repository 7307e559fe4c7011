//! Kernel estimator of the cross-pair correlation function and its maximizer.
//!
//! `ghat_h(u) = T/(n1 n2) * sum_{x, y} K_h(y - x - u)`. Grid evaluation uses the
//! scatter algorithm (each pair difference touches only the grid points
//! within `h`). The maximizer is found on the kink set of the piecewise
//! linear (triangular) or piecewise constant (uniform) curve, where values
//! come from a prefix-sum sweep over the sorted differences.

use crate::kernel::Kernel;
use crate::numeric::DoubleDouble;
use crate::pairs::{lag_range, pair_differences, DifferenceMultiset};
use crate::series::BivariateSample;
use crate::{Error, Result};

/// Relative tolerance used to declare two curve values tied.
pub const TIE_TOL: f64 = 1e-9;

// Pair searches are widened by this fraction of h; the kernel itself decides
// inclusion, so boundary rounding never drops a pair.
const SEARCH_SLACK: f64 = 1e-6;

/// Estimated curve on an ascending grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CpcfCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub h: f64,
    /// `T / (n1 n2)`.
    pub scale: f64,
}

impl CpcfCurve {
    /// Grid point of the largest value; ties go to the smallest abscissa.
    pub fn argmax(&self) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for (&u, &v) in self.grid.iter().zip(&self.values) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((u, v));
            }
        }
        best
    }
}

/// Grid points whose curve value is within `tie_tol` (relative) of the maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximizerSet {
    points: Vec<f64>,
    value: f64,
    tie_tol: f64,
}

impl MaximizerSet {
    /// Collects the near-maximal points of `(grid, values)`; `grid` ascending.
    pub fn from_values(grid: &[f64], values: &[f64], tie_tol: f64) -> Result<Self> {
        debug_assert_eq!(grid.len(), values.len());
        let value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if grid.is_empty() {
            return Err(Error::EmptySet);
        }
        let cutoff = value - tie_tol * value.abs();
        let points = grid
            .iter()
            .zip(values)
            .filter(|&(_, &v)| v >= cutoff)
            .map(|(&u, _)| u)
            .collect();
        Ok(Self {
            points,
            value,
            tie_tol,
        })
    }

    /// Builds a set from explicit points, sorting them.
    pub fn from_points(mut points: Vec<f64>, value: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        points.sort_by(f64::total_cmp);
        Ok(Self {
            points,
            value,
            tie_tol: TIE_TOL,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn tie_tol(&self) -> f64 {
        self.tie_tol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Distance from `z` to the nearest point.
    pub fn distance(&self, z: f64) -> f64 {
        let i = self.points.partition_point(|&p| p < z);
        let mut d = f64::INFINITY;
        if i < self.points.len() {
            d = self.points[i] - z;
        }
        if i > 0 {
            d = d.min(z - self.points[i - 1]);
        }
        d
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

fn scale_of(sample: &BivariateSample) -> Result<f64> {
    sample.require_nonempty()?;
    let (n1, n2) = sample.counts();
    Ok(sample.window_end() / (n1 as f64 * n2 as f64))
}

/// `ghat_h(u)` summing only the pairs found by binary search near lag `u`.
pub fn ghat_at(sample: &BivariateSample, kernel: Kernel, h: f64, u: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let scale = scale_of(sample)?;
    let ys = sample.s2().times();
    let slack = h * (1.0 + SEARCH_SLACK);
    let mut acc = 0.0;
    for &x in sample.s1().times() {
        for &y in &ys[lag_range(ys, x, u - slack, u + slack)] {
            acc += kernel.eval((y - x - u) / h);
        }
    }
    Ok(scale * acc / h)
}

/// Reference `ghat_h(u)` by a full double loop over all pairs.
pub fn ghat_at_naive(sample: &BivariateSample, kernel: Kernel, h: f64, u: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let scale = scale_of(sample)?;
    let mut acc = 0.0;
    for &x in sample.s1().times() {
        for &y in sample.s2().times() {
            acc += kernel.eval((y - x - u) / h);
        }
    }
    Ok(scale * acc / h)
}

/// Evaluates `ghat_h` on an ascending grid by scattering each pair difference
/// onto the grid points within `h` of it.
///
/// Accumulation runs over `x` ascending, then `y` ascending, so results are
/// bit-reproducible for a given input.
pub fn ghat_on_grid(
    sample: &BivariateSample,
    kernel: Kernel,
    h: f64,
    grid: &[f64],
) -> Result<CpcfCurve> {
    check_bandwidth(h)?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("grid must be strictly ascending".into()));
    }
    let scale = scale_of(sample)?;
    let ys = sample.s2().times();
    let slack = h * (1.0 + SEARCH_SLACK);
    let (u_min, u_max) = (grid[0], grid[grid.len() - 1]);
    let mut acc = vec![0.0; grid.len()];
    for &x in sample.s1().times() {
        for &y in &ys[lag_range(ys, x, u_min - slack, u_max + slack)] {
            let d = y - x;
            // (d - u)/h decreases along the grid
            let start = grid.partition_point(|&u| (d - u) / h > 1.0);
            let end = start + grid[start..].partition_point(|&u| (d - u) / h >= -1.0);
            for (a, &u) in acc[start..end].iter_mut().zip(&grid[start..end]) {
                *a += kernel.eval((d - u) / h);
            }
        }
    }
    let values = acc.into_iter().map(|a| scale * a / h).collect();
    Ok(CpcfCurve {
        grid: grid.to_vec(),
        values,
        h,
        scale,
    })
}

/// Kink candidates `(D ∪ (D+h) ∪ (D-h) ∪ {-r, r}) ∩ [-r, r]`, ascending and
/// deduplicated, where `D` holds the pair differences in `[-r-h, r+h]`.
pub fn kink_candidates(sample: &BivariateSample, h: f64, r: f64) -> Vec<f64> {
    let diffs = pair_differences(sample, -r - h, r + h);
    candidates_from(diffs.as_slice(), h, r)
}

fn candidates_from(diffs: &[f64], h: f64, r: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * diffs.len() + 2);
    out.push(-r);
    out.push(r);
    for &d in diffs {
        for c in [d - h, d, d + h] {
            if (-r..=r).contains(&c) {
                out.push(c);
            }
        }
    }
    out.sort_unstable_by(f64::total_cmp);
    out.dedup();
    out
}

/// Sorted lag differences of a sample together with double-double prefix
/// sums, reusable across bandwidths up to `h_max` and search range `r`.
///
/// With the differences sorted, the triangular estimate at `u` splits into a
/// rising part over `[u-h, u]` and a falling part over `(u, u+h]`, each a
/// count times a shift plus a prefix-sum difference.
#[derive(Debug, Clone)]
pub struct LagProfile {
    diffs: Vec<f64>,
    prefix: Vec<DoubleDouble>,
    scale: f64,
    r: f64,
    h_max: f64,
}

impl LagProfile {
    pub fn new(sample: &BivariateSample, r: f64, h_max: f64) -> Result<Self> {
        check_bandwidth(h_max)?;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!("search range must be positive, got {r}")));
        }
        let scale = scale_of(sample)?;
        let reach = h_max * (1.0 + SEARCH_SLACK);
        let diffs = pair_differences(sample, -r - reach, r + reach).into_vec();
        Ok(Self::from_sorted(diffs, scale, r, h_max))
    }

    /// Profile from already sorted differences and the scale `T/(n1 n2)`.
    pub fn from_sorted(diffs: Vec<f64>, scale: f64, r: f64, h_max: f64) -> Self {
        debug_assert!(diffs.windows(2).all(|w| w[0] <= w[1]));
        let mut prefix = Vec::with_capacity(diffs.len() + 1);
        let mut acc = DoubleDouble::ZERO;
        prefix.push(acc);
        for &d in &diffs {
            acc = acc.add_f64(d);
            prefix.push(acc);
        }
        Self {
            diffs,
            prefix,
            scale,
            r,
            h_max,
        }
    }

    pub fn diffs(&self) -> &[f64] {
        &self.diffs
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// `ghat_h(u)` for `|u| <= r`, `h <= h_max`.
    pub fn eval(&self, kernel: Kernel, h: f64, u: f64) -> f64 {
        let d = &self.diffs;
        let lo = d.partition_point(|&v| (v - u) / h < -1.0);
        let hi = lo + d[lo..].partition_point(|&v| (v - u) / h <= 1.0);
        match kernel {
            Kernel::Uniform => self.scale * 0.5 * (hi - lo) as f64 / h,
            Kernel::Triangular => {
                let mid = lo + d[lo..hi].partition_point(|&v| v <= u);
                let n_left = (mid - lo) as f64;
                let n_right = (hi - mid) as f64;
                // left: sum (d - u + h); right: sum (u + h - d)
                let left = self.prefix[mid]
                    .sub(self.prefix[lo])
                    .sub(DoubleDouble::mul(n_left, u))
                    .add(DoubleDouble::mul(n_left, h));
                let right = DoubleDouble::mul(n_right, u)
                    .add(DoubleDouble::mul(n_right, h))
                    .sub(self.prefix[hi].sub(self.prefix[mid]));
                let v = left.add(right).value().max(0.0);
                self.scale * v / (h * h)
            }
        }
    }

    /// Kink candidates for bandwidth `h`.
    pub fn candidates(&self, h: f64) -> Vec<f64> {
        let lo = self.diffs.partition_point(|&v| v < -self.r - h);
        let hi = self.diffs.partition_point(|&v| v <= self.r + h);
        candidates_from(&self.diffs[lo..hi], h, self.r)
    }

    /// Maximizer of `ghat_h` over `[-r, r]` from the kink set.
    pub fn theta_hat(&self, kernel: Kernel, h: f64) -> Result<ThetaHat> {
        check_bandwidth(h)?;
        if h > self.h_max * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {h} exceeds the profile's h_max {}",
                self.h_max
            )));
        }
        let grid = self.candidates(h);
        let values: Vec<f64> = grid.iter().map(|&u| self.eval(kernel, h, u)).collect();
        let mset = MaximizerSet::from_values(&grid, &values, TIE_TOL)?;
        Ok(ThetaHat {
            theta: mset.min(),
            h,
            mset,
        })
    }
}

/// Estimated lead-lag at one bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaHat {
    /// Smallest point of the maximizer set.
    pub theta: f64,
    pub h: f64,
    pub mset: MaximizerSet,
}

/// `theta_hat_h = argmax_{|u| <= r} ghat_h(u)`, ties resolved to the smallest
/// maximizer.
pub fn theta_hat(sample: &BivariateSample, kernel: Kernel, h: f64, r: f64) -> Result<ThetaHat> {
    LagProfile::new(sample, r, h)?.theta_hat(kernel, h)
}

/// Differences of a sample in `[-r-h, r+h]`, as used by the estimator.
pub fn lag_differences(sample: &BivariateSample, h: f64, r: f64) -> DifferenceMultiset {
    pair_differences(sample, -r - h, r + h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t1: &[f64], t2: &[f64], window: f64) -> BivariateSample {
        BivariateSample::from_raw(t1, t2, window).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn single_pair_values() {
        let s = sample(&[1.0], &[1.3], 10.0);
        let v = ghat_at(&s, Kernel::Triangular, 0.5, 0.3).unwrap();
        assert!((v - 20.0).abs() < 1e-12);
        let v = ghat_at(&s, Kernel::Triangular, 0.5, 0.55).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_series_is_error() {
        let s = sample(&[], &[1.3], 10.0);
        assert_eq!(ghat_at(&s, Kernel::Triangular, 0.5, 0.0), Err(Error::EmptySeries(1)));
        assert!(theta_hat(&s, Kernel::Triangular, 0.5, 1.0).is_err());
    }

    #[test]
    fn kink_candidate_examples() {
        let s = sample(&[1.0], &[1.3], 10.0);
        let c = kink_candidates(&s, 0.1, 1.0);
        assert_eq!(c.len(), 5);
        let expect = [-1.0, 0.2, 0.3, 0.4, 1.0];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = sample(&[1.0], &[2.95], 10.0);
        assert_eq!(kink_candidates(&s, 0.1, 1.0), vec![-1.0, 1.0]);
    }

    #[test]
    fn theta_single_pair() {
        let s = sample(&[1.0], &[1.3], 10.0);
        let est = theta_hat(&s, Kernel::Triangular, 0.1, 1.0).unwrap();
        assert!((est.theta - 0.3).abs() < 1e-12);
        assert_eq!(est.mset.len(), 1);
    }

    #[test]
    fn uniform_kernel_plateau_takes_smallest() {
        let s = sample(&[1.0], &[1.3], 10.0);
        let est = theta_hat(&s, Kernel::Uniform, 0.1, 1.0).unwrap();
        // the plateau [0.2, 0.4] is represented by its kinks
        assert!((est.theta - 0.2).abs() < 1e-12);
        assert_eq!(est.mset.len(), 3);
    }

    #[test]
    fn no_pairs_gives_zero_curve() {
        let s = sample(&[1.0], &[8.0], 10.0);
        let grid: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let curve = ghat_on_grid(&s, Kernel::Triangular, 0.1, &grid).unwrap();
        assert!(curve.values.iter().all(|&v| v == 0.0));
        let est = theta_hat(&s, Kernel::Triangular, 0.1, 1.0).unwrap();
        assert_eq!(est.theta, -1.0);
    }

    #[test]
    fn grid_errors() {
        let s = sample(&[1.0], &[1.3], 10.0);
        assert_eq!(ghat_on_grid(&s, Kernel::Triangular, 0.1, &[]), Err(Error::EmptyGrid));
        assert!(ghat_on_grid(&s, Kernel::Triangular, 0.1, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn maximizer_set_distance() {
        let m = MaximizerSet::from_points(vec![0.5, -1.0], 2.0).unwrap();
        assert_eq!(m.points(), &[-1.0, 0.5]);
        assert_eq!(m.distance(0.0), 0.5);
        assert_eq!(m.distance(-3.0), 2.0);
        assert_eq!(m.distance(0.5), 0.0);
        assert!(MaximizerSet::from_points(vec![], 1.0).is_err());
    }

    fn arb_sample() -> impl Strategy<Value = BivariateSample> {
        (
            prop::collection::vec(0.0f64..30.0, 1..60),
            prop::collection::vec(0.0f64..30.0, 1..60),
        )
            .prop_map(|(mut a, mut b)| {
                for v in a.iter_mut().chain(b.iter_mut()) {
                    *v = 30.0 - *v;
                }
                a.sort_by(f64::total_cmp);
                a.dedup();
                b.sort_by(f64::total_cmp);
                b.dedup();
                sample(&a, &b, 30.0)
            })
    }

    proptest! {
        #[test]
        fn grid_matches_naive(s in arb_sample(), h in 0.01f64..1.0, tri in any::<bool>()) {
            let k = if tri { Kernel::Triangular } else { Kernel::Uniform };
            let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
            let curve = ghat_on_grid(&s, k, h, &grid).unwrap();
            for (&u, &v) in grid.iter().zip(&curve.values) {
                let naive = ghat_at_naive(&s, k, h, u).unwrap();
                prop_assert!(close(v, naive, 1e-10), "u={} {} vs {}", u, v, naive);
                prop_assert!(close(ghat_at(&s, k, h, u).unwrap(), naive, 1e-10));
                prop_assert!(v >= 0.0);
            }
        }

        #[test]
        fn sweep_matches_naive(s in arb_sample(), h in 0.001f64..1.0, tri in any::<bool>()) {
            let k = if tri { Kernel::Triangular } else { Kernel::Uniform };
            let profile = LagProfile::new(&s, 2.0, h).unwrap();
            for u in profile.candidates(h).into_iter().chain((0..21).map(|i| -2.0 + 0.2 * i as f64)) {
                let fast = profile.eval(k, h, u);
                let naive = ghat_at_naive(&s, k, h, u).unwrap();
                // absolute slack covers values that cancel to zero
                prop_assert!((fast - naive).abs() <= 1e-10 * naive.abs() + 1e-12 * profile.scale() / h,
                    "u={} {} vs {}", u, fast, naive);
            }
        }

        #[test]
        fn theta_beats_dense_grid(s in arb_sample(), h in 0.01f64..0.5) {
            let r = 1.5;
            let est = theta_hat(&s, Kernel::Triangular, h, r).unwrap();
            let at_theta = ghat_at_naive(&s, Kernel::Triangular, h, est.theta).unwrap();
            let grid: Vec<f64> = (0..=1500).map(|i| -r + 2.0 * r * i as f64 / 1500.0).collect();
            let curve = ghat_on_grid(&s, Kernel::Triangular, h, &grid).unwrap();
            let dense = curve.values.iter().copied().fold(0.0, f64::max);
            prop_assert!(at_theta >= dense - 1e-10 * dense.max(1.0));
            prop_assert!(est.theta >= -r && est.theta <= r);
        }

        #[test]
        fn translation_equivariance(s in arb_sample(), h in 0.01f64..0.5, c in -0.5f64..0.5) {
            let scale = 30.0 / (s.counts().0 as f64 * s.counts().1 as f64);
            let diffs = lag_differences(&s, h, 4.0).into_vec();
            let base = LagProfile::from_sorted(diffs.clone(), scale, 4.0, h);
            let shifted = LagProfile::from_sorted(diffs.iter().map(|d| d + c).collect(), scale, 4.0, h);
            for i in 0..20 {
                let u = -1.0 + 0.1 * i as f64;
                let a = base.eval(Kernel::Triangular, h, u);
                let b = shifted.eval(Kernel::Triangular, h, u + c);
                prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
            }
        }

        #[test]
        fn mass_conservation(s in arb_sample(), h in 0.05f64..1.0) {
            // trapezoid on the full kink set is exact for a piecewise linear curve
            let diffs = lag_differences(&s, h, 100.0);
            let grid = candidates_from(diffs.as_slice(), h, 100.0);
            let curve = ghat_on_grid(&s, Kernel::Triangular, h, &grid).unwrap();
            let mass: f64 = grid.windows(2).zip(curve.values.windows(2))
                .map(|(u, v)| 0.5 * (u[1] - u[0]) * (v[0] + v[1]))
                .sum();
            let expect = s.window_end() * (diffs.len() as f64)
                / (s.counts().0 as f64 * s.counts().1 as f64);
            prop_assert!(close(mass, expect, 1e-9), "{} vs {}", mass, expect);
        }
    }
}
