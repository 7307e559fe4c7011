//! Data-driven bandwidth selection: pairwise Lepski comparison of maximizer
//! sets and K-fold cross-validation against held-out lag differences.

use crate::cpcf::{LagProfile, MaximizerSet, ThetaHat};
use crate::kernel::Kernel;
use crate::pairs::{pair_differences, DifferenceMultiset};
use crate::series::{BivariateSample, EventSeries};
use crate::{Error, Result};

/// Candidate bandwidths, strictly decreasing and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthGrid {
    values: Vec<f64>,
}

impl BandwidthGrid {
    /// Sorts the values descending and rejects duplicates or non-positive entries.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if values.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
            return Err(Error::InvalidParameter("bandwidths must be positive".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate bandwidth in grid".into()));
        }
        Ok(Self { values })
    }

    /// `{10^-1, ..., 10^-k}`.
    pub fn decades(k: u32) -> Result<Self> {
        Self::new((1..=k as i32).map(|j| 1.0 / 10f64.powi(j)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Lepski threshold `A_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `c * ln ln T`.
    LogLog(f64),
    Fixed(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::LogLog(1.0)
    }
}

impl Threshold {
    pub fn value(self, window_end: f64) -> Result<f64> {
        let v = match self {
            Threshold::LogLog(c) => c * window_end.ln().ln(),
            Threshold::Fixed(v) => v,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {v} (T = {window_end})"
            )));
        }
        Ok(v)
    }
}

/// Parameters of the geometric grid `{a^-j : j_min <= j <= ceil(log_a T^gamma_max)}`
/// and the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LepskiConfig {
    pub a: f64,
    pub j_min: u32,
    pub gamma_max: f64,
    pub threshold: Threshold,
}

impl Default for LepskiConfig {
    fn default() -> Self {
        Self {
            a: 10.0,
            j_min: 1,
            gamma_max: 1.5,
            threshold: Threshold::default(),
        }
    }
}

/// The geometric candidate grid, descending.
pub fn bandwidth_grid(cfg: &LepskiConfig, window_end: f64) -> Result<BandwidthGrid> {
    if !(cfg.a > 1.0 && cfg.a.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid ratio must exceed 1, got {}", cfg.a)));
    }
    if !(cfg.gamma_max > 0.0) || cfg.j_min == 0 {
        return Err(Error::InvalidParameter("gamma_max and j_min must be positive".into()));
    }
    if !(window_end >= 1.0) {
        return Err(Error::InvalidParameter(format!("window must be at least 1, got {window_end}")));
    }
    let top = cfg.gamma_max * window_end.ln() / cfg.a.ln();
    // guard exact integers such as log10(10^6) against upward rounding
    let j_max = (top - 1e-9).ceil() as i64;
    if (cfg.j_min as i64) > j_max {
        return Err(Error::EmptyGrid);
    }
    BandwidthGrid::new(
        (cfg.j_min as i64..=j_max)
            .map(|j| 1.0 / cfg.a.powi(j as i32))
            .collect(),
    )
}

/// `sup |x - y|` over `x` in `m`, `y` in `m2`.
pub fn dbar(m: &MaximizerSet, m2: &MaximizerSet) -> Result<f64> {
    if m.is_empty() || m2.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok((m.max() - m2.min()).abs().max((m2.max() - m.min()).abs()))
}

/// Outcome of Lepski selection, with the full comparison matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LepskiSelection {
    pub h_hat: f64,
    pub theta: f64,
    /// Set when no bandwidth was admissible and the largest one was returned.
    pub fallback: bool,
    pub threshold: f64,
    pub grid: BandwidthGrid,
    pub fits: Vec<ThetaHat>,
    /// `dbar[i][j]` compares `grid[i]` with `grid[j]`.
    pub dbar: Vec<Vec<f64>>,
    pub admissible: Vec<bool>,
}

/// Fits every bandwidth of the grid once from a shared lag profile.
pub fn fit_grid(sample: &BivariateSample, kernel: Kernel, grid: &BandwidthGrid, r: f64) -> Result<Vec<ThetaHat>> {
    let profile = LagProfile::new(sample, r, grid.max())?;
    grid.values()
        .iter()
        .map(|&h| profile.theta_hat(kernel, h))
        .collect()
}

/// Smallest `h` with `dbar(M_h, M_h') <= A_T h'` for every `h' >= h`.
pub fn lepski_select(
    sample: &BivariateSample,
    kernel: Kernel,
    grid: &BandwidthGrid,
    threshold: f64,
    r: f64,
) -> Result<LepskiSelection> {
    let fits = fit_grid(sample, kernel, grid, r)?;
    lepski_from_fits(grid, fits, threshold)
}

/// Lepski selection from precomputed fits (one per grid value, same order).
pub fn lepski_from_fits(grid: &BandwidthGrid, fits: Vec<ThetaHat>, threshold: f64) -> Result<LepskiSelection> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    let hs = grid.values();
    debug_assert_eq!(hs.len(), fits.len());
    let n = hs.len();
    let mut dmat = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            dmat[i][j] = dbar(&fits[i].mset, &fits[j].mset)?;
        }
    }
    // grid is descending, so h' >= h_i means j <= i
    let admissible: Vec<bool> = (0..n)
        .map(|i| (0..=i).all(|j| dmat[i][j] <= threshold * hs[j]))
        .collect();
    let (idx, fallback) = match admissible.iter().rposition(|&ok| ok) {
        Some(i) => (i, false),
        None => {
            log::warn!("no admissible bandwidth at threshold {threshold}; using the largest");
            (0, true)
        }
    };
    Ok(LepskiSelection {
        h_hat: hs[idx],
        theta: fits[idx].theta,
        fallback,
        threshold,
        grid: grid.clone(),
        fits,
        dbar: dmat,
        admissible,
    })
}

/// Loss applied to held-out lag differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvLoss {
    Mse,
    #[default]
    Nearest,
}

impl std::str::FromStr for CvLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(CvLoss::Mse),
            "nearest" => Ok(CvLoss::Nearest),
            other => Err(Error::InvalidParameter(format!("unknown CV loss '{other}'"))),
        }
    }
}

impl std::fmt::Display for CvLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CvLoss::Mse => "mse",
            CvLoss::Nearest => "nearest",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub loss: CvLoss,
    pub tau: f64,
    pub n_min: usize,
    pub r: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            loss: CvLoss::Nearest,
            tau: 0.05,
            n_min: 5,
            r: 1.0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 folds, got {}", self.folds)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.n_min == 0 {
            return Err(Error::InvalidParameter("n_min must be at least 1".into()));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::InvalidParameter(format!("search range must be positive, got {}", self.r)));
        }
        Ok(())
    }
}

/// One fold: training sample with the test interval cut out, and the lag
/// differences observed inside the test interval.
#[derive(Debug, Clone)]
pub struct CvFold {
    pub train: BivariateSample,
    pub test: DifferenceMultiset,
}

fn puncture(times: &[f64], lo: f64, hi: f64, new_end: f64) -> Result<EventSeries> {
    let len = hi - lo;
    let mut kept: Vec<f64> = times
        .iter()
        .filter(|&&t| t <= lo || t > hi)
        .map(|&t| if t > hi { (t - len).min(new_end) } else { t })
        .filter(|&t| t > 0.0)
        .collect();
    kept.dedup();
    EventSeries::new(kept, new_end)
}

fn inside(times: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let a = times.partition_point(|&t| t <= lo);
    let b = times.partition_point(|&t| t <= hi);
    times[a..b].to_vec()
}

/// Splits `(0, T]` into `folds` equal intervals `(jT/K, (j+1)T/K]`.
///
/// The training sample of a fold joins the two remaining pieces by shifting
/// later events left by the fold length, on a window of length `T - T/K`.
pub fn cv_folds(sample: &BivariateSample, folds: usize, r: f64) -> Result<Vec<CvFold>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let t_end = sample.window_end();
    let k = folds as f64;
    if t_end / k <= r {
        log::warn!("fold length {} does not exceed the search range {r}", t_end / k);
    }
    (0..folds)
        .map(|j| {
            let lo = j as f64 * t_end / k;
            let hi = if j + 1 == folds { t_end } else { (j + 1) as f64 * t_end / k };
            let new_end = t_end - (hi - lo);
            let train = BivariateSample::new(
                puncture(sample.s1().times(), lo, hi, new_end)?,
                puncture(sample.s2().times(), lo, hi, new_end)?,
            )?;
            let test_sample = BivariateSample::new(
                EventSeries::new(inside(sample.s1().times(), lo, hi), t_end)?,
                EventSeries::new(inside(sample.s2().times(), lo, hi), t_end)?,
            )?;
            Ok(CvFold {
                train,
                test: pair_differences(&test_sample, -r, r),
            })
        })
        .collect()
}

/// `|M|^2 / n * sum d(d_l, M)^2`.
pub fn loss_mse(m: &MaximizerSet, diffs: &DifferenceMultiset) -> Result<f64> {
    if diffs.is_empty() {
        return Err(Error::EmptyDiffs);
    }
    if m.is_empty() {
        return Err(Error::EmptySet);
    }
    let sum: f64 = diffs.as_slice().iter().map(|&d| m.distance(d).powi(2)).sum();
    let size = m.len() as f64;
    Ok(size * size * sum / diffs.len() as f64)
}

/// Length of the smallest neighborhood of `M` containing the `k`-th nearest
/// test difference, `k = max(ceil(tau n), n_min)`; infinite when `n < k`.
pub fn loss_nearest(m: &MaximizerSet, diffs: &DifferenceMultiset, tau: f64, n_min: usize) -> f64 {
    let n = diffs.len();
    let k = ((tau * n as f64).ceil() as usize).max(n_min);
    if n < k || k == 0 || m.is_empty() {
        return f64::INFINITY;
    }
    let mut dist: Vec<f64> = diffs.as_slice().iter().map(|&d| m.distance(d)).collect();
    let (_, eps, _) = dist.select_nth_unstable_by(k - 1, f64::total_cmp);
    neighborhood_length(m.points(), *eps)
}

/// Total length of the union of `[p - eps, p + eps]` over ascending `points`.
fn neighborhood_length(points: &[f64], eps: f64) -> f64 {
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for &p in points {
        let (a, b) = (p - eps, p + eps);
        cur = match cur {
            Some((lo, hi)) if a <= hi => Some((lo, hi.max(b))),
            Some((lo, hi)) => {
                total += hi - lo;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((lo, hi)) = cur {
        total += hi - lo;
    }
    total
}

/// Outcome of cross-validated selection.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub h_hat: f64,
    pub theta: f64,
    pub grid: BandwidthGrid,
    /// `CV(h)` per grid value, `+inf` where every usable fold was infinite.
    pub scores: Vec<f64>,
}

/// Minimizes the K-fold CV score over the grid; ties go to the smallest `h`.
pub fn cv_select(
    sample: &BivariateSample,
    kernel: Kernel,
    grid: &BandwidthGrid,
    cfg: &CvConfig,
) -> Result<CvSelection> {
    cfg.validate()?;
    sample.require_nonempty()?;
    let folds = cv_folds(sample, cfg.folds, cfg.r)?;
    let usable: Vec<&CvFold> = folds.iter().filter(|f| !f.test.is_empty()).collect();
    if usable.is_empty() {
        return Err(Error::EmptyDiffs);
    }
    let mut totals = vec![0.0; grid.len()];
    for fold in &usable {
        let profile = LagProfile::new(&fold.train, cfg.r, grid.max()).ok();
        for (i, &h) in grid.values().iter().enumerate() {
            let fit = profile.as_ref().and_then(|p| p.theta_hat(kernel, h).ok());
            let loss = match fit {
                None => f64::INFINITY,
                Some(fit) => match cfg.loss {
                    CvLoss::Mse => loss_mse(&fit.mset, &fold.test)?,
                    CvLoss::Nearest => loss_nearest(&fit.mset, &fold.test, cfg.tau, cfg.n_min),
                },
            };
            totals[i] += loss;
        }
    }
    let scores: Vec<f64> = totals.iter().map(|t| t / usable.len() as f64).collect();
    let idx = select_min_score(&scores)?;
    let h_hat = grid.values()[idx];
    let theta = LagProfile::new(sample, cfg.r, h_hat)?.theta_hat(kernel, h_hat)?.theta;
    Ok(CvSelection {
        h_hat,
        theta,
        grid: grid.clone(),
        scores,
    })
}

/// Index of the minimal finite score on a descending grid, preferring the
/// smallest bandwidth (largest index) among ties.
fn select_min_score(scores: &[f64]) -> Result<usize> {
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::AllScoresInfinite);
    }
    Ok(scores.iter().rposition(|&s| s == best).expect("minimum is attained"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(points: &[f64]) -> MaximizerSet {
        MaximizerSet::from_points(points.to_vec(), 1.0).unwrap()
    }

    fn diffs(values: &[f64]) -> DifferenceMultiset {
        DifferenceMultiset::from_unsorted(values.to_vec(), -10.0, 10.0)
    }

    #[test]
    fn grid_six_decades() {
        let g = bandwidth_grid(&LepskiConfig::default(), 10_000.0).unwrap();
        assert_eq!(g.values(), &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]);
        assert_eq!(g, BandwidthGrid::decades(6).unwrap());
    }

    #[test]
    fn grid_empty_range() {
        let cfg = LepskiConfig {
            a: 2.0,
            j_min: 3,
            gamma_max: 0.1,
            ..Default::default()
        };
        assert_eq!(bandwidth_grid(&cfg, 10.0), Err(Error::EmptyGrid));
    }

    #[test]
    fn grid_strictly_decreasing() {
        for a in [1.5, 2.0, 3.0, 10.0] {
            let cfg = LepskiConfig { a, ..Default::default() };
            let g = bandwidth_grid(&cfg, 5000.0).unwrap();
            assert!(g.values().windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn dbar_examples() {
        assert_eq!(dbar(&set(&[1.0]), &set(&[1.0])).unwrap(), 0.0);
        assert_eq!(dbar(&set(&[0.0, 1.0]), &set(&[2.0])).unwrap(), 2.0);
        assert_eq!(dbar(&set(&[-1.0]), &set(&[3.0])).unwrap(), 4.0);
    }

    #[test]
    fn loss_mse_examples() {
        assert_eq!(loss_mse(&set(&[0.0]), &diffs(&[1.0, -1.0])).unwrap(), 1.0);
        assert_eq!(loss_mse(&set(&[0.0, 2.0]), &diffs(&[1.0])).unwrap(), 4.0);
        assert_eq!(loss_mse(&set(&[0.5]), &diffs(&[0.5, 0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(loss_mse(&set(&[0.5]), &diffs(&[])), Err(Error::EmptyDiffs));
    }

    #[test]
    fn loss_nearest_examples() {
        let v = loss_nearest(&set(&[0.0]), &diffs(&[-0.1, 0.1, 0.2]), 1.0, 1);
        assert!((v - 0.4).abs() < 1e-15);
        // eps = 0.2 from the third order statistic; neighborhoods overlap
        let v = loss_nearest(&set(&[0.0, 0.1]), &diffs(&[0.3, -0.2, 0.05]), 1.0, 1);
        assert!((v - 0.5).abs() < 1e-15, "{v}");
        assert_eq!(loss_nearest(&set(&[0.0]), &diffs(&[0.1, 0.2]), 0.5, 5), f64::INFINITY);
    }

    #[test]
    fn neighborhoods_disjoint_and_merged() {
        assert!((neighborhood_length(&[0.0, 1.0], 0.1) - 0.4).abs() < 1e-15);
        assert!((neighborhood_length(&[0.0, 0.1, 1.0], 0.1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cv_folds_without_events_in_second_half() {
        let s = BivariateSample::from_raw(&[1.0, 2.0], &[1.2, 2.5], 10.0).unwrap();
        let folds = cv_folds(&s, 2, 1.0).unwrap();
        assert_eq!(folds[0].test.len(), 3);
        assert!(folds[1].test.is_empty());
        assert_eq!(folds[1].train.window_end(), 5.0);
        assert_eq!(folds[0].train.counts(), (0, 0));
    }

    #[test]
    fn select_min_prefers_smallest_h() {
        assert_eq!(select_min_score(&[1.0, 1.0, 1.0]).unwrap(), 2);
        assert_eq!(select_min_score(&[f64::INFINITY, 2.0, f64::INFINITY]).unwrap(), 1);
        assert_eq!(
            select_min_score(&[f64::INFINITY, f64::INFINITY]),
            Err(Error::AllScoresInfinite)
        );
    }

    fn fit(points: &[f64]) -> ThetaHat {
        let mset = set(points);
        ThetaHat { theta: mset.min(), h: 0.0, mset }
    }

    #[test]
    fn lepski_all_equal_takes_smallest() {
        let grid = BandwidthGrid::decades(4).unwrap();
        let fits = (0..4).map(|_| fit(&[0.2])).collect();
        let sel = lepski_from_fits(&grid, fits, 1.0).unwrap();
        assert_eq!(sel.h_hat, 1e-4);
        assert!(!sel.fallback);
    }

    #[test]
    fn lepski_fallback_when_largest_inadmissible() {
        let grid = BandwidthGrid::new(vec![0.1]).unwrap();
        let sel = lepski_from_fits(&grid, vec![fit(&[-0.5, 0.5])], 1.0).unwrap();
        assert!(sel.fallback);
        assert_eq!(sel.h_hat, 0.1);
        let sel = lepski_from_fits(&grid, vec![fit(&[-0.5, 0.5])], 10.0).unwrap();
        assert!(!sel.fallback);
    }

    #[test]
    fn lepski_large_threshold_takes_smallest() {
        let grid = BandwidthGrid::decades(3).unwrap();
        let fits = vec![fit(&[0.0]), fit(&[-1.0]), fit(&[1.0])];
        let r = 1.0;
        let sel = lepski_from_fits(&grid, fits, 2.0 * r / grid.min()).unwrap();
        assert_eq!(sel.h_hat, grid.min());
    }

    proptest! {
        #[test]
        fn lepski_monotone_in_threshold(
            centers in prop::collection::vec(-1.0f64..1.0, 5),
            t1 in 0.1f64..50.0,
            extra in 0.0f64..50.0,
        ) {
            let grid = BandwidthGrid::decades(5).unwrap();
            let fits: Vec<ThetaHat> = centers.iter().map(|&c| fit(&[c])).collect();
            let a = lepski_from_fits(&grid, fits.clone(), t1).unwrap();
            let b = lepski_from_fits(&grid, fits, t1 + extra).unwrap();
            prop_assert!(b.h_hat <= a.h_hat);
            for (x, y) in a.admissible.iter().zip(&b.admissible) {
                prop_assert!(!x || *y);
            }
        }

        #[test]
        fn loss_nearest_monotone_in_tau(
            values in prop::collection::vec(-1.0f64..1.0, 1..40),
            tau in 0.01f64..0.5,
            extra in 0.0f64..0.5,
        ) {
            let m = set(&[0.1, 0.3]);
            let d = diffs(&values);
            prop_assert!(loss_nearest(&m, &d, tau, 1) <= loss_nearest(&m, &d, tau + extra, 1));
            prop_assert!(loss_nearest(&m, &d, tau, 1) <= loss_nearest(&m, &d, tau, 3));
        }

        #[test]
        fn loss_mse_dilation(values in prop::collection::vec(-1.0f64..1.0, 1..40), c in 0.1f64..5.0) {
            let m = set(&[0.1, 0.3]);
            let base = loss_mse(&m, &diffs(&values)).unwrap();
            let scaled_values: Vec<f64> = values.iter().map(|v| v * c).collect();
            let scaled = loss_mse(&set(&[0.1 * c, 0.3 * c]), &diffs(&scaled_values)).unwrap();
            prop_assert!((scaled - c * c * base).abs() <= 1e-9 * scaled.max(1e-12));
        }

        #[test]
        fn fold_diffs_contained_in_full(
            a in prop::collection::btree_set(1u32..10_000, 1..50),
            b in prop::collection::btree_set(1u32..10_000, 1..50),
            k in 2usize..6,
        ) {
            let t1: Vec<f64> = a.into_iter().map(|v| v as f64 * 1e-3).collect();
            let t2: Vec<f64> = b.into_iter().map(|v| v as f64 * 1e-3 + 2e-4).collect();
            let s = BivariateSample::from_raw(&t1, &t2, 10.5).unwrap();
            let full = pair_differences(&s, -0.7, 0.7).into_vec();
            let folds = cv_folds(&s, k, 0.7).unwrap();
            let mut union: Vec<f64> = folds.iter().flat_map(|f| f.test.as_slice().to_vec()).collect();
            union.sort_by(f64::total_cmp);
            // multiset containment
            let mut i = 0;
            for d in &union {
                while i < full.len() && full[i] < *d {
                    i += 1;
                }
                prop_assert!(i < full.len() && full[i] == *d);
                i += 1;
            }
            for f in &folds {
                let (n1, n2) = f.train.counts();
                prop_assert!(n1 <= t1.len() && n2 <= t2.len());
            }
        }
    }
}
