//! Monte Carlo experiments: RMSE of lead-lag estimators over replicated
//! simulations, log-log slope fits, and the bucket/kernel correspondence
//! diagnostic.
//!
//! Replicate `b` at the `t`-th window length draws from stream
//! `t * 2^32 + b` of the ChaCha8 generator keyed by the master seed: first
//! `theta*`, then the simulation seed. Every estimator sees the same sample
//! and `theta*` within a replicate.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use crate::bandwidth::{bandwidth_grid, cv_select, lepski_select, BandwidthGrid, CvConfig, CvLoss, LepskiConfig, Threshold};
use crate::cpcf::theta_hat;
use crate::ds::{ds_estimate, BucketOccupancy, DsConfig};
use crate::kernel::Kernel;
use crate::models::{replicate_rng, ModelSpec, SimOptions};
use crate::numeric::tanh_sinh;
use crate::series::BivariateSample;
use crate::{Error, Result};

/// Bandwidth candidates, either listed or geometric in `T`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Fixed(BandwidthGrid),
    Geometric { a: f64, j_min: u32, gamma_max: f64 },
}

impl Default for GridSpec {
    /// `{10^-1, ..., 10^-6}`.
    fn default() -> Self {
        GridSpec::Fixed(BandwidthGrid::decades(6).expect("six decades"))
    }
}

impl GridSpec {
    pub fn resolve(&self, window_end: f64) -> Result<BandwidthGrid> {
        match *self {
            GridSpec::Fixed(ref g) => Ok(g.clone()),
            GridSpec::Geometric { a, j_min, gamma_max } => bandwidth_grid(
                &LepskiConfig {
                    a,
                    j_min,
                    gamma_max,
                    threshold: Threshold::default(),
                },
                window_end,
            ),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Fixed(g) => {
                let parts: Vec<String> = g.values().iter().map(|h| format!("{h:e}")).collect();
                write!(f, "grid={}", parts.join("/"))
            }
            GridSpec::Geometric { a, j_min, gamma_max } => write!(f, "a={a} jmin={j_min} gmax={gamma_max}"),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::LogLog(c) => write!(f, "{c}*loglogT"),
            Threshold::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Threshold {
    type Err = Error;

    /// `c*loglogT`, `loglogT`, or a positive number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse threshold '{s}'"));
        if let Some(c) = s.strip_suffix("loglogT") {
            let c = c.trim().trim_end_matches('*').trim();
            let mult = if c.is_empty() { 1.0 } else { c.parse::<f64>().map_err(|_| bad())? };
            if !(mult > 0.0 && mult.is_finite()) {
                return Err(bad());
            }
            return Ok(Threshold::LogLog(mult));
        }
        let v = s.parse::<f64>().map_err(|_| bad())?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(bad());
        }
        Ok(Threshold::Fixed(v))
    }
}

/// An estimator with its tuning parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Ds { h: f64 },
    Kernel { h: f64, kernel: Kernel },
    Lepski { grid: GridSpec, threshold: Threshold, kernel: Kernel },
    Cv { grid: GridSpec, folds: usize, loss: CvLoss, tau: f64, n_min: usize, kernel: Kernel },
}

impl EstimatorSpec {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorSpec::Ds { .. } => "ds",
            EstimatorSpec::Kernel { .. } => "kernel",
            EstimatorSpec::Lepski { .. } => "lepski",
            EstimatorSpec::Cv { .. } => "cv",
        }
    }

    /// Space-separated `key=value` parameters, in the syntax accepted by `parse`.
    pub fn params(&self) -> String {
        match self {
            EstimatorSpec::Ds { h } => format!("h={h}"),
            EstimatorSpec::Kernel { h, kernel } => format!("h={h} kernel={kernel}"),
            EstimatorSpec::Lepski { grid, threshold, kernel } => format!("{grid} At={threshold} kernel={kernel}"),
            EstimatorSpec::Cv { grid, folds, loss, tau, n_min, kernel } => {
                format!("{grid} folds={folds} loss={loss} tau={tau} nmin={n_min} kernel={kernel}")
            }
        }
    }

    /// Estimates `theta` from one sample with search half-range `r`.
    pub fn estimate(&self, sample: &BivariateSample, r: f64) -> Result<f64> {
        let t_end = sample.window_end();
        match self {
            EstimatorSpec::Ds { h } => Ok(ds_estimate(sample, &DsConfig::new(*h, r)?)?.theta),
            EstimatorSpec::Kernel { h, kernel } => Ok(theta_hat(sample, *kernel, *h, r)?.theta),
            EstimatorSpec::Lepski { grid, threshold, kernel } => {
                let grid = grid.resolve(t_end)?;
                Ok(lepski_select(sample, *kernel, &grid, threshold.value(t_end)?, r)?.theta)
            }
            EstimatorSpec::Cv { grid, folds, loss, tau, n_min, kernel } => {
                let grid = grid.resolve(t_end)?;
                let cfg = CvConfig {
                    folds: *folds,
                    loss: *loss,
                    tau: *tau,
                    n_min: *n_min,
                    r,
                };
                Ok(cv_select(sample, *kernel, &grid, &cfg)?.theta)
            }
        }
    }

    /// Parses `method key=value ...`, e.g. `lepski At=2*loglogT` or
    /// `cv loss=nearest tau=0.05`.
    pub fn parse(line: &str) -> Result<Self> {
        let mut words = line.split_whitespace();
        let method = words
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty estimator description".into()))?;
        let mut kv = Vec::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got '{w}'")))?;
            kv.push((k.to_ascii_lowercase(), v.to_string()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let num = |key: &str| -> Result<Option<f64>> {
            get(key)
                .map(|v| v.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number for {key}: '{v}'"))))
                .transpose()
        };
        let int = |key: &str| -> Result<Option<usize>> {
            get(key)
                .map(|v| v.parse::<usize>().map_err(|_| Error::InvalidParameter(format!("bad integer for {key}: '{v}'"))))
                .transpose()
        };
        let known: &[&str] = match method {
            "ds" => &["h"],
            "kernel" => &["h", "kernel"],
            "lepski" => &["a", "jmin", "gmax", "grid", "at", "kernel"],
            "cv" => &["a", "jmin", "gmax", "grid", "folds", "loss", "tau", "nmin", "kernel"],
            other => return Err(Error::InvalidParameter(format!("unknown estimator '{other}'"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!("unknown parameter '{k}' for {method}")));
        }
        let kernel = get("kernel").map(str::parse::<Kernel>).transpose()?.unwrap_or_default();
        let grid = || -> Result<GridSpec> {
            if let Some(list) = get("grid") {
                let values = list
                    .split('/')
                    .map(|v| v.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad grid value '{v}'"))))
                    .collect::<Result<Vec<f64>>>()?;
                return Ok(GridSpec::Fixed(BandwidthGrid::new(values)?));
            }
            if get("a").is_none() && get("jmin").is_none() && get("gmax").is_none() {
                return Ok(GridSpec::default());
            }
            let d = LepskiConfig::default();
            Ok(GridSpec::Geometric {
                a: num("a")?.unwrap_or(d.a),
                j_min: int("jmin")?.map(|j| j as u32).unwrap_or(d.j_min),
                gamma_max: num("gmax")?.unwrap_or(d.gamma_max),
            })
        };
        let positive_h = || -> Result<f64> {
            let h = num("h")?.ok_or_else(|| Error::InvalidParameter(format!("{method} needs h=")))?;
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
            }
            Ok(h)
        };
        Ok(match method {
            "ds" => EstimatorSpec::Ds { h: positive_h()? },
            "kernel" => EstimatorSpec::Kernel { h: positive_h()?, kernel },
            "lepski" => EstimatorSpec::Lepski {
                grid: grid()?,
                threshold: get("at").map(str::parse::<Threshold>).transpose()?.unwrap_or_default(),
                kernel,
            },
            _ => {
                let d = CvConfig::default();
                let cfg = CvConfig {
                    folds: int("folds")?.unwrap_or(d.folds),
                    loss: get("loss").map(str::parse::<CvLoss>).transpose()?.unwrap_or(d.loss),
                    tau: num("tau")?.unwrap_or(d.tau),
                    n_min: int("nmin")?.unwrap_or(d.n_min),
                    r: 1.0,
                };
                cfg.validate()?;
                EstimatorSpec::Cv {
                    grid: grid()?,
                    folds: cfg.folds,
                    loss: cfg.loss,
                    tau: cfg.tau,
                    n_min: cfg.n_min,
                    kernel,
                }
            }
        })
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.label(), self.params())
    }
}

/// Distribution of the true lead-lag per replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaLaw {
    Fixed(f64),
    Uniform(f64, f64),
}

impl ThetaLaw {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            ThetaLaw::Fixed(v) => Ok(v),
            ThetaLaw::Uniform(lo, hi) => Ok(Uniform::new(lo, hi)
                .map_err(|e| Error::InvalidParameter(format!("theta law: {e}")))?
                .sample(rng)),
        }
    }
}

impl fmt::Display for ThetaLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaLaw::Fixed(v) => write!(f, "{v}"),
            ThetaLaw::Uniform(lo, hi) => write!(f, "uniform({lo},{hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Label written to the table.
    pub scenario: String,
    pub model: ModelSpec,
    pub windows: Vec<f64>,
    pub replicates: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub theta_law: ThetaLaw,
    pub r: f64,
    pub master_seed: u64,
    pub sim: SimOptions,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("need at least one replicate".into()));
        }
        if self.windows.is_empty() || self.windows.iter().any(|&t| !(t >= 1.0 && t.is_finite())) {
            return Err(Error::InvalidParameter("window lengths must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidParameter("no estimators configured".into()));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!("search range must be positive, got {}", self.r)));
        }
        if self.replicates as u64 > u32::MAX as u64 {
            return Err(Error::InvalidParameter("too many replicates".into()));
        }
        self.model.validate()
    }
}

/// One replicate: true lead-lag and each estimator's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub index: usize,
    pub theta_star: f64,
    pub estimates: Vec<Result<f64>>,
}

/// Simulates replicate `index` at window `window_end` and applies every estimator.
pub fn run_replicate(cfg: &ExperimentConfig, t_index: usize, window_end: f64, index: usize) -> ReplicateRecord {
    let stream = ((t_index as u64) << 32) + index as u64;
    let mut rng = replicate_rng(cfg.master_seed, stream);
    let outcome = (|| -> Result<(f64, BivariateSample)> {
        let theta_star = cfg.theta_law.draw(&mut rng)?;
        let mut sim_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let sample = cfg
            .model
            .with_theta(theta_star)
            .simulate_with(window_end, &mut sim_rng, &cfg.sim)?;
        Ok((theta_star, sample))
    })();
    match outcome {
        Ok((theta_star, sample)) => ReplicateRecord {
            index,
            theta_star,
            estimates: cfg.estimators.iter().map(|e| e.estimate(&sample, cfg.r)).collect(),
        },
        Err(e) => ReplicateRecord {
            index,
            theta_star: f64::NAN,
            estimates: cfg.estimators.iter().map(|_| Err(e.clone())).collect(),
        },
    }
}

/// All replicates at one window length, in index order.
pub fn run_window(cfg: &ExperimentConfig, t_index: usize) -> Vec<ReplicateRecord> {
    let window_end = cfg.windows[t_index];
    (0..cfg.replicates)
        .into_par_iter()
        .map(|b| run_replicate(cfg, t_index, window_end, b))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub scenario: String,
    pub estimator: String,
    pub params: String,
    pub window_end: f64,
    pub replicates: usize,
    pub rmse: f64,
    pub mean_abs_error: f64,
    /// Replicates where simulation or estimation failed; excluded from the errors.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmseTable {
    pub rows: Vec<RmseRow>,
}

pub const CSV_HEADER: &str = "scenario,estimator,params,T,replicates,rmse,mean_abs_error,failures";

impl RmseTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.scenario, r.estimator, r.params, r.window_end, r.replicates, r.rmse, r.mean_abs_error, r.failures
            ));
        }
        out
    }

    /// Rows of one estimator, ordered by window length.
    pub fn series(&self, scenario: &str, estimator: &str, params: &str) -> Vec<&RmseRow> {
        let mut rows: Vec<&RmseRow> = self
            .rows
            .iter()
            .filter(|r| r.scenario == scenario && r.estimator == estimator && r.params == params)
            .collect();
        rows.sort_by(|a, b| a.window_end.total_cmp(&b.window_end));
        rows
    }
}

/// Aggregates per-replicate errors into RMSE and mean absolute error.
pub fn summarize(records: &[ReplicateRecord], which: usize) -> (f64, f64, usize) {
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut n = 0usize;
    let mut failures = 0usize;
    for rec in records {
        match &rec.estimates[which] {
            Ok(theta) => {
                let e = theta - rec.theta_star;
                sq += e * e;
                abs += e.abs();
                n += 1;
            }
            Err(_) => failures += 1,
        }
    }
    if n == 0 {
        return (f64::NAN, f64::NAN, failures);
    }
    ((sq / n as f64).sqrt(), abs / n as f64, failures)
}

/// Runs every (window, estimator) cell; errors never abort the sweep.
pub fn run_rmse_experiment(cfg: &ExperimentConfig) -> Result<RmseTable> {
    cfg.validate()?;
    let per_window: Vec<Vec<ReplicateRecord>> = (0..cfg.windows.len()).map(|t| run_window(cfg, t)).collect();
    let mut rows = Vec::new();
    for (e, est) in cfg.estimators.iter().enumerate() {
        for (t, records) in per_window.iter().enumerate() {
            let (rmse, mae, failures) = summarize(records, e);
            if failures > 0 {
                log::warn!("{} at T = {}: {failures} failed replicates", est, cfg.windows[t]);
            }
            rows.push(RmseRow {
                scenario: cfg.scenario.clone(),
                estimator: est.label().to_string(),
                params: est.params(),
                window_end: cfg.windows[t],
                replicates: cfg.replicates,
                rmse,
                mean_abs_error: mae,
                failures,
            });
        }
    }
    Ok(RmseTable { rows })
}

/// Least-squares slope of `log y` on `log x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Fits `log(rmse) = a + slope * log(T)`; needs three distinct `T` with finite positive RMSE.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: xs.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let stderr = if pts.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit {
        slope,
        stderr,
        points: pts.len(),
    })
}

/// Log-log RMSE slope of one estimator in a table.
pub fn fit_loglog_slope(table: &RmseTable, scenario: &str, estimator: &str, params: &str) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = table
        .series(scenario, estimator, params)
        .into_iter()
        .map(|r| (r.window_end, r.rmse))
        .collect();
    fit_loglog(&pts)
}

/// Comparison of bucket activity with the kernel-smoothed model CPCF.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceReport {
    /// `max_l |X_rel(l)/h - (lambda1 v lambda2) (K_h * g)(l h)|`.
    pub max_discrepancy: f64,
    pub worst_offset: i64,
    /// `(l, X_rel(l)/h, (lambda1 v lambda2) (K_h * g)(l h))` per offset.
    pub rows: Vec<(i64, f64, f64)>,
}

/// `(K^tri_h * g)(x) = int K_h(u - x) g(u) du` by quadrature, split at the
/// kernel kinks and at the CPCF's own breakpoints.
pub fn smoothed_cpcf(oracle: &crate::models::CpcfOracle, h: f64, x: f64) -> Result<f64> {
    let c = x - oracle.theta();
    let mut cuts = vec![c - h, c, c + h];
    cuts.extend(oracle.breakpoints().into_iter().filter(|&b| b > c - h && b < c + h));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let err = std::cell::RefCell::new(None);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += tanh_sinh(
            |v| {
                let k = Kernel::Triangular.eval_scaled(v - c, h);
                if k == 0.0 {
                    return 0.0;
                }
                match oracle.centered(v) {
                    Ok(g) => k * g,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            w[0],
            w[1],
        );
    }
    match err.into_inner() {
        Some(Error::PoleAt(_)) | None => Ok(total),
        Some(e) => Err(e),
    }
}

/// Discrepancy between `X_rel(l)/h` and `(lambda1 v lambda2)(K^tri_h * g)(l h)`
/// over offsets `|l h| <= r`.
pub fn ds_kernel_correspondence(
    sample: &BivariateSample,
    h: f64,
    r: f64,
    spec: &ModelSpec,
) -> Result<CorrespondenceReport> {
    sample.require_nonempty()?;
    let oracle = spec.oracle()?;
    let (l1, l2) = spec.intensities()?;
    let lmax = l1.max(l2);
    let cfg = DsConfig::new(h, r)?;
    let occ = BucketOccupancy::new(sample, h)?;
    let max_offset = cfg.max_offset().min((occ.buckets() - 1) / 2);
    let mut rows = Vec::new();
    let mut worst = (f64::NEG_INFINITY, 0i64);
    for l in -max_offset..=max_offset {
        let Ok(rel) = occ.rel(l) else { continue };
        let model = lmax * smoothed_cpcf(&oracle, h, l as f64 * h)?;
        let d = (rel / h - model).abs();
        if d > worst.0 {
            worst = (d, l);
        }
        rows.push((l, rel / h, model));
    }
    if rows.is_empty() {
        return Err(Error::DegenerateDenominator { offset: 0 });
    }
    Ok(CorrespondenceReport {
        max_discrepancy: worst.0,
        worst_offset: worst.1,
        rows,
    })
}

/// Two-column CSV of a curve, for external plotting.
pub fn curve_csv(x_name: &str, y_name: &str, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("{x_name},{y_name}\n");
    for (x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}
