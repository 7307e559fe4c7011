use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use leadlag::bandwidth::{cv_select, lepski_select, BandwidthGrid, CvConfig, CvLoss, Threshold};
use leadlag::cpcf::LagProfile;
use leadlag::ds::{ds_estimate, DsConfig};
use leadlag::harness::{
    curve_csv, fit_loglog_slope, run_rmse_experiment, EstimatorSpec, ExperimentConfig, GridSpec, RmseTable, ThetaLaw,
};
use leadlag::models::{scenario, ModelSpec, SimOptions};
use leadlag::{BivariateSample, Error, Kernel};

use crate::args::{EstimateArgs, ExperimentArgs, Method, SimulateArgs};
use crate::failure::{CliResult, Failure};
use crate::ingest::{ingest_timestamps, IngestSpec};
use crate::keyvalue::{self, at, parse_f64, parse_list, Entry};
use crate::modelfile::{check_keys, model_entries, model_from_entries};
use crate::output::{sig17, write_atomic};

/// Keys a metadata sidecar adds on top of the model description.
const META_KEYS: [&str; 9] = [
    "T",
    "seed",
    "event_budget",
    "intensity1",
    "intensity2",
    "events1",
    "events2",
    "s1",
    "s2",
];

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn times_text(times: &[f64]) -> String {
    let mut out = String::with_capacity(times.len() * 22);
    for &t in times {
        out.push_str(&sig17(t));
        out.push('\n');
    }
    out
}

pub fn simulate(args: &SimulateArgs) -> CliResult<String> {
    let (entries, origin) = match &args.spec_file {
        Some(path) => {
            let origin = path.display().to_string();
            let entries = keyvalue::read(path)?;
            check_keys(&entries, &origin, &META_KEYS)?;
            (entries, origin)
        }
        None => (Vec::new(), String::new()),
    };
    let file_value = |key: &str| entries.iter().rev().find(|e| e.key == key);
    let (label, spec) = match &args.scenario {
        Some(name) => (name.clone(), scenario(name).map_err(|e| Failure::usage(e.to_string()))?.spec),
        None => model_from_entries(&entries, &origin)?
            .ok_or_else(|| Failure::usage("give --scenario or a --spec-file with 'scenario' or 'model'"))?,
    };
    let spec = match args.theta {
        Some(t) => spec.with_theta(t),
        None => spec,
    };
    spec.validate()?;
    let window_end = match (args.window_end, file_value("T")) {
        (Some(t), _) => t,
        (None, Some(e)) => parse_f64(&origin, e)?,
        (None, None) => return Err(Failure::usage("missing --T")),
    };
    let seed = match (args.seed, file_value("seed")) {
        (Some(s), _) => s,
        (None, Some(e)) => e
            .value
            .parse::<u64>()
            .map_err(|_| at(&origin, e, "expected a non-negative integer"))?,
        (None, None) => return Err(Failure::usage("missing --seed")),
    };
    let mut opts = SimOptions::default();
    if let Some(b) = args.event_budget {
        opts.event_budget = b;
    } else if let Some(e) = file_value("event_budget") {
        opts.event_budget = e
            .value
            .parse()
            .map_err(|_| at(&origin, e, "expected a non-negative integer"))?;
    }

    let sample = spec.simulate_seeded(window_end, seed, &opts)?;
    let (lambda1, lambda2) = spec.intensities()?;
    let p1 = with_suffix(&args.out_prefix, ".s1.txt");
    let p2 = with_suffix(&args.out_prefix, ".s2.txt");
    let pm = with_suffix(&args.out_prefix, ".meta.txt");
    let file_name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();

    let mut meta = String::from("# leadlag simulate output; usable as --spec-file\n");
    if args.scenario.is_some() || file_value("scenario").is_some() {
        let _ = writeln!(meta, "scenario = {label}");
    }
    for (k, v) in model_entries(&spec) {
        let _ = writeln!(meta, "{k} = {v}");
    }
    let _ = writeln!(meta, "T = {window_end}");
    let _ = writeln!(meta, "seed = {seed}");
    if opts.event_budget != SimOptions::default().event_budget {
        let _ = writeln!(meta, "event_budget = {}", opts.event_budget);
    }
    let (n1, n2) = sample.counts();
    let _ = writeln!(meta, "intensity1 = {lambda1}");
    let _ = writeln!(meta, "intensity2 = {lambda2}");
    let _ = writeln!(meta, "events1 = {n1}");
    let _ = writeln!(meta, "events2 = {n2}");
    let _ = writeln!(meta, "s1 = {}", file_name(&p1));
    let _ = writeln!(meta, "s2 = {}", file_name(&p2));

    write_atomic(&p1, &times_text(sample.s1().times()))?;
    write_atomic(&p2, &times_text(sample.s2().times()))?;
    write_atomic(&pm, &meta)?;
    Ok(format!(
        "{}: {n1} events\n{}: {n2} events\n{}\n",
        p1.display(),
        p2.display(),
        pm.display()
    ))
}

fn parse_grid(args: &EstimateArgs) -> CliResult<GridSpec> {
    if let Some(list) = &args.bandwidths {
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::usage(format!("bad bandwidth '{v}' in --bandwidths")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        return Ok(GridSpec::Fixed(BandwidthGrid::new(values)?));
    }
    let Some(spec) = &args.grid else {
        return Ok(GridSpec::default());
    };
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || Failure::usage(format!("--grid expects a,jmin,gmax, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(GridSpec::Geometric {
        a: parts[0].parse().map_err(|_| bad())?,
        j_min: parts[1].parse().map_err(|_| bad())?,
        gamma_max: parts[2].parse().map_err(|_| bad())?,
    })
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(", ")
}

/// Piecewise-linear curve through its kink points.
fn kernel_curve(sample: &BivariateSample, kernel: Kernel, h: f64, r: f64) -> CliResult<String> {
    let profile = LagProfile::new(sample, r, h)?;
    let points: Vec<(f64, f64)> = profile
        .candidates(h)
        .into_iter()
        .map(|u| (u, profile.eval(kernel, h, u)))
        .collect();
    Ok(curve_csv("u", "ghat", points))
}

pub fn estimate(args: &EstimateArgs) -> CliResult<String> {
    if matches!(args.method, Method::Ds | Method::Kernel) && args.h.is_none() {
        return Err(Failure::usage(format!(
            "--method {} needs --h",
            if args.method == Method::Ds { "ds" } else { "kernel" }
        )));
    }
    if matches!(args.method, Method::Lepski | Method::Cv) && args.h.is_some() {
        log::warn!("--h is ignored by bandwidth selection; use --bandwidths or --grid");
    }
    if !(args.r > 0.0 && args.r.is_finite()) {
        return Err(Failure::usage(format!("--r must be positive, got {}", args.r)));
    }
    let kernel: Kernel = args.kernel.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let window = match &args.window {
        Some(w) => {
            let (a, b) = w
                .split_once(',')
                .ok_or_else(|| Failure::usage(format!("--window expects start,end, got '{w}'")))?;
            Some((a.trim().to_string(), b.trim().to_string()))
        }
        None => None,
    };
    let sample = ingest_timestamps(&IngestSpec {
        path1: args.s1.clone(),
        path2: args.s2.clone(),
        unit: args.unit,
        window,
        dedup: args.dedup,
    })?;
    let t_end = sample.window_end();
    let (n1, n2) = sample.counts();

    let mut report = String::new();
    let method = match args.method {
        Method::Ds => "ds",
        Method::Kernel => "kernel",
        Method::Lepski => "lepski",
        Method::Cv => "cv",
    };
    let _ = writeln!(report, "method = {method}");
    let _ = writeln!(report, "T = {t_end}");
    let _ = writeln!(report, "n1 = {n1}");
    let _ = writeln!(report, "n2 = {n2}");
    let _ = writeln!(report, "r = {}", args.r);

    let curve = match args.method {
        Method::Ds => {
            let h = args.h.expect("checked above");
            let est = ds_estimate(&sample, &DsConfig::new(h, args.r)?)?;
            let _ = writeln!(report, "h = {h}");
            let _ = writeln!(report, "offset = {}", est.offset);
            let _ = writeln!(report, "theta = {}", est.theta);
            let points: Vec<(f64, f64)> = est.curve.points().collect();
            curve_csv("lag", "rel", points)
        }
        Method::Kernel => {
            let h = args.h.expect("checked above");
            let profile = LagProfile::new(&sample, args.r, h)?;
            let fit = profile.theta_hat(kernel, h)?;
            let _ = writeln!(report, "kernel = {kernel}");
            let _ = writeln!(report, "h = {h}");
            let _ = writeln!(report, "theta = {}", fit.theta);
            let _ = writeln!(report, "maximizers = {}", join(fit.mset.points().iter().map(|p| p.to_string())));
            let _ = writeln!(report, "ghat_max = {}", fit.mset.value());
            kernel_curve(&sample, kernel, h, args.r)?
        }
        Method::Lepski => {
            let grid = parse_grid(args)?.resolve(t_end)?;
            let threshold: Threshold = match &args.threshold {
                Some(s) => s.parse().map_err(|e: Error| Failure::usage(e.to_string()))?,
                None => Threshold::default(),
            };
            let sel = lepski_select(&sample, kernel, &grid, threshold.value(t_end)?, args.r)?;
            let _ = writeln!(report, "kernel = {kernel}");
            let _ = writeln!(report, "threshold = {} ({threshold})", sel.threshold);
            let _ = writeln!(report, "h = {}", sel.h_hat);
            let _ = writeln!(report, "theta = {}", sel.theta);
            let chosen = sel.fits.iter().find(|f| f.h == sel.h_hat).expect("selected h is on the grid");
            let _ = writeln!(report, "maximizers = {}", join(chosen.mset.points().iter().map(|p| p.to_string())));
            let _ = writeln!(report, "fallback = {}", sel.fallback);
            let _ = writeln!(report, "grid.h = {}", join(grid.values().iter().map(|h| h.to_string())));
            let _ = writeln!(report, "grid.theta = {}", join(sel.fits.iter().map(|f| f.theta.to_string())));
            let _ = writeln!(report, "grid.admissible = {}", join(sel.admissible.iter().map(|a| a.to_string())));
            kernel_curve(&sample, kernel, sel.h_hat, args.r)?
        }
        Method::Cv => {
            let grid = parse_grid(args)?.resolve(t_end)?;
            let loss: CvLoss = args.cv_loss.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
            let cfg = CvConfig {
                folds: args.cv_folds,
                loss,
                tau: args.tau,
                n_min: args.n_min,
                r: args.r,
            };
            cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
            let sel = cv_select(&sample, kernel, &grid, &cfg)?;
            let _ = writeln!(report, "kernel = {kernel}");
            let _ = writeln!(report, "loss = {loss}");
            let _ = writeln!(report, "h = {}", sel.h_hat);
            let _ = writeln!(report, "theta = {}", sel.theta);
            let _ = writeln!(report, "grid.h = {}", join(grid.values().iter().map(|h| h.to_string())));
            let _ = writeln!(report, "grid.cv = {}", join(sel.scores.iter().map(|s| s.to_string())));
            kernel_curve(&sample, kernel, sel.h_hat, args.r)?
        }
    };
    if let Some(path) = &args.out {
        write_atomic(path, &curve)?;
    }
    Ok(report)
}

/// Parsed experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentFile {
    pub config: ExperimentConfig,
    /// Builtin scenario the model matches, if any, for the reference slope.
    pub reference_slope: Option<f64>,
}

fn parse_theta_law(origin: &str, e: &Entry) -> CliResult<ThetaLaw> {
    let v = e.value.replace(' ', "").to_ascii_lowercase();
    if let Some(inner) = v
        .strip_prefix("uniform(")
        .or_else(|| v.strip_prefix("u("))
        .and_then(|s| s.strip_suffix(')'))
    {
        let parts: Vec<&str> = inner.split(',').collect();
        if let [lo, hi] = parts.as_slice() {
            if let (Ok(lo), Ok(hi)) = (lo.parse::<f64>(), hi.parse::<f64>()) {
                if lo < hi {
                    return Ok(ThetaLaw::Uniform(lo, hi));
                }
            }
        }
        return Err(at(origin, e, "expected uniform(lo, hi) with lo < hi"));
    }
    Ok(ThetaLaw::Fixed(parse_f64(origin, e)?))
}

const EXPERIMENT_KEYS: [&str; 7] = ["T", "replicates", "r", "seed", "estimator", "event_budget", "theta"];

/// Reads an experiment description:
///
/// ```text
/// scenario = ns_gamma_3          # or model = ... with its parameters
/// T = 1000, 2000, 4000, 8000
/// replicates = 200
/// theta = uniform(-0.1, 0.1)     # or a fixed value
/// r = 1
/// seed = 1
/// estimator = lepski At=loglogT  # repeatable
/// ```
pub fn parse_experiment(text: &str, origin: &str) -> CliResult<ExperimentFile> {
    let entries = keyvalue::parse(text, origin)?;
    check_keys(&entries, origin, &EXPERIMENT_KEYS)?;
    let last = |key: &str| entries.iter().rev().find(|e| e.key == key);
    // theta here is the law of theta*, not a model parameter
    let model_entries: Vec<Entry> = entries.iter().filter(|e| e.key != "theta").cloned().collect();
    let (label, model): (String, ModelSpec) = model_from_entries(&model_entries, origin)?
        .ok_or_else(|| Failure::data(format!("{origin}: needs 'scenario = ...' or 'model = ...'")))?;
    let windows = match last("T") {
        Some(e) => parse_list(origin, e)?,
        None => return Err(Failure::data(format!("{origin}: needs 'T = ...'"))),
    };
    let int = |key: &str, default: u64| -> CliResult<u64> {
        match last(key) {
            Some(e) => e
                .value
                .parse::<u64>()
                .map_err(|_| at(origin, e, "expected a non-negative integer")),
            None => Ok(default),
        }
    };
    let estimators = entries
        .iter()
        .filter(|e| e.key == "estimator")
        .map(|e| EstimatorSpec::parse(&e.value).map_err(|err| at(origin, e, err)))
        .collect::<CliResult<Vec<_>>>()?;
    let theta_law = match last("theta") {
        Some(e) => parse_theta_law(origin, e)?,
        None => ThetaLaw::Uniform(-0.1, 0.1),
    };
    let r = match last("r") {
        Some(e) => parse_f64(origin, e)?,
        None => 1.0,
    };
    let sim = SimOptions {
        event_budget: int("event_budget", SimOptions::default().event_budget as u64)? as usize,
    };
    let config = ExperimentConfig {
        scenario: label.clone(),
        model: model.clone(),
        windows,
        replicates: int("replicates", 200)? as usize,
        estimators,
        theta_law,
        r,
        master_seed: int("seed", 0)?,
        sim,
    };
    config.validate().map_err(|e| Failure::from(e).context(origin))?;
    let reference_slope = scenario(&label)
        .ok()
        .filter(|sc| sc.spec.with_theta(0.0) == model.with_theta(0.0))
        .map(|sc| -1.0 / sc.beta_alpha);
    Ok(ExperimentFile {
        config,
        reference_slope,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

/// One row per estimator: fitted log-log slope of RMSE against T.
pub fn slopes_csv(table: &RmseTable, cfg: &ExperimentConfig, reference: Option<f64>) -> String {
    let mut out = String::from("scenario,estimator,params,slope,stderr,points,reference_slope\n");
    for est in &cfg.estimators {
        let (label, params) = (est.label(), est.params());
        let (slope, stderr, points) = match fit_loglog_slope(table, &cfg.scenario, label, &params) {
            Ok(fit) => (Some(fit.slope), Some(fit.stderr), fit.points),
            Err(Error::InsufficientPoints { got, .. }) => (None, None, got),
            Err(_) => (None, None, 0),
        };
        let _ = writeln!(
            out,
            "{},{label},{params},{},{},{points},{}",
            cfg.scenario,
            opt(slope),
            opt(stderr),
            opt(reference)
        );
    }
    out
}

pub fn experiment(args: &ExperimentArgs) -> CliResult<String> {
    let origin = args.config.display().to_string();
    let text = std::fs::read_to_string(&args.config).map_err(|e| Failure::data(format!("{origin}: {e}")))?;
    let mut file = parse_experiment(&text, &origin)?;
    if let Some(n) = args.replicates {
        file.config.replicates = n;
    }
    if let Some(s) = args.seed {
        file.config.master_seed = s;
    }
    file.config.validate()?;
    let table = run_rmse_experiment(&file.config)?;
    let slopes = slopes_csv(&table, &file.config, file.reference_slope);
    let slopes_path = match &args.slopes {
        Some(p) => p.clone(),
        None => {
            let stem = args.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            args.out.with_file_name(format!("{stem}.slopes.csv"))
        }
    };
    write_atomic(&args.out, &table.to_csv())?;
    write_atomic(&slopes_path, &slopes)?;
    let failures: usize = table.rows.iter().map(|r| r.failures).sum();
    Ok(format!(
        "{} rows -> {}\nslopes -> {}\nfailed estimates: {failures}\n",
        table.rows.len(),
        args.out.display(),
        slopes_path.display()
    ))
}
