use leadlag::bandwidth::{cv_select, lepski_select, BandwidthGrid, CvConfig, Threshold};
use leadlag::cpcf::theta_hat;
use leadlag::ds::{ds_estimate, DsConfig};
use leadlag::harness::{
    ds_kernel_correspondence, run_replicate, run_rmse_experiment, EstimatorSpec, ExperimentConfig, ThetaLaw,
};
use leadlag::models::{scenario, DisplacedPoissonSpec, DisplacementLaw, ModelSpec, SimOptions};
use leadlag::{BivariateSample, Error, EventSeries, Kernel};

fn displaced(half_width: f64, theta: f64) -> ModelSpec {
    ModelSpec::Displaced(DisplacedPoissonSpec {
        law: DisplacementLaw::Triangular { half_width },
        theta,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn ds_on_neyman_scott_within_a_bucket() {
    let spec = scenario("ns_gamma_2").unwrap().spec.with_theta(0.05);
    let s = spec.simulate(4000.0, 1).unwrap();
    let est = ds_estimate(&s, &DsConfig::new(0.01, 0.5).unwrap()).unwrap();
    assert!((est.theta - 0.05).abs() <= 0.01 + 1e-12, "{}", est.theta);
}

#[test]
fn kernel_on_displaced_poisson() {
    let s = displaced(0.05, 0.05).simulate(5000.0, 2).unwrap();
    let fit = theta_hat(&s, Kernel::Triangular, 0.01, 1.0).unwrap();
    assert!((fit.theta - 0.05).abs() <= 0.03, "{}", fit.theta);
}

#[test]
fn lepski_adapts_on_ns_gamma_2() {
    let spec = scenario("ns_gamma_2").unwrap().spec.with_theta(0.05);
    let grid = BandwidthGrid::decades(6).unwrap();
    let threshold = Threshold::LogLog(1.0).value(4000.0).unwrap();
    let errors: Vec<f64> = (0..20)
        .map(|seed| {
            let s = spec.simulate(4000.0, seed).unwrap();
            (lepski_select(&s, Kernel::Triangular, &grid, threshold, 1.0).unwrap().theta - 0.05).abs()
        })
        .collect();
    let med = median(errors);
    assert!(med <= 0.02, "median error {med}");
}

#[test]
fn lepski_large_threshold_takes_smallest_bandwidth() {
    let s = scenario("hawkes_exp").unwrap().spec.simulate(500.0, 3).unwrap();
    let grid = BandwidthGrid::new(vec![0.1, 0.01, 0.001]).unwrap();
    // every dbar is at most 2r, so A_T >= 2r / min(grid) admits everything
    let sel = lepski_select(&s, Kernel::Triangular, &grid, 2.0 / 0.001, 1.0).unwrap();
    assert_eq!(sel.h_hat, 0.001);
    assert!(!sel.fallback);
}

#[test]
fn cv_on_ns_gamma_3_is_deterministic() {
    // The grid-step example for this sample is reported by the acceptance
    // target; here only determinism and finiteness are required.
    let spec = scenario("ns_gamma_3").unwrap().spec.with_theta(0.05);
    let s = spec.simulate(4000.0, 1).unwrap();
    let grid = BandwidthGrid::decades(6).unwrap();
    let a = cv_select(&s, Kernel::Triangular, &grid, &CvConfig::default()).unwrap();
    let b = cv_select(&s, Kernel::Triangular, &grid, &CvConfig::default()).unwrap();
    assert_eq!(a.h_hat, b.h_hat);
    assert_eq!(a.scores, b.scores);
    assert!(a.scores.iter().all(|v| v.is_finite()));
    assert!((a.theta - 0.05).abs() <= 0.01);
}

#[test]
fn single_replicate_rmse_is_absolute_error() {
    let cfg = ExperimentConfig {
        scenario: "hawkes_exp".into(),
        model: scenario("hawkes_exp").unwrap().spec,
        windows: vec![300.0],
        replicates: 1,
        estimators: vec![
            EstimatorSpec::parse("kernel h=0.01").unwrap(),
            EstimatorSpec::parse("ds h=0.01").unwrap(),
        ],
        theta_law: ThetaLaw::Fixed(0.02),
        r: 0.5,
        master_seed: 11,
        sim: SimOptions::default(),
    };
    let table = run_rmse_experiment(&cfg).unwrap();
    let rec = run_replicate(&cfg, 0, 300.0, 0);
    assert_eq!(rec.theta_star, 0.02);
    for (row, est) in table.rows.iter().zip(&rec.estimates) {
        let err = (est.as_ref().unwrap() - 0.02).abs();
        assert_eq!(row.rmse, err);
        assert_eq!(row.mean_abs_error, err);
        assert_eq!(row.failures, 0);
    }
}

#[test]
fn experiment_is_deterministic_and_replicates_independent() {
    let cfg = ExperimentConfig {
        scenario: "ns_gamma_2".into(),
        model: scenario("ns_gamma_2").unwrap().spec,
        windows: vec![200.0, 400.0],
        replicates: 120,
        estimators: vec![EstimatorSpec::parse("kernel h=0.01").unwrap()],
        theta_law: ThetaLaw::Uniform(-0.1, 0.1),
        r: 1.0,
        master_seed: 3,
        sim: SimOptions::default(),
    };
    let a = run_rmse_experiment(&cfg).unwrap().to_csv();
    let b = run_rmse_experiment(&cfg).unwrap().to_csv();
    assert_eq!(a, b);

    // lag-1 autocorrelation of consecutive replicate errors
    let errors: Vec<f64> = (0..cfg.replicates)
        .map(|i| {
            let rec = run_replicate(&cfg, 0, 200.0, i);
            rec.estimates[0].as_ref().unwrap() - rec.theta_star
        })
        .collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var: f64 = errors.iter().map(|e| (e - mean).powi(2)).sum();
    let cov: f64 = errors.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    let rho = cov / var;
    assert!(rho.abs() < 4.0 / n.sqrt(), "lag-1 autocorrelation {rho}");
}

#[test]
fn failures_are_counted_not_fatal() {
    let cfg = ExperimentConfig {
        scenario: "hawkes_exp".into(),
        model: scenario("hawkes_exp").unwrap().spec,
        windows: vec![50.0],
        replicates: 5,
        // 1e-6 buckets over a 50 s window with r = 0.5: offsets far exceed any
        // occupied pair, but the tiny sample still estimates; a bucket wider than
        // the window cannot.
        estimators: vec![EstimatorSpec::parse("ds h=60").unwrap()],
        theta_law: ThetaLaw::Fixed(0.0),
        r: 100.0,
        master_seed: 1,
        sim: SimOptions::default(),
    };
    let table = run_rmse_experiment(&cfg).unwrap();
    assert_eq!(table.rows[0].failures, 5);
    assert!(table.rows[0].rmse.is_nan());
}

#[test]
fn correspondence_on_displaced_poisson() {
    let spec = displaced(0.5, 0.05);
    let s = spec.simulate(20000.0, 4).unwrap();
    let report = ds_kernel_correspondence(&s, 0.05, 1.0, &spec).unwrap();
    // (lambda1 v lambda2) max g = 1 + 1/w = 3
    assert!(report.max_discrepancy < 0.15 * 3.0, "{}", report.max_discrepancy);
}

#[test]
fn correspondence_error_paths() {
    let point = ModelSpec::Displaced(DisplacedPoissonSpec {
        law: DisplacementLaw::Point,
        theta: 0.0,
    });
    let s = BivariateSample::from_raw(&[1.0], &[1.5], 10.0).unwrap();
    assert_eq!(ds_kernel_correspondence(&s, 0.1, 1.0, &point).unwrap_err(), Error::OracleUnavailable);
    let empty = BivariateSample::new(
        EventSeries::new(vec![], 10.0).unwrap(),
        EventSeries::new(vec![], 10.0).unwrap(),
    )
    .unwrap();
    assert!(ds_kernel_correspondence(&empty, 0.1, 1.0, &displaced(0.5, 0.0)).is_err());
}
