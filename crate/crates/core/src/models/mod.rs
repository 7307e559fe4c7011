//! Data-generating processes with exact samplers and analytic CPCF oracles:
//! the lagged Hawkes and Neyman-Scott models with gamma kernels, and the
//! displaced Poisson model.
//!
//! Samplers generate base points (immigrants, parents, or Poisson points)
//! outward from time 0, forward and backward on separate RNG streams, and
//! draw each base point's whole cluster from the same stream before moving
//! on. Enlarging the simulated window therefore only appends draws, so two
//! runs with the same seed and different `theta` share their base
//! realization exactly.

pub mod bilateral;
pub mod displaced;
pub mod hawkes;
pub mod neyman_scott;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

pub use displaced::{cpcf_displaced, simulate_displaced_poisson, DisplacedPoissonSpec, DisplacementLaw};
pub use hawkes::{cpcf_lbhpg, simulate_lbhpg, spectral_radius, HawkesCpcf, LbhpgSpec};
pub use neyman_scott::{cpcf_lbnspg, cpcf_lbnspg_quadrature, simulate_lbnspg, LbnspgSpec};

use crate::kernel::beta_alpha;
use crate::series::{BivariateSample, EventSeries};
use crate::{Error, Result};

/// Default cap on simulated events per sample.
pub const DEFAULT_EVENT_BUDGET: usize = 10_000_000;

/// Default truncation tolerance of the Hawkes path expansion.
pub const DEFAULT_PSI_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Simulation fails with `BudgetExceeded` beyond this many events.
    pub event_budget: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            event_budget: DEFAULT_EVENT_BUDGET,
        }
    }
}

pub(crate) fn check_window(window_end: f64) -> Result<()> {
    if !(window_end.is_finite() && window_end > 0.0) {
        return Err(Error::InvalidWindow(window_end));
    }
    Ok(())
}

/// Keeps events in `(0, T]`, sorted. Exact repeats, which gamma delays with
/// shape below one can produce in floating point, are collapsed.
pub(crate) fn clip_sort(mut times: Vec<f64>, window_end: f64) -> Result<EventSeries> {
    times.retain(|&t| t > 0.0 && t <= window_end);
    times.sort_unstable_by(f64::total_cmp);
    times.dedup();
    EventSeries::new(times, window_end)
}

/// Visits a homogeneous Poisson process of `rate` on `[lo, hi]` (with
/// `lo < 0 < hi`), walking forward from 0 and then backward from 0. `visit`
/// receives each point and the stream it was drawn from, so it can draw
/// per-point marks deterministically.
pub(crate) fn walk_poisson<F>(seed: u64, stream: u64, rate: f64, lo: f64, hi: f64, budget: usize, mut visit: F) -> Result<usize>
where
    F: FnMut(f64, &mut ChaCha8Rng) -> Result<usize>,
{
    let gap = Exp::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut total = 0usize;
    for (dir, sign) in [(0u64, 1.0), (1u64, -1.0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * stream + dir);
        let mut t = 0.0;
        loop {
            t += sign * gap.sample(&mut rng);
            if t > hi || t < lo {
                break;
            }
            total += visit(t, &mut rng)?;
            if total > budget {
                return Err(Error::BudgetExceeded(budget));
            }
        }
    }
    Ok(total)
}

/// A model with its lead-lag shift.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Lbhpg(LbhpgSpec),
    Lbnspg(LbnspgSpec),
    Displaced(DisplacedPoissonSpec),
}

impl ModelSpec {
    pub fn theta(&self) -> f64 {
        match self {
            ModelSpec::Lbhpg(s) => s.theta,
            ModelSpec::Lbnspg(s) => s.theta,
            ModelSpec::Displaced(s) => s.theta,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::Lbhpg(s) => s.theta = theta,
            ModelSpec::Lbnspg(s) => s.theta = theta,
            ModelSpec::Displaced(s) => s.theta = theta,
        }
        out
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Lbhpg(_) => "lbhpg",
            ModelSpec::Lbnspg(_) => "lbnspg",
            ModelSpec::Displaced(_) => "displaced",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Lbhpg(s) => s.validate(),
            ModelSpec::Lbnspg(s) => s.validate(),
            ModelSpec::Displaced(s) => s.validate(),
        }
    }

    /// Stationary intensities `(lambda1, lambda2)`.
    pub fn intensities(&self) -> Result<(f64, f64)> {
        match self {
            ModelSpec::Lbhpg(s) => s.intensities(),
            ModelSpec::Lbnspg(s) => s.intensities(),
            ModelSpec::Displaced(s) => s.validate().map(|_| (1.0, 1.0)),
        }
    }

    /// Simulates one sample on `(0, T]`, drawing all randomness from `rng`.
    pub fn simulate_with<R: Rng + ?Sized>(
        &self,
        window_end: f64,
        rng: &mut R,
        opts: &SimOptions,
    ) -> Result<BivariateSample> {
        match self {
            ModelSpec::Lbhpg(s) => simulate_lbhpg(s, window_end, rng, opts),
            ModelSpec::Lbnspg(s) => simulate_lbnspg(s, window_end, rng, opts),
            ModelSpec::Displaced(s) => simulate_displaced_poisson(s, window_end, rng, opts),
        }
    }

    /// Simulates one sample from an integer seed.
    pub fn simulate(&self, window_end: f64, seed: u64) -> Result<BivariateSample> {
        self.simulate_seeded(window_end, seed, &SimOptions::default())
    }

    pub fn simulate_seeded(&self, window_end: f64, seed: u64, opts: &SimOptions) -> Result<BivariateSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.simulate_with(window_end, &mut rng, opts)
    }

    /// Analytic CPCF oracle, precomputed once for repeated evaluation.
    pub fn oracle(&self) -> Result<CpcfOracle> {
        self.validate()?;
        let kind = match self {
            ModelSpec::Lbhpg(s) => OracleKind::Hawkes(Box::new(HawkesCpcf::new(s, DEFAULT_PSI_TOL)?)),
            ModelSpec::Lbnspg(s) => OracleKind::NeymanScott(s.clone()),
            ModelSpec::Displaced(s) => {
                if s.law.density(0.0).is_none() {
                    return Err(Error::OracleUnavailable);
                }
                OracleKind::Displaced(s.clone())
            }
        };
        Ok(CpcfOracle {
            theta: self.theta(),
            kind,
        })
    }

    /// `g(u)`.
    pub fn cpcf(&self, u: f64) -> Result<f64> {
        self.oracle()?.at(u)
    }
}

#[derive(Debug, Clone)]
enum OracleKind {
    Hawkes(Box<HawkesCpcf>),
    NeymanScott(LbnspgSpec),
    Displaced(DisplacedPoissonSpec),
}

/// CPCF of a model, evaluated relative to its peak location `theta`.
#[derive(Debug, Clone)]
pub struct CpcfOracle {
    theta: f64,
    kind: OracleKind,
}

impl CpcfOracle {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `g(theta + v)`; evaluating in centered coordinates keeps the
    /// singularity at exactly `v = 0`.
    pub fn centered(&self, v: f64) -> Result<f64> {
        match &self.kind {
            OracleKind::Hawkes(o) => o.centered(v),
            OracleKind::NeymanScott(s) => s.cpcf_centered(v),
            OracleKind::Displaced(s) => s.cpcf_centered(v),
        }
    }

    /// `g(u)`.
    pub fn at(&self, u: f64) -> Result<f64> {
        if u == self.theta {
            return self.centered(0.0);
        }
        self.centered(u - self.theta)
    }

    /// Centered abscissae where `g` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            OracleKind::Displaced(s) => s.law.breakpoints(),
            _ => vec![0.0],
        }
    }
}

/// A named model with the sharpness `alpha` of its CPCF peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub spec: ModelSpec,
    pub alpha: f64,
    pub beta_alpha: f64,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}, alpha = {}, beta_alpha = {})",
            self.name,
            self.spec.family(),
            self.alpha,
            self.beta_alpha
        )
    }
}

pub const SCENARIO_NAMES: [&str; 6] = [
    "hawkes_gamma_sym",
    "hawkes_gamma_asym",
    "hawkes_exp",
    "ns_gamma_1",
    "ns_gamma_2",
    "ns_gamma_3",
];

fn hawkes(shapes: hawkes::Matrix2) -> ModelSpec {
    ModelSpec::Lbhpg(LbhpgSpec {
        mu: [0.2, 0.2],
        branching: [[0.1, 0.1], [0.1, 0.1]],
        rates: [[10.0, 10.0], [10.0, 10.0]],
        shapes,
        theta: 0.0,
    })
}

fn neyman_scott(shape: f64, rate: f64) -> ModelSpec {
    ModelSpec::Lbnspg(LbnspgSpec {
        lambda: 0.1,
        sigma: [4.0, 4.0],
        shapes: [shape, shape],
        rates: [rate, rate],
        theta: 0.0,
    })
}

fn scenario_of(name: &'static str, spec: ModelSpec, alpha: f64) -> Scenario {
    Scenario {
        name,
        spec,
        alpha,
        beta_alpha: beta_alpha(alpha).expect("builtin sharpness is valid"),
    }
}

/// The six benchmark scenarios, all with `theta = 0`.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        scenario_of("hawkes_gamma_sym", hawkes([[0.4, 0.4], [0.4, 0.4]]), 0.4),
        scenario_of("hawkes_gamma_asym", hawkes([[0.4, 0.4], [0.8, 0.4]]), 0.4),
        scenario_of("hawkes_exp", hawkes([[1.0, 1.0], [1.0, 1.0]]), 2.0),
        scenario_of("ns_gamma_1", neyman_scott(0.4, 10.0), 0.8),
        scenario_of("ns_gamma_2", neyman_scott(0.8, 10.0), 1.6),
        scenario_of("ns_gamma_3", neyman_scott(2.0, 100.0), 3.0),
    ]
}

/// Looks up a builtin scenario by name.
pub fn scenario(name: &str) -> Result<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown scenario '{name}'; valid names: {}",
                SCENARIO_NAMES.join(", ")
            ))
        })
}

/// Per-replicate generator: stream `stream` of the ChaCha8 generator keyed
/// by `master_seed`.
pub fn replicate_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
