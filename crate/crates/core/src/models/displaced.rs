//! Displaced Poisson model: `N1` is a unit-rate Poisson process and `N2`
//! places each point of `N1` at `t + gamma + theta` with i.i.d. displacements
//! `gamma` from a law supported on `[-1, 1]`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{clip_sort, walk_poisson, SimOptions};
use crate::series::BivariateSample;
use crate::{Error, Result};

/// Law of the displacement `gamma`, centered at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisplacementLaw {
    /// Density `(1 - |x|/w)/w` on `[-w, w]`.
    Triangular { half_width: f64 },
    /// Density `1/(2w)` on `[-w, w]`.
    Uniform { half_width: f64 },
    /// `gamma = 0`; no density.
    Point,
}

impl DisplacementLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DisplacementLaw::Triangular { half_width } | DisplacementLaw::Uniform { half_width } => {
                if !(half_width > 0.0 && half_width <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "displacement half-width must lie in (0, 1], got {half_width}"
                    )));
                }
                Ok(())
            }
            DisplacementLaw::Point => Ok(()),
        }
    }

    pub fn half_width(&self) -> f64 {
        match *self {
            DisplacementLaw::Triangular { half_width } | DisplacementLaw::Uniform { half_width } => half_width,
            DisplacementLaw::Point => 0.0,
        }
    }

    /// Density at `x`, or `None` for the point mass.
    pub fn density(&self, x: f64) -> Option<f64> {
        match *self {
            DisplacementLaw::Triangular { half_width: w } => {
                let a = x.abs();
                Some(if a <= w { (1.0 - a / w) / w } else { 0.0 })
            }
            DisplacementLaw::Uniform { half_width: w } => Some(if x.abs() <= w { 0.5 / w } else { 0.0 }),
            DisplacementLaw::Point => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DisplacementLaw::Triangular { half_width: w } => {
                let u = Uniform::new(0.0, 1.0).expect("unit interval");
                w * (u.sample(rng) - u.sample(rng))
            }
            DisplacementLaw::Uniform { half_width: w } => {
                Uniform::new_inclusive(-w, w).expect("positive width").sample(rng)
            }
            DisplacementLaw::Point => 0.0,
        }
    }

    /// Points where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let w = self.half_width();
        match self {
            DisplacementLaw::Triangular { .. } => vec![-w, 0.0, w],
            DisplacementLaw::Uniform { .. } => vec![-w, w],
            DisplacementLaw::Point => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacedPoissonSpec {
    pub law: DisplacementLaw,
    pub theta: f64,
}

impl DisplacedPoissonSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        self.law.validate()
    }

    /// `g(theta + v) = 1 + density(v)`: the unit-rate baseline plus the
    /// pairs formed by a point and its own displacement.
    pub fn cpcf_centered(&self, v: f64) -> Result<f64> {
        self.validate()?;
        self.law
            .density(v)
            .map(|d| 1.0 + d)
            .ok_or(Error::OracleUnavailable)
    }
}

/// CPCF at `u`.
pub fn cpcf_displaced(spec: &DisplacedPoissonSpec, u: f64) -> Result<f64> {
    if u == spec.theta {
        return spec.cpcf_centered(0.0);
    }
    spec.cpcf_centered(u - spec.theta)
}

/// `N1` on `[-w - |theta|, T + w + |theta|]`, each point displaced into `N2`.
pub fn simulate_displaced_poisson<R: Rng + ?Sized>(
    spec: &DisplacedPoissonSpec,
    window_end: f64,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<BivariateSample> {
    spec.validate()?;
    super::check_window(window_end)?;
    let margin = spec.law.half_width() + spec.theta.abs() + 1e-9;
    let seed: u64 = rng.random();
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    walk_poisson(seed, 0, 1.0, -margin, window_end + margin, opts.event_budget, |t, r| {
        e1.push(t);
        e2.push(t + spec.law.sample(r) + spec.theta);
        Ok(2)
    })?;
    BivariateSample::new(clip_sort(e1, window_end)?, clip_sort(e2, window_end)?)
}
