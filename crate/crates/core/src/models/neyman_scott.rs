//! Lagged bivariate Neyman-Scott process with gamma dispersal kernels.
//!
//! Parents form a Poisson process of rate `lambda`; each parent has
//! `Poisson(sigma_i)` offspring in component `i` at `Gamma(shape_i, rate_i)`
//! offsets after it. Component 2 is shifted by `theta`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use super::bilateral::{bilateral_gamma_quadrature, bilateral_gamma_symmetric};
use super::{clip_sort, walk_poisson, SimOptions};
use crate::series::BivariateSample;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbnspgSpec {
    /// Parent intensity.
    pub lambda: f64,
    /// Mean offspring counts per parent.
    pub sigma: [f64; 2],
    /// Gamma shapes of the dispersal offsets.
    pub shapes: [f64; 2],
    /// Gamma rates of the dispersal offsets.
    pub rates: [f64; 2],
    pub theta: f64,
}

impl LbnspgSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.lambda) {
            return Err(Error::InvalidParameter(format!("parent intensity must be positive, got {}", self.lambda)));
        }
        for i in 0..2 {
            if !positive(self.sigma[i]) || !positive(self.shapes[i]) || !positive(self.rates[i]) {
                return Err(Error::InvalidParameter(format!(
                    "offspring mean, shape and rate of component {} must be positive",
                    i + 1
                )));
            }
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        Ok(())
    }

    /// `(lambda sigma_1, lambda sigma_2)`.
    pub fn intensities(&self) -> Result<(f64, f64)> {
        self.validate()?;
        Ok((self.lambda * self.sigma[0], self.lambda * self.sigma[1]))
    }

    /// Both components share shape and rate; the CPCF is then unimodal at
    /// `theta` and has a closed form.
    pub fn is_symmetric(&self) -> bool {
        self.shapes[0] == self.shapes[1] && self.rates[0] == self.rates[1]
    }

    /// Offset beyond which gamma tails are negligible.
    fn reach(&self) -> f64 {
        (0..2)
            .map(|i| (self.shapes[i] + 10.0 * self.shapes[i].sqrt() + 30.0) / self.rates[i])
            .fold(0.0, f64::max)
    }

    /// Density of the offset difference `d_2 - d_1` at `v`.
    pub fn offset_difference_density(&self, v: f64) -> Result<f64> {
        if self.is_symmetric() {
            bilateral_gamma_symmetric(self.shapes[0], self.rates[0], v)
        } else {
            bilateral_gamma_quadrature(self.shapes[0], self.rates[0], self.shapes[1], self.rates[1], v)
        }
    }

    /// `g(theta + v) = 1 + p(v) / lambda`.
    pub fn cpcf_centered(&self, v: f64) -> Result<f64> {
        self.validate()?;
        let p = self
            .offset_difference_density(v)
            .map_err(|e| match e {
                Error::PoleAt(_) => Error::PoleAt(self.theta),
                other => other,
            })?;
        Ok(1.0 + p / self.lambda)
    }
}

/// Same as the closed form but always by quadrature, as an independent check.
pub fn cpcf_lbnspg_quadrature(spec: &LbnspgSpec, u: f64) -> Result<f64> {
    spec.validate()?;
    let v = u - spec.theta;
    let p = bilateral_gamma_quadrature(spec.shapes[0], spec.rates[0], spec.shapes[1], spec.rates[1], v)
        .map_err(|_| Error::PoleAt(spec.theta))?;
    Ok(1.0 + p / spec.lambda)
}

/// CPCF at `u`.
pub fn cpcf_lbnspg(spec: &LbnspgSpec, u: f64) -> Result<f64> {
    if u == spec.theta {
        return spec.cpcf_centered(0.0);
    }
    spec.cpcf_centered(u - spec.theta)
}

/// Parents on `[-reach - |theta|, T + |theta|]`, where `reach` bounds the
/// dispersal offsets up to a negligible tail.
pub fn simulate_lbnspg<R: Rng + ?Sized>(
    spec: &LbnspgSpec,
    window_end: f64,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<BivariateSample> {
    spec.validate()?;
    super::check_window(window_end)?;
    let lo = -spec.reach() - spec.theta.abs();
    let hi = window_end + spec.theta.abs();
    let mut marks = Vec::with_capacity(2);
    for i in 0..2 {
        let count = Poisson::new(spec.sigma[i]).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let offset = Gamma::new(spec.shapes[i], 1.0 / spec.rates[i])
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        marks.push((count, offset));
    }
    let seed: u64 = rng.random();
    let mut events: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    walk_poisson(seed, 0, spec.lambda, lo, hi, opts.event_budget, |c, r| {
        let mut n = 0;
        for (i, (count, offset)) in marks.iter().enumerate() {
            let k = count.sample(r) as usize;
            for _ in 0..k {
                events[i].push(c + offset.sample(r));
            }
            n += k;
        }
        Ok(n)
    })?;
    let [e1, e2] = events;
    let theta = spec.theta;
    BivariateSample::new(
        clip_sort(e1, window_end)?,
        clip_sort(e2.into_iter().map(|t| t + theta).collect(), window_end)?,
    )
}
