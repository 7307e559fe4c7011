//! Lagged bivariate Hawkes process with gamma kernels.
//!
//! Component `j` excites component `i` through `alpha[i][j] * Gamma(D[i][j], beta[i][j])`.
//! Component 2 is shifted by `theta` after simulation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use super::bilateral::cross_correlation;
use super::{clip_sort, walk_poisson, SimOptions};
use crate::numeric::ln_gamma;
use crate::series::BivariateSample;
use crate::{Error, Result};

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct LbhpgSpec {
    /// Baseline intensities, events per second.
    pub mu: [f64; 2],
    /// Branching ratios `alpha[i][j]`.
    pub branching: Matrix2,
    /// Gamma rates `beta[i][j]`.
    pub rates: Matrix2,
    /// Gamma shapes `D[i][j]`.
    pub shapes: Matrix2,
    pub theta: f64,
}

pub fn spectral_radius(m: &Matrix2) -> f64 {
    let tr = m[0][0] + m[1][1];
    let half_gap = 0.5 * (m[0][0] - m[1][1]);
    0.5 * tr + (half_gap * half_gap + m[0][1] * m[1][0]).max(0.0).sqrt()
}

fn inverse_i_minus(m: &Matrix2) -> Matrix2 {
    let a = 1.0 - m[0][0];
    let b = -m[0][1];
    let c = -m[1][0];
    let d = 1.0 - m[1][1];
    let det = a * d - b * c;
    [[d / det, -b / det], [-c / det, a / det]]
}

fn mat_mul(x: &Matrix2, y: &Matrix2) -> Matrix2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

impl LbhpgSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !self.mu.iter().all(|&m| positive(m)) {
            return Err(Error::InvalidParameter("baseline intensities must be positive".into()));
        }
        for i in 0..2 {
            for j in 0..2 {
                let a = self.branching[i][j];
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::InvalidParameter(format!("branching ratio [{i}][{j}] = {a}")));
                }
                if !positive(self.rates[i][j]) || !positive(self.shapes[i][j]) {
                    return Err(Error::InvalidParameter(format!(
                        "kernel rate and shape [{i}][{j}] must be positive"
                    )));
                }
            }
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        let rho = spectral_radius(&self.branching);
        if rho >= 1.0 {
            return Err(Error::UnstableSpec(rho));
        }
        Ok(())
    }

    /// Stationary intensities `(I - alpha)^{-1} mu`.
    pub fn intensities(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let inv = inverse_i_minus(&self.branching);
        Ok((
            inv[0][0] * self.mu[0] + inv[0][1] * self.mu[1],
            inv[1][0] * self.mu[0] + inv[1][1] * self.mu[1],
        ))
    }

    /// Burn-in length: a multiple of the longest mean delay, growing with
    /// the expected cluster depth.
    pub fn burn_in(&self) -> f64 {
        let mut longest: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                longest = longest.max(self.shapes[i][j] / self.rates[i][j]);
            }
        }
        let rho = spectral_radius(&self.branching);
        longest * (20.0 + 10.0 / (1.0 - rho))
    }

    fn common_rate(&self) -> Option<f64> {
        let b = self.rates[0][0];
        let same = self.rates.iter().flatten().all(|&r| r == b);
        same.then_some(b)
    }
}

/// Cluster simulation: immigrants are Poisson on `[-burn_in - |theta|, T + |theta|]`
/// and every event of component `j` has `Poisson(alpha[i][j])` children in
/// component `i` at gamma delays. Each immigrant's cluster is drawn in full.
pub fn simulate_lbhpg<R: Rng + ?Sized>(
    spec: &LbhpgSpec,
    window_end: f64,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<BivariateSample> {
    spec.validate()?;
    super::check_window(window_end)?;
    let lo = -spec.burn_in() - spec.theta.abs();
    let hi = window_end + spec.theta.abs();

    // offspring count and delay law for each (child, parent) pair
    type Offspring = Option<(Poisson<f64>, Gamma<f64>)>;
    let mut children: Vec<Vec<Offspring>> = Vec::with_capacity(2);
    for i in 0..2 {
        let mut row = Vec::with_capacity(2);
        for j in 0..2 {
            let a = spec.branching[i][j];
            row.push(if a > 0.0 {
                let count = Poisson::new(a).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let delay = Gamma::new(spec.shapes[i][j], 1.0 / spec.rates[i][j])
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Some((count, delay))
            } else {
                None
            });
        }
        children.push(row);
    }

    let seed: u64 = rng.random();
    let mut events: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut stack: Vec<(f64, usize)> = Vec::new();
    let mut total = 0usize;
    for c in 0..2 {
        let budget = opts.event_budget - total;
        total += walk_poisson(seed, c as u64, spec.mu[c], lo, hi, budget, |t0, r| {
            let mut n = 0usize;
            stack.push((t0, c));
            while let Some((t, j)) = stack.pop() {
                events[j].push(t);
                n += 1;
                if n > budget {
                    return Err(Error::BudgetExceeded(opts.event_budget));
                }
                for (i, row) in children.iter().enumerate() {
                    if let Some((count, delay)) = &row[j] {
                        let k = count.sample(r) as usize;
                        for _ in 0..k {
                            stack.push((t + delay.sample(r), i));
                        }
                    }
                }
            }
            Ok(n)
        })
        .map_err(|e| match e {
            Error::BudgetExceeded(_) => Error::BudgetExceeded(opts.event_budget),
            other => other,
        })?;
    }
    let [e1, e2] = events;
    let theta = spec.theta;
    BivariateSample::new(
        clip_sort(e1, window_end)?,
        clip_sort(e2.into_iter().map(|t| t + theta).collect(), window_end)?,
    )
}

/// Mixture of gamma densities with a common rate, `sum_k w_k Gamma(s_k, beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMixture {
    rate: f64,
    shapes: Vec<f64>,
    weights: Vec<f64>,
    log_coef: Vec<f64>,
}

impl GammaMixture {
    fn new(rate: f64, terms: &BTreeMap<i64, (f64, f64)>) -> Self {
        let shapes: Vec<f64> = terms.values().map(|&(s, _)| s).collect();
        let weights: Vec<f64> = terms.values().map(|&(_, w)| w).collect();
        let log_coef = shapes
            .iter()
            .zip(&weights)
            .map(|(&s, &w)| w.ln() + s * rate.ln() - ln_gamma(s))
            .collect();
        Self {
            rate,
            shapes,
            weights,
            log_coef,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let lt = t.ln();
        let base = -self.rate * t;
        self.shapes
            .iter()
            .zip(&self.log_coef)
            .map(|(&s, &c)| (c + (s - 1.0) * lt + base).exp())
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_shape(&self) -> Option<f64> {
        self.shapes.first().copied()
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

fn shape_key(s: f64) -> i64 {
    (s * 1e9).round() as i64
}

/// Analytic CPCF of the Hawkes model for a common kernel rate.
///
/// `Psi = sum_m Phi^{*m}` is expanded over branching paths: with a common
/// rate, the convolution of gamma densities along a path is again gamma with
/// the summed shape. The cross covariance density at lag `v` is
/// `l1 Psi21(v) 1{v>0} + l2 Psi12(-v) 1{v<0} + sum_k l_k int Psi1k(s) Psi2k(s+v) ds`.
#[derive(Debug, Clone)]
pub struct HawkesCpcf {
    theta: f64,
    lambda: (f64, f64),
    psi: [[GammaMixture; 2]; 2],
    scale: f64,
    /// Number of path orders kept.
    pub orders: usize,
}

const MAX_ORDER: usize = 100_000;

impl HawkesCpcf {
    pub fn new(spec: &LbhpgSpec, tol: f64) -> Result<Self> {
        spec.validate()?;
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        let beta = spec.common_rate().ok_or(Error::UnsupportedRates)?;
        let alpha = spec.branching;
        let resolvent = inverse_i_minus(&alpha);

        let empty = || BTreeMap::<i64, (f64, f64)>::new();
        let mut total: [[BTreeMap<i64, (f64, f64)>; 2]; 2] = [[empty(), empty()], [empty(), empty()]];
        let mut current: [[BTreeMap<i64, (f64, f64)>; 2]; 2] = [[empty(), empty()], [empty(), empty()]];
        for i in 0..2 {
            for j in 0..2 {
                if alpha[i][j] > 0.0 {
                    let s = spec.shapes[i][j];
                    current[i][j].insert(shape_key(s), (s, alpha[i][j]));
                }
            }
        }
        let mut power = alpha;
        let mut orders = 0;
        loop {
            orders += 1;
            for i in 0..2 {
                for j in 0..2 {
                    for (&k, &(s, w)) in &current[i][j] {
                        total[i][j].entry(k).or_insert((s, 0.0)).1 += w;
                    }
                }
            }
            // mass of all orders beyond the current one
            let residual = mat_mul(&mat_mul(&power, &alpha), &resolvent);
            if residual.iter().flatten().all(|&v| v < tol) {
                break;
            }
            if orders >= MAX_ORDER {
                return Err(Error::InvalidParameter("path expansion did not converge".into()));
            }
            let mut next: [[BTreeMap<i64, (f64, f64)>; 2]; 2] = [[empty(), empty()], [empty(), empty()]];
            for i in 0..2 {
                for k in 0..2 {
                    for &(s, w) in current[i][k].values() {
                        for j in 0..2 {
                            let a = alpha[k][j];
                            if a == 0.0 {
                                continue;
                            }
                            let s2 = s + spec.shapes[k][j];
                            next[i][j].entry(shape_key(s2)).or_insert((s2, 0.0)).1 += w * a;
                        }
                    }
                }
            }
            current = next;
            power = mat_mul(&power, &alpha);
        }

        let psi = [
            [GammaMixture::new(beta, &total[0][0]), GammaMixture::new(beta, &total[0][1])],
            [GammaMixture::new(beta, &total[1][0]), GammaMixture::new(beta, &total[1][1])],
        ];
        let mut longest: f64 = 0.0;
        for row in &spec.shapes {
            for &d in row {
                longest = longest.max(d);
            }
        }
        Ok(Self {
            theta: spec.theta,
            lambda: spec.intensities()?,
            psi,
            scale: longest / beta,
            orders,
        })
    }

    /// `Psi_ij(t)`.
    pub fn psi(&self, i: usize, j: usize, t: f64) -> f64 {
        self.psi[i][j].eval(t)
    }

    pub fn psi_mixture(&self, i: usize, j: usize) -> &GammaMixture {
        &self.psi[i][j]
    }

    fn pole_at_zero(&self) -> bool {
        let below_one = |m: &GammaMixture| m.min_shape().is_some_and(|s| s < 1.0);
        if below_one(&self.psi[1][0]) || below_one(&self.psi[0][1]) {
            return true;
        }
        (0..2).any(|k| match (self.psi[0][k].min_shape(), self.psi[1][k].min_shape()) {
            (Some(a), Some(b)) => a + b <= 1.0,
            _ => false,
        })
    }

    /// Cross covariance density at lag `v` (time of series 2 minus series 1,
    /// before the lead-lag shift).
    pub fn covariance_density(&self, v: f64) -> Result<f64> {
        if v == 0.0 && self.pole_at_zero() {
            return Err(Error::PoleAt(self.theta));
        }
        let (l1, l2) = self.lambda;
        let mut nu = 0.0;
        if v > 0.0 {
            nu += l1 * self.psi[1][0].eval(v);
        } else if v < 0.0 {
            nu += l2 * self.psi[0][1].eval(-v);
        }
        for (k, lk) in [l1, l2].into_iter().enumerate() {
            let (a, b) = (&self.psi[0][k], &self.psi[1][k]);
            if a.is_empty() || b.is_empty() {
                continue;
            }
            nu += lk * cross_correlation(|s| a.eval(s), |s| b.eval(s), v, self.scale);
        }
        Ok(nu)
    }

    /// `g(theta + v)`.
    pub fn centered(&self, v: f64) -> Result<f64> {
        let (l1, l2) = self.lambda;
        Ok(1.0 + self.covariance_density(v)? / (l1 * l2))
    }

    /// `g(u)`.
    pub fn at(&self, u: f64) -> Result<f64> {
        if u == self.theta {
            return self.centered(0.0);
        }
        self.centered(u - self.theta)
    }
}

/// CPCF of the Hawkes model at `u`, with path truncation tolerance `tol`.
pub fn cpcf_lbhpg(spec: &LbhpgSpec, u: f64, tol: f64) -> Result<f64> {
    HawkesCpcf::new(spec, tol)?.at(u)
}
