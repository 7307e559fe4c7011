//! Lead-lag time estimation between two event-timestamp series.
//!
//! The lead-lag time is located as the sharpest peak of the cross-pair
//! correlation function (CPCF) of a bivariate point process. This crate
//! provides:
//!
//! - validated event series and sorted-stream pair enumeration ([`series`], [`pairs`]);
//! - the bucket-based cross-market activity estimator ([`ds`]);
//! - the kernel CPCF estimator with exact kink-set maximization ([`cpcf`]);
//! - data-driven bandwidth selection by pairwise comparison and
//!   cross-validation ([`bandwidth`]);
//! - Hawkes, Neyman-Scott and displaced-Poisson simulators with analytic CPCF
//!   oracles ([`models`]);
//! - a seeded Monte Carlo harness for RMSE studies ([`harness`]).
//!
//! Times are `f64` seconds. A positive lead-lag means series 1 leads series 2.

pub mod bandwidth;
pub mod cpcf;
pub mod ds;
mod error;
pub mod harness;
pub mod kernel;
pub mod models;
pub mod numeric;
pub mod pairs;
pub mod series;

pub use error::{Error, Result};
pub use kernel::{beta_alpha, Kernel};
pub use series::{validate_series, BivariateSample, EventSeries};
