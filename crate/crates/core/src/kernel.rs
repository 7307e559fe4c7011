//! Smoothing kernels supported on `[-1, 1]` and the rate exponent `beta_alpha`.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Kernel functions that are non-negative, integrate to one, have
/// `K(0) > 0` and are supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Kernel {
    /// `K(x) = (1 - |x|)` on `[-1, 1]`. Piecewise linear, so the estimator's
    /// maximum over an interval is attained on the kink set.
    #[default]
    Triangular,
    /// `K(x) = 1/2` on `[-1, 1]` (closed support).
    Uniform,
}

impl Kernel {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Triangular => {
                let a = x.abs();
                if a <= 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            Kernel::Uniform => {
                if x.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Rescaled kernel `K_h(t) = K(t/h)/h`.
    #[inline]
    pub fn eval_scaled(self, t: f64, h: f64) -> f64 {
        self.eval(t / h) / h
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Triangular => "tri",
            Kernel::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tri" | "triangular" => Ok(Kernel::Triangular),
            "uniform" | "unif" | "box" => Ok(Kernel::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Rate exponent `max(alpha, 2 alpha - 1)`; the minimax rate is `T^{-1/beta_alpha}`.
pub fn beta_alpha(alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Err(Error::AlphaExcluded);
    }
    Ok(alpha.max(2.0 * alpha - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tanh_sinh;

    #[test]
    fn triangular_values() {
        assert_eq!(Kernel::Triangular.eval(0.0), 1.0);
        assert_eq!(Kernel::Triangular.eval(0.5), 0.5);
        assert_eq!(Kernel::Triangular.eval(-0.25), 0.75);
        assert_eq!(Kernel::Triangular.eval(1.5), 0.0);
    }

    #[test]
    fn uniform_values() {
        assert_eq!(Kernel::Uniform.eval(2.0), 0.0);
        assert_eq!(Kernel::Uniform.eval(1.0), 0.5);
        assert_eq!(Kernel::Uniform.eval(0.0), 0.5);
    }

    #[test]
    fn kernels_integrate_to_one() {
        for k in [Kernel::Triangular, Kernel::Uniform] {
            let mass = tanh_sinh(|x| k.eval(x), -1.0, 0.0) + tanh_sinh(|x| k.eval(x), 0.0, 1.0);
            assert!((mass - 1.0).abs() < 1e-9, "{k}: {mass}");
        }
    }

    #[test]
    fn beta_alpha_table_values() {
        assert_eq!(beta_alpha(0.4).unwrap(), 0.4);
        assert_eq!(beta_alpha(2.0).unwrap(), 3.0);
        assert!((beta_alpha(1.6).unwrap() - 2.2).abs() < 1e-15);
        assert_eq!(beta_alpha(3.0).unwrap(), 5.0);
        assert_eq!(beta_alpha(0.8).unwrap(), 0.8);
        assert_eq!(beta_alpha(1.0), Err(Error::AlphaExcluded));
        assert!(beta_alpha(-1.0).is_err());
    }

    #[test]
    fn beta_alpha_branches() {
        for i in 1..200 {
            let a = i as f64 * 0.0173;
            if a == 1.0 {
                continue;
            }
            let b = beta_alpha(a).unwrap();
            if a < 1.0 {
                assert_eq!(b, a);
            } else {
                assert_eq!(b, 2.0 * a - 1.0);
            }
        }
        // both branches meet at alpha = 1
        assert!((beta_alpha(1.0 - 1e-9).unwrap() - beta_alpha(1.0 + 1e-9).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn parse_kernel() {
        assert_eq!("tri".parse::<Kernel>().unwrap(), Kernel::Triangular);
        assert_eq!("uniform".parse::<Kernel>().unwrap(), Kernel::Uniform);
        assert!("gauss".parse::<Kernel>().is_err());
    }
}
