//! Gamma densities and their cross-correlations (bilateral gamma densities).

use std::f64::consts::PI;

use crate::numeric::{bessel_k_scaled, exp_sinh, ln_gamma, tanh_sinh};
use crate::{Error, Result};

/// Gamma density with the given shape and rate, zero for `t <= 0`.
pub fn gamma_pdf(shape: f64, rate: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - ln_gamma(shape)).exp()
}

/// `int_0^inf f1(s) f2(s + v) ds` for two functions supported on `(0, inf)`
/// that may be singular at the origin. `scale` is a typical length of the
/// integrands, used only when `v == 0`.
///
/// The integration range is split where either factor is singular, so each
/// piece has its singularity at an endpoint.
pub fn cross_correlation<F1, F2>(f1: F1, f2: F2, v: f64, scale: f64) -> f64
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    if v < 0.0 {
        return cross_correlation(f2, f1, -v, scale);
    }
    if v == 0.0 {
        return tanh_sinh(|s| f1(s) * f2(s), 0.0, scale) + exp_sinh(|s| f1(s) * f2(s), scale);
    }
    // s in (0, v] as s = v t, then s in (v, inf)
    let near = tanh_sinh(|t| f1(v * t) * f2(v + v * t), 0.0, 1.0) * v;
    let far = exp_sinh(|y| f1(v + y) * f2(2.0 * v + y), 0.0);
    near + far
}

/// Density at `v` of `Y - X` for independent `X ~ Gamma(a1, l1)`,
/// `Y ~ Gamma(a2, l2)`, by quadrature.
///
/// Errors with `PoleAt(0)` at `v = 0` when `a1 + a2 <= 1`.
pub fn bilateral_gamma_quadrature(a1: f64, l1: f64, a2: f64, l2: f64, v: f64) -> Result<f64> {
    if v == 0.0 && a1 + a2 <= 1.0 {
        return Err(Error::PoleAt(0.0));
    }
    let scale = (a1 / l1).max(a2 / l2).max(1.0 / l1.min(l2));
    Ok(cross_correlation(
        |s| gamma_pdf(a1, l1, s),
        |s| gamma_pdf(a2, l2, s),
        v,
        scale,
    ))
}

/// Closed form of the symmetric bilateral gamma density (`a1 = a2 = a`,
/// `l1 = l2 = l`):
/// `l^{2a} / (Gamma(a) sqrt(pi)) * (|v|/(2l))^{a-1/2} K_{a-1/2}(l |v|)`.
pub fn bilateral_gamma_symmetric(a: f64, l: f64, v: f64) -> Result<f64> {
    let x = v.abs();
    if x == 0.0 {
        if 2.0 * a <= 1.0 {
            return Err(Error::PoleAt(0.0));
        }
        // limit: l^{2a} Gamma(2a-1) / (Gamma(a)^2 (2l)^{2a-1})
        let ln = 2.0 * a * l.ln() + ln_gamma(2.0 * a - 1.0)
            - 2.0 * ln_gamma(a)
            - (2.0 * a - 1.0) * (2.0 * l).ln();
        return Ok(ln.exp());
    }
    let nu = a - 0.5;
    let z = l * x;
    let ln = 2.0 * a * l.ln() - ln_gamma(a) - 0.5 * PI.ln() + nu * (x / (2.0 * l)).ln()
        + bessel_k_scaled(nu, z).ln()
        - z;
    Ok(ln.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_pdf_exponential_case() {
        assert!((gamma_pdf(1.0, 2.0, 0.5) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(gamma_pdf(0.4, 10.0, 0.0), 0.0);
        assert_eq!(gamma_pdf(0.4, 10.0, -1.0), 0.0);
    }

    #[test]
    fn exponential_difference_is_laplace() {
        // X, Y ~ Exp(l) -> Y - X ~ Laplace with density l/2 e^{-l|v|}
        let l = 3.0;
        for v in [-2.0, -0.1, 0.0, 1e-6, 0.4, 3.0] {
            let expect = 0.5 * l * (-l * f64::abs(v)).exp();
            let closed = bilateral_gamma_symmetric(1.0, l, v).unwrap();
            let quad = bilateral_gamma_quadrature(1.0, l, 1.0, l, v).unwrap();
            assert!((closed / expect - 1.0).abs() < 1e-12, "v={v}: {closed} vs {expect}");
            assert!((quad / expect - 1.0).abs() < 1e-10, "v={v}: {quad} vs {expect}");
        }
    }

    #[test]
    fn symmetric_closed_form_matches_quadrature() {
        for (a, l) in [(0.4, 10.0), (0.8, 10.0), (2.0, 100.0), (1.3, 0.7)] {
            for i in 1..40 {
                let v = (i as f64 - 20.0) * 0.37 / l;
                if v == 0.0 {
                    continue;
                }
                let c = bilateral_gamma_symmetric(a, l, v).unwrap();
                let q = bilateral_gamma_quadrature(a, l, a, l, v).unwrap();
                assert!((c / q - 1.0).abs() < 1e-8, "a={a} l={l} v={v}: {c} vs {q}");
            }
        }
    }

    #[test]
    fn peak_value_and_pole() {
        let at0 = bilateral_gamma_symmetric(2.0, 100.0, 0.0).unwrap();
        let near = bilateral_gamma_symmetric(2.0, 100.0, 1e-7).unwrap();
        assert!((at0 / near - 1.0).abs() < 1e-6);
        assert_eq!(bilateral_gamma_symmetric(0.4, 10.0, 0.0), Err(Error::PoleAt(0.0)));
        assert_eq!(bilateral_gamma_quadrature(0.3, 1.0, 0.5, 2.0, 0.0), Err(Error::PoleAt(0.0)));
    }

    #[test]
    fn asymmetric_density_integrates_to_one() {
        let p = |v: f64| bilateral_gamma_quadrature(0.7, 4.0, 1.8, 9.0, v).unwrap();
        let mass = tanh_sinh(|v| p(-v), 0.0, 5.0) + tanh_sinh(p, 0.0, 5.0);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }
}
