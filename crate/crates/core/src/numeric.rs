//! Numerical building blocks: double-exponential quadrature, compensated
//! (double-double) sums, and the scaled modified Bessel function `e^x K_nu(x)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

pub use statrs::function::gamma::ln_gamma;

const TANH_SINH_SPAN: f64 = 5.0;
const EXP_SINH_LO: f64 = -4.5;
const EXP_SINH_HI: f64 = 4.0;
const DE_MAX_LEVEL: u32 = 8;
const DE_REL_TOL: f64 = 1e-13;

/// Tanh-sinh quadrature of `f` over `[a, b]`.
///
/// Tolerates integrable singularities at the endpoints. Nodes close to an
/// endpoint are placed relative to that endpoint, so a singularity at `a = 0`
/// is resolved down to subnormal distances; singularities elsewhere should be
/// shifted to zero by the caller.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let width = b - a;
    let node = |s: f64| -> Option<(f64, f64)> {
        let x = FRAC_PI_2 * s.sinh();
        let ch = x.cosh();
        let w = width * FRAC_PI_4 * s.cosh() / (ch * ch);
        if !(w > 0.0) || !w.is_finite() {
            return None;
        }
        // 1/(1+e^{2|x|}) is the distance (in units of width) to the near endpoint
        let near = 1.0 / (1.0 + (2.0 * x.abs()).exp());
        let p = if s < 0.0 { a + width * near } else { b - width * near };
        if p <= a.min(b) || p >= a.max(b) {
            return None;
        }
        Some((p, w))
    };
    de_refine(|s| node(s).map_or(0.0, |(p, w)| w * f(p)), -TANH_SINH_SPAN, TANH_SINH_SPAN)
}

/// Exp-sinh quadrature of `f` over `[a, inf)`; `f` must decay at infinity.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, a: f64) -> f64 {
    de_refine(
        |s| {
            let y = (FRAC_PI_2 * s.sinh()).exp();
            if !y.is_finite() || y == 0.0 {
                return 0.0;
            }
            let w = FRAC_PI_2 * s.cosh() * y;
            let v = f(a + y);
            if v == 0.0 {
                0.0
            } else {
                w * v
            }
        },
        EXP_SINH_LO,
        EXP_SINH_HI,
    )
}

/// Trapezoid sums on `[lo, hi]` with step halving until successive levels agree.
fn de_refine<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> f64 {
    let mut step = 0.125;
    let n0 = ((hi - lo) / step).round() as i64;
    let mut sum: f64 = (0..=n0).map(|k| g(lo + k as f64 * step)).sum();
    let mut estimate = sum * step;
    for _ in 0..DE_MAX_LEVEL {
        step *= 0.5;
        let n = ((hi - lo) / step).round() as i64;
        let odd: f64 = (1..n).step_by(2).map(|k| g(lo + k as f64 * step)).sum();
        sum += odd;
        let next = sum * step;
        let done = (next - estimate).abs() <= DE_REL_TOL * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// `e^x K_nu(x)` for `x > 0`, from the trapezoid rule applied to
/// `int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt`, which converges
/// geometrically for this analytic integrand.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let step = (0.1 / x.sqrt()).min(0.02);
    let mut sum = 0.5; // t = 0 term, halved
    let mut k = 1u32;
    loop {
        let t = k as f64 * step;
        let e = x * (t.cosh() - 1.0);
        let term = (-e).exp() * (nu * t).cosh();
        sum += term;
        if e > 40.0 && term < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * step
}

/// Double-double value `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn mul(a: f64, b: f64) -> Self {
        let p = a * b;
        let err = a.mul_add(b, -p);
        Self { hi: p, lo: err }
    }

    #[inline]
    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, e);
        Self { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, x: f64) -> Self {
        self.add(Self::from_f64(x))
    }

    #[inline]
    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}
