//! Special functions used by the elliptic-beam transmittance formulas.
//!
//! Modified Bessel functions of the first kind (orders 0 and 1) and the
//! principal branch of the Lambert W function. Exponentially scaled Bessel
//! variants are provided for products of the form `e^{-x} I_n(x)`, which the
//! channel model evaluates at arguments where `I_n` alone would overflow.

use thiserror::Error;

/// Switchover between the power series and the large-argument expansion.
const BESSEL_SERIES_LIMIT: f64 = 15.0;
const LAMBERT_MAX_ITER: usize = 50;
const LAMBERT_REL_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecFunError {
    #[error("result of {function}({arg}) exceeds the representable range")]
    Overflow { function: &'static str, arg: f64 },
    #[error("{function} is not defined for argument {arg}")]
    Domain { function: &'static str, arg: f64 },
    #[error("{function}({arg}) did not converge")]
    NotConverged { function: &'static str, arg: f64 },
}

/// Value of an iterative evaluation together with its convergence flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFunResult {
    pub value: f64,
    pub converged: bool,
}

impl SpecFunResult {
    fn into_result(self, function: &'static str, arg: f64) -> Result<f64, SpecFunError> {
        if self.converged && self.value.is_finite() {
            Ok(self.value)
        } else {
            Err(SpecFunError::NotConverged { function, arg })
        }
    }
}

/// Power series `sum_k (x/2)^{2k+order} / (k! (k+order)!)` for order 0 or 1,
/// evaluated at `x >= 0`.
fn bessel_series(x: f64, order: u32) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + order as f64));
        sum += term;
        if term <= sum * f64::EPSILON * 0.25 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Large-argument expansion of `sqrt(2 pi x) e^{-x} I_order(x)`.
fn bessel_asymptotic_scaled_sum(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * f64::EPSILON * 0.25 {
            break;
        }
    }
    sum
}

/// `e^{-|x|} I_0(x)`; finite for every finite `x`.
pub fn bessel_i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax < BESSEL_SERIES_LIMIT {
        bessel_series(ax, 0) * (-ax).exp()
    } else {
        bessel_asymptotic_scaled_sum(ax, 0) / (2.0 * std::f64::consts::PI * ax).sqrt()
    }
}

/// `e^{-|x|} I_1(x)`; odd in `x`.
pub fn bessel_i1e(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < BESSEL_SERIES_LIMIT {
        bessel_series(ax, 1) * (-ax).exp()
    } else {
        bessel_asymptotic_scaled_sum(ax, 1) / (2.0 * std::f64::consts::PI * ax).sqrt()
    };
    v.copysign(x)
}

fn unscale(function: &'static str, x: f64, scaled: f64) -> Result<f64, SpecFunError> {
    let ax = x.abs();
    if ax < BESSEL_SERIES_LIMIT {
        return Ok(scaled * ax.exp());
    }
    // Split the exponential so the intermediate stays finite near the limit.
    let half = (0.5 * ax).exp();
    let v = scaled * half * half;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SpecFunError::Overflow { function, arg: x })
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> Result<f64, SpecFunError> {
    if x.abs() < BESSEL_SERIES_LIMIT {
        return Ok(bessel_series(x.abs(), 0));
    }
    unscale("bessel_i0", x, bessel_i0e(x))
}

/// Modified Bessel function of the first kind, order one.
pub fn bessel_i1(x: f64) -> Result<f64, SpecFunError> {
    if x.abs() < BESSEL_SERIES_LIMIT {
        return Ok(bessel_series(x.abs(), 1).copysign(x));
    }
    unscale("bessel_i1", x, bessel_i1e(x))
}

fn lambert_halley(x: f64) -> SpecFunResult {
    let mut w = x.ln_1p();
    for _ in 0..LAMBERT_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= LAMBERT_REL_STEP * w.abs() || step == 0.0 {
            return SpecFunResult { value: w, converged: true };
        }
    }
    SpecFunResult { value: w, converged: false }
}

/// Principal branch `W_0(x)` for `x >= 0`: the nonnegative solution of `w e^w = x`.
pub fn lambert_w0(x: f64) -> Result<f64, SpecFunError> {
    if x.is_nan() || x < 0.0 {
        return Err(SpecFunError::Domain { function: "lambert_w0", arg: x });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Err(SpecFunError::Overflow { function: "lambert_w0", arg: x });
    }
    lambert_halley(x).into_result("lambert_w0", x)
}

/// `W_0(e^log_x)`, usable when `e^log_x` itself would overflow.
///
/// For large arguments this solves `w + ln w = log_x` with Halley steps.
pub fn lambert_w0_of_exp(log_x: f64) -> Result<f64, SpecFunError> {
    if log_x.is_nan() {
        return Err(SpecFunError::Domain { function: "lambert_w0_of_exp", arg: log_x });
    }
    if log_x < 600.0 {
        return lambert_w0(log_x.exp());
    }
    let mut w = log_x - log_x.ln();
    for _ in 0..LAMBERT_MAX_ITER {
        let f = w + w.ln() - log_x;
        let d1 = 1.0 + 1.0 / w;
        let d2 = -1.0 / (w * w);
        let step = f / (d1 - 0.5 * f * d2 / d1);
        w -= step;
        if step.abs() <= LAMBERT_REL_STEP * w {
            return Ok(w);
        }
    }
    Err(SpecFunError::NotConverged { function: "lambert_w0_of_exp", arg: log_x })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain term-by-term series; every term is positive so it is accurate
    /// to a few ulps for all arguments where the result is finite.
    fn series_oracle(x: f64, order: u32) -> f64 {
        let mut term = (0.5 * x).powi(order as i32);
        let mut sum = term;
        for k in 1..5000 {
            let k = k as f64;
            term *= (0.5 * x) * (0.5 * x) / (k * (k + order as f64));
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn frozen_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_i1(0.0).unwrap(), 0.0);
        assert!(rel(bessel_i0(1.0).unwrap(), 1.2660658777520084) < 1e-15);
        assert!(rel(bessel_i1(1.0).unwrap(), 0.565159103992485) < 1e-15);
        assert!(rel(series_oracle(1.0, 0), 1.2660658777520084) < 1e-15);
        assert!(rel(series_oracle(1.0, 1), 0.565159103992485) < 1e-15);
    }

    #[test]
    fn symmetry() {
        for &x in &[0.3, 2.0, 14.9, 15.0, 40.0, 300.0] {
            assert_eq!(bessel_i0(-x).unwrap(), bessel_i0(x).unwrap());
            assert_eq!(bessel_i1(-x).unwrap(), -bessel_i1(x).unwrap());
        }
    }

    #[test]
    fn matches_series_oracle_up_to_700() {
        let mut x = 0.05;
        while x <= 700.0 {
            for order in 0..2 {
                let got = if order == 0 { bessel_i0(x) } else { bessel_i1(x) }.unwrap();
                let want = series_oracle(x, order);
                assert!(rel(got, want) <= 1e-12, "I{order}({x}): {got} vs {want}");
            }
            x *= 1.07;
        }
        for &x in &[14.999, 15.0, 15.001, 700.0] {
            assert!(rel(bessel_i0(x).unwrap(), series_oracle(x, 0)) <= 1e-12);
            assert!(rel(bessel_i1(x).unwrap(), series_oracle(x, 1)) <= 1e-12);
        }
    }

    #[test]
    fn small_argument_i1() {
        for &x in &[1e-3, 1e-5, 1e-8] {
            let v = bessel_i1(x).unwrap();
            assert!(rel(v, x / 2.0) < 1e-6, "{x}");
        }
        assert!(rel(bessel_i1(1e-8).unwrap(), 5e-9) < 1e-12);
    }

    #[test]
    fn overflow_is_signalled() {
        assert!(matches!(bessel_i0(720.0), Err(SpecFunError::Overflow { .. })));
        assert!(matches!(bessel_i1(-720.0), Err(SpecFunError::Overflow { .. })));
        assert!(bessel_i0e(720.0).is_finite());
    }

    #[test]
    fn derivative_of_i0_is_i1() {
        for i in 0..20 {
            let x = 0.1 + (20.0 - 0.1) * i as f64 / 19.0;
            let h = 1e-5 * x.max(1.0);
            let d = (bessel_i0(x + h).unwrap() - bessel_i0(x - h).unwrap()) / (2.0 * h);
            assert!(rel(d, bessel_i1(x).unwrap()) < 1e-6, "x={x}");
        }
    }

    #[test]
    fn lambert_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        // Newton oracle on w e^w - 1
        let mut w = 0.5f64;
        for _ in 0..100 {
            w -= (w * w.exp() - 1.0) / ((w + 1.0) * w.exp());
        }
        assert!((w - 0.5671432904097838).abs() < 1e-15);
        assert!(rel(lambert_w0(1.0).unwrap(), 0.5671432904097838) < 1e-15);
    }

    #[test]
    fn lambert_domain() {
        assert!(matches!(lambert_w0(-0.1), Err(SpecFunError::Domain { .. })));
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn lambert_of_exp_matches_direct() {
        for &l in &[-30.0, -1.0, 0.0, 3.0, 50.0, 599.0] {
            let a = lambert_w0_of_exp(l).unwrap();
            let b = lambert_w0(f64::exp(l)).unwrap();
            assert!(rel(a, b) < 1e-13, "{l}");
        }
        for &l in &[600.0, 1000.0, 1e5] {
            let w = lambert_w0_of_exp(l).unwrap();
            assert!(((w + w.ln()) - l).abs() < 1e-12 * l);
        }
    }

    #[test]
    fn monotone() {
        let mut prev = (0.0, 0.0, 0.0);
        for i in 0..=400 {
            let x = i as f64 * 0.25;
            let cur = (bessel_i0(x).unwrap(), bessel_i1(x).unwrap(), lambert_w0(x).unwrap());
            if i > 0 {
                assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2, "x={x}");
            }
            prev = cur;
        }
    }

    proptest::proptest! {
        #[test]
        fn lambert_residual(x in 0.0f64..100.0) {
            let w = lambert_w0(x).unwrap();
            proptest::prop_assert!(w >= 0.0);
            if x > 0.0 {
                proptest::prop_assert!(((w * w.exp() - x) / x).abs() <= 1e-11);
            }
        }
    }
}
