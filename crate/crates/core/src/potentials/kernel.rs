//! The repulsive interaction kernel `K(x) = -log|tanh x|`.

use crate::error::{domain, Result};

/// `K(x) = -log|tanh x|` and its derivatives.
///
/// `K` is even, positive, log-singular at the origin, and decays like
/// `2 e^{-2|x|}`. All evaluations are written to stay accurate in both
/// regimes, so `K(1e-300)` and `K(300)` are computed without cancellation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InteractionKernel;

impl InteractionKernel {
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x == 0.0 || !x.is_finite() {
            return domain(format!("kernel is singular at x = {x}"));
        }
        Ok(k(x))
    }

    /// `(K'(x), K''(x))`.
    pub fn derivs(&self, x: f64) -> Result<(f64, f64)> {
        if x == 0.0 || !x.is_finite() {
            return domain(format!("kernel derivatives are singular at x = {x}"));
        }
        Ok((k1(x), k2(x)))
    }

    /// Rescaled kernel `K_alpha(x) = alpha K(alpha x)`.
    pub fn scaled(&self, alpha: f64, x: f64) -> Result<f64> {
        self.eval(alpha * x).map(|v| alpha * v)
    }
}

/// `K(x)`; infinite at zero.
#[inline]
pub fn k(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        return f64::INFINITY;
    }
    let e = (-2.0 * a).exp();
    // tanh a = (1 - e) / (1 + e)
    let log_one_minus = if e < 0.5 { (-e).ln_1p() } else { (-(-2.0 * a).exp_m1()).ln() };
    e.ln_1p() - log_one_minus
}

/// `K'(x) = -2 / sinh(2x)`, odd.
#[inline]
pub fn k1(x: f64) -> f64 {
    -2.0 / (2.0 * x).sinh()
}

/// `K''(x) = 4 / (tanh(2x) sinh(2x))`, even and positive.
#[inline]
pub fn k2(x: f64) -> f64 {
    let t = 2.0 * x.abs();
    4.0 / (t.tanh() * t.sinh())
}

/// Smooth remainder `S(x) = K(x) + log|x| = -log(tanh|x| / |x|)`.
///
/// Even and analytic on `|x| < pi/2`, with `S(x) = x^2/3 + O(x^4)`.
#[inline]
pub fn smooth_remainder(x: f64) -> f64 {
    let a = x.abs();
    if a >= 4.0 {
        return k(a) + a.ln();
    }
    // tanh a / a = (sinh a / a) / cosh a, both factors free of cancellation
    let half = (0.5 * a).sinh();
    let log_cosh = (2.0 * half * half).ln_1p();
    log_cosh - sinhc_minus_one(a).ln_1p()
}

/// `sinh(a)/a - 1`.
fn sinhc_minus_one(a: f64) -> f64 {
    if a < 1.0 {
        let a2 = a * a;
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..12 {
            term *= a2 / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        sum
    } else {
        a.sinh() / a - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_one() {
        // -log(tanh 1) to 16 digits
        assert!((k(1.0) - 0.272_341_468_911_831_6).abs() < 1e-15);
        assert_eq!(k(-1.0), k(1.0));
    }

    #[test]
    fn zero_is_a_domain_error() {
        assert!(InteractionKernel.eval(0.0).is_err());
        assert!(InteractionKernel.derivs(0.0).is_err());
    }

    #[test]
    fn small_argument_follows_log() {
        let x = 1e-6;
        assert!((k(x) + x.ln()).abs() < 1e-6);
        // tanh x = x - x^3/3 gives K = -log x + x^2/3
        assert!((k(x) - (-x.ln() + x * x / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn tail_matches_leading_exponential() {
        let x = 5.0;
        let ratio = k(x) / (2.0 * (-2.0 * x).exp());
        assert!((ratio - 1.0).abs() <= 1e-3, "{ratio}");
        assert!(k(400.0) > 0.0 || k(400.0) == 0.0);
        assert!(k2(400.0).is_finite());
    }

    #[test]
    fn remainder_is_continuous_across_branches() {
        for &b in &[1.0, 4.0] {
            let lo = smooth_remainder(b * (1.0 - 1e-15));
            let hi = smooth_remainder(b * (1.0 + 1e-15));
            assert!((lo - hi).abs() < 1e-12 * hi.abs().max(1e-6), "{b}: {lo} vs {hi}");
        }
        for &x in &[0.01, 0.5, 2.0, 7.0] {
            assert!((smooth_remainder(x) - (k(x) + f64::ln(x))).abs() < 1e-12);
        }
    }
}
