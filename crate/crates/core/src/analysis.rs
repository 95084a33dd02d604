//! Second derivative of `K_alpha * f` through the Taylor-remainder integral,
//! together with the finite-difference oracles used to check it.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::potentials::kernel::{k, k2};
use crate::quad::{self, gauss16, Quadrature};

/// `alpha |z|` beyond which `e^{-alpha |z|} < 1e-12` and the kernel is dropped.
pub const TAIL_CUTOFF: f64 = 27.631_021_115_928_547;

/// Integrable test functions that are `C^2` on a stated interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `exp(-1/(1 - x^2))` on `(-1, 1)`, zero elsewhere; smooth everywhere.
    Bump,
    /// `exp(-x^2)`.
    Gaussian,
    /// `1 + x/2 - 3x^2/10` on `[-1, 1]` with tails `0.4 e^{-(|x|-1)}`.
    /// Jumps at `x = -1` and `x = 1`.
    Piecewise,
    /// `c0 + c1 x` on `[-half_width, half_width]`, zero elsewhere.
    AffineWindow { c0: f64, c1: f64, half_width: f64 },
}

impl TestFunction {
    pub fn catalog() -> [TestFunction; 3] {
        [TestFunction::Bump, TestFunction::Gaussian, TestFunction::Piecewise]
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Bump => "bump",
            TestFunction::Gaussian => "gaussian",
            TestFunction::Piecewise => "piecewise",
            TestFunction::AffineWindow { .. } => "affine_window",
        }
    }

    /// Open interval on which the function is `C^2`.
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            TestFunction::Bump | TestFunction::Piecewise => (-1.0, 1.0),
            TestFunction::Gaussian => (-2.0, 2.0),
            TestFunction::AffineWindow { half_width, .. } => (-half_width, half_width),
        }
    }

    /// Points where the function or its derivatives jump.
    pub fn breaks(&self) -> Vec<f64> {
        match *self {
            TestFunction::Bump | TestFunction::Piecewise => vec![-1.0, 1.0],
            TestFunction::Gaussian => vec![],
            TestFunction::AffineWindow { half_width, .. } => vec![-half_width, half_width],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.all(x)[0]
    }

    /// `[f, f', f'']`, one-sided at the breaks.
    pub fn all(&self, x: f64) -> [f64; 3] {
        match *self {
            TestFunction::Bump => {
                let s = 1.0 - x * x;
                if s <= 0.0 {
                    return [0.0; 3];
                }
                let f = (-1.0 / s).exp();
                // g = -1/s, g' = -2x/s^2, g'' = -(2 + 6x^2)/s^3
                let g1 = -2.0 * x / (s * s);
                let g2 = -(2.0 + 6.0 * x * x) / (s * s * s);
                [f, f * g1, f * (g1 * g1 + g2)]
            }
            TestFunction::Gaussian => {
                let f = (-x * x).exp();
                [f, -2.0 * x * f, (4.0 * x * x - 2.0) * f]
            }
            TestFunction::Piecewise => {
                if x.abs() <= 1.0 {
                    [1.0 + 0.5 * x - 0.3 * x * x, 0.5 - 0.6 * x, -0.6]
                } else {
                    let e = 0.4 * (1.0 - x.abs()).exp();
                    [e, -x.signum() * e, e]
                }
            }
            TestFunction::AffineWindow { c0, c1, half_width } => {
                if x.abs() <= half_width {
                    [c0 + c1 * x, c1, 0.0]
                } else {
                    [0.0; 3]
                }
            }
        }
    }
}

/// `alpha^3 K''(alpha z)`.
fn k_alpha2(alpha: f64, z: f64) -> f64 {
    alpha.powi(3) * k2(alpha * z)
}

/// `z^2 K_alpha''(z) = alpha (u^2 K''(u))` at `u = alpha z`, bounded near zero.
fn z2_k_alpha2(alpha: f64, z: f64) -> f64 {
    let u = 2.0 * (alpha * z).abs();
    if u == 0.0 {
        return alpha;
    }
    alpha * u * u / (u.tanh() * u.sinh())
}

/// `(K_alpha * f)''(x)` as `int [f(x+z) - f(x) - z f'(x)] K_alpha''(z) dz`.
pub fn convolution_second_derivative(f: &TestFunction, alpha: f64, x: f64) -> Result<f64> {
    convolution_second_derivative_with_tol(f, alpha, x, 1e-12).map(|q| q.value)
}

/// As [`convolution_second_derivative`], returning the quadrature error estimate.
pub fn convolution_second_derivative_with_tol(
    f: &TestFunction,
    alpha: f64,
    x: f64,
    tol: f64,
) -> Result<Quadrature> {
    let (a, b) = f.interval();
    if !(x > a && x < b) {
        return domain(format!("x = {x} is not inside the smooth interval ({a}, {b})"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    let [fx, dfx, _] = f.all(x);
    let reach = TAIL_CUTOFF / alpha;
    let near = (0.5 * (x - a).min(b - x)).min(1.0 / alpha).min(reach);

    // Taylor remainder z^2 int_0^1 (1 - t) f''(x + t z) dt inside (x - near, x + near)
    let remainder = |z: f64| {
        let avg = gauss16().integrate(0.0, 1.0, |t| (1.0 - t) * f.all(x + t * z)[2]);
        avg * z2_k_alpha2(alpha, z)
    };
    let direct = |z: f64| (f.eval(x + z) - fx - z * dfx) * k_alpha2(alpha, z);

    let abs_tol = tol * alpha;
    let inner = quad::adaptive_piecewise(remainder, &[-near, 0.0, near], abs_tol, tol);

    let mut breaks: Vec<f64> = vec![-reach, -near, near, reach];
    breaks.extend(f.breaks().into_iter().map(|p| p - x).filter(|z| z.abs() > near && z.abs() < reach));
    breaks.sort_by(f64::total_cmp);
    let (left, right): (Vec<f64>, Vec<f64>) = breaks.iter().partition(|z| **z <= -near);
    let outer_l = quad::adaptive_piecewise(direct, &left, abs_tol, tol);
    let outer_r = quad::adaptive_piecewise(direct, &right, abs_tol, tol);
    Ok(Quadrature {
        value: inner.value + outer_l.value + outer_r.value,
        error: inner.error + outer_l.error + outer_r.error,
        evaluations: inner.evaluations + outer_l.evaluations + outer_r.evaluations,
    })
}

/// `(K_alpha * f)(x)` by direct quadrature over `z = y - x`.
pub fn convolution(f: &TestFunction, alpha: f64, x: f64) -> f64 {
    let reach = TAIL_CUTOFF / alpha;
    let mut breaks = vec![-reach, 0.0, reach];
    breaks.extend(f.breaks().into_iter().map(|p| p - x).filter(|z| z.abs() < reach && *z != 0.0));
    breaks.sort_by(f64::total_cmp);
    quad::adaptive_piecewise(|z| alpha * k(alpha * z) * f.eval(x + z), &breaks, 1e-15, 1e-15).value
}

/// Second central difference of [`convolution`] with step `h`.
pub fn fd_oracle(f: &TestFunction, alpha: f64, x: f64, h: f64) -> f64 {
    (convolution(f, alpha, x + h) - 2.0 * convolution(f, alpha, x) + convolution(f, alpha, x - h)) / (h * h)
}

/// Central difference with Richardson extrapolation over `h = 1e-4` and `1e-5`.
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let (coarse, fine) = (d(1e-4), d(1e-5));
    (100.0 * fine - coarse) / 99.0
}

/// Worst deviation between `df` and a finite-difference derivative of `f`
/// over `points`, relative to the largest `|df|`. Zero when both vanish.
pub fn fd_check<F, D>(f: F, df: D, points: &[f64]) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let pairs: Vec<(f64, f64)> = points.iter().map(|&x| (df(x), richardson_derivative(&f, x))).collect();
    relative_deviation(&pairs)
}

/// [`fd_check`] for a gradient of a function of several variables.
pub fn fd_check_gradient<F>(f: F, grad: &[f64], x: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let pairs: Vec<(f64, f64)> = (0..x.len())
        .map(|i| {
            let along = |t: f64| {
                let mut y = x.to_vec();
                y[i] = t;
                f(&y)
            };
            (grad[i], richardson_derivative(along, x[i]))
        })
        .collect();
    relative_deviation(&pairs)
}

fn relative_deviation(pairs: &[(f64, f64)]) -> f64 {
    let worst = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if worst == 0.0 {
        return 0.0;
    }
    let scale = pairs.iter().map(|(a, _)| a.abs()).fold(0.0, f64::max);
    worst / scale.max(f64::MIN_POSITIVE)
}
