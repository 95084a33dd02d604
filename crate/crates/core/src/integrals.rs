//! Integrals of the kernel and of its regularization against linear weights.
//!
//! Everything reduces to `int_a^b (c0 + c1 v) f(v) dv` on `0 <= a < b` for
//! `f = K` or `f = L`. Near the origin the singular part `-log v` is
//! integrated in closed form and the smooth remainder `S` by Gauss–Legendre;
//! away from it `K` itself is smooth enough for a direct 16-point rule.

use crate::potentials::kernel;
use crate::quad;

/// `int_0^x -log v dv` and `int_0^x -v log v dv`.
fn neg_log_moments(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 0.0);
    }
    let l = x.ln();
    (x - x * l, 0.25 * x * x - 0.5 * x * x * l)
}

/// `int_a^b (c0 + c1 v) K(v) dv` for `0 <= a <= b`.
pub fn k_moment(a: f64, b: f64, c0: f64, c1: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= a);
    if b <= a {
        return 0.0;
    }
    let w = b - a;
    if a < w {
        let (l0b, l1b) = neg_log_moments(b);
        let (l0a, l1a) = neg_log_moments(a);
        let singular = c0 * (l0b - l0a) + c1 * (l1b - l1a);
        let smooth = piecewise_gauss(a, b, 0.5, quad::gauss8(), |v| (c0 + c1 * v) * kernel::smooth_remainder(v));
        singular + smooth
    } else {
        // the distance to the singularity is at least the piece width
        piecewise_gauss(a, b, a.max(0.5), quad::gauss16(), |v| (c0 + c1 * v) * kernel::k(v))
    }
}

fn piecewise_gauss<F: Fn(f64) -> f64>(a: f64, b: f64, max_width: f64, rule: &quad::GaussLegendre, f: F) -> f64 {
    let pieces = ((b - a) / max_width).ceil().max(1.0) as usize;
    let step = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * step;
            let hi = if i + 1 == pieces { b } else { lo + step };
            rule.integrate(lo, hi, &f)
        })
        .sum()
}

/// `int_0^x K` for `x >= 0`, using the tail series `sum_{k odd} e^{-2kx}/k^2` for `x >= 1/2`.
pub fn k_primitive(x: f64) -> f64 {
    if x < 0.5 {
        return k_moment(0.0, x, 1.0, 0.0);
    }
    let mut tail = 0.0;
    let mut k = 1.0;
    loop {
        let t = (-2.0 * k * x).exp() / (k * k);
        tail += t;
        if t < 1e-18 * tail {
            break;
        }
        k += 2.0;
    }
    std::f64::consts::PI.powi(2) / 8.0 - tail
}

/// Even profile `f` whose tent integrals assemble interaction matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `K(v) = -log|tanh v|`
    Kernel,
    /// `L` of the regularization at `sigma`: affine on `[0, sigma]`, `K` beyond.
    Regularized { sigma: f64 },
}

impl Profile {
    pub fn eval(&self, v: f64) -> f64 {
        let a = v.abs();
        match *self {
            Profile::Kernel => kernel::k(a),
            Profile::Regularized { sigma } => {
                if a >= sigma {
                    kernel::k(a)
                } else {
                    kernel::k(sigma) + (a - sigma) * kernel::k1(sigma)
                }
            }
        }
    }

    /// `int_a^b (c0 + c1 v) f(v) dv` for `0 <= a <= b`.
    pub fn moment(&self, a: f64, b: f64, c0: f64, c1: f64) -> f64 {
        match *self {
            Profile::Kernel => k_moment(a, b, c0, c1),
            Profile::Regularized { sigma } => {
                let mut acc = 0.0;
                if a < sigma {
                    let hi = b.min(sigma);
                    // (c0 + c1 v)(p + s v) with p = K(s) - s K'(s), s = K'(s)
                    let s = kernel::k1(sigma);
                    let p = kernel::k(sigma) - sigma * s;
                    let poly = |v: f64| {
                        c0 * p * v + (c0 * s + c1 * p) * v * v / 2.0 + c1 * s * v * v * v / 3.0
                    };
                    acc += poly(hi) - poly(a);
                }
                if b > sigma {
                    acc += k_moment(a.max(sigma), b, c0, c1);
                }
                acc
            }
        }
    }

    /// `int_a^b f` for any `a <= b`, splitting at the origin.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a >= 0.0 {
            self.moment(a, b, 1.0, 0.0)
        } else if b <= 0.0 {
            self.moment(-b, -a, 1.0, 0.0)
        } else {
            self.moment(0.0, -a, 1.0, 0.0) + self.moment(0.0, b, 1.0, 0.0)
        }
    }

    /// `(1/H^2) int (H - |v - kH|)_+ f(v) dv`: the average of `f(x - y)` over
    /// two cells of width `H` that are `k` cells apart.
    pub fn tent(&self, width: f64, k: usize) -> f64 {
        let hh = width;
        let kf = k as f64;
        let v = if k == 0 {
            2.0 * self.moment(0.0, hh, hh, -1.0)
        } else {
            let left = self.moment((kf - 1.0) * hh, kf * hh, -(kf - 1.0) * hh, 1.0);
            let right = self.moment(kf * hh, (kf + 1.0) * hh, (kf + 1.0) * hh, -1.0);
            left + right
        };
        v / (hh * hh)
    }
}

/// `(1/l^2) int_0^l int_0^l K_alpha(x - y) dx dy`, the self-interaction of a cell.
pub fn cell_self_interaction(alpha: f64, len: f64) -> f64 {
    alpha * Profile::Kernel.tent(alpha * len, 0)
}
