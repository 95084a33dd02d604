//! Confining potentials `Q` with primitives `P(x) = int_0^x Q` and inverses.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

pub const DEFAULT_REG_RADIUS: f64 = 1e-2;
pub const DEFAULT_K_MAX: usize = 30;
const BISECTION_STEPS: usize = 80;

fn default_reg_radius() -> f64 {
    DEFAULT_REG_RADIUS
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

/// JSON-serializable catalog descriptor, e.g. `{"kind":"power","p":2.0,"reg_radius":0.01}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `|x|^p`; for `p < 2` the core `[-r, r]` is replaced by an even quartic.
    Power {
        p: f64,
        #[serde(default = "default_reg_radius")]
        reg_radius: f64,
    },
    /// `exp(|x|^p) - 1`, regularized like `Power` for `p < 2`.
    ExpPower {
        p: f64,
        #[serde(default = "default_reg_radius")]
        reg_radius: f64,
    },
    /// `2 [|x| - 1]_+` with the kinks at `|x| = 1` smoothed over `reg_radius`.
    Gap {
        #[serde(default = "default_reg_radius")]
        reg_radius: f64,
    },
    /// `Q'' = sum_k phi_{e^-k}(x - k) + phi_{e^-k}(x + k)`, `k = 1..=k_max`.
    Pathological {
        #[serde(default = "default_k_max")]
        k_max: usize,
    },
    /// Samples of `Q`, `Q'`, `Q''` on increasing nodes.
    Tabulated {
        x: Vec<f64>,
        q: Vec<f64>,
        dq: Vec<f64>,
        d2q: Vec<f64>,
    },
    /// `Q(x) = base(x - dx) + dy`; used to build assumption violations.
    Shifted {
        base: Box<PotentialSpec>,
        #[serde(default)]
        dx: f64,
        #[serde(default)]
        dy: f64,
    },
    /// `Q(x) = base(-x)`.
    Reflected { base: Box<PotentialSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Polynomial,
    Exponential,
    Piecewise,
    Pathological,
}

/// The behavior every catalog shape provides.
pub trait Shape: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    fn primitive(&self, x: f64) -> f64;
    /// Endpoints of `{Q = 0}`.
    fn flat_interval(&self) -> (f64, f64);
    fn growth(&self) -> GrowthClass;

    /// Points where `Q''` has isolated spikes narrower than any sampling grid.
    fn curvature_peaks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `ln P(x)` for `x > q2`; overridden where `P` overflows.
    fn ln_primitive(&self, x: f64) -> f64 {
        self.primitive(x).ln()
    }

    /// `e^s (Q(y), Q'(y), Q''(y))`, overridden where `Q` overflows.
    fn scaled_derivs(&self, y: f64, ln_scale: f64) -> [f64; 3] {
        let f = ln_scale.exp();
        [f * self.value(y), f * self.d1(y), f * self.d2(y)]
    }

    /// Closed-form inverse of `P` where one exists.
    fn closed_inverse(&self, _y: f64) -> Option<f64> {
        None
    }
}

/// A confining potential together with the descriptor it was built from.
#[derive(Clone)]
pub struct ConfiningPotential {
    spec: PotentialSpec,
    shape: Arc<dyn Shape>,
    name: String,
}

impl fmt::Debug for ConfiningPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConfiningPotential").field("name", &self.name).finish()
    }
}

impl ConfiningPotential {
    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn growth(&self) -> GrowthClass {
        self.shape.growth()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.shape.value(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.shape.d1(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.shape.d2(x)
    }

    pub fn primitive(&self, x: f64) -> f64 {
        self.shape.primitive(x)
    }

    pub fn ln_primitive(&self, x: f64) -> f64 {
        self.shape.ln_primitive(x)
    }

    pub fn flat_interval(&self) -> (f64, f64) {
        self.shape.flat_interval()
    }

    pub fn curvature_peaks(&self) -> Vec<f64> {
        self.shape.curvature_peaks()
    }

    pub fn scaled_derivs(&self, y: f64, ln_scale: f64) -> [f64; 3] {
        self.shape.scaled_derivs(y, ln_scale)
    }

    /// `P^{-1}(y)` for `y != 0`: the inverse of `P` outside the flat interval.
    ///
    /// Uses the closed form when the shape has one, otherwise bisection on a
    /// bracket grown geometrically from `max(q2, 1)`.
    pub fn inverse_primitive(&self, y: f64) -> Result<f64> {
        if y == 0.0 || !y.is_finite() {
            return Err(Error::Domain(format!("P^-1 is defined for finite y != 0, got {y}")));
        }
        if let Some(x) = self.shape.closed_inverse(y) {
            return Ok(x);
        }
        let (q1, q2) = self.flat_interval();
        let p = |x: f64| self.primitive(x);
        let (mut lo, mut hi) = if y > 0.0 {
            let mut hi = q2.max(1.0);
            let mut guard = 0;
            while p(hi) < y {
                hi *= 2.0;
                guard += 1;
                if guard > 2000 || !hi.is_finite() {
                    return Err(Error::Potential(format!("cannot bracket P^-1({y})")));
                }
            }
            (q2, hi)
        } else {
            let mut lo = q1.min(-1.0);
            let mut guard = 0;
            while p(lo) > y {
                lo *= 2.0;
                guard += 1;
                if guard > 2000 || !lo.is_finite() {
                    return Err(Error::Potential(format!("cannot bracket P^-1({y})")));
                }
            }
            (lo, q1)
        };
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if p(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Builds a potential from its descriptor.
pub fn make_potential(spec: &PotentialSpec) -> Result<ConfiningPotential> {
    let (shape, name): (Arc<dyn Shape>, String) = match spec {
        PotentialSpec::Power { p, reg_radius } => {
            check_exponent(*p)?;
            check_radius(*reg_radius)?;
            (
                Arc::new(RegularizedEven::new(Outer::Power(*p), *reg_radius)),
                format!("power(p={p})"),
            )
        }
        PotentialSpec::ExpPower { p, reg_radius } => {
            check_exponent(*p)?;
            check_radius(*reg_radius)?;
            (
                Arc::new(RegularizedEven::new(Outer::Exp(*p), *reg_radius)),
                format!("exp_power(p={p})"),
            )
        }
        PotentialSpec::Gap { reg_radius } => {
            check_radius(*reg_radius)?;
            if *reg_radius >= 1.0 {
                return Err(Error::Potential(format!(
                    "gap regularization radius must be < 1, got {reg_radius}"
                )));
            }
            (Arc::new(Gap { r: *reg_radius }), "gap".to_string())
        }
        PotentialSpec::Pathological { k_max } => {
            if *k_max == 0 {
                return Err(Error::Potential("pathological potential needs k_max >= 1".into()));
            }
            (Arc::new(MollifierTrain { k_max: *k_max }), format!("pathological(k_max={k_max})"))
        }
        PotentialSpec::Tabulated { x, q, dq, d2q } => {
            (Arc::new(Tabulated::new(x, q, dq, d2q)?), format!("tabulated({} nodes)", x.len()))
        }
        PotentialSpec::Shifted { base, dx, dy } => {
            let inner = make_potential(base)?;
            let name = format!("shifted({}, dx={dx}, dy={dy})", inner.name);
            (Arc::new(Shifted { base: inner.shape, dx: *dx, dy: *dy }), name)
        }
        PotentialSpec::Reflected { base } => {
            let inner = make_potential(base)?;
            let name = format!("reflected({})", inner.name);
            (Arc::new(Reflected { base: inner.shape }), name)
        }
    };
    Ok(ConfiningPotential { spec: spec.clone(), shape, name })
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Potential(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Potential(format!("reg_radius must be >= 0, got {r}")));
    }
    Ok(())
}

/// Even quartic `a + b x^2 + c x^4` matching value, slope and curvature at `r`.
fn matching_quartic(r: f64, g: f64, g1: f64, g2: f64) -> (f64, f64, f64) {
    let c = (g2 * r - g1) / (8.0 * r * r * r);
    let b = 0.5 * (g2 - 12.0 * c * r * r);
    let a = g - b * r * r - c * r.powi(4);
    (a, b, c)
}

#[derive(Debug, Clone, Copy)]
enum Outer {
    /// `|y|^p`
    Power(f64),
    /// `exp(|y|^p) - 1`
    Exp(f64),
}

impl Outer {
    /// Value and first two derivatives at `y >= 0`.
    fn eval(self, y: f64) -> [f64; 3] {
        match self {
            Outer::Power(p) => {
                let v = y.powf(p);
                let d1 = if y == 0.0 && p > 1.0 { 0.0 } else { p * y.powf(p - 1.0) };
                let d2 = if p == 1.0 {
                    0.0
                } else if p == 2.0 {
                    2.0
                } else {
                    p * (p - 1.0) * y.powf(p - 2.0)
                };
                [v, d1, d2]
            }
            Outer::Exp(p) => {
                let t = y.powf(p);
                let e = t.exp();
                let (inner1, inner2) = exp_inner(p, y);
                [t.exp_m1(), inner1 * e, inner2 * e]
            }
        }
    }

    /// `int_0^y` of the outer function, for `y >= 0` (power only).
    fn power_integral(p: f64, y: f64) -> f64 {
        y.powf(p + 1.0) / (p + 1.0)
    }
}

/// `d/dy y^p` and `(y^p)'' + ((y^p)')^2`.
fn exp_inner(p: f64, y: f64) -> (f64, f64) {
    let d1 = if y == 0.0 && p > 1.0 { 0.0 } else { p * y.powf(p - 1.0) };
    let dd = if p == 1.0 {
        0.0
    } else if p == 2.0 {
        2.0
    } else {
        p * (p - 1.0) * y.powf(p - 2.0)
    };
    (d1, dd + d1 * d1)
}

/// Even potential `outer(|x|) - a` with an optional quartic core on `[-r, r]`.
#[derive(Debug)]
struct RegularizedEven {
    outer: Outer,
    r: f64,
    /// core `b x^2 + c x^4` after the shift by `a`
    b: f64,
    c: f64,
    shift: f64,
    p_at_r: f64,
}

impl RegularizedEven {
    fn new(outer: Outer, r: f64) -> Self {
        let p = match outer {
            Outer::Power(p) | Outer::Exp(p) => p,
        };
        if p >= 2.0 || r == 0.0 {
            return Self { outer, r: 0.0, b: 0.0, c: 0.0, shift: 0.0, p_at_r: 0.0 };
        }
        let [g, g1, g2] = outer.eval(r);
        let (a, b, c) = matching_quartic(r, g, g1, g2);
        let p_at_r = b * r.powi(3) / 3.0 + c * r.powi(5) / 5.0;
        Self { outer, r, b, c, shift: a, p_at_r }
    }

    fn exponent(&self) -> f64 {
        match self.outer {
            Outer::Power(p) | Outer::Exp(p) => p,
        }
    }

    /// `int_r^y (outer - shift)` for `y >= r`.
    fn outer_integral(&self, y: f64) -> f64 {
        match self.outer {
            Outer::Power(p) => {
                Outer::power_integral(p, y) - Outer::power_integral(p, self.r) - self.shift * (y - self.r)
            }
            Outer::Exp(p) => {
                let q = quad::adaptive(|t: f64| t.powf(p).exp_m1(), self.r, y, 0.0, 1e-14);
                q.value - self.shift * (y - self.r)
            }
        }
    }

    /// `e^{-y^p} int_r^y (e^{t^p} - 1 - shift) dt` for large `y`.
    fn exp_scaled_integral(&self, p: f64, y: f64) -> f64 {
        let yp = y.powf(p);
        let f = |t: f64| {
            let tp = t.powf(p);
            (tp - yp).exp() - (1.0 + self.shift) * (-yp).exp()
        };
        // the integrand concentrates within ~1/(p y^{p-1}) of y
        let w = 1.0 / (p * y.powf(p - 1.0));
        let mut breaks = vec![self.r];
        for k in [64.0, 16.0, 4.0, 1.0] {
            let b = y - k * w;
            if b > *breaks.last().expect("non-empty") {
                breaks.push(b);
            }
        }
        breaks.push(y);
        quad::adaptive_piecewise(f, &breaks, 0.0, 1e-14).value
    }
}

impl Shape for RegularizedEven {
    fn value(&self, x: f64) -> f64 {
        let y = x.abs();
        if y < self.r {
            let y2 = y * y;
            y2 * (self.b + self.c * y2)
        } else {
            self.outer.eval(y)[0] - self.shift
        }
    }

    fn d1(&self, x: f64) -> f64 {
        let y = x.abs();
        let v = if y < self.r {
            y * (2.0 * self.b + 4.0 * self.c * y * y)
        } else {
            self.outer.eval(y)[1]
        };
        v.copysign(x)
    }

    fn d2(&self, x: f64) -> f64 {
        let y = x.abs();
        if y < self.r {
            2.0 * self.b + 12.0 * self.c * y * y
        } else {
            self.outer.eval(y)[2]
        }
    }

    fn primitive(&self, x: f64) -> f64 {
        let y = x.abs();
        let v = if y < self.r {
            y.powi(3) * (self.b / 3.0 + self.c * y * y / 5.0)
        } else {
            self.p_at_r + self.outer_integral(y)
        };
        v.copysign(x)
    }

    fn ln_primitive(&self, x: f64) -> f64 {
        match self.outer {
            Outer::Exp(p) if x.abs().powf(p) > 600.0 => {
                let y = x.abs();
                let yp = y.powf(p);
                let scaled = self.exp_scaled_integral(p, y) + self.p_at_r * (-yp).exp();
                yp + scaled.ln()
            }
            _ => self.primitive(x).abs().ln(),
        }
    }

    fn scaled_derivs(&self, x: f64, ln_scale: f64) -> [f64; 3] {
        let y = x.abs();
        match self.outer {
            Outer::Exp(p) if y >= self.r => {
                let e = (y.powf(p) + ln_scale).exp();
                let (i1, i2) = exp_inner(p, y);
                let base = (1.0 + self.shift) * ln_scale.exp();
                [e - base, (i1 * e).copysign(x), i2 * e]
            }
            _ => {
                let f = ln_scale.exp();
                [f * self.value(x), f * self.d1(x), f * self.d2(x)]
            }
        }
    }

    fn flat_interval(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn growth(&self) -> GrowthClass {
        match self.outer {
            Outer::Power(_) => GrowthClass::Polynomial,
            Outer::Exp(_) => GrowthClass::Exponential,
        }
    }

    fn curvature_peaks(&self) -> Vec<f64> {
        if self.r > 0.0 {
            vec![0.0]
        } else {
            Vec::new()
        }
    }

    fn closed_inverse(&self, y: f64) -> Option<f64> {
        match self.outer {
            Outer::Power(p) if self.r == 0.0 => {
                Some(((p + 1.0) * y.abs()).powf(1.0 / (p + 1.0)).copysign(y))
            }
            _ => {
                let _ = self.exponent();
                None
            }
        }
    }
}

/// Smoothed `2 [|x| - 1]_+`: on `t = |x| - 1 in [-r, r]` the ramp `t + |t|`
/// becomes `t + r e(t/r)` with the matching quartic `e(u) = 3/8 + 3u^2/4 - u^4/8`.
#[derive(Debug)]
struct Gap {
    r: f64,
}

impl Gap {
    /// `int_{-r}^t (s + r e(s/r)) ds` for `|t| <= r`.
    fn band_integral(&self, t: f64) -> f64 {
        let r = self.r;
        let big_e = |u: f64| 3.0 * u / 8.0 + u.powi(3) / 4.0 - u.powi(5) / 40.0;
        0.5 * (t * t - r * r) + r * r * (big_e(t / r) - big_e(-1.0))
    }
}

impl Shape for Gap {
    fn value(&self, x: f64) -> f64 {
        let t = x.abs() - 1.0;
        if t <= -self.r {
            0.0
        } else if t >= self.r {
            2.0 * t
        } else {
            let u = t / self.r;
            t + self.r * (0.375 + 0.75 * u * u - 0.125 * u.powi(4))
        }
    }

    fn d1(&self, x: f64) -> f64 {
        let t = x.abs() - 1.0;
        let v = if t <= -self.r {
            0.0
        } else if t >= self.r {
            2.0
        } else {
            let u = t / self.r;
            1.0 + 1.5 * u - 0.5 * u.powi(3)
        };
        v.copysign(x)
    }

    fn d2(&self, x: f64) -> f64 {
        let t = x.abs() - 1.0;
        if t <= -self.r || t >= self.r {
            0.0
        } else {
            let u = t / self.r;
            (1.5 - 1.5 * u * u) / self.r
        }
    }

    fn primitive(&self, x: f64) -> f64 {
        let t = x.abs() - 1.0;
        let v = if t <= -self.r {
            0.0
        } else if t >= self.r {
            t * t + 0.2 * self.r * self.r
        } else {
            self.band_integral(t)
        };
        v.copysign(x)
    }

    fn flat_interval(&self) -> (f64, f64) {
        (-(1.0 - self.r), 1.0 - self.r)
    }

    fn growth(&self) -> GrowthClass {
        GrowthClass::Piecewise
    }

    fn curvature_peaks(&self) -> Vec<f64> {
        if self.r > 0.0 {
            vec![-1.0, 1.0]
        } else {
            Vec::new()
        }
    }

    fn closed_inverse(&self, y: f64) -> Option<f64> {
        let edge = 0.2 * self.r * self.r + self.r * self.r;
        if y.abs() >= edge {
            Some((1.0 + (y.abs() - 0.2 * self.r * self.r).sqrt()).copysign(y))
        } else {
            None
        }
    }
}

/// The standard mollifier on `[-1, 1]` and its repeated integrals.
struct UnitBump {
    norm: f64,
    second_moment: f64,
}

fn unit_bump() -> &'static UnitBump {
    static B: OnceLock<UnitBump> = OnceLock::new();
    B.get_or_init(|| {
        let raw = |t: f64| bump_raw(t);
        let mass = quad::adaptive(raw, -1.0, 1.0, 0.0, 1e-15).value;
        let m2 = quad::adaptive(|t: f64| t * t * bump_raw(t), -1.0, 1.0, 0.0, 1e-15).value;
        UnitBump { norm: 1.0 / mass, second_moment: m2 / mass }
    })
}

fn bump_raw(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

impl UnitBump {
    fn density(&self, u: f64) -> f64 {
        self.norm * bump_raw(u)
    }

    /// `int_{-1}^u (u - t)^k / k! phi(t) dt` for `k = 0, 1, 2`.
    fn repeated(&self, u: f64, k: usize) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return match k {
                0 => 1.0,
                1 => u,
                _ => 0.5 * (u * u + self.second_moment),
            };
        }
        let f = |t: f64| {
            let w = match k {
                0 => 1.0,
                1 => u - t,
                _ => 0.5 * (u - t) * (u - t),
            };
            w * self.density(t)
        };
        quad::adaptive(f, -1.0, u, 1e-17, 1e-14).value
    }
}

/// Convex potential whose curvature is a train of mollifiers of widths `e^{-k}` at `+-k`.
#[derive(Debug)]
struct MollifierTrain {
    k_max: usize,
}

impl MollifierTrain {
    fn sum<F: Fn(f64, f64) -> f64>(&self, y: f64, f: F) -> f64 {
        let mut acc = 0.0;
        for k in 1..=self.k_max {
            let delta = (-(k as f64)).exp();
            let s = y - k as f64;
            if s <= -delta {
                break;
            }
            acc += f(s, delta);
        }
        acc
    }
}

impl Shape for MollifierTrain {
    fn value(&self, x: f64) -> f64 {
        let b = unit_bump();
        self.sum(x.abs(), |s, d| if s >= d { s } else { d * b.repeated(s / d, 1) })
    }

    fn d1(&self, x: f64) -> f64 {
        let b = unit_bump();
        self.sum(x.abs(), |s, d| if s >= d { 1.0 } else { b.repeated(s / d, 0) }).copysign(x)
    }

    fn d2(&self, x: f64) -> f64 {
        let b = unit_bump();
        self.sum(x.abs(), |s, d| if s >= d { 0.0 } else { b.density(s / d) / d })
    }

    fn primitive(&self, x: f64) -> f64 {
        let b = unit_bump();
        self.sum(x.abs(), |s, d| {
            if s >= d {
                0.5 * (s * s + d * d * b.second_moment)
            } else {
                d * d * b.repeated(s / d, 2)
            }
        })
        .copysign(x)
    }

    fn flat_interval(&self) -> (f64, f64) {
        let q = 1.0 - (-1.0f64).exp();
        (-q, q)
    }

    fn growth(&self) -> GrowthClass {
        GrowthClass::Pathological
    }

    fn curvature_peaks(&self) -> Vec<f64> {
        (1..=self.k_max).flat_map(|k| [-(k as f64), k as f64]).collect()
    }
}

/// Piecewise-cubic Hermite interpolant of tabulated `(Q, Q')`, with slopes
/// clipped per interval so every cubic piece is convex.
#[derive(Debug)]
struct Tabulated {
    x: Vec<f64>,
    y: Vec<f64>,
    /// per-interval (left slope, right slope) after projection
    slopes: Vec<(f64, f64)>,
    /// `int_{x_0}^{x_i} Q`
    cumulative: Vec<f64>,
    offset: f64,
    flat: (f64, f64),
}

impl Tabulated {
    fn new(x: &[f64], q: &[f64], dq: &[f64], d2q: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || q.len() != n || dq.len() != n || d2q.len() != n {
            return Err(Error::Potential(format!(
                "tabulated potential needs >= 2 nodes and equal lengths (x {n}, q {}, dq {}, d2q {})",
                q.len(),
                dq.len(),
                d2q.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Potential("tabulated nodes must be strictly increasing".into()));
        }
        if !(x[0] <= 0.0 && x[n - 1] >= 0.0) {
            return Err(Error::Potential("tabulated range must contain 0".into()));
        }
        let scale = dq.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-8 * scale;
        for i in 0..n {
            if d2q[i] < -tol * d2q.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
                return Err(Error::Potential(format!(
                    "convexity violated at sample {i} (x = {}): Q'' = {}",
                    x[i], d2q[i]
                )));
            }
        }
        let mut slopes = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = x[i + 1] - x[i];
            let s = (q[i + 1] - q[i]) / h;
            let (m0, m1) = (dq[i], dq[i + 1]);
            if m0 > s + tol || s > m1 + tol {
                return Err(Error::Potential(format!(
                    "convexity violated at sample {} (x = {}): slopes {m0}, {m1} do not bracket secant {s}",
                    i, x[i]
                )));
            }
            // a = s - m0 >= 0, b = m1 - s >= 0; a convex cubic needs a/2 <= b <= 2a.
            let mut a = (s - m0).max(0.0);
            let mut b = (m1 - s).max(0.0);
            if b > 2.0 * a {
                b = 2.0 * a;
            }
            if a > 2.0 * b {
                a = 2.0 * b;
            }
            slopes.push((s - a, s + b));
        }
        let mut t = Tabulated {
            x: x.to_vec(),
            y: q.to_vec(),
            slopes,
            cumulative: vec![0.0; n],
            offset: 0.0,
            flat: (0.0, 0.0),
        };
        for i in 0..n - 1 {
            let h = t.x[i + 1] - t.x[i];
            t.cumulative[i + 1] = t.cumulative[i] + t.piece_integral(i, h);
        }
        t.offset = t.integral_from_start(0.0);
        let zero_tol = 1e-14 * q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let zeros: Vec<f64> = (0..n).filter(|&i| q[i].abs() <= zero_tol).map(|i| x[i]).collect();
        if let (Some(&lo), Some(&hi)) = (zeros.first(), zeros.last()) {
            if lo <= 0.0 && hi >= 0.0 {
                t.flat = (lo, hi);
            }
        }
        Ok(t)
    }

    fn locate(&self, x: f64) -> usize {
        match self.x.partition_point(|&v| v <= x) {
            0 => 0,
            k => (k - 1).min(self.x.len() - 2),
        }
    }

    /// Hermite basis evaluation on interval `i` at local `t in [0, 1]`; `order` 0..=2.
    fn hermite(&self, i: usize, x: f64, order: usize) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = self.slopes[i];
        match order {
            0 => {
                let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
                let h10 = t.powi(3) - 2.0 * t * t + t;
                let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
                let h11 = t.powi(3) - t * t;
                h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
            }
            1 => {
                let h00 = 6.0 * t * t - 6.0 * t;
                let h10 = 3.0 * t * t - 4.0 * t + 1.0;
                let h01 = -6.0 * t * t + 6.0 * t;
                let h11 = 3.0 * t * t - 2.0 * t;
                (h00 * y0 + h01 * y1) / h + h10 * m0 + h11 * m1
            }
            _ => {
                let h00 = 12.0 * t - 6.0;
                let h10 = 6.0 * t - 4.0;
                let h01 = -12.0 * t + 6.0;
                let h11 = 6.0 * t - 2.0;
                ((h00 * y0 + h01 * y1) / h + h10 * m0 + h11 * m1) / h
            }
        }
    }

    /// `int_{x_i}^{x_i + len} Q` on interval `i`.
    fn piece_integral(&self, i: usize, len: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let t = len / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = self.slopes[i];
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let g00 = t4 / 2.0 - t3 + t;
        let g10 = t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0;
        let g01 = -t4 / 2.0 + t3;
        let g11 = t4 / 4.0 - t3 / 3.0;
        h * (g00 * y0 + g10 * h * m0 + g01 * y1 + g11 * h * m1)
    }

    fn integral_from_start(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x < self.x[0] {
            let d = x - self.x[0];
            let m = self.slopes[0].0;
            return self.y[0] * d + 0.5 * m * d * d;
        }
        if x > self.x[n - 1] {
            let d = x - self.x[n - 1];
            let m = self.slopes[n - 2].1;
            return self.cumulative[n - 1] + self.y[n - 1] * d + 0.5 * m * d * d;
        }
        let i = self.locate(x);
        self.cumulative[i] + self.piece_integral(i, x - self.x[i])
    }
}

impl Shape for Tabulated {
    fn value(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x < self.x[0] {
            self.y[0] + self.slopes[0].0 * (x - self.x[0])
        } else if x > self.x[n - 1] {
            self.y[n - 1] + self.slopes[n - 2].1 * (x - self.x[n - 1])
        } else {
            self.hermite(self.locate(x), x, 0)
        }
    }

    fn d1(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x < self.x[0] {
            self.slopes[0].0
        } else if x > self.x[n - 1] {
            self.slopes[n - 2].1
        } else {
            self.hermite(self.locate(x), x, 1)
        }
    }

    fn d2(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] {
            0.0
        } else {
            self.hermite(self.locate(x), x, 2).max(0.0)
        }
    }

    fn primitive(&self, x: f64) -> f64 {
        self.integral_from_start(x) - self.offset
    }

    fn flat_interval(&self) -> (f64, f64) {
        self.flat
    }

    fn growth(&self) -> GrowthClass {
        GrowthClass::Piecewise
    }
}

#[derive(Debug)]
struct Shifted {
    base: Arc<dyn Shape>,
    dx: f64,
    dy: f64,
}

impl Shape for Shifted {
    fn value(&self, x: f64) -> f64 {
        self.base.value(x - self.dx) + self.dy
    }

    fn d1(&self, x: f64) -> f64 {
        self.base.d1(x - self.dx)
    }

    fn d2(&self, x: f64) -> f64 {
        self.base.d2(x - self.dx)
    }

    fn primitive(&self, x: f64) -> f64 {
        self.base.primitive(x - self.dx) - self.base.primitive(-self.dx) + self.dy * x
    }

    fn flat_interval(&self) -> (f64, f64) {
        let (a, b) = self.base.flat_interval();
        (a + self.dx, b + self.dx)
    }

    fn growth(&self) -> GrowthClass {
        self.base.growth()
    }

    fn curvature_peaks(&self) -> Vec<f64> {
        self.base.curvature_peaks().into_iter().map(|p| p + self.dx).collect()
    }
}

#[derive(Debug)]
struct Reflected {
    base: Arc<dyn Shape>,
}

impl Shape for Reflected {
    fn value(&self, x: f64) -> f64 {
        self.base.value(-x)
    }

    fn d1(&self, x: f64) -> f64 {
        -self.base.d1(-x)
    }

    fn d2(&self, x: f64) -> f64 {
        self.base.d2(-x)
    }

    fn primitive(&self, x: f64) -> f64 {
        -self.base.primitive(-x)
    }

    fn ln_primitive(&self, x: f64) -> f64 {
        self.base.ln_primitive(-x)
    }

    fn scaled_derivs(&self, y: f64, ln_scale: f64) -> [f64; 3] {
        let [v, d1, d2] = self.base.scaled_derivs(-y, ln_scale);
        [v, -d1, d2]
    }

    fn flat_interval(&self) -> (f64, f64) {
        let (a, b) = self.base.flat_interval();
        (-b, -a)
    }

    fn growth(&self) -> GrowthClass {
        self.base.growth()
    }

    fn curvature_peaks(&self) -> Vec<f64> {
        self.base.curvature_peaks().into_iter().map(|p| -p).collect()
    }

    fn closed_inverse(&self, y: f64) -> Option<f64> {
        self.base.closed_inverse(-y).map(|x| -x)
    }
}

/// The potentials exercised by the catalog-wide checks.
pub fn catalog() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::Power { p: 2.0, reg_radius: DEFAULT_REG_RADIUS },
        PotentialSpec::Power { p: 1.0, reg_radius: DEFAULT_REG_RADIUS },
        PotentialSpec::Power { p: 4.0, reg_radius: DEFAULT_REG_RADIUS },
        PotentialSpec::ExpPower { p: 2.0, reg_radius: DEFAULT_REG_RADIUS },
        PotentialSpec::ExpPower { p: 1.0, reg_radius: DEFAULT_REG_RADIUS },
        PotentialSpec::Gap { reg_radius: DEFAULT_REG_RADIUS },
        PotentialSpec::Pathological { k_max: DEFAULT_K_MAX },
    ]
}
