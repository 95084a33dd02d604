//! The change of frame `(n, beta) <-> (n, alpha)`.
//!
//! `alpha = P^{-1}(n / beta)` is the length scale of the particle cloud and
//! `gamma = 2 n^2 / alpha` normalizes energies to order one. In the rescaled
//! frame the kernel is `K_alpha(x) = alpha K(alpha x)` and the confinement is
//! `Q_alpha(x) = alpha Q(alpha x) / P(alpha)`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::potentials::kernel;
use crate::potentials::{ConfiningPotential, PotentialSpec};

#[derive(Debug, Clone)]
pub struct ScaleFrame {
    pub n: usize,
    /// May underflow to zero for fast-growing `Q`; `ln_beta` stays exact.
    pub beta: f64,
    pub ln_beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    potential: ConfiningPotential,
    /// `ln(alpha / P(alpha))`
    ln_q_scale: f64,
}

impl Serialize for ScaleFrame {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            n: usize,
            beta: f64,
            ln_beta: f64,
            alpha: f64,
            gamma: f64,
            potential: &'a PotentialSpec,
        }
        Repr {
            n: self.n,
            beta: self.beta,
            ln_beta: self.ln_beta,
            alpha: self.alpha,
            gamma: self.gamma,
            potential: self.potential.spec(),
        }
        .serialize(s)
    }
}

/// `alpha = P^{-1}(n / beta)`, `gamma = 2 n^2 / alpha`.
pub fn make_frame(n: usize, beta: f64, q: &ConfiningPotential) -> Result<ScaleFrame> {
    if n < 2 {
        return Err(Error::Frame(format!("need n >= 2 particles, got {n}")));
    }
    let y = n as f64 / beta;
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Frame(format!("n / beta must be positive and finite, got {y}")));
    }
    let alpha = q.inverse_primitive(y)?;
    let frame = build(n, alpha, beta.ln(), q)?;
    // recompute beta from alpha only through ln P, so both routes agree
    Ok(ScaleFrame { beta, ln_beta: beta.ln(), ..frame })
}

/// The frame with prescribed `alpha`; `beta = n / P(alpha)`.
pub fn frame_from_alpha(n: usize, alpha: f64, q: &ConfiningPotential) -> Result<ScaleFrame> {
    if n < 2 {
        return Err(Error::Frame(format!("need n >= 2 particles, got {n}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Frame(format!("alpha must be positive and finite, got {alpha}")));
    }
    let ln_beta = (n as f64).ln() - q.ln_primitive(alpha);
    build(n, alpha, ln_beta, q)
}

fn build(n: usize, alpha: f64, ln_beta: f64, q: &ConfiningPotential) -> Result<ScaleFrame> {
    let (_, q2) = q.flat_interval();
    if !(alpha > q2) {
        return Err(Error::Frame(format!("alpha = {alpha} must exceed q2 = {q2}")));
    }
    let ln_p = q.ln_primitive(alpha);
    if !ln_p.is_finite() {
        return Err(Error::Frame(format!("P(alpha) is not positive at alpha = {alpha}")));
    }
    // orientation: P^-1(y) >= -P^-1(-y)  <=>  |P(-alpha)| >= P(alpha)
    let ln_p_left = q.ln_primitive(-alpha);
    if ln_p_left < ln_p - 1e-10 * ln_p.abs().max(1.0) {
        return Err(Error::Frame(format!(
            "orientation fails at alpha = {alpha} (|P(-alpha)| < P(alpha)); use the reflected potential"
        )));
    }
    Ok(ScaleFrame {
        n,
        beta: ln_beta.exp(),
        ln_beta,
        alpha,
        gamma: 2.0 * (n as f64).powi(2) / alpha,
        potential: q.clone(),
        ln_q_scale: alpha.ln() - ln_p,
    })
}

impl ScaleFrame {
    pub fn potential(&self) -> &ConfiningPotential {
        &self.potential
    }

    /// `Q_alpha(x)`.
    pub fn q_alpha(&self, x: f64) -> f64 {
        self.potential.scaled_derivs(self.alpha * x, self.ln_q_scale)[0]
    }

    /// `Q_alpha'(x)`.
    pub fn q_alpha_d1(&self, x: f64) -> f64 {
        self.alpha * self.potential.scaled_derivs(self.alpha * x, self.ln_q_scale)[1]
    }

    /// `Q_alpha''(x) = alpha^3 / P(alpha) Q''(alpha x)`.
    pub fn q_alpha_d2(&self, x: f64) -> f64 {
        self.alpha * self.alpha * self.potential.scaled_derivs(self.alpha * x, self.ln_q_scale)[2]
    }

    /// `(Q_alpha, Q_alpha', Q_alpha'')` at `x`.
    pub fn q_alpha_all(&self, x: f64) -> [f64; 3] {
        let [v, d1, d2] = self.potential.scaled_derivs(self.alpha * x, self.ln_q_scale);
        [v, self.alpha * d1, self.alpha * self.alpha * d2]
    }

    /// `K_alpha(x) = alpha K(alpha x)`.
    pub fn k_alpha(&self, x: f64) -> f64 {
        self.alpha * kernel::k(self.alpha * x)
    }

    /// `beta Q(a)` in the raw frame, evaluated without forming `beta`.
    pub fn beta_q(&self, a: f64) -> f64 {
        self.potential.scaled_derivs(a, self.ln_beta)[0]
    }

    /// Whether `n / P(n) <= beta <= window * n`, the admissible range of the
    /// raw-frame theorem with its free constant set to `window`.
    pub fn in_beta_window(&self, window: f64) -> bool {
        let n = self.n as f64;
        let lower_ok = self.ln_beta >= n.ln() - self.potential.ln_primitive(n) - 1e-12;
        let upper_ok = self.ln_beta <= (window * n).ln() + 1e-12;
        lower_ok && upper_ok
    }

    /// Raw-frame quantity from its rescaled counterpart: `X^D = gamma X^alpha`.
    pub fn to_raw(&self, rescaled: f64) -> f64 {
        self.gamma * rescaled
    }
}

/// Raw energy `I_n^D(a) = n/(n-1) sum_{i != j} K(a_i - a_j) + 2 beta sum Q(a_i)`.
pub fn raw_discrete_energy(frame: &ScaleFrame, a: &[f64]) -> Result<f64> {
    let n = a.len();
    if n < 2 {
        return Err(Error::Domain("need at least two particles".into()));
    }
    let mut pair = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = a[j] - a[i];
            if d == 0.0 {
                return Err(Error::Domain(format!("particles {i} and {j} coincide")));
            }
            pair += kernel::k(d);
        }
    }
    let conf: f64 = a.iter().map(|&x| frame.beta_q(x)).sum();
    let nf = n as f64;
    Ok(2.0 * nf / (nf - 1.0) * pair + 2.0 * conf)
}

/// `(I_n^D(alpha x), gamma E_n^alpha(x))`; equal up to rounding.
pub fn rescale_energy_identity(frame: &ScaleFrame, x: &[f64]) -> Result<(f64, f64)> {
    let a: Vec<f64> = x.iter().map(|&v| frame.alpha * v).collect();
    let raw = raw_discrete_energy(frame, &a)?;
    let rescaled = crate::discrete::energy(frame, x)?;
    Ok((raw, frame.gamma * rescaled))
}
