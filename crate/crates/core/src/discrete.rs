//! Minimization of the rescaled discrete energy
//! `E_n^alpha(x) = 1/(n(n-1)) sum_{i<j} K_alpha(x_j - x_i) + 1/n sum_i Q_alpha(x_i)`
//! over ordered configurations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::kernel;
use crate::scaling::ScaleFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// `a`, the unscaled positions
    Raw,
    /// `x = a / alpha`
    Rescaled,
}

/// Strictly increasing particle positions together with their frame.
#[derive(Debug, Clone)]
pub struct ParticleConfig {
    positions: Vec<f64>,
    pub frame: ScaleFrame,
    pub space: Space,
}

impl ParticleConfig {
    pub fn new(positions: Vec<f64>, frame: ScaleFrame, space: Space) -> Result<Self> {
        check_ordered(&positions)?;
        Ok(Self { positions, frame, space })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Positions in the rescaled frame.
    pub fn rescaled(&self) -> Vec<f64> {
        match self.space {
            Space::Rescaled => self.positions.clone(),
            Space::Raw => self.positions.iter().map(|a| a / self.frame.alpha).collect(),
        }
    }

    pub fn to_raw(&self) -> ParticleConfig {
        let a = match self.space {
            Space::Raw => self.positions.clone(),
            Space::Rescaled => self.positions.iter().map(|x| x * self.frame.alpha).collect(),
        };
        ParticleConfig { positions: a, frame: self.frame.clone(), space: Space::Raw }
    }

    pub fn energy(&self) -> Result<f64> {
        energy(&self.frame, &self.rescaled())
    }
}

fn check_ordered(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("configuration has non-finite positions".into()));
    }
    for (i, w) in x.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::Domain(format!(
                "positions {i} and {} are not strictly increasing ({} >= {})",
                i + 1,
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

fn is_ordered(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite()) && x.windows(2).all(|w| w[1] > w[0])
}

/// `E_n^alpha(x)` by the direct pair sum.
pub fn energy(frame: &ScaleFrame, x: &[f64]) -> Result<f64> {
    check_ordered(x)?;
    if x.len() < 2 {
        return Err(Error::Domain("need at least two particles".into()));
    }
    Ok(energy_unchecked(frame, x))
}

fn energy_unchecked(frame: &ScaleFrame, x: &[f64]) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let alpha = frame.alpha;
    let mut pair = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in i + 1..n {
            row += kernel::k(alpha * (x[j] - x[i]));
        }
        pair += row;
    }
    let conf: f64 = x.iter().map(|&v| frame.q_alpha(v)).sum();
    alpha * pair / (nf * (nf - 1.0)) + conf / nf
}

/// Gradient and Hessian of `E_n^alpha`.
pub fn gradient_hessian(frame: &ScaleFrame, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_ordered(x)?;
    Ok(grad_hess_unchecked(frame, x))
}

/// Gradient of `E_n^alpha`.
pub fn gradient(frame: &ScaleFrame, x: &[f64]) -> Result<DVector<f64>> {
    check_ordered(x)?;
    let n = x.len();
    let nf = n as f64;
    let alpha = frame.alpha;
    let c = alpha * alpha / (nf * (nf - 1.0));
    let mut g = DVector::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let d1 = c * kernel::k1(alpha * (x[i] - x[j]));
            g[i] += d1;
            g[j] -= d1;
        }
        g[i] += frame.q_alpha_d1(x[i]) / nf;
    }
    Ok(g)
}

fn grad_hess_unchecked(frame: &ScaleFrame, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let nf = n as f64;
    let alpha = frame.alpha;
    let c1 = alpha * alpha / (nf * (nf - 1.0));
    let c2 = c1 * alpha;
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let z = alpha * (x[i] - x[j]);
            let d1 = c1 * kernel::k1(z);
            let d2 = c2 * kernel::k2(z);
            g[i] += d1;
            g[j] -= d1;
            h[(i, i)] += d2;
            h[(j, j)] += d2;
            h[(i, j)] = -d2;
            h[(j, i)] = -d2;
        }
        let [_, q1, q2] = frame.q_alpha_all(x[i]);
        g[i] += q1 / nf;
        h[(i, i)] += q2 / nf;
    }
    (g, h)
}

/// Newton solver settings; `tol_g = None` means `1e-10 max(1, |E|)`.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol_g: Option<f64>,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol_g: None, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `E_n^alpha(xbar)`
    pub energy: f64,
    /// `F_n^alpha`
    pub f_alpha: f64,
    /// `F_n^D = gamma F_n^alpha`
    pub f_raw: f64,
    /// `I_n^D(abar) = gamma E_n^alpha(xbar)`
    pub energy_raw: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub tol_g: f64,
    /// Energy after each accepted step, starting with the initial value.
    pub energy_trace: Vec<f64>,
}

/// Uniformly spaced start on `[-1, 1]`.
pub fn uniform_init(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect()
}

/// Damped Newton minimization of `E_n^alpha` from `init` (uniform if `None`).
///
/// The step is halved until the iterate stays ordered and the energy does not
/// increase; the logarithmic blow-up of `K` at zero gap keeps iterates inside
/// the ordered cone.
pub fn minimize(
    frame: &ScaleFrame,
    init: Option<&[f64]>,
    opts: NewtonOptions,
) -> Result<(ParticleConfig, SolveReport)> {
    let n = frame.n;
    let mut x = match init {
        Some(v) => {
            if v.len() != n {
                return Err(Error::Domain(format!("init has {} particles, frame has {n}", v.len())));
            }
            check_ordered(v)?;
            v.to_vec()
        }
        None => uniform_init(n),
    };
    let mut e = energy_unchecked(frame, &x);
    let mut trace = vec![e];
    let mut iterations = 0;
    let (mut g, mut h) = grad_hess_unchecked(frame, &x);
    let tol_for = |e: f64| opts.tol_g.unwrap_or(1e-10 * e.abs().max(1.0));
    loop {
        let gnorm = g.amax();
        if gnorm <= tol_for(e) {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                solver: "discrete Newton",
                iterations,
                detail: format!("gradient sup-norm {gnorm:e} above {:e}", tol_for(e)),
                best: x,
            });
        }
        iterations += 1;
        let step = newton_direction(&h, &g);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, p)| a + t * p).collect();
            if is_ordered(&trial) {
                let et = energy_unchecked(frame, &trial);
                if et < e {
                    accepted = Some((trial, et, None));
                    break;
                }
                if et <= e + 1e-13 * e.abs().max(1.0) {
                    // rounding-level change: accept only if the gradient improves
                    let (gt, ht) = grad_hess_unchecked(frame, &trial);
                    if gt.amax() < gnorm {
                        accepted = Some((trial, et, Some((gt, ht))));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, et, gh)) => {
                debug_assert!(is_ordered(&trial));
                x = trial;
                e = et;
                trace.push(e);
                let (gn, hn) = gh.unwrap_or_else(|| grad_hess_unchecked(frame, &x));
                g = gn;
                h = hn;
            }
            None => {
                return Err(Error::NonConvergence {
                    solver: "discrete Newton",
                    iterations,
                    detail: format!("line search stalled with gradient sup-norm {gnorm:e}"),
                    best: x,
                });
            }
        }
    }
    let (f_alpha, f_raw) = potential_values(frame, &x);
    let report = SolveReport {
        n,
        alpha: frame.alpha,
        beta: frame.beta,
        energy: e,
        f_alpha,
        f_raw,
        energy_raw: frame.gamma * e,
        iterations,
        grad_norm: g.amax(),
        tol_g: tol_for(e),
        energy_trace: trace,
    };
    let cfg = ParticleConfig { positions: x, frame: frame.clone(), space: Space::Rescaled };
    Ok((cfg, report))
}

/// Solves `H p = -g`, shifting `H` by `lambda I` when it is not numerically
/// positive definite (flat pieces of `Q` leave translation modes).
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let n = h.nrows();
    if let Some(ch) = h.clone().cholesky() {
        return -ch.solve(g);
    }
    let mut lambda = 1e-12 * h.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    loop {
        let shifted = h + DMatrix::identity(n, n) * lambda;
        if let Some(ch) = shifted.cholesky() {
            return -ch.solve(g);
        }
        lambda *= 10.0;
        if !lambda.is_finite() {
            // give up on curvature; a scaled gradient step still descends
            return -g.clone();
        }
    }
}

/// `(F_n^alpha, F_n^D)` with `F_n^alpha = E_n^alpha(x) - 1/(2n) sum Q_alpha(x_i)`
/// and `F_n^D = gamma F_n^alpha`.
pub fn potential_values(frame: &ScaleFrame, x: &[f64]) -> (f64, f64) {
    let nf = x.len() as f64;
    let e = energy_unchecked(frame, x);
    let conf: f64 = x.iter().map(|&v| frame.q_alpha(v)).sum();
    let f = e - conf / (2.0 * nf);
    (f, frame.gamma * f)
}
