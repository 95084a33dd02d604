//! Theorem-shaped checks relating the discrete and continuum minimizers.
//!
//! Constants in the asymptotic bounds are never asserted. Instead each
//! instance records the measured ratio of a difference to its predicted
//! scale, and sweeps assert that these ratios stay within a fixed spread.

use serde::Serialize;

use crate::continuum::{self, ContinuumOptions, ContinuumReport, GridDensity};
use crate::discrete::{self, NewtonOptions, ParticleConfig, SolveReport};
use crate::error::{Error, Result};
use crate::integrals;
use crate::potentials::ConfiningPotential;
use crate::scaling::{make_frame, ScaleFrame};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScaleConstants {
    /// `||Q_alpha''||` on the support of `rhobar`
    pub q2_sup: f64,
    /// `q_alpha = q2_sup + 1`
    pub q_alpha: f64,
    /// `min{(alpha/n) log((n/alpha)(1 + ||Q_alpha''||)), 1}`
    pub a_scale: f64,
    /// `(beta alpha^3 / n) ||Q''||` on the raw support, evaluated from `Q''` directly
    pub raw_curvature: f64,
    /// `(n^2/alpha) min{(alpha/n) log((n/alpha)(1 + raw_curvature)), 1}`
    pub b_scale: f64,
}

pub fn scale_constants(frame: &ScaleFrame, rho: &GridDensity) -> ScaleConstants {
    let (y1, y2) = rho.support();
    let q2_sup = continuum::q2_sup_on(frame, y1, y2);
    let n = frame.n as f64;
    let alpha = frame.alpha;
    let a_scale = (alpha / n * (n / alpha * (1.0 + q2_sup)).ln()).min(1.0);

    // raw frame: beta alpha^3 / n Q''(a) for a in alpha [y1, y2]
    let q = frame.potential();
    let ln_c = frame.ln_beta + 3.0 * alpha.ln() - n.ln();
    let (a1, a2) = (alpha * y1, alpha * y2);
    let samples = 4096;
    let mut raw = (0..=samples)
        .map(|i| a1 + (a2 - a1) * i as f64 / samples as f64)
        .chain(q.curvature_peaks().into_iter().filter(|p| *p >= a1 && *p <= a2))
        .map(|a| q.scaled_derivs(a, ln_c)[2].abs())
        .fold(0.0f64, f64::max);
    if !raw.is_finite() {
        raw = f64::MAX;
    }
    let b_scale = n * n / alpha * (alpha / n * (n / alpha * (1.0 + raw)).ln()).min(1.0);
    ScaleConstants { q2_sup, q_alpha: q2_sup + 1.0, a_scale, raw_curvature: raw, b_scale }
}

/// Both minimizers for one `(n, alpha)`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub frame: ScaleFrame,
    pub xbar: ParticleConfig,
    pub discrete: SolveReport,
    pub rho: GridDensity,
    pub continuum: ContinuumReport,
}

/// Solves the continuum problem, then the discrete one from its quantiles.
pub fn solve_instance(frame: &ScaleFrame, copts: &ContinuumOptions, nopts: NewtonOptions) -> Result<Instance> {
    let (rho, crep) = continuum::minimize_continuum(frame, copts)?;
    solve_discrete_given(frame, rho, crep, nopts)
}

/// The discrete half of [`solve_instance`] for an already solved continuum problem.
pub fn solve_discrete_given(
    frame: &ScaleFrame,
    rho: GridDensity,
    crep: ContinuumReport,
    nopts: NewtonOptions,
) -> Result<Instance> {
    let init = quantile_init(&rho, frame.n);
    let start = if init.windows(2).all(|w| w[1] > w[0]) { Some(init) } else { None };
    let (xbar, drep) = discrete::minimize(frame, start.as_deref(), nopts)?;
    Ok(Instance { frame: frame.clone(), xbar, discrete: drep, rho, continuum: crep })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    /// sign test passes if `F_n - F <= num_tol_scale max(1, |F|)`
    pub num_tol_scale: f64,
    /// residual level required before any theorem is checked
    pub residual_scale: f64,
    /// allowed `max/min` of a ratio across a sweep
    pub ratio_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { num_tol_scale: 1e-4, residual_scale: 1e-5, ratio_spread: 10.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub ln_beta: f64,
    pub q_alpha: f64,
    pub a_scale: f64,
    pub b_scale: f64,
    pub e_disc: f64,
    pub e_cont: f64,
    pub f_disc: f64,
    pub f_cont: f64,
    /// `F_n^D = gamma F_n^alpha`
    pub fd: f64,
    /// `F_n^C = gamma F^alpha`
    pub fc: f64,
    /// `E_n^alpha(xbar) - E^alpha(rhobar)`
    pub energy_diff: f64,
    /// `F_n^alpha - F^alpha`
    pub potential_diff: f64,
    /// `|energy_diff| / A_scale`
    pub ratio_e: f64,
    /// `-potential_diff / sqrt(A_scale)`
    pub ratio_f: f64,
    /// `-potential_diff / A_scale`, the conjectured sharper scaling
    pub ratio_f_linear: f64,
    /// `I_n^D - I_n^C = gamma energy_diff`
    pub raw_energy_diff: f64,
    /// `F_n^D - F_n^C`
    pub raw_potential_diff: f64,
    /// `|raw_energy_diff| / B_scale`
    pub ratio_b: f64,
    /// `-raw_potential_diff / sqrt(n^2/alpha B_scale)`
    pub ratio_b_f: f64,
    /// `sqrt(P^{-1}(n) log(n) / n)`
    pub improvement_factor: f64,
    pub num_tol: f64,
    pub pass_sign: bool,
    pub pass_raw_sign: bool,
    /// Set by [`sweep_stability`]; `None` for a lone instance.
    pub pass_ratio: Option<bool>,
}

/// Evaluates every inequality on one solved instance.
///
/// Refuses unless the discrete gradient and the continuum Euler–Lagrange
/// residual are below `residual_scale`.
pub fn verify_theorems(inst: &Instance, tol: &Tolerances) -> Result<BoundsReport> {
    let d = &inst.discrete;
    let c = &inst.continuum;
    let gtol = tol.residual_scale * d.energy.abs().max(1.0);
    if !(d.grad_norm <= gtol) {
        return Err(Error::Unconverged(format!("discrete gradient {:e} above {gtol:e}", d.grad_norm)));
    }
    if !c.el.passes(tol.residual_scale) {
        return Err(Error::Unconverged(format!("continuum EL residual too large: {:?}", c.el)));
    }
    let frame = &inst.frame;
    let sc = scale_constants(frame, &inst.rho);
    let n = frame.n as f64;
    let energy_diff = d.energy - c.energy;
    let potential_diff = d.f_alpha - c.f_alpha;
    let num_tol = tol.num_tol_scale * c.f_alpha.abs().max(1.0);
    let fd = frame.gamma * d.f_alpha;
    let fc = frame.gamma * c.f_alpha;
    let raw_energy_diff = frame.gamma * energy_diff;
    Ok(BoundsReport {
        n: frame.n,
        alpha: frame.alpha,
        beta: frame.beta,
        ln_beta: frame.ln_beta,
        q_alpha: sc.q_alpha,
        a_scale: sc.a_scale,
        b_scale: sc.b_scale,
        e_disc: d.energy,
        e_cont: c.energy,
        f_disc: d.f_alpha,
        f_cont: c.f_alpha,
        fd,
        fc,
        energy_diff,
        potential_diff,
        ratio_e: energy_diff.abs() / sc.a_scale,
        ratio_f: -potential_diff / sc.a_scale.sqrt(),
        ratio_f_linear: -potential_diff / sc.a_scale,
        raw_energy_diff,
        raw_potential_diff: fd - fc,
        ratio_b: raw_energy_diff.abs() / sc.b_scale,
        ratio_b_f: -(fd - fc) / (n * n / frame.alpha * sc.b_scale).sqrt(),
        improvement_factor: improvement_factor(n, frame.potential()).unwrap_or(f64::NAN),
        num_tol,
        pass_sign: potential_diff <= num_tol,
        pass_raw_sign: fd - fc <= frame.gamma * num_tol,
        pass_ratio: None,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepStability {
    pub ratio_e_spread: f64,
    pub ratio_f_spread: f64,
    pub pass_e: bool,
    pub pass_f: bool,
}

/// `max/min` of `ratio_e` and `ratio_f` over a sweep at fixed potential;
/// marks every report's `pass_ratio`.
pub fn sweep_stability(reports: &mut [BoundsReport], tol: &Tolerances) -> SweepStability {
    let spread = |vals: Vec<f64>| {
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    let se = spread(reports.iter().map(|r| r.ratio_e).collect());
    let sf = spread(reports.iter().map(|r| r.ratio_f).collect());
    let out = SweepStability {
        ratio_e_spread: se,
        ratio_f_spread: sf,
        pass_e: se <= tol.ratio_spread,
        pass_f: sf <= tol.ratio_spread,
    };
    let ok = out.pass_e && out.pass_f;
    for r in reports.iter_mut() {
        r.pass_ratio = Some(ok);
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RobinBracket {
    pub n: usize,
    pub fd: f64,
    pub fc: f64,
    /// `-F_n^C / (n - 1)`
    pub lower: f64,
    /// `-F_n^D / n`
    pub upper: f64,
    pub ordered: bool,
}

impl RobinBracket {
    pub fn new(n: usize, fd: f64, fc: f64) -> Self {
        let nf = n as f64;
        let lower = -fc / (nf - 1.0);
        let upper = -fd / nf;
        Self { n, fd, fc, lower, upper, ordered: lower <= upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `F_n^D / (n(n-1)) + (F_n^C - F_n^D)/(n-1)`, which equals the width.
    pub fn width_decomposition(&self) -> f64 {
        let nf = self.n as f64;
        self.fd / (nf * (nf - 1.0)) + (self.fc - self.fd) / (nf - 1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobinReport {
    pub bracket: RobinBracket,
    pub alpha: f64,
    pub beta: f64,
    pub b_scale: f64,
    /// `sqrt(n^2/alpha B_scale)`
    pub new_magnitude: f64,
    /// `(n+1)/(n-1) F_n^D + (3 + log 2) n^2/(n-1)`
    pub old_magnitude: f64,
    pub magnitude_ratio: f64,
}

/// Lower-bound magnitudes on `F_n^D - F_n^C`: the earlier estimate and the new one.
pub fn prior_bound_comparison(n: usize, alpha: f64, fd: f64, b_scale: f64) -> (f64, f64) {
    let nf = n as f64;
    let old = (nf + 1.0) / (nf - 1.0) * fd + (3.0 + std::f64::consts::LN_2) * nf * nf / (nf - 1.0);
    let new = (nf * nf / alpha * b_scale).sqrt();
    (new, old)
}

/// Solves both problems at `(n, beta)` and brackets `log E_n^min`.
pub fn robin_bracket(
    n: usize,
    beta: f64,
    q: &ConfiningPotential,
    copts: &ContinuumOptions,
    nopts: NewtonOptions,
) -> Result<(Instance, RobinReport)> {
    let frame = make_frame(n, beta, q)?;
    let inst = solve_instance(&frame, copts, nopts)?;
    let report = robin_report(&inst);
    Ok((inst, report))
}

pub fn robin_report(inst: &Instance) -> RobinReport {
    let frame = &inst.frame;
    let fd = frame.gamma * inst.discrete.f_alpha;
    let fc = frame.gamma * inst.continuum.f_alpha;
    let bracket = RobinBracket::new(frame.n, fd, fc);
    let sc = scale_constants(frame, &inst.rho);
    let (new, old) = prior_bound_comparison(frame.n, frame.alpha, fd, sc.b_scale);
    RobinReport {
        bracket,
        alpha: frame.alpha,
        beta: frame.beta,
        b_scale: sc.b_scale,
        new_magnitude: new,
        old_magnitude: old,
        magnitude_ratio: new / old,
    }
}

/// `sqrt(P^{-1}(n) log(n) / n)`, the gain over the earlier bound at `beta = 1`.
pub fn improvement_factor(n: f64, q: &ConfiningPotential) -> Result<f64> {
    if !(n > 1.0) {
        return Err(Error::Domain(format!("improvement factor needs n > 1, got {n}")));
    }
    Ok((q.inverse_primitive(n)? * n.ln() / n).sqrt())
}

/// `n + 1` points `y1 = x_0 < ... < x_n = y2` with mass `1/n` between neighbors.
///
/// The CDF of a piecewise-constant density is piecewise linear; inside
/// zero-density stretches the leftmost preimage is taken.
pub fn quantile_points(rho: &GridDensity, n: usize) -> Vec<f64> {
    let (y1, y2) = rho.support();
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(y1);
    let targets: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
    pts.extend(inverse_cdf(rho, &targets));
    pts.push(y2);
    pts
}

/// Midpoint quantiles `(i - 1/2)/n`, the natural start for the discrete solver.
pub fn quantile_init(rho: &GridDensity, n: usize) -> Vec<f64> {
    let targets: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    inverse_cdf(rho, &targets)
}

fn inverse_cdf(rho: &GridDensity, targets: &[f64]) -> Vec<f64> {
    let h = rho.h();
    let masses = rho.masses();
    let mut out = Vec::with_capacity(targets.len());
    let mut cell = 0;
    let mut below = 0.0;
    for &t in targets {
        while cell < masses.len() && (masses[cell] == 0.0 || below + masses[cell] < t) {
            below += masses[cell];
            cell += 1;
        }
        if cell == masses.len() {
            out.push(rho.grid.x_hi);
            continue;
        }
        let frac = ((t - below) / masses[cell]).clamp(0.0, 1.0);
        out.push(rho.grid.left(cell) + frac * h);
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagonalEnergies {
    /// `D_n = (1/n^2) sum K_alpha(l_i)`
    pub d_n: f64,
    /// `D(phi) = 1/(2n^2) sum (1/l_i^2) int int_{(0,l_i)^2} K_alpha`
    pub d_phi: f64,
    /// `(alpha/n) log(q_alpha n / alpha)`
    pub scale: f64,
    pub min_gap: f64,
}

pub fn diagonal_energies(xhat: &[f64], frame: &ScaleFrame, q_alpha: f64) -> DiagonalEnergies {
    let n = xhat.len() - 1;
    let nf = n as f64;
    let alpha = frame.alpha;
    let mut d_n = 0.0;
    let mut d_phi = 0.0;
    let mut min_gap = f64::INFINITY;
    for w in xhat.windows(2) {
        let l = w[1] - w[0];
        min_gap = min_gap.min(l);
        d_n += frame.k_alpha(l);
        d_phi += integrals::cell_self_interaction(alpha, l);
    }
    DiagonalEnergies {
        d_n: d_n / (nf * nf),
        d_phi: d_phi / (2.0 * nf * nf),
        scale: alpha / nf * (q_alpha * nf / alpha).ln(),
        min_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::GridSpec;

    #[test]
    fn uniform_quantiles() {
        let grid = GridSpec { x_lo: -1.0, x_hi: 2.0, m: 300 };
        let rho = GridDensity::from_fn(grid, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let q = quantile_points(&rho, 4);
        for (a, b) in q.iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{q:?}");
        }
    }

    #[test]
    fn plateau_takes_leftmost_point() {
        let grid = GridSpec { x_lo: 0.0, x_hi: 4.0, m: 4 };
        let rho = GridDensity::new(grid, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let q = quantile_points(&rho, 2);
        assert_eq!(q, vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn bracket_width_decomposes() {
        let b = RobinBracket::new(10, 120.0, 130.0);
        assert!((b.width() - b.width_decomposition()).abs() < 1e-12);
    }
}
