//! The continuum problem `min E^alpha(rho)` over probability densities,
//! discretized by piecewise-constant densities on a uniform grid.

mod matrix;

pub use matrix::{assemble_kernel_matrix, KernelMatrix};

use log::debug;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::scaling::ScaleFrame;

/// Cell averages of `Q_alpha` above this are treated as infinite.
const Q_CAP: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub m: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_lo: -4.0, x_hi: 4.0, m: 2048 }
    }
}

impl GridSpec {
    pub fn h(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.m as f64
    }

    pub fn left(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.h()
    }

    fn validate(&self) -> Result<()> {
        if self.m < 2 || !(self.x_hi > self.x_lo) || !self.x_lo.is_finite() || !self.x_hi.is_finite() {
            return Err(Error::Domain(format!("invalid grid {self:?}")));
        }
        Ok(())
    }
}

/// Piecewise-constant probability density: `masses[i]` on cell `i`.
#[derive(Debug, Clone, Serialize)]
pub struct GridDensity {
    pub grid: GridSpec,
    masses: Vec<f64>,
    /// First and last cell whose density exceeds `support_eps`.
    pub support_cells: (usize, usize),
    pub support_eps: f64,
}

impl GridDensity {
    /// Normalizes `masses` to total one and detects the support.
    pub fn new(grid: GridSpec, masses: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if masses.len() != grid.m {
            return Err(Error::Domain(format!("{} masses for {} cells", masses.len(), grid.m)));
        }
        if masses.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("density has zero mass".into()));
        }
        let masses: Vec<f64> = masses.iter().map(|v| v / total).collect();
        let max = masses.iter().fold(0.0f64, |a, &b| a.max(b));
        let thresh = 1e-10 * max;
        let first = masses.iter().position(|&v| v > thresh).expect("positive mass");
        let last = masses.iter().rposition(|&v| v > thresh).expect("positive mass");
        Ok(Self { grid, masses, support_cells: (first, last), support_eps: thresh / grid.h() })
    }

    /// Density of `f` sampled at cell centers, then normalized.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: GridSpec, f: F) -> Result<Self> {
        let masses = (0..grid.m).map(|i| f(grid.center(i)).max(0.0)).collect();
        Self::new(grid, masses)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn density(&self, i: usize) -> f64 {
        self.masses[i] / self.grid.h()
    }

    pub fn densities(&self) -> Vec<f64> {
        let h = self.grid.h();
        self.masses.iter().map(|v| v / h).collect()
    }

    /// `[y1, y2]`: outer edges of the support cells.
    pub fn support(&self) -> (f64, f64) {
        (self.grid.left(self.support_cells.0), self.grid.left(self.support_cells.1 + 1))
    }

    pub fn max_density(&self) -> f64 {
        self.masses.iter().fold(0.0f64, |a, &b| a.max(b)) / self.grid.h()
    }

    /// `int_{z1}^{z2} rho`.
    pub fn mass_between(&self, z1: f64, z2: f64) -> f64 {
        let h = self.grid.h();
        self.masses
            .iter()
            .enumerate()
            .map(|(i, &mi)| {
                let lo = self.grid.left(i).max(z1);
                let hi = (self.grid.left(i) + h).min(z2);
                if hi > lo {
                    mi * (hi - lo) / h
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `rho(-x)`; requires a grid symmetric about zero.
    pub fn reflected(&self) -> Result<Self> {
        let mut m = self.masses.clone();
        m.reverse();
        Self::new(GridSpec { x_lo: -self.grid.x_hi, x_hi: -self.grid.x_lo, m: self.grid.m }, m)
    }
}

/// Cell averages of `Q_alpha` by 4-point Gauss rules.
pub fn confinement_vector(frame: &ScaleFrame, grid: &GridSpec) -> Vec<f64> {
    let h = grid.h();
    let rule = quad::gauss4();
    (0..grid.m)
        .map(|i| {
            let a = grid.left(i);
            let v = rule.integrate(a, a + h, |x| frame.q_alpha(x)) / h;
            if v.is_finite() {
                v.min(Q_CAP)
            } else {
                Q_CAP
            }
        })
        .collect()
}

/// `E^alpha(rho) = 1/2 m^T A m + q^T m`.
pub fn continuum_energy(rho: &GridDensity, frame: &ScaleFrame) -> f64 {
    let a = KernelMatrix::assemble(&rho.grid, frame.alpha);
    let q = confinement_vector(frame, &rho.grid);
    energy_parts(rho.masses(), &a, &q).0
}

/// `(energy, interaction = m^T A m, confinement = q^T m)`.
pub fn energy_parts(m: &[f64], a: &KernelMatrix, q: &[f64]) -> (f64, f64, f64) {
    let inter = a.quadratic_form(m);
    let conf: f64 = m.iter().zip(q).filter(|(mi, _)| **mi != 0.0).map(|(mi, qi)| mi * qi).sum();
    (0.5 * inter + conf, inter, conf)
}

/// `F^alpha = E^alpha(rho) - 1/2 int Q_alpha rho`.
pub fn potential_value(rho: &GridDensity, frame: &ScaleFrame) -> f64 {
    let a = KernelMatrix::assemble(&rho.grid, frame.alpha);
    let q = confinement_vector(frame, &rho.grid);
    let (e, _, conf) = energy_parts(rho.masses(), &a, &q);
    e - 0.5 * conf
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContinuumOptions {
    pub grid: GridSpec,
    pub max_gradient_iter: usize,
    pub max_active_set_iter: usize,
}

impl Default for ContinuumOptions {
    fn default() -> Self {
        Self { grid: GridSpec::default(), max_gradient_iter: 2_000, max_active_set_iter: 200 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuumReport {
    pub alpha: f64,
    pub m: usize,
    pub h: f64,
    /// `E^alpha(rhobar)`
    pub energy: f64,
    /// `F^alpha` from the energy formula
    pub f_alpha: f64,
    /// Half the Lagrange multiplier of the mass constraint.
    pub f_multiplier: f64,
    /// `int Q_alpha rhobar`
    pub confinement: f64,
    pub interaction: f64,
    pub gradient_iterations: usize,
    pub active_set_iterations: usize,
    pub support: (f64, f64),
    pub el: ElResidual,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Minimizes `E^alpha` over the simplex of cell masses.
///
/// Accelerated projected gradient with adaptive restart locates the support;
/// an active-set pass then solves `A_SS m_S + q_S = lambda 1`, `1^T m_S = 1`
/// exactly, adding cells that violate `v >= lambda` and dropping negative
/// masses. The multiplier satisfies `lambda = 2 F^alpha`.
pub fn minimize_continuum(frame: &ScaleFrame, opts: &ContinuumOptions) -> Result<(GridDensity, ContinuumReport)> {
    let grid = opts.grid;
    grid.validate()?;
    let a = KernelMatrix::assemble(&grid, frame.alpha);
    let q = confinement_vector(frame, &grid);
    let m = grid.m;

    // start: uniform on the cells inside [-1, 1]
    let mut x: Vec<f64> = (0..m).map(|i| if grid.center(i).abs() <= 1.0 { 1.0 } else { 0.0 }).collect();
    if x.iter().all(|&v| v == 0.0) {
        x = vec![1.0; m];
    }
    x = project_simplex(&x.iter().map(|v| v / x.iter().sum::<f64>()).collect::<Vec<_>>());
    let lip = a.lipschitz();
    let objective = |ax: &[f64], x: &[f64]| -> f64 {
        x.iter().zip(ax).zip(&q).map(|((xi, axi), qi)| if *xi == 0.0 { 0.0 } else { xi * (0.5 * axi + qi) }).sum()
    };
    let mut ax = a.apply(&x);
    let mut fx = objective(&ax, &x);
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut t = 1.0f64;
    let mut iters = 0;
    while iters < opts.max_gradient_iter {
        iters += 1;
        let trial: Vec<f64> = (0..m).map(|i| y[i] - (ay[i] + q[i]) / lip).collect();
        let xn = project_simplex(&trial);
        let axn = a.apply(&xn);
        let fxn = objective(&axn, &xn);
        let step = xn.iter().zip(&x).fold(0.0f64, |acc, (u, v)| acc.max((u - v).abs()));
        if fxn > fx {
            // adaptive restart
            t = 1.0;
            y = x.clone();
            ay = ax.clone();
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / tn;
        y = (0..m).map(|i| xn[i] + mom * (xn[i] - x[i])).collect();
        ay = (0..m).map(|i| axn[i] + mom * (axn[i] - ax[i])).collect();
        x = xn;
        ax = axn;
        fx = fxn;
        t = tn;
        if step * lip < 1e-10 {
            break;
        }
    }
    debug!("projected gradient: {iters} iterations, energy {fx}");

    let (masses, lambda, active_iters) = active_set_polish(&a, &q, &x, opts.max_active_set_iter)?;
    let rho = GridDensity::new(grid, masses)?;
    let (first, last) = rho.support_cells;
    if first == 0 || last == m - 1 {
        let (y1, y2) = rho.support();
        return Err(Error::SupportAtBoundary {
            side: if first == 0 { "left" } else { "right" },
            y1,
            y2,
            x_lo: grid.x_lo,
            x_hi: grid.x_hi,
        });
    }
    let (energy, interaction, confinement) = energy_parts(rho.masses(), &a, &q);
    let f_alpha = energy - 0.5 * confinement;
    let el = residual_with(&rho, &a, &q, f_alpha);
    let report = ContinuumReport {
        alpha: frame.alpha,
        m,
        h: grid.h(),
        energy,
        f_alpha,
        f_multiplier: 0.5 * lambda,
        confinement,
        interaction,
        gradient_iterations: iters,
        active_set_iterations: active_iters,
        support: rho.support(),
        el,
    };
    Ok((rho, report))
}

fn active_set_polish(a: &KernelMatrix, q: &[f64], start: &[f64], max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
    let m = start.len();
    let max = start.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let mut active: Vec<bool> = start.iter().map(|&v| v > 1e-10 * max).collect();
    let mut seen: Vec<Vec<bool>> = Vec::new();
    for it in 1..=max_iter {
        let idx: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
        let sub = a.submatrix(&idx);
        let chol = sub.cholesky().ok_or_else(|| Error::NonConvergence {
            solver: "continuum active set",
            iterations: it,
            detail: "interaction matrix on the support is not positive definite".into(),
            best: start.to_vec(),
        })?;
        let ones = DVector::from_element(idx.len(), 1.0);
        let qs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| q[i]));
        let u = chol.solve(&ones);
        let w = chol.solve(&qs);
        let lambda = (1.0 + w.sum()) / u.sum();
        let ms = &u * lambda - &w;

        let mut masses = vec![0.0; m];
        for (k, &i) in idx.iter().enumerate() {
            masses[i] = ms[k];
        }
        let negative: Vec<usize> = idx.iter().copied().filter(|&i| masses[i] <= 0.0).collect();
        if !negative.is_empty() {
            for i in negative {
                active[i] = false;
            }
        } else {
            let off: Vec<usize> = (0..m).filter(|&i| !active[i]).collect();
            let v = a.apply_rows_exact(&masses, &off);
            let tol = 1e-11 * lambda.abs().max(1.0);
            let violators: Vec<usize> =
                off.iter().zip(&v).filter(|(&i, &vi)| vi + q[i] - lambda < -tol).map(|(&i, _)| i).collect();
            if violators.is_empty() {
                return Ok((masses, lambda, it));
            }
            for i in violators {
                active[i] = true;
            }
        }
        if seen.contains(&active) {
            return Err(Error::NonConvergence {
                solver: "continuum active set",
                iterations: it,
                detail: "active set cycles".into(),
                best: start.to_vec(),
            });
        }
        seen.push(active.clone());
    }
    Err(Error::NonConvergence {
        solver: "continuum active set",
        iterations: max_iter,
        detail: "iteration cap reached".into(),
        best: start.to_vec(),
    })
}

/// Euler–Lagrange residual of a grid density.
///
/// With `v = K_alpha * rho + Q_alpha` (cell averages) the conditions read
/// `v = lambda` on the support and `v >= lambda` elsewhere, where
/// `lambda = 2 F^alpha` follows from integrating the equality against `rho`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ElResidual {
    /// `max |v - 2F| over the support`
    pub on_support_dev: f64,
    /// `min (v - 2F)` off the support (`+inf` if none)
    pub off_support_slack: f64,
    /// `F^alpha` from the energy formula
    pub f_alpha: f64,
    /// Half the unweighted mean of `v` over the support.
    pub f_multiplier: f64,
}

impl ElResidual {
    /// Passes at `tol = scale * max(1, |F|)`.
    pub fn passes(&self, scale: f64) -> bool {
        let tol = scale * self.f_alpha.abs().max(1.0);
        self.on_support_dev <= tol
            && self.off_support_slack >= -tol
            && (self.f_multiplier - self.f_alpha).abs() <= tol
    }
}

pub fn el_residual(rho: &GridDensity, frame: &ScaleFrame) -> ElResidual {
    let a = KernelMatrix::assemble(&rho.grid, frame.alpha);
    let q = confinement_vector(frame, &rho.grid);
    let (e, _, conf) = energy_parts(rho.masses(), &a, &q);
    residual_with(rho, &a, &q, e - 0.5 * conf)
}

fn residual_with(rho: &GridDensity, a: &KernelMatrix, q: &[f64], f_alpha: f64) -> ElResidual {
    let rows: Vec<usize> = (0..rho.grid.m).collect();
    let v: Vec<f64> = a.apply_rows_exact(rho.masses(), &rows).iter().zip(q).map(|(x, y)| x + y).collect();
    let lambda = 2.0 * f_alpha;
    let (s0, s1) = rho.support_cells;
    let on = (s0..=s1).map(|i| (v[i] - lambda).abs()).fold(0.0f64, f64::max);
    let off = (0..rho.grid.m)
        .filter(|&i| i < s0 || i > s1)
        .map(|i| v[i] - lambda)
        .fold(f64::INFINITY, f64::min);
    let mean = (s0..=s1).map(|i| v[i]).sum::<f64>() / (s1 - s0 + 1) as f64;
    ElResidual { on_support_dev: on, off_support_slack: off, f_alpha, f_multiplier: 0.5 * mean }
}

/// Quantities bounded uniformly in `alpha` for the continuum minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct DensityDiagnostics {
    pub y1: f64,
    pub y2: f64,
    pub width: f64,
    pub rho_max: f64,
    /// `||Q_alpha''||` on the support
    pub q2_sup: f64,
    /// `||Q_alpha||` on the support
    pub q_sup: f64,
    /// `rho_max / (q2_sup + 1)`
    pub density_ratio: f64,
    /// `max rho(x) / sqrt((x - y1)(y2 - x))` over interior cell centers
    pub edge_ratio: f64,
    pub contains_origin: bool,
}

/// `||Q_alpha''||` on `[y1, y2]`, sampled densely and at the potential's curvature peaks.
pub fn q2_sup_on(frame: &ScaleFrame, y1: f64, y2: f64) -> f64 {
    let samples = 4096;
    let mut best = 0.0f64;
    for i in 0..=samples {
        let x = y1 + (y2 - y1) * i as f64 / samples as f64;
        best = best.max(frame.q_alpha_d2(x).abs());
    }
    for p in frame.potential().curvature_peaks() {
        let x = p / frame.alpha;
        if x >= y1 && x <= y2 {
            best = best.max(frame.q_alpha_d2(x).abs());
        }
    }
    best
}

pub fn density_diagnostics(rho: &GridDensity, frame: &ScaleFrame) -> DensityDiagnostics {
    let (y1, y2) = rho.support();
    let q2_sup = q2_sup_on(frame, y1, y2);
    let q_sup = frame.q_alpha(y1).max(frame.q_alpha(y2));
    let rho_max = rho.max_density();
    let (s0, s1) = rho.support_cells;
    let edge_ratio = (s0..=s1)
        .map(|i| {
            let c = rho.grid.center(i);
            rho.density(i) / ((c - y1) * (y2 - c)).sqrt()
        })
        .fold(0.0f64, f64::max);
    DensityDiagnostics {
        y1,
        y2,
        width: y2 - y1,
        rho_max,
        q2_sup,
        q_sup,
        density_ratio: rho_max / (q2_sup + 1.0),
        edge_ratio,
        contains_origin: y1 <= 0.0 && 0.0 <= y2,
    }
}

/// `(int (K_alpha * rho) rho, K(1)/(z2 - z1) (int_{z1}^{z2} rho)^2)`; the first dominates.
pub fn interaction_window_bound(rho: &GridDensity, frame: &ScaleFrame, z1: f64, z2: f64) -> (f64, f64) {
    let a = KernelMatrix::assemble(&rho.grid, frame.alpha);
    let lhs = a.quadratic_form(rho.masses());
    let mass = rho.mass_between(z1, z2);
    (lhs, crate::potentials::kernel::k(1.0) / (z2 - z1) * mass * mass)
}
