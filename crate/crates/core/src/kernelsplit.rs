//! The regularization `K = L + M` at scale `sigma` and the degenerate inner
//! product `(mu, nu)_L = int (L_alpha * mu) dnu` on grid densities plus atoms.

use log::warn;
use serde::Serialize;

use crate::continuum::{self, GridDensity, GridSpec, KernelMatrix};
use crate::error::{Error, Result};
use crate::integrals::{self, Profile};
use crate::potentials::kernel;
use crate::scaling::ScaleFrame;

/// `L` equals `K` for `|x| >= sigma` and is the tangent line of `K` at
/// `sigma` inside; `M = K - L` is nonnegative and supported on `[-sigma, sigma]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSplit {
    pub sigma: f64,
    pub alpha: f64,
}

pub fn split_kernel(sigma: f64, alpha: f64) -> Result<KernelSplit> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(KernelSplit { sigma, alpha })
}

impl KernelSplit {
    pub fn profile(&self) -> Profile {
        Profile::Regularized { sigma: self.sigma }
    }

    pub fn l(&self, x: f64) -> f64 {
        self.profile().eval(x)
    }

    /// `M(x) = K(x) - L(x)`; infinite at zero.
    pub fn m(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.sigma {
            0.0
        } else {
            kernel::k(a) - self.l(a)
        }
    }

    pub fn l_alpha(&self, x: f64) -> f64 {
        self.alpha * self.l(self.alpha * x)
    }

    pub fn m_alpha(&self, x: f64) -> f64 {
        self.alpha * self.m(self.alpha * x)
    }

    /// `L(0) = K(sigma) - sigma K'(sigma)`.
    pub fn l0(&self) -> f64 {
        kernel::k(self.sigma) - self.sigma * kernel::k1(self.sigma)
    }

    /// `int M = 2 (int_0^sigma K - int_0^sigma L)`.
    pub fn m_integral(&self) -> f64 {
        let s = self.sigma;
        let l_int = s * kernel::k(s) - 0.5 * s * s * kernel::k1(s);
        2.0 * (integrals::k_primitive(s) - l_int)
    }

    /// `(1/h) int_c^d L_alpha(x - y) dy`.
    fn cell_average(&self, x: f64, c: f64, d: f64) -> f64 {
        self.profile().integral(self.alpha * (x - d), self.alpha * (x - c)) / (d - c)
    }
}

/// A signed measure: per-cell masses on a grid plus point masses.
#[derive(Debug, Clone, Serialize)]
pub struct SignedMeasureOnGrid {
    pub grid: GridSpec,
    pub cells: Vec<f64>,
    /// `(position, weight)`
    pub atoms: Vec<(f64, f64)>,
}

impl SignedMeasureOnGrid {
    pub fn new(grid: GridSpec, cells: Vec<f64>, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if cells.len() != grid.m {
            return Err(Error::Domain(format!("{} cell masses for {} cells", cells.len(), grid.m)));
        }
        Ok(Self { grid, cells, atoms })
    }

    /// `nu_n = (1/n) sum delta_{x_i} - rho`.
    pub fn discrepancy(x: &[f64], rho: &GridDensity) -> Self {
        let w = 1.0 / x.len() as f64;
        Self {
            grid: rho.grid,
            cells: rho.masses().iter().map(|m| -m).collect(),
            atoms: x.iter().map(|&p| (p, w)).collect(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            cells: self.cells.iter().map(|v| c * v).collect(),
            atoms: self.atoms.iter().map(|&(p, w)| (p, c * w)).collect(),
        }
    }

    /// Sum of two measures on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        same_grid(self, other)?;
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Ok(Self {
            grid: self.grid,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| a + b).collect(),
            atoms,
        })
    }
}

fn same_grid(a: &SignedMeasureOnGrid, b: &SignedMeasureOnGrid) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::Domain(format!("measures live on different grids: {:?} vs {:?}", a.grid, b.grid)));
    }
    Ok(())
}

/// `int (L_alpha * nu1) dnu2`.
///
/// Cell-cell pairs use exact tent integrals of `L`, atom-cell pairs exact
/// cell integrals of `L_alpha`, atom-atom pairs `L_alpha` itself including
/// coincident atoms (`L_alpha(0)` is finite).
pub fn l_inner_product(nu1: &SignedMeasureOnGrid, nu2: &SignedMeasureOnGrid, split: &KernelSplit) -> Result<f64> {
    same_grid(nu1, nu2)?;
    let grid = nu1.grid;
    let b = KernelMatrix::with_profile(&grid, split.alpha, split.profile());
    let nz: Vec<usize> = (0..grid.m).filter(|&i| nu1.cells[i] != 0.0 || nu2.cells[i] != 0.0).collect();
    let mut cc = 0.0;
    for &i in &nz {
        if nu1.cells[i] == 0.0 {
            continue;
        }
        let row: f64 = nz.iter().map(|&j| b.entry(i, j) * nu2.cells[j]).sum();
        cc += nu1.cells[i] * row;
    }
    let cross = |atoms: &[(f64, f64)], cells: &[f64]| -> f64 {
        let h = grid.h();
        let reach = 40.0 / split.alpha + h;
        let mut acc = 0.0;
        for &(p, w) in atoms {
            for &j in &nz {
                if cells[j] == 0.0 {
                    continue;
                }
                let c = grid.left(j);
                if (p - c - 0.5 * h).abs() > reach {
                    continue;
                }
                acc += w * cells[j] * split.cell_average(p, c, c + h);
            }
        }
        acc
    };
    let ac = cross(&nu1.atoms, &nu2.cells) + cross(&nu2.atoms, &nu1.cells);
    let mut aa = 0.0;
    for &(p, w) in &nu1.atoms {
        for &(r, v) in &nu2.atoms {
            aa += w * v * split.l_alpha(p - r);
        }
    }
    Ok(cc + ac + aa)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscrepancyReport {
    pub sigma: f64,
    pub sigma_clamped: bool,
    pub q_alpha: f64,
    /// `||nu_n||_{L_alpha}^2`
    pub norm_sq: f64,
    pub norm: f64,
    /// `E_n^alpha(xbar) - E^alpha(rhobar)`
    pub energy_gap: f64,
    /// `(alpha/n) log(q_alpha n / alpha)`
    pub scale: f64,
    /// Smallest `C` with `norm_sq / 2 <= energy_gap + C scale`.
    pub constant: f64,
}

/// `||nu_n||_{L_alpha}` for `nu_n = mu_n - rhobar`, with `sigma` defaulting to
/// `alpha / (q_alpha n)` clamped to `[1e-8, 1/2]`.
pub fn discrepancy_norm(
    frame: &ScaleFrame,
    xbar: &[f64],
    rhobar: &GridDensity,
    sigma: Option<f64>,
) -> Result<DiscrepancyReport> {
    let n = xbar.len();
    let alpha = frame.alpha;
    let diag = continuum::density_diagnostics(rhobar, frame);
    let q_alpha = diag.q2_sup + 1.0;
    let raw = sigma.unwrap_or(alpha / (q_alpha * n as f64));
    let sigma = raw.clamp(1e-8, 0.5);
    let clamped = sigma != raw;
    if clamped {
        warn!("sigma = {raw} clamped to {sigma}");
    }
    let split = split_kernel(sigma, alpha)?;
    let nu = SignedMeasureOnGrid::discrepancy(xbar, rhobar);
    let norm_sq = l_inner_product(&nu, &nu, &split)?;
    let e_n = crate::discrete::energy(frame, xbar)?;
    let e_c = continuum::continuum_energy(rhobar, frame);
    let nf = n as f64;
    let scale = alpha / nf * (q_alpha * nf / alpha).ln();
    let gap = e_n - e_c;
    Ok(DiscrepancyReport {
        sigma,
        sigma_clamped: clamped,
        q_alpha,
        norm_sq,
        norm: norm_sq.max(0.0).sqrt(),
        energy_gap: gap,
        scale,
        constant: ((0.5 * norm_sq - gap) / scale).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_value_at_origin() {
        let s = split_kernel(0.1, 1.0).unwrap();
        let direct = kernel::k(0.1) - 0.1 * kernel::k1(0.1);
        assert!((s.l(0.0) - direct).abs() < 1e-12);
        assert_eq!(s.l0(), s.l(0.0));
        assert_eq!(s.l(0.2), kernel::k(0.2));
        assert_eq!(s.m(0.2), 0.0);
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(split_kernel(0.0, 1.0).is_err());
    }

    #[test]
    fn two_atoms_closed_form() {
        let grid = GridSpec { x_lo: -1.0, x_hi: 1.0, m: 8 };
        let s = split_kernel(0.05, 3.0).unwrap();
        let nu = SignedMeasureOnGrid::new(grid, vec![0.0; 8], vec![(0.1, 1.0), (0.4, -1.0)]).unwrap();
        let v = l_inner_product(&nu, &nu, &s).unwrap();
        let want = 2.0 * s.l_alpha(0.0) - 2.0 * s.l_alpha(0.3);
        assert!((v - want).abs() < 1e-13);
        assert!(v >= 0.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = SignedMeasureOnGrid::new(GridSpec { x_lo: -1.0, x_hi: 1.0, m: 4 }, vec![0.0; 4], vec![]).unwrap();
        let b = SignedMeasureOnGrid::new(GridSpec { x_lo: -1.0, x_hi: 1.0, m: 5 }, vec![0.0; 5], vec![]).unwrap();
        assert!(l_inner_product(&a, &b, &split_kernel(0.1, 1.0).unwrap()).is_err());
    }
}
