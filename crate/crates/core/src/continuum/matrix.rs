use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;
use crate::integrals::Profile;

/// Symmetric Toeplitz matrix of cell-pair averages
/// `A_ij = (1/h^2) int_{cell_i} int_{cell_j} f_alpha(x - y) dy dx`.
///
/// Stored as its first column; products go through a circulant embedding.
#[derive(Clone)]
pub struct KernelMatrix {
    pub alpha: f64,
    pub h: f64,
    col: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for KernelMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelMatrix")
            .field("alpha", &self.alpha)
            .field("h", &self.h)
            .field("m", &self.col.len())
            .finish()
    }
}

/// `alpha f(alpha u)` is negligible beyond `alpha u > CUTOFF` (`K(40) ~ 4e-35`).
const CUTOFF: f64 = 40.0;

impl KernelMatrix {
    /// Interaction matrix of `K_alpha` on the grid.
    pub fn assemble(grid: &GridSpec, alpha: f64) -> Self {
        Self::with_profile(grid, alpha, Profile::Kernel)
    }

    /// Interaction matrix of `alpha f(alpha .)` for an even profile `f`.
    pub fn with_profile(grid: &GridSpec, alpha: f64, profile: Profile) -> Self {
        let m = grid.m;
        let h = grid.h();
        let width = alpha * h;
        let col: Vec<f64> = (0..m)
            .map(|k| {
                if k >= 2 && (k as f64 - 1.0) * width > CUTOFF {
                    0.0
                } else {
                    alpha * profile.tent(width, k)
                }
            })
            .collect();
        Self::from_column(alpha, h, col)
    }

    fn from_column(alpha: f64, h: f64, col: Vec<f64>) -> Self {
        let m = col.len();
        let size = 2 * m;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex::new(0.0, 0.0); size];
        for k in 0..m {
            spectrum[k].re = col[k];
            if k > 0 {
                spectrum[size - k].re = col[k];
            }
        }
        forward.process(&mut spectrum);
        Self { alpha, h, col, spectrum, forward, inverse }
    }

    pub fn size(&self) -> usize {
        self.col.len()
    }

    pub fn column(&self) -> &[f64] {
        &self.col
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.col[i.abs_diff(j)]
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.col.len();
        let size = 2 * m;
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / size as f64;
        buf[..m].iter().map(|c| c.re * scale).collect()
    }

    /// `(A x)_i` for the listed rows by direct summation over the nonzeros of `x`.
    pub fn apply_rows_exact(&self, x: &[f64], rows: &[usize]) -> Vec<f64> {
        let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        rows.iter()
            .map(|&i| nz.iter().map(|&(j, v)| self.entry(i, j) * v).sum())
            .collect()
    }

    /// Dense submatrix on `idx x idx`.
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.entry(idx[r], idx[c]))
    }

    /// Gershgorin bound on the largest eigenvalue.
    pub fn lipschitz(&self) -> f64 {
        self.col[0] + 2.0 * self.col[1..].iter().sum::<f64>()
    }

    /// `x^T A x` summed directly over the nonzeros of `x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        let mut acc = 0.0;
        for (a, &(i, xi)) in nz.iter().enumerate() {
            let mut row = 0.5 * self.col[0] * xi;
            for &(j, xj) in &nz[a + 1..] {
                row += self.col[j - i] * xj;
            }
            acc += 2.0 * xi * row;
        }
        acc
    }
}

/// Convenience wrapper matching the grid/alpha signature.
pub fn assemble_kernel_matrix(grid: &GridSpec, alpha: f64) -> KernelMatrix {
    KernelMatrix::assemble(grid, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_product_matches_dense() {
        let grid = GridSpec { x_lo: -1.0, x_hi: 1.0, m: 37 };
        let a = KernelMatrix::assemble(&grid, 3.0);
        let x: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let fast = a.apply(&x);
        let rows: Vec<usize> = (0..37).collect();
        let slow = a.apply_rows_exact(&x, &rows);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() < 1e-12 * a.column()[0]);
        }
        let q = a.quadratic_form(&x);
        let direct: f64 = x.iter().zip(&slow).map(|(a, b)| a * b).sum();
        assert!((q - direct).abs() < 1e-12 * direct.abs());
    }

    #[test]
    fn entries_decay_and_are_positive() {
        let grid = GridSpec { x_lo: -4.0, x_hi: 4.0, m: 256 };
        let a = KernelMatrix::assemble(&grid, 2.0);
        let c = a.column();
        assert!(c.iter().take(100).all(|&v| v > 0.0));
        assert!(c.windows(2).all(|w| w[1] <= w[0]));
    }
}
