//! Functional principal components of a covariance surface.
//!
//! The surface is discretized as an integral operator with trapezoid
//! weights `D` and the symmetric matrix `D^{1/2} G D^{1/2}` is diagonalized.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::FdaError;
use crate::estimate::SurfaceEstimate;
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct FpcaResult {
    pub grid: GridSpec,
    /// Full raw spectrum in descending order (may contain negatives).
    pub eigenvalues: Vec<f64>,
    /// Leading eigenfunctions on the grid, orthonormal under the trapezoid
    /// inner product.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// Cumulative fraction of variance explained by the leading components,
    /// from the spectrum clipped at zero.
    pub fve: Vec<f64>,
    /// True when the clipped spectrum is all zero and FVE is undefined.
    pub degenerate: bool,
}

impl FpcaResult {
    /// Eigenvalues clipped at zero for the reported components.
    pub fn clipped(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .take(self.eigenfunctions.len())
            .map(|&l| l.max(0.0))
            .collect()
    }

    /// `Σ λ_r⁺ φ_r(s) φ_r(t)` over the reported components, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n * n];
        for (lambda, phi) in self.clipped().iter().zip(&self.eigenfunctions) {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += lambda * phi[i] * phi[j];
                }
            }
        }
        out
    }
}

/// Eigen-decomposition of a symmetric surface, keeping `n_components`
/// eigenfunctions. Each eigenfunction is signed so its integral is
/// nonnegative (or, if the integral vanishes, its first nonzero value is
/// positive).
pub fn fpca(surface: &SurfaceEstimate, n_components: usize) -> crate::Result<FpcaResult> {
    let grid = surface.grid;
    let n = grid.len();
    if surface.values.len() != n * n {
        return Err(FdaError::ShapeMismatch {
            what: "surface values",
            expected: n * n,
            found: surface.values.len(),
        });
    }
    if surface.asymmetry() > 1e-10 {
        return Err(FdaError::ShapeMismatch {
            what: "symmetric surface",
            expected: 0,
            found: 1,
        });
    }
    let w = grid.trapezoid_weights(0.0);
    let sw: Vec<f64> = w.iter().map(|x| libm::sqrt(*x)).collect();
    let m = DMatrix::from_fn(n, n, |i, j| sw[i] * surface.values[i * n + j] * sw[j]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let scale = eigenvalues.first().map(|l| l.abs()).unwrap_or(0.0).max(1.0);
    let degenerate = !(total > 1e-14 * scale);
    let keep = n_components.min(n);

    let mut eigenfunctions = Vec::with_capacity(keep);
    if !degenerate {
        for &idx in order.iter().take(keep) {
            let v = eig.eigenvectors.column(idx);
            let mut phi: Vec<f64> = (0..n).map(|i| v[i] / sw[i]).collect();
            let integral: f64 = phi.iter().zip(&w).map(|(p, w)| p * w).sum();
            let flip = if integral.abs() > 1e-10 {
                integral < 0.0
            } else {
                phi.iter()
                    .find(|p| p.abs() > 1e-12)
                    .is_some_and(|p| *p < 0.0)
            };
            if flip {
                phi.iter_mut().for_each(|p| *p = -*p);
            }
            eigenfunctions.push(phi);
        }
    }

    let mut fve = vec![0.0; keep];
    if !degenerate {
        let mut acc = 0.0;
        for (r, f) in fve.iter_mut().enumerate() {
            acc += eigenvalues[r].max(0.0);
            *f = (acc / total).min(1.0);
        }
    }
    Ok(FpcaResult {
        grid,
        eigenvalues,
        eigenfunctions,
        fve,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_constant() {
        let grid = GridSpec::new(0.0, 1.0, 21).unwrap();
        let s = SurfaceEstimate::from_values(grid, vec![0.7; 21 * 21]).unwrap();
        let r = fpca(&s, 3).unwrap();
        assert!((r.eigenvalues[0] - 0.7).abs() < 1e-12);
        assert!((r.fve[0] - 1.0).abs() < 1e-12);
        assert!(r.eigenfunctions[0].iter().all(|p| (p - 1.0).abs() < 1e-10));
    }

    #[test]
    fn zero_surface_is_flagged() {
        let grid = GridSpec::new(0.0, 1.0, 11).unwrap();
        let s = SurfaceEstimate::from_values(grid, vec![0.0; 121]).unwrap();
        let r = fpca(&s, 2).unwrap();
        assert!(r.degenerate);
        assert!(r.eigenfunctions.is_empty());
        assert_eq!(r.fve, vec![0.0, 0.0]);
    }
}
