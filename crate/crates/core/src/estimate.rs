//! Grid-sampled mean curves and covariance surfaces.

use alloc::vec::Vec;

use crate::error::FdaError;
use crate::grid::GridSpec;
use crate::smoother::{solve_curve, solve_surface, LocalStats};

/// A mean curve sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// Number of blocks absorbed when the estimate was taken.
    pub block_index: u64,
    /// Grid points that were filled by interpolation.
    pub gaps: usize,
}

impl CurveEstimate {
    pub fn from_stats(
        stats: &LocalStats,
        grid: GridSpec,
        bandwidth: f64,
        block_index: u64,
        ridge: f64,
    ) -> crate::Result<Self> {
        if stats.n_points() != grid.len() || stats.design().is_surface() {
            return Err(FdaError::ShapeMismatch {
                what: "curve statistics",
                expected: grid.len(),
                found: stats.n_points(),
            });
        }
        let (values, gaps) = solve_curve(stats, ridge)?;
        Ok(CurveEstimate {
            grid,
            values,
            bandwidth,
            block_index,
            gaps,
        })
    }

    /// Linear interpolation at `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.grid.interpolate(&self.values, t)
    }
}

/// A symmetric covariance surface sampled on `grid × grid`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceEstimate {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub block_index: u64,
    pub gaps: usize,
}

impl SurfaceEstimate {
    pub fn from_stats(
        stats: &LocalStats,
        grid: GridSpec,
        bandwidth: f64,
        block_index: u64,
        ridge: f64,
    ) -> crate::Result<Self> {
        if stats.axis_points() != grid.len() || !stats.design().is_surface() {
            return Err(FdaError::ShapeMismatch {
                what: "surface statistics",
                expected: grid.len(),
                found: stats.axis_points(),
            });
        }
        let (values, gaps) = solve_surface(stats, ridge)?;
        Ok(SurfaceEstimate {
            grid,
            values,
            bandwidth,
            block_index,
            gaps,
        })
    }

    /// Wraps raw grid values, checking shape and symmetry.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> crate::Result<Self> {
        let n = grid.len();
        if values.len() != n * n {
            return Err(FdaError::ShapeMismatch {
                what: "surface values",
                expected: n * n,
                found: values.len(),
            });
        }
        let s = SurfaceEstimate {
            grid,
            values,
            bandwidth: f64::NAN,
            block_index: 0,
            gaps: 0,
        };
        if s.asymmetry() > 1e-10 {
            return Err(FdaError::ShapeMismatch {
                what: "symmetric surface",
                expected: 0,
                found: 1,
            });
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    /// Bilinear interpolation at `(s, t)`.
    pub fn evaluate(&self, s: f64, t: f64) -> f64 {
        self.grid.interpolate2(&self.values, s, t)
    }

    /// Diagonal `γ(t, t)` on the grid.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.at(i, i)).collect()
    }

    /// Largest `|γ(s,t) − γ(t,s)|` on the grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        worst
    }
}
