//! Small dense symmetric solves for local polynomial fits.

/// Largest local design handled (2-D local quadratic: 6 coefficients).
pub const MAX_DIM: usize = 6;

/// Default ridge scale for [`solve_local`].
pub const DEFAULT_RIDGE: f64 = 1e-9;

/// Windows whose total kernel mass is below this hold no usable data.
pub const DEGENERATE_MASS: f64 = 1e-10;

/// Number of packed upper-triangular entries of a `dim × dim` symmetric matrix.
#[inline]
pub const fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Offset of entry `(i, j)`, `i <= j`, in packed row-major upper storage.
#[inline]
pub const fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Marker for a window without enough data to identify the local fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degenerate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    /// First coordinate of the solution: the fitted value at the target point.
    pub value: f64,
    coeffs: [f64; MAX_DIM],
    dim: usize,
}

impl LocalFit {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..self.dim]
    }
}

/// Solves `(P + λI) x = q` for a small symmetric `P` given in packed upper
/// storage, returning `x[0]` and the full coefficient vector.
///
/// The system is first equilibrated by the diagonal of `P`; the ridge is
/// `λ = ridge_scale · trace / dim` on the equilibrated matrix, and two steps
/// of iterative refinement against the unridged system remove the ridge bias
/// whenever `P` is well conditioned.
pub fn solve_local(p: &[f64], q: &[f64], ridge_scale: f64) -> Result<LocalFit, Degenerate> {
    let dim = q.len();
    assert!(
        (1..=MAX_DIM).contains(&dim) && p.len() == packed_len(dim),
        "solve_local: unsupported shape"
    );
    let p00 = p[0];
    if !(p00 > DEGENERATE_MASS) || !p00.is_finite() {
        return Err(Degenerate);
    }

    let mut a = [[0.0f64; MAX_DIM]; MAX_DIM];
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            a[i][j] = p[k];
            a[j][i] = p[k];
            k += 1;
        }
    }

    let mut d = [0.0f64; MAX_DIM];
    for i in 0..dim {
        let diag = a[i][i];
        d[i] = if diag > 0.0 {
            1.0 / libm::sqrt(diag)
        } else {
            1.0 / libm::sqrt(p00)
        };
    }
    let mut scaled = [[0.0f64; MAX_DIM]; MAX_DIM];
    let mut rhs = [0.0f64; MAX_DIM];
    let mut trace = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            scaled[i][j] = d[i] * a[i][j] * d[j];
        }
        rhs[i] = d[i] * q[i];
        trace += scaled[i][i];
    }
    let lambda = ridge_scale * trace / dim as f64;

    let mut chol = scaled;
    for (i, row) in chol.iter_mut().enumerate().take(dim) {
        row[i] += lambda;
    }
    if !cholesky(&mut chol, dim) {
        return Err(Degenerate);
    }

    let mut x = cholesky_solve(&chol, &rhs, dim);
    for _ in 0..2 {
        let mut resid = [0.0f64; MAX_DIM];
        for i in 0..dim {
            let mut acc = rhs[i];
            for j in 0..dim {
                acc -= scaled[i][j] * x[j];
            }
            resid[i] = acc;
        }
        let dx = cholesky_solve(&chol, &resid, dim);
        for i in 0..dim {
            x[i] += dx[i];
        }
    }

    let mut coeffs = [0.0f64; MAX_DIM];
    for i in 0..dim {
        coeffs[i] = d[i] * x[i];
        if !coeffs[i].is_finite() {
            return Err(Degenerate);
        }
    }
    Ok(LocalFit {
        value: coeffs[0],
        coeffs,
        dim,
    })
}

// In-place lower Cholesky factor; false if not positive definite.
fn cholesky(a: &mut [[f64; MAX_DIM]; MAX_DIM], n: usize) -> bool {
    for j in 0..n {
        let mut s = a[j][j];
        for k in 0..j {
            s -= a[j][k] * a[j][k];
        }
        if !(s > 0.0) {
            return false;
        }
        let l = libm::sqrt(s);
        a[j][j] = l;
        for i in j + 1..n {
            let mut t = a[i][j];
            for k in 0..j {
                t -= a[i][k] * a[j][k];
            }
            a[i][j] = t / l;
        }
    }
    true
}

fn cholesky_solve(l: &[[f64; MAX_DIM]; MAX_DIM], b: &[f64; MAX_DIM], n: usize) -> [f64; MAX_DIM] {
    let mut y = [0.0f64; MAX_DIM];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0f64; MAX_DIM];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let fit = solve_local(&[1.0, 0.0, 1.0], &[3.0, 1.0], DEFAULT_RIDGE).unwrap();
        assert!((fit.value - 3.0).abs() < 1e-12);
        assert!((fit.coeffs()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_degenerate() {
        assert_eq!(
            solve_local(&[0.0, 0.0, 0.0], &[0.0, 0.0], DEFAULT_RIDGE),
            Err(Degenerate)
        );
        assert_eq!(
            solve_local(&[0.0; 6], &[0.0; 3], DEFAULT_RIDGE),
            Err(Degenerate)
        );
    }

    #[test]
    fn rank_one_window_stays_finite() {
        // One point at the target: slope is unidentified, value is still y.
        let w = 3.75;
        let fit = solve_local(&[w, 0.0, 0.0], &[w * 2.0, 0.0], DEFAULT_RIDGE).unwrap();
        assert!((fit.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn packed_layout() {
        assert_eq!(packed_len(2), 3);
        assert_eq!(packed_len(3), 6);
        assert_eq!(packed_len(6), 21);
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                assert_eq!(packed_index(4, i, j), k);
                k += 1;
            }
        }
    }
}
