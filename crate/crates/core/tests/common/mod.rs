#![allow(dead_code)]

use fdastream_core::{Block, GridSpec, Kernel, Subject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Subjects with `m` uniform times in `[0, 1]` and values `f(t) + noise`.
pub fn block_with(
    rng: &mut ChaCha8Rng,
    id: u64,
    n: usize,
    m: std::ops::RangeInclusive<usize>,
    f: impl Fn(f64) -> f64,
    noise: f64,
) -> Block {
    let subjects = (0..n)
        .map(|_| {
            let mi = rng.random_range(m.clone());
            let shift = rng.random_range(-1.0..1.0);
            let times: Vec<f64> = (0..mi).map(|_| rng.random_range(0.0..1.0)).collect();
            let values = times
                .iter()
                .map(|&t| f(t) + shift + noise * rng.random_range(-1.0..1.0))
                .collect();
            Subject::new(times, values).unwrap()
        })
        .collect();
    Block::new(id, subjects).unwrap()
}

pub fn random_block(rng: &mut ChaCha8Rng, id: u64, n: usize) -> Block {
    block_with(rng, id, n, 1..=6, |t| (6.0 * t).sin(), 0.3)
}

/// Packed upper-triangular index, row-major, independent of the library.
pub fn packed(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    let mut k = 0;
    for r in 0..i {
        k += dim - r;
    }
    k + (j - i)
}

/// Brute-force 1-D local polynomial moments of degree `deg` at every grid
/// point, directly from the definition.
pub fn brute_1d(
    block: &Block,
    resp: &[Vec<f64>],
    deg: usize,
    h: f64,
    grid: &GridSpec,
    k: &Kernel,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let c = deg + 1;
    (0..grid.len())
        .map(|g| {
            let t0 = grid.point(g);
            let mut p = vec![0.0; c * (c + 1) / 2];
            let mut q = vec![0.0; c];
            for (s, r) in block.subjects.iter().zip(resp) {
                for (&t, &y) in s.times.iter().zip(r) {
                    let u = t - t0;
                    let w = k.weight(u / h) / h;
                    for i in 0..c {
                        for j in i..c {
                            p[packed(c, i, j)] += w * u.powi((i + j) as i32);
                        }
                        q[i] += w * u.powi(i as i32) * y;
                    }
                }
            }
            (p, q)
        })
        .collect()
}

/// Brute-force local-linear surface moments over all ordered pairs.
pub fn brute_cov(
    block: &Block,
    resid: &[Vec<f64>],
    h: f64,
    grid: &GridSpec,
    k: &Kernel,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    let mut out = Vec::with_capacity(n * n);
    for gs in 0..n {
        for gt in 0..n {
            let (s0, t0) = (grid.point(gs), grid.point(gt));
            let mut p = vec![0.0; 6];
            let mut q = vec![0.0; 3];
            for (subj, r) in block.subjects.iter().zip(resid) {
                let m = subj.len();
                for j1 in 0..m {
                    for j2 in 0..m {
                        if j1 == j2 {
                            continue;
                        }
                        let a = subj.times[j1] - s0;
                        let b = subj.times[j2] - t0;
                        let w = k.weight(a / h) / h * k.weight(b / h) / h;
                        let x = [1.0, a, b];
                        for i in 0..3 {
                            for j in i..3 {
                                p[packed(3, i, j)] += w * x[i] * x[j];
                            }
                            q[i] += w * x[i] * r[j1] * r[j2];
                        }
                    }
                }
            }
            out.push((p, q));
        }
    }
    out
}

pub fn unpack(dim: usize, p: &[f64]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            a[i][j] = p[packed(dim, i, j)];
        }
    }
    a
}

/// First coordinate of `A⁻¹ q` by Gauss-Jordan with partial pivoting.
pub fn gauss_first(a: &[Vec<f64>], q: &[f64]) -> f64 {
    let n = q.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(q)
        .map(|(r, &b)| {
            let mut r = r.clone();
            r.push(b);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                let pivot_row = m[col].clone();
                for (v, pv) in m[row].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m[0][n]
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= 1e-300
}
