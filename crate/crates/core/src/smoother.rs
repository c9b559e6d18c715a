//! Per-block moment statistics of local polynomial fits on an evaluation
//! grid.
//!
//! A [`LocalStats`] holds, for every grid point (or grid pair for surfaces),
//! the packed symmetric design matrix `P` and right-hand side `q` of a kernel
//! weighted least-squares fit. Statistics are additive over data, which is
//! what lets the streaming bank merge them across blocks.

use alloc::vec;
use alloc::vec::Vec;

use crate::block::Block;
use crate::error::{check_bandwidth, FdaError};
use crate::grid::GridSpec;
use crate::kernel::Kernel;
use crate::linalg::{packed_len, solve_local, Degenerate, LocalFit};

/// Local design: which polynomial is fitted around each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    /// `(1, u)`: mean curve and curve-valued pilots.
    Linear1D,
    /// `(1, u, u², u³)`: second-derivative pilot for curves.
    Cubic1D,
    /// `(1, a, b)`: covariance surface.
    Linear2D,
    /// `(1, a, b, a², ab, b²)`: second-derivative pilot for surfaces.
    Quadratic2D,
}

// Monomial exponents (s-power, t-power) of each design coordinate.
const LIN2: [(usize, usize); 3] = [(0, 0), (1, 0), (0, 1)];
const QUAD2: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

impl Design {
    pub fn coefficients(self) -> usize {
        match self {
            Design::Linear1D => 2,
            Design::Cubic1D => 4,
            Design::Linear2D => 3,
            Design::Quadratic2D => 6,
        }
    }

    pub fn is_surface(self) -> bool {
        matches!(self, Design::Linear2D | Design::Quadratic2D)
    }

    /// Packed `P` followed by `q`.
    pub fn stride(self) -> usize {
        let c = self.coefficients();
        packed_len(c) + c
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Design::Linear1D => 0,
            Design::Cubic1D => 1,
            Design::Linear2D => 2,
            Design::Quadratic2D => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Design::Linear1D),
            1 => Some(Design::Cubic1D),
            2 => Some(Design::Linear2D),
            3 => Some(Design::Quadratic2D),
            _ => None,
        }
    }

    fn monomials_2d(self) -> &'static [(usize, usize)] {
        match self {
            Design::Linear2D => &LIN2,
            Design::Quadratic2D => &QUAD2,
            _ => &[],
        }
    }
}

/// Grid-resident `(P, q)` pairs for one design.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats {
    design: Design,
    axis_points: usize,
    data: Vec<f64>,
}

impl LocalStats {
    pub fn zeros(design: Design, grid: &GridSpec) -> Self {
        Self::zeros_n(design, grid.len())
    }

    pub(crate) fn zeros_n(design: Design, axis_points: usize) -> Self {
        let n = if design.is_surface() {
            axis_points * axis_points
        } else {
            axis_points
        };
        LocalStats {
            design,
            axis_points,
            data: vec![0.0; n * design.stride()],
        }
    }

    pub(crate) fn from_raw(
        design: Design,
        axis_points: usize,
        data: Vec<f64>,
    ) -> crate::Result<Self> {
        let expect = Self::zeros_n(design, axis_points).data.len();
        if data.len() != expect {
            return Err(FdaError::ShapeMismatch {
                what: "local statistics payload",
                expected: expect,
                found: data.len(),
            });
        }
        Ok(LocalStats {
            design,
            axis_points,
            data,
        })
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn axis_points(&self) -> usize {
        self.axis_points
    }

    /// Number of grid points (or grid pairs for surfaces).
    pub fn n_points(&self) -> usize {
        self.data.len() / self.design.stride()
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Packed upper-triangular `P` at grid index `g`.
    pub fn p(&self, g: usize) -> &[f64] {
        let s = self.design.stride();
        let c = self.design.coefficients();
        &self.data[g * s..g * s + packed_len(c)]
    }

    pub fn q(&self, g: usize) -> &[f64] {
        let s = self.design.stride();
        let c = self.design.coefficients();
        &self.data[g * s + packed_len(c)..(g + 1) * s]
    }

    /// Kernel mass `P[0][0]` at grid index `g`.
    pub fn mass(&self, g: usize) -> f64 {
        self.data[g * self.design.stride()]
    }

    pub fn solve(&self, g: usize, ridge_scale: f64) -> Result<LocalFit, Degenerate> {
        solve_local(self.p(g), self.q(g), ridge_scale)
    }

    pub fn add_assign(&mut self, other: &LocalStats) -> crate::Result<()> {
        if self.design != other.design || self.data.len() != other.data.len() {
            return Err(FdaError::ShapeMismatch {
                what: "local statistics",
                expected: self.data.len(),
                found: other.data.len(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &LocalStats) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

/// Sub-statistics of the local-linear mean smoother for one block.
pub fn mean_substats(
    block: &Block,
    h: f64,
    grid: &GridSpec,
    kernel: &Kernel,
) -> crate::Result<LocalStats> {
    check_bandwidth(h)?;
    let mut stats = LocalStats::zeros(Design::Linear1D, grid);
    for s in &block.subjects {
        for (&t, &y) in s.times.iter().zip(&s.values) {
            accumulate_1d(&mut stats, t, y, h, grid, kernel);
        }
    }
    Ok(stats)
}

/// Local-linear sub-statistics against arbitrary per-measurement responses.
pub fn linear_substats(
    block: &Block,
    responses: &[Vec<f64>],
    h: f64,
    grid: &GridSpec,
    kernel: &Kernel,
) -> crate::Result<LocalStats> {
    substats_1d(Design::Linear1D, block, responses, h, grid, kernel)
}

/// Local-cubic sub-statistics against per-measurement responses.
pub fn cubic_substats(
    block: &Block,
    responses: &[Vec<f64>],
    h: f64,
    grid: &GridSpec,
    kernel: &Kernel,
) -> crate::Result<LocalStats> {
    substats_1d(Design::Cubic1D, block, responses, h, grid, kernel)
}

fn substats_1d(
    design: Design,
    block: &Block,
    responses: &[Vec<f64>],
    h: f64,
    grid: &GridSpec,
    kernel: &Kernel,
) -> crate::Result<LocalStats> {
    check_bandwidth(h)?;
    block.check_aligned(responses)?;
    let mut stats = LocalStats::zeros(design, grid);
    for (s, r) in block.subjects.iter().zip(responses) {
        for (&t, &y) in s.times.iter().zip(r) {
            accumulate_1d(&mut stats, t, y, h, grid, kernel);
        }
    }
    Ok(stats)
}

fn accumulate_1d(stats: &mut LocalStats, t: f64, y: f64, h: f64, grid: &GridSpec, kernel: &Kernel) {
    let c = stats.design.coefficients();
    let stride = stats.design.stride();
    let np = packed_len(c);
    let mut pw = [0.0f64; 7];
    for g in grid.window(t, h) {
        let u = t - grid.point(g);
        let w = kernel.scaled(u, h);
        if w == 0.0 {
            continue;
        }
        pw[0] = w;
        for k in 1..2 * c - 1 {
            pw[k] = pw[k - 1] * u;
        }
        let cell = &mut stats.data[g * stride..(g + 1) * stride];
        let mut k = 0;
        for i in 0..c {
            for j in i..c {
                cell[k] += pw[i + j];
                k += 1;
            }
        }
        for i in 0..c {
            cell[np + i] += pw[i] * y;
        }
    }
}

/// Local-linear covariance sub-statistics: every ordered within-subject pair
/// `j1 != j2` contributes with response `residual[j1] * residual[j2]`.
pub fn cov_substats(
    block: &Block,
    residuals: &[Vec<f64>],
    h: f64,
    grid: &GridSpec,
    kernel: &Kernel,
) -> crate::Result<LocalStats> {
    block.check_aligned(residuals)?;
    pair_substats(Design::Linear2D, block, h, grid, kernel, |i, j1, j2| {
        residuals[i][j1] * residuals[i][j2]
    })
}

/// Surface sub-statistics over all ordered within-subject pairs. The
/// response is evaluated once per unordered pair `(j1 < j2)` and shared by
/// both orders.
pub fn pair_substats(
    design: Design,
    block: &Block,
    h: f64,
    grid: &GridSpec,
    kernel: &Kernel,
    mut response: impl FnMut(usize, usize, usize) -> f64,
) -> crate::Result<LocalStats> {
    check_bandwidth(h)?;
    if !design.is_surface() {
        return Err(FdaError::InvalidConfig(
            "pair statistics need a surface design".into(),
        ));
    }
    let n = grid.len();
    let mono = design.monomials_2d();
    let c = mono.len();
    let np = packed_len(c);
    let stride = design.stride();
    // (s power, t power, response-weighted) for each packed entry.
    let mut entries: Vec<(usize, usize, bool)> = Vec::with_capacity(stride);
    for i in 0..c {
        for j in i..c {
            entries.push((mono[i].0 + mono[j].0, mono[i].1 + mono[j].1, false));
        }
    }
    for m in mono {
        entries.push((m.0, m.1, true));
    }
    let max_pow = entries.iter().map(|e| e.0.max(e.1)).max().unwrap_or(0);

    let mut half = LocalStats::zeros(design, grid);
    let mut sa = vec![vec![0.0f64; n]; max_pow + 1];
    let mut tb = vec![vec![0.0f64; n]; max_pow + 1];
    let mut row = vec![0.0f64; stride];

    for (i, subj) in block.subjects.iter().enumerate() {
        let m = subj.len();
        for j1 in 0..m {
            let t1 = subj.times[j1];
            let ws = grid.window(t1, h);
            if ws.is_empty() {
                continue;
            }
            for (idx, g) in ws.clone().enumerate() {
                let a = t1 - grid.point(g);
                let mut v = kernel.scaled(a, h);
                for row_pows in sa.iter_mut() {
                    row_pows[idx] = v;
                    v *= a;
                }
            }
            for j2 in j1 + 1..m {
                let t2 = subj.times[j2];
                let wt = grid.window(t2, h);
                if wt.is_empty() {
                    continue;
                }
                let resp = response(i, j1, j2);
                for (idx, g) in wt.clone().enumerate() {
                    let b = t2 - grid.point(g);
                    let mut v = kernel.scaled(b, h);
                    for col_pows in tb.iter_mut() {
                        col_pows[idx] = v;
                        v *= b;
                    }
                }
                for (si, gs) in ws.clone().enumerate() {
                    if sa[0][si] == 0.0 {
                        continue;
                    }
                    for (e, &(sp, _, weighted)) in entries.iter().enumerate() {
                        row[e] = if weighted {
                            sa[sp][si] * resp
                        } else {
                            sa[sp][si]
                        };
                    }
                    let base_row = gs * n;
                    for (ti, gt) in wt.clone().enumerate() {
                        if tb[0][ti] == 0.0 {
                            continue;
                        }
                        let cell =
                            &mut half.data[(base_row + gt) * stride..(base_row + gt + 1) * stride];
                        for (e, &(_, tp, _)) in entries.iter().enumerate() {
                            cell[e] += row[e] * tb[tp][ti];
                        }
                    }
                }
            }
        }
    }

    // Pair (j2, j1) at (s, t) is pair (j1, j2) at (t, s) with the two axes
    // swapped in the design.
    let perm: Vec<usize> = mono
        .iter()
        .map(|&(p, q)| mono.iter().position(|&m| m == (q, p)).unwrap())
        .collect();
    let mut src_index = Vec::with_capacity(stride);
    for i in 0..c {
        for j in i..c {
            let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
            src_index.push(crate::linalg::packed_index(c, a, b));
        }
    }
    for &pi in &perm {
        src_index.push(np + pi);
    }
    let mut out = LocalStats::zeros(design, grid);
    for gs in 0..n {
        for gt in 0..n {
            let dst = (gs * n + gt) * stride;
            let mir = (gt * n + gs) * stride;
            for e in 0..stride {
                out.data[dst + e] = half.data[dst + e] + half.data[mir + src_index[e]];
            }
        }
    }
    Ok(out)
}

/// Solves every grid point of a curve design and fills degenerate gaps by
/// linear interpolation (constant beyond the outermost solvable points).
/// Returns the values and the number of filled gaps.
pub fn solve_curve(stats: &LocalStats, ridge_scale: f64) -> crate::Result<(Vec<f64>, usize)> {
    let n = stats.n_points();
    let mut values = vec![0.0; n];
    let mut ok = vec![false; n];
    for g in 0..n {
        if let Ok(fit) = stats.solve(g, ridge_scale) {
            values[g] = fit.value;
            ok[g] = true;
        }
    }
    let gaps = fill_gaps(&mut values, &ok)?;
    Ok((values, gaps))
}

/// Solves a surface design on the `n × n` grid, fills gaps row-wise then
/// column-wise, and symmetrizes.
pub fn solve_surface(stats: &LocalStats, ridge_scale: f64) -> crate::Result<(Vec<f64>, usize)> {
    let n = stats.axis_points();
    let mut values = vec![0.0; n * n];
    let mut ok = vec![false; n * n];
    for g in 0..n * n {
        if let Ok(fit) = stats.solve(g, ridge_scale) {
            values[g] = fit.value;
            ok[g] = true;
        }
    }
    let gaps = fill_gaps_2d(&mut values, &ok, n)?;
    symmetrize(&mut values, n);
    Ok((values, gaps))
}

pub(crate) fn symmetrize(values: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (values[i * n + j] + values[j * n + i]);
            values[i * n + j] = m;
            values[j * n + i] = m;
        }
    }
}

pub(crate) fn fill_gaps(values: &mut [f64], ok: &[bool]) -> crate::Result<usize> {
    let valid: Vec<usize> = (0..values.len()).filter(|&i| ok[i]).collect();
    if valid.is_empty() {
        return Err(FdaError::AllDegenerate);
    }
    let mut gaps = 0;
    let mut next = 0;
    for i in 0..values.len() {
        if ok[i] {
            continue;
        }
        gaps += 1;
        while next < valid.len() && valid[next] < i {
            next += 1;
        }
        values[i] = match (next.checked_sub(1).map(|p| valid[p]), valid.get(next)) {
            (Some(l), Some(&r)) => {
                let f = (i - l) as f64 / (r - l) as f64;
                values[l] * (1.0 - f) + values[r] * f
            }
            (Some(l), None) => values[l],
            (None, Some(&r)) => values[r],
            (None, None) => unreachable!(),
        };
    }
    Ok(gaps)
}

pub(crate) fn fill_gaps_2d(values: &mut [f64], ok: &[bool], n: usize) -> crate::Result<usize> {
    let mut row_ok = vec![false; n];
    let mut gaps = 0;
    for i in 0..n {
        let r = i * n..(i + 1) * n;
        if ok[r.clone()].iter().any(|&b| b) {
            gaps += fill_gaps(&mut values[r.clone()], &ok[r])?;
            row_ok[i] = true;
        }
    }
    if !row_ok.iter().any(|&b| b) {
        return Err(FdaError::AllDegenerate);
    }
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = values[i * n + j];
        }
        gaps += fill_gaps(&mut col, &row_ok)?;
        for i in 0..n {
            values[i * n + j] = col[i];
        }
    }
    Ok(gaps)
}
