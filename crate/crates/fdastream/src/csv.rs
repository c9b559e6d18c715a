//! CSV emitters for curves, surfaces and principal components, and a
//! reader for long-format surfaces.

use std::fmt::Write as _;
use std::path::Path;

use fdastream_core::{CurveEstimate, FpcaResult, GridSpec, SurfaceEstimate};

use crate::error::{IoError, Result};

/// `t,value` rows.
pub fn curve_csv(c: &CurveEstimate) -> String {
    let mut out = String::from("t,value\n");
    for (i, v) in c.values.iter().enumerate() {
        writeln!(out, "{},{}", c.grid.point(i), v).unwrap();
    }
    out
}

/// Long format `s,t,value`.
pub fn surface_csv(s: &SurfaceEstimate) -> String {
    let n = s.grid.len();
    let mut out = String::from("s,t,value\n");
    for i in 0..n {
        for j in 0..n {
            writeln!(
                out,
                "{},{},{}",
                s.grid.point(i),
                s.grid.point(j),
                s.values[i * n + j]
            )
            .unwrap();
        }
    }
    out
}

/// Header `t,phi1,…`, then an `eigenvalue` row and an `fve` row, then one
/// row per grid point.
pub fn fpca_csv(r: &FpcaResult) -> String {
    let k = r.eigenfunctions.len().max(r.fve.len());
    let mut out = String::from("t");
    for i in 1..=k {
        write!(out, ",phi{i}").unwrap();
    }
    out.push('\n');
    out.push_str("eigenvalue");
    for i in 0..k {
        write!(out, ",{}", r.eigenvalues.get(i).copied().unwrap_or(0.0)).unwrap();
    }
    out.push_str("\nfve");
    for f in &r.fve {
        write!(out, ",{f}").unwrap();
    }
    out.push('\n');
    if r.degenerate {
        out.push_str("# degenerate spectrum: FVE undefined\n");
    }
    for g in 0..r.grid.len() {
        write!(out, "{}", r.grid.point(g)).unwrap();
        for phi in &r.eigenfunctions {
            write!(out, ",{}", phi[g]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads a long-format `s,t,value` surface on an equispaced square grid.
pub fn read_surface(path: &Path) -> Result<SurfaceEstimate> {
    let text = std::fs::read_to_string(path)?;
    let err = |msg: String| IoError::Csv {
        path: path.display().to_string(),
        msg,
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('s')) {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        if f.len() != 3 {
            return Err(err(format!("line {}: expected 3 fields", i + 1)));
        }
        rows.push((f[0], f[1], f[2]));
    }
    let mut axis: Vec<f64> = rows.iter().map(|r| r.0).collect();
    axis.sort_by(f64::total_cmp);
    axis.dedup();
    let n = axis.len();
    if n < 2 || rows.len() != n * n {
        return Err(err(format!(
            "{} rows do not form a square grid",
            rows.len()
        )));
    }
    let grid = GridSpec::new(axis[0], axis[n - 1], n)?;
    let tol = 1e-9 * grid.width();
    let index = |x: f64| -> Result<usize> {
        let i = ((x - grid.lo()) / grid.spacing()).round();
        if i < 0.0 || i as usize >= n || (grid.point(i as usize) - x).abs() > tol {
            return Err(err(format!("coordinate {x} is off the equispaced grid")));
        }
        Ok(i as usize)
    };
    let mut values = vec![f64::NAN; n * n];
    for (s, t, v) in rows {
        values[index(s)? * n + index(t)?] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(err("missing grid cells".into()));
    }
    Ok(SurfaceEstimate::from_values(grid, values)?)
}
