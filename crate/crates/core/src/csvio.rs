//! CSV readers and writers for the command-line artifacts.
//!
//! Numbers are written with the shortest round-trip formatting and rows in a
//! fixed order, so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::apps::{CrossoverScan, OptimizationTrace};
use crate::error::{Error, Result};

fn join_row(values: impl Iterator<Item = f64>) -> String {
    let mut row = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            row.push(',');
        }
        let _ = write!(row, "{v}");
    }
    row
}

/// Eigenvalue curves over shape space: one row per sample,
/// `g0..g{d-1}, mode_0..mode_{k-1}` in mode-identity order.
pub fn write_spectrum_curve(
    path: &Path,
    d_g: usize,
    mode_count: usize,
    rows: &[(Vec<f64>, Vec<f64>)],
) -> Result<()> {
    let mut out = String::new();
    for i in 0..d_g {
        let _ = write!(out, "g{i},");
    }
    let header: Vec<String> = (0..mode_count).map(|i| format!("mode_{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (g, eigenvalues) in rows {
        debug_assert_eq!(g.len(), d_g);
        debug_assert_eq!(eigenvalues.len(), mode_count);
        out.push_str(&join_row(g.iter().chain(eigenvalues.iter()).copied()));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Optimization trace: `step, g..., loss, lambda_0...` per accepted iterate.
pub fn write_trace(path: &Path, d_g: usize, trace: &OptimizationTrace) -> Result<()> {
    let targets = trace.iterates.first().map(|e| e.eigenvalues.len()).unwrap_or(0);
    let mut header = vec!["step".to_string()];
    for i in 0..d_g {
        header.push(format!("g{i}"));
    }
    header.push("loss".to_string());
    for i in 0..targets {
        header.push(format!("lambda_{i}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (step, entry) in trace.iterates.iter().enumerate() {
        let _ = write!(out, "{step},");
        out.push_str(&join_row(
            entry.g.iter().copied().chain(std::iter::once(entry.loss)).chain(entry.eigenvalues.iter().copied()),
        ));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Crossover scan: per row `g..., lambda_i..., gsq_i...`.
pub fn write_scan(path: &Path, d_g: usize, scan: &CrossoverScan) -> Result<()> {
    let modes = scan.eigenvalues.first().map(|e| e.len()).unwrap_or(0);
    let mut header = Vec::new();
    for i in 0..d_g {
        header.push(format!("g{i}"));
    }
    for i in 0..modes {
        header.push(format!("lambda_{i}"));
    }
    for i in 0..modes {
        header.push(format!("gsq_{i}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for ((g, eig), gsq) in scan.path.iter().zip(&scan.eigenvalues).zip(&scan.shape_gradient_sq) {
        out.push_str(&join_row(
            g.as_slice().iter().chain(eig.iter()).chain(gsq.iter()).copied(),
        ));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Field samples: `x0..x{dim-1}, u0..u{ch-1}` per row. Points arrive
/// row-major, values feature-major (channel blocks).
pub fn write_usamples(path: &Path, dim: usize, channels: usize, points: &[f64], values: &[f64]) -> Result<()> {
    let n = points.len() / dim;
    debug_assert_eq!(values.len(), n * channels);
    let mut header = Vec::new();
    for i in 0..dim {
        header.push(format!("x{i}"));
    }
    for i in 0..channels {
        header.push(format!("u{i}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for j in 0..n {
        out.push_str(&join_row(
            points[j * dim..(j + 1) * dim]
                .iter()
                .copied()
                .chain((0..channels).map(|c| values[c * n + j])),
        ));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read field samples written by [`write_usamples`] (or produced elsewhere
/// with the same column layout). Points come back row-major, values
/// feature-major.
pub fn read_usamples(path: &Path, dim: usize, channels: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut row_values = Vec::new();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty samples file".into()))?;
    let expected = dim + channels;
    let header_cols = header.split(',').count();
    if header_cols != expected {
        return Err(Error::Parse(format!(
            "samples file has {header_cols} columns, expected {expected} (x{dim} + u{channels})"
        )));
    }
    for (ln, line) in lines.enumerate() {
        let mut cols = 0;
        for (c, field) in line.split(',').enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("samples row {}: column {c}: {e}", ln + 2)))?;
            if c < dim {
                points.push(v);
            } else {
                row_values.push(v);
            }
            cols += 1;
        }
        if cols != expected {
            return Err(Error::Parse(format!("samples row {}: {cols} columns", ln + 2)));
        }
    }
    let n = points.len() / dim;
    let mut values = vec![0.0; n * channels];
    for j in 0..n {
        for c in 0..channels {
            values[c * n + j] = row_values[j * channels + c];
        }
    }
    Ok((points, values, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usamples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let points = vec![0.0, 0.5, 0.25, 0.75];
        let values = vec![1.5, -2.25];
        write_usamples(&path, 2, 1, &points, &values).unwrap();
        let (p, v, n) = read_usamples(&path, 2, 1).unwrap();
        assert_eq!(n, 2);
        assert_eq!(p, points);
        assert_eq!(v, values);
    }

    #[test]
    fn column_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(&path, "x0,u0\n1.0,2.0\n").unwrap();
        assert!(matches!(read_usamples(&path, 2, 1), Err(Error::Parse(_))));
    }
}
