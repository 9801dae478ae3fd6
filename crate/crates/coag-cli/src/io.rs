//! CSV and JSON output with fixed formatting, and reading profiles back.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use coag_core::error::CoagError;
use coag_core::grids::QuadratureGrid;
use coag_core::operators::LaplaceProfile;
use serde::Serialize;

use crate::CliError;

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    fs::write(path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub const PROFILE_HEADER: [&str; 6] = ["q", "F", "F_d1", "F_d2", "Q", "M"];

/// Profile rows, led by `q = 0` where only `F` is defined.
pub fn profile_rows(f: &LaplaceProfile, fbar: &LaplaceProfile) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0, f.v0, f64::NAN, f64::NAN, 0.0, f.v0 - fbar.v0]];
    for i in 0..f.len() {
        let v = f.values[i];
        rows.push(vec![f.q()[i], v, f.d1[i], f.d2[i], f.v0 - v, v - fbar.values[i]]);
    }
    rows
}

/// Reads a profile written by `solve`. The nodes must form a log-spaced grid.
pub fn read_profile(path: &Path, rho: f64) -> Result<LaplaceProfile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let bad = |m: String| CliError::Core(CoagError::Config(format!("{}: {m}", path.display())));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (iq, ifv, id1, id2) = (find("q")?, find("F")?, find("F_d1")?, find("F_d2")?);
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64, CliError> {
            cells
                .get(i)
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {}: unreadable column {i}", k + 2)))
        };
        rows.push([get(iq)?, get(ifv)?, get(id1)?, get(id2)?]);
    }
    if rows.first().map(|r| r[0]) != Some(0.0) {
        return Err(bad("first row must be q = 0".into()));
    }
    let v0 = rows[0][1];
    let body = &rows[1..];
    let n = body.len();
    if n < 12 {
        return Err(bad(format!("{n} grid rows, need at least 12")));
    }
    let grid = QuadratureGrid::log_spaced(body[0][0], body[n - 1][0], n)?;
    for (node, r) in grid.nodes.iter().zip(body) {
        if (node - r[0]).abs() > 1e-12 * node {
            return Err(bad(format!("node {} is not on a log-spaced grid", r[0])));
        }
    }
    let col = |j: usize| body.iter().map(|r| r[j]).collect();
    Ok(LaplaceProfile::new(Arc::new(grid), rho, v0, col(1), col(2), col(3))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_round_trip_is_exact() {
        let g = Arc::new(QuadratureGrid::log_spaced(1e-6, 1e4, 50).unwrap());
        let f = LaplaceProfile::fbar(g, 0.7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        write_csv(&p, &PROFILE_HEADER, &profile_rows(&f, &f)).unwrap();
        let back = read_profile(&p, 0.7).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.d1, f.d1);
        assert_eq!(back.v0, f.v0);
    }

    #[test]
    fn off_grid_nodes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let mut rows = vec![vec![0.0, 1.0, 0.0, 0.0]];
        rows.extend((0..20).map(|i| vec![1.0 + i as f64, 1.0, 0.0, 0.0]));
        write_csv(&p, &["q", "F", "F_d1", "F_d2"], &rows).unwrap();
        assert!(matches!(read_profile(&p, 0.7), Err(CliError::Core(CoagError::Config(_)))));
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }
}
