//! Plain-text file formats.
//!
//! All formats are UTF-8, one record per line, 0-based indices. Blank lines
//! and lines starting with `#` are ignored. Reals are written with Rust's
//! shortest round-trip formatting, so every writer's output reads back to
//! identical values. Writers replace their target atomically.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::constraints::ConstraintList;
use crate::error::{Error, Result};
use crate::graph::PointCloud;
use crate::linalg::SymMatrix;

/// Symmetry tolerance for dense affinity files, relative to `max(1, max|a|)`.
pub const DENSE_SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    /// `x1,...,xd` per line.
    PointsCsv,
    /// `i j w` per line, `w > 0`.
    EdgeList,
    /// `n` lines of `n` comma-separated reals.
    DenseCsv,
}

impl FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "points-csv" => Ok(GraphFormat::PointsCsv),
            "edge-list" => Ok(GraphFormat::EdgeList),
            "dense-csv" => Ok(GraphFormat::DenseCsv),
            _ => Err(format!("unknown format `{s}` (expected points-csv, edge-list or dense-csv)")),
        }
    }
}

struct Lines {
    path: String,
    records: Vec<(usize, String)>,
}

impl Lines {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records: Vec<(usize, String)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim().to_string()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let lines = Self {
            path: path.display().to_string(),
            records,
        };
        if lines.records.is_empty() {
            return Err(lines.error(1, "file has no data lines"));
        }
        Ok(lines)
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn parse<T: FromStr>(&self, line: usize, field: &str, what: &str) -> Result<T> {
        field
            .parse()
            .map_err(|_| self.error(line, format!("cannot parse `{field}` as {what}")))
    }

    fn real(&self, line: usize, field: &str) -> Result<f64> {
        let x: f64 = self.parse(line, field, "a real number")?;
        if !x.is_finite() {
            return Err(self.error(line, format!("non-finite value `{field}`")));
        }
        Ok(x)
    }

    fn triple(&self, line: usize, text: &str) -> Result<(usize, usize, f64)> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(self.error(line, format!("expected `i j w`, found {} fields", fields.len())));
        }
        let i = self.parse(line, fields[0], "a node index")?;
        let j = self.parse(line, fields[1], "a node index")?;
        Ok((i, j, self.real(line, fields[2])?))
    }
}

fn csv_fields(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim)
}

/// Reads `x1,...,xd` rows; with `labeled`, the last column is an integer class label.
pub fn read_points(path: &Path, labeled: bool) -> Result<PointCloud> {
    let lines = Lines::read(path)?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (line, text) in &lines.records {
        let mut fields: Vec<&str> = csv_fields(text).collect();
        if labeled {
            let last = fields.pop().unwrap_or_default();
            labels.push(lines.parse::<usize>(*line, last, "a class label")?);
        }
        if fields.is_empty() {
            return Err(lines.error(*line, "point has no coordinates"));
        }
        match dim {
            None => dim = Some(fields.len()),
            Some(d) if d != fields.len() => {
                return Err(lines.error(*line, format!("expected {d} coordinates, found {}", fields.len())))
            }
            _ => {}
        }
        for f in fields {
            values.push(lines.real(*line, f)?);
        }
    }
    let d = dim.expect("at least one record");
    let coords = DMatrix::from_row_slice(lines.records.len(), d, &values);
    PointCloud::new(coords, labeled.then_some(labels))
}

/// One label per line: a non-negative integer, or `?` for unlabeled.
pub fn read_labels(path: &Path) -> Result<Vec<Option<usize>>> {
    let lines = Lines::read(path)?;
    lines
        .records
        .iter()
        .map(|(line, text)| {
            if text == "?" {
                Ok(None)
            } else {
                lines.parse(*line, text, "a class label or `?`").map(Some)
            }
        })
        .collect()
}

/// Labels that must all be present.
pub fn read_full_labels(path: &Path) -> Result<Vec<usize>> {
    read_labels(path)?
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::InvalidInput(format!("{}: node {i} is unlabeled", path.display()))))
        .collect()
}

/// Reads `i j w` edges. The node count is one past the largest index; a pair
/// given in both directions keeps the larger weight.
pub fn read_edge_list(path: &Path) -> Result<SymMatrix> {
    let lines = Lines::read(path)?;
    let mut edges = Vec::with_capacity(lines.records.len());
    for (line, text) in &lines.records {
        let (i, j, w) = lines.triple(*line, text)?;
        if i == j {
            return Err(lines.error(*line, format!("self-loop on node {i}")));
        }
        if w <= 0.0 {
            return Err(Error::InvalidMatrix(format!(
                "{}:{line}: edge weight must be positive, got {w}",
                lines.path
            )));
        }
        edges.push((i, j, w));
    }
    let n = edges.iter().map(|&(i, j, _)| i.max(j)).max().expect("non-empty") + 1;
    let mut a = DMatrix::zeros(n, n);
    for (i, j, w) in edges {
        let m = f64::max(a[(i, j)], w);
        a[(i, j)] = m;
        a[(j, i)] = m;
    }
    SymMatrix::new(a)
}

/// Reads a square, symmetric, non-negative matrix.
pub fn read_dense(path: &Path) -> Result<SymMatrix> {
    let lines = Lines::read(path)?;
    let n = lines.records.len();
    let mut a = DMatrix::zeros(n, n);
    for (row, (line, text)) in lines.records.iter().enumerate() {
        let fields: Vec<&str> = csv_fields(text).collect();
        if fields.len() != n {
            return Err(lines.error(*line, format!("expected {n} values, found {}", fields.len())));
        }
        for (col, f) in fields.into_iter().enumerate() {
            a[(row, col)] = lines.real(*line, f)?;
        }
    }
    if let Some(x) = a.iter().find(|&&x| x < 0.0) {
        return Err(Error::InvalidMatrix(format!("{}: negative affinity {x}", lines.path)));
    }
    let scale = a.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > DENSE_SYMMETRY_TOL * scale {
                return Err(Error::InvalidMatrix(format!(
                    "{}: not symmetric at ({i}, {j}): {} vs {}",
                    lines.path,
                    a[(i, j)],
                    a[(j, i)]
                )));
            }
        }
    }
    SymMatrix::new(a)
}

/// Reads `i j w` constraints for an `n`-node graph. `i == j` adds to the diagonal of `Q`.
pub fn read_constraints(path: &Path, n: usize) -> Result<ConstraintList> {
    let lines = Lines::read(path)?;
    let mut list = ConstraintList::new(n);
    for (line, text) in &lines.records {
        let (i, j, w) = lines.triple(*line, text)?;
        let pushed = if i == j { list.push_diagonal(i, w) } else { list.push(i, j, w) };
        pushed.map_err(|e| lines.error(*line, e.to_string()))?;
    }
    Ok(list)
}

/// Replaces `path` with `contents` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    std::io::Write::write_all(&mut tmp, contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_text(path: &Path, text: String) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Writes coordinates, with the label as the last column when the cloud has labels and `labeled` is set.
pub fn write_points(path: &Path, points: &PointCloud, labeled: bool) -> Result<()> {
    let labels = if labeled {
        Some(points.labels().ok_or_else(|| Error::InvalidInput("point cloud has no labels".into()))?)
    } else {
        None
    };
    let mut out = String::new();
    for i in 0..points.n() {
        let row: Vec<String> = (0..points.dim()).map(|j| points.coords()[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        if let Some(l) = labels {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    write_text(path, out)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    write_text(path, out)
}

/// Writes the upper triangle's positive entries.
pub fn write_edge_list(path: &Path, a: &SymMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..a.n() {
        for j in (i + 1)..a.n() {
            let w = a.get(i, j);
            if w > 0.0 {
                let _ = writeln!(out, "{i} {j} {w}");
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("graph has no edges to write".into()));
    }
    write_text(path, out)
}

pub fn write_dense(path: &Path, a: &SymMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..a.n() {
        let row: Vec<String> = (0..a.n()).map(|j| a.get(i, j).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, out)
}

/// Writes off-diagonal triples, then diagonal entries as `i i w`.
pub fn write_constraints(path: &Path, list: &ConstraintList) -> Result<()> {
    let mut out = String::new();
    for &(i, j, w) in list.triples() {
        let _ = writeln!(out, "{i} {j} {w}");
    }
    for &(i, w) in list.diagonal() {
        let _ = writeln!(out, "{i} {i} {w}");
    }
    if out.is_empty() {
        out.push_str("# no constraints\n");
    }
    write_text(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::build_laplacian;

    fn scratch(contents: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), contents).unwrap();
        f
    }

    #[test]
    fn toy_edge_list_has_volume_fourteen() {
        let text: String = fixtures::TOY_EDGES.iter().map(|(i, j)| format!("{i} {j} 1\n")).collect();
        let f = scratch(&format!("# toy\n{text}"));
        let g = build_laplacian(read_edge_list(f.path()).unwrap()).unwrap();
        assert_eq!(g.vol(), 14.0);
    }

    #[test]
    fn edge_list_keeps_larger_direction() {
        let f = scratch("0 1 0.5\n1 0 2\n1 2 1\n");
        let a = read_edge_list(f.path()).unwrap();
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 0), 2.0);
    }

    #[test]
    fn empty_file_is_a_format_error() {
        let f = scratch("# only a comment\n\n");
        assert!(matches!(read_edge_list(f.path()), Err(Error::Format { .. })));
        assert!(matches!(read_dense(f.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn parse_error_reports_line() {
        let f = scratch("0 1 1\n# c\n1 x 1\n");
        match read_edge_list(f.path()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dense_checks() {
        let f = scratch("0,1\n1.5,0\n");
        assert!(matches!(read_dense(f.path()), Err(Error::InvalidMatrix(_))));
        let f = scratch("0,-1\n-1,0\n");
        assert!(matches!(read_dense(f.path()), Err(Error::InvalidMatrix(_))));
        let f = scratch("0,1\n1,0,0\n");
        assert!(matches!(read_dense(f.path()), Err(Error::Format { line: 2, .. })));
        let f = scratch("0,1\n1.000000000001,0\n");
        assert!(read_dense(f.path()).is_ok());
    }

    #[test]
    fn toy_dense_degrees() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_dense(&p, &fixtures::toy_affinity()).unwrap();
        let g = build_laplacian(read_dense(&p).unwrap()).unwrap();
        assert_eq!(g.degrees(), &[2.0, 2.0, 3.0, 3.0, 2.0, 2.0]);
    }

    #[test]
    fn negative_edge_is_invalid_matrix() {
        let f = scratch("0 1 -1\n");
        assert!(matches!(read_edge_list(f.path()), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn labels_with_unknowns() {
        let f = scratch("0\n?\n1\n");
        assert_eq!(read_labels(f.path()).unwrap(), vec![Some(0), None, Some(1)]);
        assert!(read_full_labels(f.path()).is_err());
    }

    #[test]
    fn constraints_diagonal_and_range() {
        let f = scratch("0 1 1\n2 2 0.5\n");
        let list = read_constraints(f.path(), 3).unwrap();
        assert_eq!(list.triples(), &[(0, 1, 1.0)]);
        assert_eq!(list.diagonal(), &[(2, 0.5)]);
        let f = scratch("0 1 1\n0 9 1\n");
        assert!(matches!(read_constraints(f.path(), 3), Err(Error::Format { line: 2, .. })));
    }

    #[test]
    fn points_with_label_column() {
        let f = scratch("0.5,1,0\n-2,3e-3,1\n");
        let p = read_points(f.path(), true).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.labels().unwrap(), &[0, 1]);
        let q = read_points(f.path(), false).unwrap();
        assert_eq!(q.dim(), 3);
        let f = scratch("1,2\n3\n");
        assert!(matches!(read_points(f.path(), false), Err(Error::Format { line: 2, .. })));
    }
}
