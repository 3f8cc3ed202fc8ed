//! Plain-text output: CSV tables and mesh snapshots.
//!
//! Numbers are written in scientific notation with a fixed number of
//! significant digits, `.` as decimal separator and LF line endings, so
//! identical inputs give byte-identical files.
//!
//! Mesh format:
//!
//! ```text
//! # hmcf-mesh dim=<n> shape=<N1[,N2]>
//! v x y [z]
//! ```
//!
//! one `v` line per grid point in row-major order; curves omit `z`.

use crate::error::{HmcfError, Result};
use crate::flow::Diagnostics;
use crate::grid::{Grid, Immersion, Vec3};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Significant digits that round-trip every `f64`.
pub const ROUND_TRIP_DIGITS: usize = 17;

/// `v` with `digits` significant digits in scientific notation.
pub fn format_number(v: f64, digits: usize) -> String {
    format!("{:.*e}", digits.clamp(1, ROUND_TRIP_DIGITS) - 1, v)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Header plus rows, written in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, mut w: impl Write, digits: usize) -> Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Number(v) => format_number(*v, digits),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_string(&self, digits: usize) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf, digits).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn write_file(&self, path: &Path, digits: usize) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w, digits)?;
        w.flush()?;
        Ok(())
    }
}

/// Scalar diagnostics written per snapshot, in column order.
pub const TRAJECTORY_QUANTITIES: [&str; 6] = ["r_mean", "r_spread", "det_g_min", "h_max", "energy", "area"];

/// Long-format trajectory table `t,quantity,value`.
pub fn trajectory_table(snapshots: &[Diagnostics]) -> CsvTable {
    let mut table = CsvTable::new(&["t", "quantity", "value"]);
    for d in snapshots {
        let values = [d.r_mean, d.r_spread, d.det_g_min, d.h_max, d.energy, d.area];
        for (name, v) in TRAJECTORY_QUANTITIES.iter().zip(values) {
            table.push(vec![d.t.into(), (*name).into(), v.into()]);
        }
    }
    table
}

pub fn write_trajectory_csv(path: &Path, snapshots: &[Diagnostics], digits: usize) -> Result<()> {
    trajectory_table(snapshots).write_file(path, digits)
}

fn coordinate_count(dim: usize) -> usize {
    if dim == 1 {
        2
    } else {
        3
    }
}

pub fn write_mesh(mut w: impl Write, im: &Immersion) -> Result<()> {
    let dim = im.dim();
    let shape: Vec<String> = im.grid().shape().iter().map(|n| n.to_string()).collect();
    writeln!(w, "# hmcf-mesh dim={dim} shape={}", shape.join(","))?;
    let k = coordinate_count(dim);
    for (index, p) in im.points().iter().enumerate() {
        if k == 2 && p.z != 0.0 {
            return Err(HmcfError::InvalidImmersion(format!(
                "curve point {index} leaves the plane; the mesh format stores x y only"
            )));
        }
        let coords: Vec<String> = p.iter().take(k).map(|c| format_number(*c, ROUND_TRIP_DIGITS)).collect();
        writeln!(w, "v {}", coords.join(" "))?;
    }
    Ok(())
}

pub fn write_mesh_file(path: &Path, im: &Immersion) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh(&mut w, im)?;
    w.flush()?;
    Ok(())
}

/// Contents of a mesh file: parameter dimension, grid shape and points.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshData {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub points: Vec<Vec3>,
}

fn mesh_err(line: usize, msg: impl Into<String>) -> HmcfError {
    HmcfError::MeshParse { line, msg: msg.into() }
}

pub fn read_mesh(text: &str) -> Result<MeshData> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| mesh_err(1, "empty file"))?;
    let rest = header
        .strip_prefix("# hmcf-mesh ")
        .ok_or_else(|| mesh_err(1, "missing `# hmcf-mesh` header"))?;
    let mut dim = None;
    let mut shape = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("dim", v)) => dim = v.parse::<usize>().ok(),
            Some(("shape", v)) => shape = v.split(',').map(|s| s.parse::<usize>().ok()).collect::<Option<Vec<_>>>(),
            _ => return Err(mesh_err(1, format!("unexpected header field `{field}`"))),
        }
    }
    let dim = dim.filter(|d| *d == 1 || *d == 2).ok_or_else(|| mesh_err(1, "dim must be 1 or 2"))?;
    let shape = shape
        .filter(|s| s.len() == dim && s.iter().all(|n| *n > 0))
        .ok_or_else(|| mesh_err(1, "shape must list one positive size per dimension"))?;
    let expected: usize = shape.iter().product();
    let k = coordinate_count(dim);
    let mut points = Vec::with_capacity(expected);
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        if parts.next() != Some("v") {
            return Err(mesh_err(line_no, "expected a `v` line"));
        }
        let coords: Vec<f64> = parts
            .map(|s| s.parse::<f64>().map_err(|_| mesh_err(line_no, format!("bad number `{s}`"))))
            .collect::<Result<_>>()?;
        if coords.len() != k {
            return Err(mesh_err(line_no, format!("expected {k} coordinates, found {}", coords.len())));
        }
        points.push(Vec3::new(coords[0], coords[1], if k == 3 { coords[2] } else { 0.0 }));
    }
    if points.len() != expected {
        return Err(mesh_err(
            text.lines().count(),
            format!("expected {expected} points, found {}", points.len()),
        ));
    }
    Ok(MeshData { dim, shape, points })
}

impl MeshData {
    /// Rebuilds the immersion on `grid`, which must match the stored shape.
    /// Spacing and boundary kinds are not part of the file.
    pub fn into_immersion(self, grid: Grid) -> Result<Immersion> {
        if grid.dim() != self.dim || grid.shape() != self.shape {
            return Err(HmcfError::InvalidImmersion(format!(
                "mesh has dim {} shape {:?}, grid has dim {} shape {:?}",
                self.dim,
                self.shape,
                grid.dim(),
                grid.shape()
            )));
        }
        Immersion::new(grid, self.points)
    }
}
