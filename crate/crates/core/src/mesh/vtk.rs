//! Legacy ASCII VTK (`UNSTRUCTURED_GRID`, triangle cells) writer and a small
//! reader for the subset this crate writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::solver::FlowSolution;

const VTK_TRIANGLE: u32 = 5;

pub fn export_vtk(m: &TriMesh, sol: Option<&FlowSolution>, path: impl AsRef<Path>) -> Result<()> {
    if let Some(s) = sol {
        if s.velocity.len() != m.n_nodes() || s.pressure.len() != m.n_nodes() {
            return Err(Error::ShapeMismatch {
                expected: m.n_nodes(),
                got: s.velocity.len(),
            });
        }
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("shapeopt mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", m.n_nodes());
    for p in &m.nodes {
        let _ = writeln!(out, "{} {} 0", p[0], p[1]);
    }
    let nt = m.triangles.len();
    let _ = writeln!(out, "CELLS {} {}", nt, 4 * nt);
    for t in &m.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "{VTK_TRIANGLE}");
    }
    if let Some(s) = sol {
        let _ = writeln!(out, "POINT_DATA {}", m.n_nodes());
        out.push_str("VECTORS velocity double\n");
        for v in &s.velocity {
            let _ = writeln!(out, "{} {} 0", v[0], v[1]);
        }
        out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
        for p in &s.pressure {
            let _ = writeln!(out, "{p}");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Contents of a file produced by [`export_vtk`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub point_data_count: Option<usize>,
    pub velocity: Vec<[f64; 3]>,
    pub pressure: Vec<f64>,
}

pub fn read_vtk(path: impl AsRef<Path>) -> Result<VtkData> {
    let text = fs::read_to_string(path)?;
    let bad = |msg: &str| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()));
    let mut lines = text.lines();
    if !lines.next().is_some_and(|l| l.starts_with("# vtk DataFile")) {
        return Err(bad("missing VTK header"));
    }
    lines.next();
    if lines.next() != Some("ASCII") {
        return Err(bad("only ASCII VTK is supported"));
    }
    if lines.next() != Some("DATASET UNSTRUCTURED_GRID") {
        return Err(bad("expected an unstructured grid"));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut data = VtkData::default();
    let num = |t: Option<&str>| -> Result<f64> {
        t.and_then(|s| s.parse().ok()).ok_or_else(|| bad("malformed number"))
    };
    let count = |t: Option<&str>| -> Result<usize> {
        t.and_then(|s| s.parse().ok()).ok_or_else(|| bad("malformed count"))
    };
    while let Some(section) = tokens.next() {
        match section {
            "POINTS" => {
                let n = count(tokens.next())?;
                tokens.next();
                for _ in 0..n {
                    data.points.push([num(tokens.next())?, num(tokens.next())?, num(tokens.next())?]);
                }
            }
            "CELLS" => {
                let n = count(tokens.next())?;
                tokens.next();
                for _ in 0..n {
                    if count(tokens.next())? != 3 {
                        return Err(bad("non-triangular cell"));
                    }
                    data.triangles
                        .push([count(tokens.next())?, count(tokens.next())?, count(tokens.next())?]);
                }
            }
            "CELL_TYPES" => {
                let n = count(tokens.next())?;
                for _ in 0..n {
                    if count(tokens.next())? != VTK_TRIANGLE as usize {
                        return Err(bad("unexpected cell type"));
                    }
                }
            }
            "POINT_DATA" => data.point_data_count = Some(count(tokens.next())?),
            "VECTORS" => {
                tokens.next();
                tokens.next();
                for _ in 0..data.point_data_count.unwrap_or(0) {
                    data.velocity.push([num(tokens.next())?, num(tokens.next())?, num(tokens.next())?]);
                }
            }
            "SCALARS" => {
                tokens.next();
                tokens.next();
                tokens.next();
                tokens.next();
                tokens.next();
                for _ in 0..data.point_data_count.unwrap_or(0) {
                    data.pressure.push(num(tokens.next())?);
                }
            }
            other => return Err(bad(&format!("unexpected token {other}"))),
        }
    }
    Ok(data)
}
