//! Triangulated base geometries with tagged boundaries.
//!
//! Both generators triangulate a structured background grid by splitting
//! every quad along one diagonal. Diagonals are mirrored about the symmetry
//! axis of each geometry so the meshes (and hence the discrete solutions) are
//! exactly mirror-symmetric.

mod vtk;

pub use vtk::{export_vtk, read_vtk, VtkData};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Inflow,
    Wall,
    OutLeft,
    OutRight,
    Out,
}

impl BoundaryTag {
    pub fn is_outflow(self) -> bool {
        matches!(self, Self::OutLeft | Self::OutRight | Self::Out)
    }
}

/// Boundary edge oriented so the domain lies on its left, i.e. in the
/// counter-clockwise order of the triangle that owns it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub nodes: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Smallest signed triangle area; non-positive values flag a tangled mesh.
pub fn min_signed_area(m: &TriMesh) -> Result<f64> {
    if m.triangles.is_empty() {
        return Err(Error::DegenerateMesh("mesh has no triangles".into()));
    }
    Ok(m.triangles
        .iter()
        .map(|t| m.triangle_area(t))
        .fold(f64::INFINITY, f64::min))
}

impl TriMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]])
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.edges_with_tag(tag).next().is_some()
    }

    /// Number of distinct undirected edges.
    pub fn n_edges(&self) -> usize {
        edge_owners(&self.triangles).len()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Same topology and tags, new node positions.
    pub fn with_nodes(&self, nodes: Vec<Point2>) -> Self {
        debug_assert_eq!(nodes.len(), self.nodes.len());
        Self {
            nodes,
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
        }
    }
}

fn edge_owners(triangles: &[[usize; 3]]) -> HashMap<(usize, usize), Vec<(usize, usize)>> {
    let mut owners: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            owners.entry((a.min(b), a.max(b))).or_default().push((a, b));
        }
    }
    owners
}

#[derive(Clone, Copy)]
enum Diagonal {
    /// Splits along lower-left to upper-right.
    Rising,
    /// Splits along lower-right to upper-left.
    Falling,
}

/// Triangulates the cells of an `nx × ny` grid selected by `keep`, placing
/// node `(i, j)` at `place(i, j)` and tagging each boundary edge by its
/// midpoint.
fn structured_mesh(
    nx: usize,
    ny: usize,
    keep: impl Fn(usize, usize) -> bool,
    diagonal: impl Fn(usize, usize) -> Diagonal,
    place: impl Fn(usize, usize) -> Point2,
    tag: impl Fn(Point2) -> BoundaryTag,
) -> TriMesh {
    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut nodes = Vec::new();
    let mut node = |i: usize, j: usize, nodes: &mut Vec<Point2>| {
        let slot = &mut index[j * (nx + 1) + i];
        if *slot == usize::MAX {
            *slot = nodes.len();
            nodes.push(place(i, j));
        }
        *slot
    };
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let a = node(i, j, &mut nodes);
            let b = node(i + 1, j, &mut nodes);
            let c = node(i + 1, j + 1, &mut nodes);
            let d = node(i, j + 1, &mut nodes);
            match diagonal(i, j) {
                Diagonal::Rising => {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                }
                Diagonal::Falling => {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
    }
    let mut boundary: Vec<(usize, usize)> = edge_owners(&triangles)
        .into_values()
        .filter(|o| o.len() == 1)
        .map(|o| o[0])
        .collect();
    boundary.sort_unstable();
    let boundary_edges = boundary
        .into_iter()
        .map(|(a, b)| {
            let (pa, pb) = (nodes[a], nodes[b]);
            BoundaryEdge {
                nodes: [a, b],
                tag: tag([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]),
            }
        })
        .collect();
    TriMesh {
        nodes,
        triangles,
        boundary_edges,
    }
}

fn check_resolution(h: f64, max: f64, what: &str) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::MeshGeneration(format!("target edge length must be positive, got {h}")));
    }
    if h > max {
        return Err(Error::MeshGeneration(format!(
            "target edge length {h} cannot resolve the {what} (needs h <= {max})"
        )));
    }
    Ok(())
}

const GEOM_TOL: f64 = 1e-12;

/// T-junction: bar `[0,3]×[0,1]` with stem `[1,2]×[1,2]`. Flow enters through
/// the top of the stem and leaves through the two bar ends.
pub fn generate_tjunction(h: f64) -> Result<TriMesh> {
    check_resolution(h, 0.5, "stem width")?;
    // Even cells per unit length put the mirror axis x = 1.5 on a grid line.
    let n = 2 * (1.0 / (2.0 * h)).ceil() as usize;
    let s = 1.0 / n as f64;
    Ok(structured_mesh(
        3 * n,
        2 * n,
        |i, j| j < n || (n..2 * n).contains(&i),
        |i, _| {
            if 2 * i + 1 < 3 * n {
                Diagonal::Rising
            } else {
                Diagonal::Falling
            }
        },
        |i, j| [i as f64 * s, j as f64 * s],
        |m| {
            if (m[1] - 2.0).abs() < GEOM_TOL {
                BoundaryTag::Inflow
            } else if m[0].abs() < GEOM_TOL {
                BoundaryTag::OutLeft
            } else if (m[0] - 3.0).abs() < GEOM_TOL {
                BoundaryTag::OutRight
            } else {
                BoundaryTag::Wall
            }
        },
    ))
}

/// Straight-walled channel from an inlet of height `inlet_height` at `x = 0`
/// to an outlet of height `outlet_height` at `x = length`, symmetric about
/// `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub length: f64,
    pub inlet_height: f64,
    pub outlet_height: f64,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        Self {
            length: 4.0,
            inlet_height: 2.0,
            outlet_height: 1.0,
        }
    }
}

impl ChannelGeometry {
    pub fn area(&self) -> f64 {
        0.5 * self.length * (self.inlet_height + self.outlet_height)
    }
}

/// The converging channel used by the homogeneity case.
pub fn generate_channel(h: f64) -> Result<TriMesh> {
    generate_channel_with(&ChannelGeometry::default(), h)
}

pub fn generate_channel_with(geom: &ChannelGeometry, h: f64) -> Result<TriMesh> {
    let min_height = geom.inlet_height.min(geom.outlet_height);
    if !(geom.length > 0.0 && min_height > 0.0) {
        return Err(Error::MeshGeneration(format!("invalid channel geometry {geom:?}")));
    }
    check_resolution(h, 0.5 * min_height, "channel height")?;
    let nx = (geom.length / h).ceil() as usize;
    let ny = 2 * (geom.inlet_height.max(geom.outlet_height) / (2.0 * h)).ceil() as usize;
    let length = geom.length;
    let (h_in, h_out) = (geom.inlet_height, geom.outlet_height);
    Ok(structured_mesh(
        nx,
        ny,
        |_, _| true,
        |_, j| {
            if 2 * j + 1 < ny {
                Diagonal::Rising
            } else {
                Diagonal::Falling
            }
        },
        |i, j| {
            let t = i as f64 / nx as f64;
            let height = h_in + (h_out - h_in) * t;
            let x = if i == nx { length } else { length * t };
            [x, height * (j as f64 / ny as f64 - 0.5)]
        },
        |m| {
            if m[0].abs() < GEOM_TOL {
                BoundaryTag::Inflow
            } else if (m[0] - length).abs() < GEOM_TOL {
                BoundaryTag::Out
            } else {
                BoundaryTag::Wall
            }
        },
    ))
}
