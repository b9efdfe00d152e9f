//! Free-form deformation of a base mesh through a tensor-product B-spline.
//!
//! The mesh is scaled into the unit parameter square once. A deformed mesh is
//! obtained by displacing control points (in physical units), evaluating the
//! spline at every node's fixed parameter coordinates and mapping back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::spline::{eval_basis, identity_spline, BSpline2D, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    #[serde(rename = "tjunction")]
    TJunction,
    Channel,
}

impl CaseKind {
    pub fn grid_dims(self) -> (usize, usize) {
        match self {
            Self::TJunction => (3, 3),
            Self::Channel => (8, 3),
        }
    }

    pub fn degrees(self) -> (usize, usize) {
        (2, 2)
    }
}

#[derive(Debug, Clone)]
pub struct FfdBox {
    base_mesh: TriMesh,
    spline0: BSpline2D,
    bbox: (Point2, Point2),
    param_coords: Vec<Point2>,
    /// Per node: `(control point index, basis product)` for the non-zero terms.
    weights: Vec<Vec<(usize, f64)>>,
}

/// Per-control-point displacement in physical units plus a freeze mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDisplacement {
    pub displacements: Vec<Point2>,
    pub frozen: Vec<[bool; 2]>,
}

impl ControlDisplacement {
    pub fn zeros(layout: &DofLayout) -> Self {
        Self {
            displacements: vec![[0.0; 2]; layout.frozen.len()],
            frozen: layout.frozen.clone(),
        }
    }

    /// Builds a displacement from the movable coordinates in layout order.
    pub fn from_dofs(layout: &DofLayout, dofs: &[f64]) -> Result<Self> {
        if dofs.len() != layout.n_dofs() {
            return Err(Error::ShapeMismatch {
                expected: layout.n_dofs(),
                got: dofs.len(),
            });
        }
        let mut d = Self::zeros(layout);
        for (&(cp, axis), &value) in layout.dofs.iter().zip(dofs) {
            d.displacements[cp][axis] = value;
        }
        Ok(d)
    }

    pub fn to_dofs(&self, layout: &DofLayout) -> Vec<f64> {
        layout
            .dofs
            .iter()
            .map(|&(cp, axis)| self.displacements[cp][axis])
            .collect()
    }

    /// A uniform translation of every control point, ignoring the mask.
    pub fn uniform(n_cp: usize, d: Point2) -> Self {
        Self {
            displacements: vec![d; n_cp],
            frozen: vec![[false; 2]; n_cp],
        }
    }

    pub fn respects_mask(&self) -> bool {
        self.displacements
            .iter()
            .zip(&self.frozen)
            .all(|(d, f)| (0..2).all(|k| !f[k] || d[k] == 0.0))
    }
}

/// Which control-point coordinates are design variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    pub grid_dims: (usize, usize),
    pub frozen: Vec<[bool; 2]>,
    /// `(control point index, axis)` of each movable coordinate, in order.
    pub dofs: Vec<(usize, usize)>,
}

impl DofLayout {
    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }
}

/// T-junction: every coordinate of the 3×3 grid moves. Channel: the 8×3 grid
/// keeps its inflow and outflow columns fixed and the rest move in `y` only.
pub fn dof_layout(case: CaseKind) -> DofLayout {
    let (nu, nv) = case.grid_dims();
    let frozen: Vec<[bool; 2]> = (0..nu)
        .flat_map(|i| {
            (0..nv).map(move |_| match case {
                CaseKind::TJunction => [false, false],
                CaseKind::Channel if i == 0 || i == nu - 1 => [true, true],
                CaseKind::Channel => [true, false],
            })
        })
        .collect();
    let dofs = frozen
        .iter()
        .enumerate()
        .flat_map(|(cp, f)| (0..2).filter(|&k| !f[k]).map(move |k| (cp, k)))
        .collect();
    DofLayout {
        grid_dims: (nu, nv),
        frozen,
        dofs,
    }
}

impl FfdBox {
    pub fn embed(m: &TriMesh, degrees: (usize, usize), grid_dims: (usize, usize)) -> Result<Self> {
        let spline0 = identity_spline(degrees, grid_dims)?;
        let (lo, hi) = m.bounding_box();
        let ext = [hi[0] - lo[0], hi[1] - lo[1]];
        if !(ext[0] > 0.0 && ext[1] > 0.0) {
            return Err(Error::DegenerateMesh(format!("bounding box has zero width: {ext:?}")));
        }
        let param_coords: Vec<Point2> = m
            .nodes
            .iter()
            .map(|p| {
                [
                    ((p[0] - lo[0]) / ext[0]).clamp(0.0, 1.0),
                    ((p[1] - lo[1]) / ext[1]).clamp(0.0, 1.0),
                ]
            })
            .collect();
        let (ku, kv) = (spline0.knots_u(), spline0.knots_v());
        let nv = kv.n_basis();
        let weights = param_coords
            .iter()
            .map(|uv| {
                let (su, bu) = eval_basis(ku, uv[0])?;
                let (sv, bv) = eval_basis(kv, uv[1])?;
                let mut w = Vec::with_capacity(bu.len() * bv.len());
                for (a, &x) in bu.iter().enumerate() {
                    for (b, &y) in bv.iter().enumerate() {
                        let cp = (su - ku.degree() + a) * nv + (sv - kv.degree() + b);
                        w.push((cp, x * y));
                    }
                }
                Ok(w)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            base_mesh: m.clone(),
            spline0,
            bbox: (lo, hi),
            param_coords,
            weights,
        })
    }

    pub fn for_case(m: &TriMesh, case: CaseKind) -> Result<Self> {
        Self::embed(m, case.degrees(), case.grid_dims())
    }

    pub fn base_mesh(&self) -> &TriMesh {
        &self.base_mesh
    }

    pub fn spline0(&self) -> &BSpline2D {
        &self.spline0
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        self.bbox
    }

    pub fn param_coords(&self) -> &[Point2] {
        &self.param_coords
    }

    pub fn n_control_points(&self) -> usize {
        self.spline0.control_points().len()
    }

    /// Deformation spline in parameter space for the given displacement.
    pub fn deformed_spline(&self, d: &ControlDisplacement) -> Result<BSpline2D> {
        self.check(d)?;
        let ext = self.extent();
        let mut s = self.spline0.clone();
        for (cp, dp) in s.control_points_mut().iter_mut().zip(&d.displacements) {
            cp[0] += dp[0] / ext[0];
            cp[1] += dp[1] / ext[1];
        }
        Ok(s)
    }

    pub fn deform(&self, d: &ControlDisplacement) -> Result<TriMesh> {
        let s = self.deformed_spline(d)?;
        let cps = s.control_points();
        let (lo, ext) = (self.bbox.0, self.extent());
        let nodes = self
            .weights
            .iter()
            .map(|w| {
                let mut uv = [0.0; 2];
                for &(cp, b) in w {
                    uv[0] += b * cps[cp][0];
                    uv[1] += b * cps[cp][1];
                }
                [lo[0] + ext[0] * uv[0], lo[1] + ext[1] * uv[1]]
            })
            .collect();
        Ok(self.base_mesh.with_nodes(nodes))
    }

    /// Physical positions of the deformed control points.
    pub fn control_polygon(&self, d: &ControlDisplacement) -> Result<Vec<Point2>> {
        let s = self.deformed_spline(d)?;
        let (lo, ext) = (self.bbox.0, self.extent());
        Ok(s.control_points()
            .iter()
            .map(|p| [lo[0] + ext[0] * p[0], lo[1] + ext[1] * p[1]])
            .collect())
    }

    fn extent(&self) -> Point2 {
        [self.bbox.1[0] - self.bbox.0[0], self.bbox.1[1] - self.bbox.0[1]]
    }

    fn check(&self, d: &ControlDisplacement) -> Result<()> {
        if d.displacements.len() != self.n_control_points() {
            return Err(Error::ShapeMismatch {
                expected: self.n_control_points(),
                got: d.displacements.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_channel, generate_tjunction, min_signed_area};
    use proptest::prelude::*;

    fn t_box() -> FfdBox {
        FfdBox::for_case(&generate_tjunction(0.1).unwrap(), CaseKind::TJunction).unwrap()
    }

    fn max_node_diff(a: &TriMesh, b: &TriMesh) -> f64 {
        a.nodes
            .iter()
            .zip(&b.nodes)
            .map(|(p, q)| (p[0] - q[0]).abs().max((p[1] - q[1]).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn embedding_scales_bbox_to_unit_square() {
        let b = t_box();
        let m = b.base_mesh();
        assert!(b.param_coords().iter().all(|p| (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])));
        let origin = m.nodes.iter().position(|p| *p == [0.0, 0.0]).unwrap();
        assert_eq!(b.param_coords()[origin], [0.0, 0.0]);
        let center = m.nodes.iter().position(|p| *p == [1.5, 1.0]).unwrap();
        assert_eq!(b.param_coords()[center], [0.5, 0.5]);
    }

    #[test]
    fn degenerate_bbox_rejected() {
        let m = TriMesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![],
        };
        assert!(FfdBox::for_case(&m, CaseKind::TJunction).is_err());
    }

    #[test]
    fn zero_displacement_is_identity() {
        for case in [CaseKind::TJunction, CaseKind::Channel] {
            let m = match case {
                CaseKind::TJunction => generate_tjunction(0.1).unwrap(),
                CaseKind::Channel => generate_channel(0.1).unwrap(),
            };
            let b = FfdBox::for_case(&m, case).unwrap();
            let d = ControlDisplacement::zeros(&dof_layout(case));
            assert!(max_node_diff(&b.deform(&d).unwrap(), &m) < 1e-12);
        }
    }

    #[test]
    fn wrong_displacement_size_rejected() {
        let b = t_box();
        let d = ControlDisplacement::zeros(&dof_layout(CaseKind::Channel));
        assert!(b.deform(&d).is_err());
    }

    #[test]
    fn dof_layouts() {
        let t = dof_layout(CaseKind::TJunction);
        assert_eq!(t.n_dofs(), 18);
        assert_eq!(2 * t.n_dofs(), 36);
        let c = dof_layout(CaseKind::Channel);
        assert_eq!(c.n_dofs(), 18);
        assert_eq!(c.frozen.len(), 24);
        assert!(c.dofs.iter().all(|&(_, axis)| axis == 1));
        for j in 0..3 {
            assert_eq!(c.frozen[j], [true, true]);
            assert_eq!(c.frozen[7 * 3 + j], [true, true]);
        }
    }

    #[test]
    fn dof_round_trip_respects_mask() {
        let layout = dof_layout(CaseKind::Channel);
        let values: Vec<f64> = (0..18).map(|k| 0.01 * k as f64 - 0.05).collect();
        let d = ControlDisplacement::from_dofs(&layout, &values).unwrap();
        assert!(d.respects_mask());
        assert_eq!(d.to_dofs(&layout), values);
        assert!(ControlDisplacement::from_dofs(&layout, &values[..5]).is_err());
    }

    #[test]
    fn channel_inflow_and_outflow_stay_put() {
        let m = generate_channel(0.1).unwrap();
        let b = FfdBox::for_case(&m, CaseKind::Channel).unwrap();
        let layout = dof_layout(CaseKind::Channel);
        let values: Vec<f64> = (0..18).map(|k| if k % 2 == 0 { 0.2 } else { -0.15 }).collect();
        let deformed = b.deform(&ControlDisplacement::from_dofs(&layout, &values).unwrap()).unwrap();
        for (p, q) in m.nodes.iter().zip(&deformed.nodes) {
            if p[0] == 0.0 || p[0] == 4.0 {
                assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tangling_threshold_for_center_control_point() {
        // Bisect the downward center displacement at which the T mesh inverts.
        let b = t_box();
        let layout = dof_layout(CaseKind::TJunction);
        let tangled = |mag: f64| {
            let mut d = ControlDisplacement::zeros(&layout);
            d.displacements[4][1] = -mag;
            min_signed_area(&b.deform(&d).unwrap()).unwrap() <= 0.0
        };
        assert!(!tangled(0.0));
        let (mut lo, mut hi) = (0.0, 1.0);
        while !tangled(hi) {
            hi *= 2.0;
            assert!(hi < 1e3);
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if tangled(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(tangled(hi) && !tangled(lo));
        assert!(tangled(2.0 * hi));
        // A quadratic map along v has a fold once the center CP crosses the
        // neighbouring rows, so the threshold is of order the grid spacing.
        assert!(hi > 0.1 && hi < 4.0, "threshold {hi}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn uniform_displacement_translates(dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let b = t_box();
            let moved = b.deform(&ControlDisplacement::uniform(9, [dx, dy])).unwrap();
            for (p, q) in b.base_mesh().nodes.iter().zip(&moved.nodes) {
                prop_assert!((q[0] - p[0] - dx).abs() < 1e-12 && (q[1] - p[1] - dy).abs() < 1e-12);
            }
            prop_assert_eq!(&moved.triangles, &b.base_mesh().triangles);
            prop_assert_eq!(&moved.boundary_edges, &b.base_mesh().boundary_edges);
        }

        #[test]
        fn single_control_point_is_local(cp in 0usize..24, dy in -0.3f64..0.3) {
            let m = generate_channel(0.1).unwrap();
            let b = FfdBox::for_case(&m, CaseKind::Channel).unwrap();
            let mut d = ControlDisplacement::uniform(24, [0.0, 0.0]);
            d.displacements[cp] = [0.5 * dy, dy];
            let moved = b.deform(&d).unwrap();
            let (ku, kv) = (b.spline0().knots_u(), b.spline0().knots_v());
            let (i, j) = (cp / 3, cp % 3);
            let (tu, tv) = (ku.knots(), kv.knots());
            for (k, uv) in b.param_coords().iter().enumerate() {
                let inside = uv[0] > tu[i] && uv[0] < tu[i + 3] && uv[1] > tv[j] && uv[1] < tv[j + 3];
                let on_clamped_edge = (i == 0 && uv[0] == 0.0) || (i == 7 && uv[0] == 1.0)
                    || (j == 0 && uv[1] == 0.0) || (j == 2 && uv[1] == 1.0);
                if !inside && !on_clamped_edge {
                    let (p, q) = (m.nodes[k], moved.nodes[k]);
                    prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
                }
            }
        }
    }
}
