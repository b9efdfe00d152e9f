//! Stationary, inertia-free, shear-thinning Stokes flow on triangle meshes.
//!
//! Equal-order linear velocity/pressure elements with PSPG stabilization;
//! the Carreau viscosity is lagged by Picard iteration. Each linear system is
//! solved by banded elimination after a reverse Cuthill–McKee renumbering.

mod banded;
mod ordering;
mod rheology;

pub use rheology::{carreau_viscosity, shear_rate, FluidProperties};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use banded::BandMatrix;
use ordering::{bandwidth, reverse_cuthill_mckee};

use crate::error::{Error, Result};
use crate::mesh::{signed_area, BoundaryTag, TriMesh};
use crate::spline::Point2;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverFailure {
    #[error("mesh is tangled (element {element} has signed area {area:e})")]
    TangledMesh { element: usize, area: f64 },
    #[error("linear solve broke down at unknown {column}")]
    Singular { column: usize },
    #[error("Picard iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("no boundary condition given for {0:?}")]
    MissingBoundary(BoundaryTag),
    #[error("solution contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    Dirichlet(Point2),
    NoSlip,
    /// `σ·n = 0`.
    TractionFree,
    /// `(η ∇v - p I)·n = 0`, the "do-nothing" outflow that admits fully
    /// developed profiles exactly. Used for solver verification.
    PseudoTraction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    conditions: Vec<(BoundaryTag, BoundaryCondition)>,
}

impl BoundarySpec {
    pub fn new(conditions: Vec<(BoundaryTag, BoundaryCondition)>) -> Self {
        Self { conditions }
    }

    /// Inflow `(0, -0.45)` through the stem, no-slip walls, free outflows.
    pub fn tjunction() -> Self {
        Self::new(vec![
            (BoundaryTag::Inflow, BoundaryCondition::Dirichlet([0.0, -0.45])),
            (BoundaryTag::Wall, BoundaryCondition::NoSlip),
            (BoundaryTag::OutLeft, BoundaryCondition::TractionFree),
            (BoundaryTag::OutRight, BoundaryCondition::TractionFree),
        ])
    }

    /// Inflow `(0.45, 0)` at the wide end.
    pub fn channel() -> Self {
        Self::channel_with_inflow([0.45, 0.0])
    }

    pub fn channel_with_inflow(v: Point2) -> Self {
        Self::new(vec![
            (BoundaryTag::Inflow, BoundaryCondition::Dirichlet(v)),
            (BoundaryTag::Wall, BoundaryCondition::NoSlip),
            (BoundaryTag::Out, BoundaryCondition::TractionFree),
        ])
    }

    pub fn get(&self, tag: BoundaryTag) -> Option<BoundaryCondition> {
        self.conditions.iter().find(|(t, _)| *t == tag).map(|&(_, c)| c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub picard_tol: f64,
    pub max_picard: usize,
    pub stab_scale: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            picard_tol: 1e-6,
            max_picard: 50,
            stab_scale: 1.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.picard_tol > 0.0 && self.max_picard >= 1 && self.stab_scale > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid solver settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub velocity: Vec<Point2>,
    pub pressure: Vec<f64>,
    pub picard_iterations: usize,
    pub converged: bool,
}

/// Per-topology solver state: the node renumbering and band widths are
/// reused across all deformations of one base mesh.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    n_nodes: usize,
    perm: Vec<usize>,
    half_band: usize,
    /// Owning triangle of every boundary edge, in mesh order.
    edge_owner: Vec<usize>,
    /// Relative velocity update of every Picard iteration of the last solve.
    last_history: Vec<f64>,
}

#[derive(Clone, Copy)]
enum NodeConstraint {
    Free,
    Velocity(Point2),
}

impl FlowSolver {
    pub fn new(m: &TriMesh) -> Self {
        let perm = reverse_cuthill_mckee(m.n_nodes(), &m.triangles);
        let bw = bandwidth(&perm, &m.triangles);
        let mut owner = std::collections::HashMap::new();
        for (e, t) in m.triangles.iter().enumerate() {
            for k in 0..3 {
                owner.insert((t[k], t[(k + 1) % 3]), e);
            }
        }
        let edge_owner = m
            .boundary_edges
            .iter()
            .map(|b| owner.get(&(b.nodes[0], b.nodes[1])).copied().unwrap_or(usize::MAX))
            .collect();
        Self {
            n_nodes: m.n_nodes(),
            perm,
            half_band: 3 * bw + 2,
            edge_owner,
            last_history: Vec::new(),
        }
    }

    /// Relative velocity change per Picard iteration of the most recent solve.
    pub fn picard_history(&self) -> &[f64] {
        &self.last_history
    }

    #[inline]
    fn dof(&self, node: usize, comp: usize) -> usize {
        3 * self.perm[node] + comp
    }

    pub fn solve(
        &mut self,
        m: &TriMesh,
        props: &FluidProperties,
        bcs: &BoundarySpec,
        settings: &SolverSettings,
    ) -> Result<FlowSolution> {
        props.validate()?;
        settings.validate()?;
        if m.n_nodes() != self.n_nodes {
            return Err(Error::ShapeMismatch {
                expected: self.n_nodes,
                got: m.n_nodes(),
            });
        }
        let elements = element_geometry(m)?;
        let (constraints, pin_pressure) = node_constraints(m, bcs)?;

        let n = 3 * self.n_nodes;
        let mut matrix = BandMatrix::zeros(n, self.half_band, self.half_band);
        let mut eta = vec![props.a; elements.len()];
        let mut velocity: Vec<Point2> = vec![[0.0; 2]; self.n_nodes];
        let mut pressure = vec![0.0; self.n_nodes];
        self.last_history.clear();

        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=settings.max_picard {
            iterations = it;
            matrix.fill_zero();
            let mut rhs = vec![0.0; n];
            self.assemble(&mut matrix, m, &elements, &eta, props.a, settings.stab_scale);
            self.assemble_pseudo_traction(&mut matrix, m, bcs, &elements, &eta);
            self.apply_constraints(&mut matrix, &mut rhs, &constraints, pin_pressure);
            matrix
                .solve_in_place(&mut rhs)
                .map_err(|e| SolverFailure::Singular { column: e.column })?;
            if rhs.iter().any(|v| !v.is_finite()) {
                return Err(SolverFailure::NonFinite.into());
            }

            let new_velocity: Vec<Point2> = (0..self.n_nodes)
                .map(|k| [rhs[self.dof(k, 0)], rhs[self.dof(k, 1)]])
                .collect();
            for (k, p) in pressure.iter_mut().enumerate() {
                *p = props.a * rhs[self.dof(k, 2)];
            }
            let old_norm = norm(&velocity);
            let new_norm = norm(&new_velocity);
            let change = velocity
                .iter()
                .zip(&new_velocity)
                .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
                .sum::<f64>()
                .sqrt();
            velocity = new_velocity;
            if it > 1 && old_norm > 0.0 && new_norm > 10.0 * old_norm {
                return Err(SolverFailure::Diverged { iteration: it }.into());
            }
            let rel = if new_norm > 0.0 { change / new_norm } else { 0.0 };
            self.last_history.push(rel);
            if (it > 1 && rel < settings.picard_tol) || new_norm == 0.0 || props.c == 0.0 {
                // A Newtonian fluid needs exactly one linear solve.
                converged = true;
                break;
            }
            for (e, el) in elements.iter().enumerate() {
                let gamma = shear_rate(el.velocity_gradient(&velocity));
                eta[e] = carreau_viscosity(gamma, props)?;
            }
        }
        Ok(FlowSolution {
            velocity,
            pressure,
            picard_iterations: iterations,
            converged,
        })
    }

    fn assemble(
        &self,
        matrix: &mut BandMatrix,
        m: &TriMesh,
        elements: &[Element],
        eta: &[f64],
        eta_ref: f64,
        stab_scale: f64,
    ) {
        for ((tri, el), &eta_e) in m.triangles.iter().zip(elements).zip(eta) {
            let area = el.area;
            let tau = stab_scale * el.diameter * el.diameter / (12.0 * eta_e);
            let dofs: [[usize; 3]; 3] =
                std::array::from_fn(|a| std::array::from_fn(|c| self.dof(tri[a], c)));
            for a in 0..3 {
                let (bxa, bya) = (el.gx[a], el.gy[a]);
                for b in 0..3 {
                    let (bxb, byb) = (el.gx[b], el.gy[b]);
                    // 2η ε(u):ε(w)
                    let k = eta_e * area;
                    matrix.add(dofs[a][0], dofs[b][0], k * (2.0 * bxa * bxb + bya * byb));
                    matrix.add(dofs[a][0], dofs[b][1], k * bya * bxb);
                    matrix.add(dofs[a][1], dofs[b][0], k * bxa * byb);
                    matrix.add(dofs[a][1], dofs[b][1], k * (2.0 * bya * byb + bxa * bxb));
                    // -∫ p div w and -∫ q div v, pressure scaled by eta_ref
                    let g = -area / 3.0 * eta_ref;
                    matrix.add(dofs[a][0], dofs[b][2], g * bxa);
                    matrix.add(dofs[a][1], dofs[b][2], g * bya);
                    matrix.add(dofs[a][2], dofs[b][0], g * bxb);
                    matrix.add(dofs[a][2], dofs[b][1], g * byb);
                    // PSPG: -τ ∫ ∇q·∇p
                    matrix.add(
                        dofs[a][2],
                        dofs[b][2],
                        -tau * area * (bxa * bxb + bya * byb) * eta_ref * eta_ref,
                    );
                }
            }
        }
    }

    /// Boundary term `-∫ η (∇v)ᵀ n · w` that turns the natural condition of
    /// the stress form into the pseudo-traction condition.
    fn assemble_pseudo_traction(
        &self,
        matrix: &mut BandMatrix,
        m: &TriMesh,
        bcs: &BoundarySpec,
        elements: &[Element],
        eta: &[f64],
    ) {
        for (edge, &owner) in m.boundary_edges.iter().zip(&self.edge_owner) {
            if bcs.get(edge.tag) != Some(BoundaryCondition::PseudoTraction) || owner == usize::MAX {
                continue;
            }
            let el = &elements[owner];
            let (pa, pb) = (m.nodes[edge.nodes[0]], m.nodes[edge.nodes[1]]);
            // |edge| times the outward unit normal
            let nl = [pb[1] - pa[1], pa[0] - pb[0]];
            let w = -0.5 * eta[owner];
            for &a in &edge.nodes {
                for (b, &node_b) in el.nodes.iter().enumerate() {
                    let grad = [el.gx[b], el.gy[b]];
                    for i in 0..2 {
                        for j in 0..2 {
                            matrix.add(self.dof(a, i), self.dof(node_b, j), w * grad[i] * nl[j]);
                        }
                    }
                }
            }
        }
    }

    fn apply_constraints(
        &self,
        matrix: &mut BandMatrix,
        rhs: &mut [f64],
        constraints: &[NodeConstraint],
        pin_pressure: bool,
    ) {
        // Constraint rows are scaled to the size of the viscous diagonal.
        let mut scale = 0.0;
        let mut count = 0;
        for k in 0..self.n_nodes {
            let d = matrix.get(self.dof(k, 0), self.dof(k, 0)).abs();
            if d > 0.0 {
                scale += d;
                count += 1;
            }
        }
        let scale = if count > 0 { scale / count as f64 } else { 1.0 };
        for (k, c) in constraints.iter().enumerate() {
            if let NodeConstraint::Velocity(v) = c {
                for comp in 0..2 {
                    let row = self.dof(k, comp);
                    matrix.set_identity_row(row, scale);
                    rhs[row] = scale * v[comp];
                }
            }
        }
        if pin_pressure {
            let row = self.dof(0, 2);
            matrix.set_identity_row(row, scale);
            rhs[row] = 0.0;
        }
    }
}

/// One-shot convenience wrapper around [`FlowSolver`].
pub fn solve_flow(
    m: &TriMesh,
    props: &FluidProperties,
    bcs: &BoundarySpec,
    settings: &SolverSettings,
) -> Result<FlowSolution> {
    FlowSolver::new(m).solve(m, props, bcs, settings)
}

struct Element {
    nodes: [usize; 3],
    area: f64,
    diameter: f64,
    gx: [f64; 3],
    gy: [f64; 3],
}

impl Element {
    /// `grad[i][j] = ∂v_i/∂x_j`, constant on the element.
    fn velocity_gradient(&self, v: &[Point2]) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for a in 0..3 {
            let va = v[self.nodes[a]];
            for i in 0..2 {
                g[i][0] += va[i] * self.gx[a];
                g[i][1] += va[i] * self.gy[a];
            }
        }
        g
    }
}

fn element_geometry(m: &TriMesh) -> Result<Vec<Element>> {
    m.triangles
        .iter()
        .enumerate()
        .map(|(e, t)| {
            let [p1, p2, p3] = t.map(|k| m.nodes[k]);
            let area = signed_area(p1, p2, p3);
            if !(area > 0.0) {
                return Err(SolverFailure::TangledMesh { element: e, area }.into());
            }
            let inv = 1.0 / (2.0 * area);
            let gx = [(p2[1] - p3[1]) * inv, (p3[1] - p1[1]) * inv, (p1[1] - p2[1]) * inv];
            let gy = [(p3[0] - p2[0]) * inv, (p1[0] - p3[0]) * inv, (p2[0] - p1[0]) * inv];
            let len = |a: Point2, b: Point2| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let diameter = len(p1, p2).max(len(p2, p3)).max(len(p3, p1));
            Ok(Element {
                nodes: *t,
                area,
                diameter,
                gx,
                gy,
            })
        })
        .collect()
}

/// Velocity constraints per node; no-slip wins over inflow at shared corners.
fn node_constraints(m: &TriMesh, bcs: &BoundarySpec) -> Result<(Vec<NodeConstraint>, bool)> {
    let mut out = vec![NodeConstraint::Free; m.n_nodes()];
    let mut no_slip = vec![false; m.n_nodes()];
    let mut has_natural = false;
    for e in &m.boundary_edges {
        let cond = bcs
            .get(e.tag)
            .ok_or(SolverFailure::MissingBoundary(e.tag))?;
        match cond {
            BoundaryCondition::NoSlip => {
                for &k in &e.nodes {
                    no_slip[k] = true;
                }
            }
            BoundaryCondition::Dirichlet(v) => {
                for &k in &e.nodes {
                    out[k] = NodeConstraint::Velocity(v);
                }
            }
            BoundaryCondition::TractionFree | BoundaryCondition::PseudoTraction => has_natural = true,
        }
    }
    for (c, &ns) in out.iter_mut().zip(&no_slip) {
        if ns {
            *c = NodeConstraint::Velocity([0.0; 2]);
        }
    }
    Ok((out, !has_natural))
}

fn norm(v: &[Point2]) -> f64 {
    v.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>().sqrt()
}
