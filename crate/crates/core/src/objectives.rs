//! Scalar objectives from a flow solution: boundary mass flows, the
//! left/right mass-flow ratio and the patch-wise outlet homogeneity.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, TriMesh};
use crate::solver::FlowSolution;

/// Mass flow `ρ ∫ v·n dS` through all edges carrying `tag`, with `n` the
/// outward normal. Trapezoidal quadrature, exact for linear velocity.
pub fn boundary_mass_flow(m: &TriMesh, sol: &FlowSolution, tag: BoundaryTag, rho: f64) -> Result<f64> {
    if !m.has_tag(tag) {
        return Err(Error::Config(format!("mesh has no {tag:?} boundary")));
    }
    let flux: f64 = m
        .edges_with_tag(tag)
        .map(|e| {
            let [a, b] = e.nodes;
            let (pa, pb) = (m.nodes[a], m.nodes[b]);
            // (dy, -dx) is |edge| times the outward unit normal for CCW edges
            let nl = [pb[1] - pa[1], pa[0] - pb[0]];
            let (va, vb) = (sol.velocity[a], sol.velocity[b]);
            0.5 * ((va[0] + vb[0]) * nl[0] + (va[1] + vb[1]) * nl[1])
        })
        .sum();
    Ok(rho * flux)
}

/// `|ṁ_left / ṁ_right|`.
pub fn mass_flow_ratio(m: &TriMesh, sol: &FlowSolution, rho: f64) -> Result<f64> {
    let left = boundary_mass_flow(m, sol, BoundaryTag::OutLeft, rho)?;
    let right = boundary_mass_flow(m, sol, BoundaryTag::OutRight, rho)?;
    if right.abs() <= 1e-14 * left.abs() || !right.is_finite() {
        return Err(Error::DegenerateFlow(format!(
            "right outflow carries no mass (left {left:e}, right {right:e})"
        )));
    }
    Ok((left / right).abs())
}

/// Contiguous equal-length patches along one outflow boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSpec {
    /// Edges in boundary order with the arclength at their start and end.
    chain: Vec<([usize; 2], f64, f64)>,
    /// Patch `i` covers arclengths `breaks[i] ..= breaks[i + 1]`.
    breaks: Vec<f64>,
}

impl PatchSpec {
    pub fn equal(m: &TriMesh, tag: BoundaryTag, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("need at least one patch".into()));
        }
        let edges: Vec<[usize; 2]> = m.edges_with_tag(tag).map(|e| e.nodes).collect();
        if edges.is_empty() {
            return Err(Error::Config(format!("mesh has no {tag:?} boundary")));
        }
        let by_start: HashMap<usize, [usize; 2]> = edges.iter().map(|e| (e[0], *e)).collect();
        let ends: std::collections::HashSet<usize> = edges.iter().map(|e| e[1]).collect();
        let heads: Vec<&[usize; 2]> = edges.iter().filter(|e| !ends.contains(&e[0])).collect();
        if heads.len() != 1 {
            return Err(Error::Config(format!("{tag:?} boundary is not a single open chain")));
        }
        let mut chain = Vec::with_capacity(edges.len());
        let mut s = 0.0;
        let mut cur = *heads[0];
        loop {
            let (a, b) = (m.nodes[cur[0]], m.nodes[cur[1]]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            chain.push((cur, s, s + len));
            s += len;
            match by_start.get(&cur[1]) {
                Some(next) => cur = *next,
                None => break,
            }
        }
        if chain.len() != edges.len() {
            return Err(Error::Config(format!("{tag:?} boundary is not contiguous")));
        }
        let breaks = (0..=k).map(|i| s * i as f64 / k as f64).collect();
        Ok(Self { chain, breaks })
    }

    pub fn n_patches(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn patch_lengths(&self) -> Vec<f64> {
        self.breaks.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn total_length(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// `∫ v·n dS` over each patch.
    fn patch_fluxes(&self, m: &TriMesh, sol: &FlowSolution) -> Vec<f64> {
        let mut flux = vec![0.0; self.n_patches()];
        for &([a, b], s0, s1) in &self.chain {
            let (pa, pb) = (m.nodes[a], m.nodes[b]);
            let len = s1 - s0;
            let n = [(pb[1] - pa[1]) / len, (pa[0] - pb[0]) / len];
            let fa = sol.velocity[a][0] * n[0] + sol.velocity[a][1] * n[1];
            let fb = sol.velocity[b][0] * n[0] + sol.velocity[b][1] * n[1];
            let at = |s: f64| fa + (fb - fa) * (s - s0) / len;
            for (i, w) in self.breaks.windows(2).enumerate() {
                let (t0, t1) = (s0.max(w[0]), s1.min(w[1]));
                if t1 > t0 {
                    flux[i] += 0.5 * (t1 - t0) * (at(t0) + at(t1));
                }
            }
        }
        flux
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchQuality {
    pub v_out: f64,
    pub omega: f64,
    pub q: f64,
}

/// `(ω - 1) / max(ω, 1)`: zero for the patch mean equal to the outlet mean,
/// in `[-1, 0)` for slow patches and `(0, 1)` for fast ones.
pub fn homogeneity(omega: f64) -> f64 {
    (omega - 1.0) / omega.max(1.0)
}

pub fn patch_quality(m: &TriMesh, sol: &FlowSolution, patches: &PatchSpec, rho: f64) -> Result<Vec<PatchQuality>> {
    let fluxes = patches.patch_fluxes(m, sol);
    let areas = patches.patch_lengths();
    let total: f64 = fluxes.iter().sum();
    let v_avg = (rho * total) / (rho * patches.total_length());
    if v_avg == 0.0 || !v_avg.is_finite() {
        return Err(Error::DegenerateFlow("outlet mean velocity is zero".into()));
    }
    Ok(fluxes
        .iter()
        .zip(&areas)
        .map(|(&f, &a)| {
            let v_out = (rho * f) / (rho * a);
            let omega = v_out / v_avg;
            PatchQuality {
                v_out,
                omega,
                q: homogeneity(omega),
            }
        })
        .collect())
}

/// Sum of squared patch criteria.
pub fn quality_sum(q: &[f64]) -> f64 {
    q.iter().map(|x| x * x).sum()
}

/// Everything the environments and the `solve` command report.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectiveReport {
    pub mass_flows: Vec<(BoundaryTag, f64)>,
    pub mu: Option<f64>,
    pub patches: Vec<PatchQuality>,
    pub q: Option<f64>,
}

impl ObjectiveReport {
    pub fn mass_flow(&self, tag: BoundaryTag) -> Option<f64> {
        self.mass_flows.iter().find(|(t, _)| *t == tag).map(|&(_, v)| v)
    }

    /// `|Σ ṁ| / |ṁ_in|` over all tagged open boundaries.
    pub fn mass_imbalance(&self) -> Option<f64> {
        let inflow = self.mass_flow(BoundaryTag::Inflow)?;
        let net: f64 = self
            .mass_flows
            .iter()
            .filter(|(t, _)| *t != BoundaryTag::Wall)
            .map(|&(_, v)| v)
            .sum();
        Some(net.abs() / inflow.abs())
    }

    /// Column names and values for the one-row objectives CSV.
    pub fn csv_columns(&self) -> Vec<(String, f64)> {
        let mut cols: Vec<(String, f64)> = self
            .mass_flows
            .iter()
            .map(|(t, v)| (format!("mdot_{}", tag_name(*t)), *v))
            .collect();
        if let Some(mu) = self.mu {
            cols.push(("mu".into(), mu));
        }
        for (i, p) in self.patches.iter().enumerate() {
            cols.push((format!("v_out_{}", i + 1), p.v_out));
            cols.push((format!("omega_{}", i + 1), p.omega));
            cols.push((format!("q_out_{}", i + 1), p.q));
        }
        if let Some(q) = self.q {
            cols.push(("q".into(), q));
        }
        cols
    }
}

pub fn tag_name(t: BoundaryTag) -> &'static str {
    match t {
        BoundaryTag::Inflow => "inflow",
        BoundaryTag::Wall => "wall",
        BoundaryTag::OutLeft => "out_left",
        BoundaryTag::OutRight => "out_right",
        BoundaryTag::Out => "out",
    }
}

pub fn tjunction_report(m: &TriMesh, sol: &FlowSolution, rho: f64) -> Result<ObjectiveReport> {
    let mass_flows = [BoundaryTag::Inflow, BoundaryTag::OutLeft, BoundaryTag::OutRight]
        .into_iter()
        .map(|t| Ok((t, boundary_mass_flow(m, sol, t, rho)?)))
        .collect::<Result<_>>()?;
    Ok(ObjectiveReport {
        mass_flows,
        mu: Some(mass_flow_ratio(m, sol, rho)?),
        ..Default::default()
    })
}

pub fn channel_report(m: &TriMesh, sol: &FlowSolution, patches: &PatchSpec, rho: f64) -> Result<ObjectiveReport> {
    let mass_flows = [BoundaryTag::Inflow, BoundaryTag::Out]
        .into_iter()
        .map(|t| Ok((t, boundary_mass_flow(m, sol, t, rho)?)))
        .collect::<Result<_>>()?;
    let pq = patch_quality(m, sol, patches, rho)?;
    let q = quality_sum(&pq.iter().map(|p| p.q).collect::<Vec<_>>());
    Ok(ObjectiveReport {
        mass_flows,
        mu: None,
        patches: pq,
        q: Some(q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_channel, generate_tjunction, BoundaryEdge};
    use proptest::prelude::*;

    fn field(m: &TriMesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> FlowSolution {
        FlowSolution {
            velocity: m.nodes.iter().map(|&p| f(p)).collect(),
            pressure: vec![0.0; m.n_nodes()],
            picard_iterations: 1,
            converged: true,
        }
    }

    /// Unit square with a single outflow edge along y = 0..1 at x = 1.
    fn square() -> TriMesh {
        TriMesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            boundary_edges: vec![
                BoundaryEdge { nodes: [0, 1], tag: BoundaryTag::Wall },
                BoundaryEdge { nodes: [1, 2], tag: BoundaryTag::Out },
                BoundaryEdge { nodes: [2, 3], tag: BoundaryTag::Wall },
                BoundaryEdge { nodes: [3, 0], tag: BoundaryTag::Inflow },
            ],
        }
    }

    #[test]
    fn uniform_outflow() {
        let m = square();
        let sol = field(&m, |_| [0.45, 0.0]);
        let mdot = boundary_mass_flow(&m, &sol, BoundaryTag::Out, 1000.0).unwrap();
        assert!((mdot - 450.0).abs() < 1e-10);
        let inflow = boundary_mass_flow(&m, &sol, BoundaryTag::Inflow, 1000.0).unwrap();
        assert!((inflow + 450.0).abs() < 1e-10);
    }

    #[test]
    fn zero_and_linear_profiles() {
        let m = square();
        let zero = field(&m, |_| [0.0, 0.0]);
        assert_eq!(boundary_mass_flow(&m, &zero, BoundaryTag::Out, 1.0).unwrap(), 0.0);
        let linear = field(&m, |p| [p[1], 0.0]);
        assert!((boundary_mass_flow(&m, &linear, BoundaryTag::Out, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_tag_is_an_error() {
        let m = square();
        let sol = field(&m, |_| [1.0, 0.0]);
        assert!(boundary_mass_flow(&m, &sol, BoundaryTag::OutLeft, 1.0).is_err());
        assert!(mass_flow_ratio(&m, &sol, 1.0).is_err());
    }

    #[test]
    fn ratio_of_a_manufactured_t_field() {
        let m = generate_tjunction(0.25).unwrap();
        // flow only towards +x in the bar: left outflow sees nothing
        let sol = field(&m, |p| [p[0] * p[1] * (1.0 - p[1]), 0.0]);
        assert_eq!(mass_flow_ratio(&m, &sol, 1000.0).unwrap(), 0.0);
        let pinched_right = field(&m, |p| [(p[0] - 3.0) * p[1] * (1.0 - p[1]), 0.0]);
        assert!(matches!(mass_flow_ratio(&m, &pinched_right, 1.0), Err(Error::DegenerateFlow(_))));
        let asym = field(&m, |p| [p[0] - 1.0, -p[1]]);
        let r1 = mass_flow_ratio(&m, &asym, 1.0).unwrap();
        let r2 = mass_flow_ratio(&m, &asym, 1000.0).unwrap();
        assert!((r1 - r2).abs() <= 1e-14 * r1);
        assert!((r1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn block_profile_is_optimal() {
        let m = generate_channel(0.1).unwrap();
        let patches = PatchSpec::equal(&m, BoundaryTag::Out, 3).unwrap();
        let sol = field(&m, |_| [0.9, 0.0]);
        let report = channel_report(&m, &sol, &patches, 1000.0).unwrap();
        for p in &report.patches {
            assert!((p.omega - 1.0).abs() < 1e-12);
            assert!(p.q.abs() < 1e-12);
        }
        assert!(report.q.unwrap() < 1e-24);
    }

    #[test]
    fn homogeneity_values() {
        assert_eq!(homogeneity(1.0), 0.0);
        assert_eq!(homogeneity(2.0), 0.5);
        assert_eq!(homogeneity(0.5), -0.5);
        assert_eq!(homogeneity(0.0), -1.0);
    }

    #[test]
    fn quality_sums() {
        assert_eq!(quality_sum(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(quality_sum(&[0.5, -0.5, 0.0]), 0.5);
        assert!((quality_sum(&[-0.1, 0.2, -0.1]) - 0.06).abs() < 1e-15);
    }

    #[test]
    fn patches_split_outlet_into_thirds() {
        let m = generate_channel(0.1).unwrap();
        let patches = PatchSpec::equal(&m, BoundaryTag::Out, 3).unwrap();
        assert_eq!(patches.n_patches(), 3);
        for l in patches.patch_lengths() {
            assert!((l - 1.0 / 3.0).abs() < 1e-12);
        }
        // profile that is fast only in the top third (y > 1/6): patch 3 is the top
        let sol = field(&m, |p| [1.0 + p[1], 0.0]);
        let pq = patch_quality(&m, &sol, &patches, 1.0).unwrap();
        assert!(pq[0].q < 0.0 && pq[1].q.abs() < 1e-12 && pq[2].q > 0.0);
    }

    #[test]
    fn zero_outflow_is_degenerate() {
        let m = generate_channel(0.2).unwrap();
        let patches = PatchSpec::equal(&m, BoundaryTag::Out, 3).unwrap();
        let sol = field(&m, |_| [0.0, 0.0]);
        assert!(matches!(patch_quality(&m, &sol, &patches, 1.0), Err(Error::DegenerateFlow(_))));
    }

    proptest! {
        #[test]
        fn patch_additivity_and_rho_invariance(
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.5f64..2.0, rho in 1e-3f64..1e4, k in 1usize..6,
        ) {
            let m = generate_channel(0.1).unwrap();
            let patches = PatchSpec::equal(&m, BoundaryTag::Out, k).unwrap();
            let sol = field(&m, |p| [c + a * p[1] + b * p[1] * p[1], 0.1 * a]);
            let pq = patch_quality(&m, &sol, &patches, rho).unwrap();
            let pq1 = patch_quality(&m, &sol, &patches, 1.0).unwrap();
            let weighted: f64 = pq.iter().zip(patches.patch_lengths()).map(|(p, l)| p.v_out * l).sum();
            let v_avg = boundary_mass_flow(&m, &sol, BoundaryTag::Out, 1.0).unwrap() / patches.total_length();
            prop_assert!((weighted - v_avg * patches.total_length()).abs() < 1e-12);
            for (x, y) in pq.iter().zip(&pq1) {
                prop_assert!((x.q - y.q).abs() <= 1e-14);
            }
        }
    }
}
