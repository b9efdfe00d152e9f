//! Closed-form stand-in for the T-junction.
//!
//! The two outlet openings are read off the 3×3 quadratic control grid the way
//! the spline maps them: the left outlet spans `v ∈ [0, 0.5]` of column 0, the
//! right outlet the same range of column 2. Shifting the stem (column 1) in `x`
//! narrows one side and widens the other. The mass-flow ratio follows the
//! cubic flux-gap law of a Newtonian slit, `μ = (o_L / o_R)^3`.

use std::time::Duration;

use super::shape::{Evaluation, Objective, ShapeModel};
use crate::error::{Error, Result};

/// Openings below this width count as a failed simulation.
pub const SURROGATE_MIN_OPENING: f64 = 0.1;

const N_DOFS: usize = 18;
/// Quadratic Bernstein values at `v = 0` and `v = 0.5`, and at `v = 0.75`.
const AT_BOTTOM: [f64; 3] = [1.0, 0.0, 0.0];
const AT_MID: [f64; 3] = [0.25, 0.5, 0.25];
const AT_STEM: [f64; 3] = [0.0625, 0.375, 0.5625];

pub struct SurrogateModel {
    sleep: Duration,
}

impl SurrogateModel {
    pub fn new(sleep_ms: u64) -> Self {
        Self {
            sleep: Duration::from_millis(sleep_ms),
        }
    }

    /// `(o_L, o_R)` for the DOF vector of the T-junction layout.
    pub fn openings(dofs: &[f64]) -> (f64, f64) {
        // DOF 2·cp + axis, cp = 3·i + j
        let d = |i: usize, j: usize, axis: usize| dofs[2 * (3 * i + j) + axis];
        let column_gap = |i: usize| (0..3).map(|j| (AT_MID[j] - AT_BOTTOM[j]) * d(i, j, 1)).sum::<f64>();
        let stem_shift: f64 = (0..3).map(|j| AT_STEM[j] * d(1, j, 0)).sum();
        (
            1.0 + column_gap(0) - 0.5 * stem_shift,
            1.0 + column_gap(2) + 0.5 * stem_shift,
        )
    }

    pub fn mass_flow_ratio(dofs: &[f64]) -> Option<f64> {
        let (l, r) = Self::openings(dofs);
        (l >= SURROGATE_MIN_OPENING && r >= SURROGATE_MIN_OPENING).then(|| (l / r).powi(3))
    }
}

impl ShapeModel for SurrogateModel {
    fn objective(&self) -> Objective {
        Objective::Ratio
    }

    fn n_dofs(&self) -> usize {
        N_DOFS
    }

    fn evaluate(&mut self, dofs: &[f64]) -> Result<Option<Evaluation>> {
        if dofs.len() != N_DOFS {
            return Err(Error::ShapeMismatch {
                expected: N_DOFS,
                got: dofs.len(),
            });
        }
        if !self.sleep.is_zero() {
            std::thread::sleep(self.sleep);
        }
        Ok(Self::mass_flow_ratio(dofs).map(|mu| Evaluation {
            objective: mu,
            features: vec![mu],
        }))
    }
}
