use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carreau fluid parameters plus density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidProperties {
    /// Zero-shear viscosity, kg/(m·s).
    pub a: f64,
    /// Reciprocal transition rate, s.
    pub b: f64,
    /// Slope of the viscosity curve in the pseudoplastic region.
    pub c: f64,
    /// Density, kg/m³. Cancels from every objective.
    pub rho: f64,
}

impl Default for FluidProperties {
    fn default() -> Self {
        Self {
            a: 10935.0,
            b: 0.433,
            c: 0.699,
            rho: 1000.0,
        }
    }
}

impl FluidProperties {
    pub fn newtonian(viscosity: f64) -> Self {
        Self {
            a: viscosity,
            c: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0 && self.b >= 0.0 && (0.0..1.0).contains(&self.c) && self.rho > 0.0;
        if ok && [self.a, self.b, self.c, self.rho].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid fluid properties {self:?}")))
        }
    }
}

/// `η = A / (1 + B γ̇)^C`
pub fn carreau_viscosity(gamma_dot: f64, p: &FluidProperties) -> Result<f64> {
    if !(gamma_dot >= 0.0) {
        return Err(Error::Domain(format!("shear rate must be non-negative, got {gamma_dot}")));
    }
    Ok(p.a / (1.0 + p.b * gamma_dot).powf(p.c))
}

/// `γ̇ = sqrt(2 ε:ε)` with `ε` the symmetric part of `grad_v`, where
/// `grad_v[i][j] = ∂v_i/∂x_j`.
pub fn shear_rate(grad_v: [[f64; 2]; 2]) -> f64 {
    let exx = grad_v[0][0];
    let eyy = grad_v[1][1];
    let exy = 0.5 * (grad_v[0][1] + grad_v[1][0]);
    (2.0 * (exx * exx + eyy * eyy + 2.0 * exy * exy)).sqrt()
}
