use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ffd::{dof_layout, CaseKind, ControlDisplacement, FfdBox};
use crate::mesh::{export_vtk, generate_channel, generate_tjunction, min_signed_area, BoundaryTag, TriMesh};
use crate::objectives::{channel_report, tjunction_report, ObjectiveReport, PatchSpec};
use crate::solver::{solve_flow, BoundarySpec, FluidProperties, SolverSettings};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveCase {
    #[serde(alias = "t-junction")]
    Tjunction,
    Channel,
}

impl SolveCase {
    pub fn kind(self) -> CaseKind {
        match self {
            Self::Tjunction => CaseKind::TJunction,
            Self::Channel => CaseKind::Channel,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Tjunction => "tjunction",
            Self::Channel => "channel",
        }
    }

    fn mesh(self, h: f64) -> Result<TriMesh> {
        match self {
            Self::Tjunction => generate_tjunction(h),
            Self::Channel => generate_channel(h),
        }
    }
}

/// Settings of a one-shot `generate → deform → solve → objectives` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub case: SolveCase,
    pub mesh_h: f64,
    /// Text file of control-point DOFs; see [`read_displacement`].
    pub displacement: Option<PathBuf>,
    pub fluid: FluidProperties,
    pub solver: SolverSettings,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            case: SolveCase::Tjunction,
            mesh_h: 0.05,
            displacement: None,
            fluid: FluidProperties::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl SolveConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mesh_h > 0.0) {
            return Err(Error::Schema("mesh_h must be positive".into()));
        }
        self.fluid.validate()?;
        self.solver.validate()
    }
}

/// Parses DOF values separated by whitespace or commas; `#` starts a
/// comment. The count must match the case's DOF layout.
pub fn read_displacement(path: &Path, case: SolveCase) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut dofs = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Config(format!("{}: {tok:?} is not a number", path.display())))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("{}: non-finite displacement", path.display())));
            }
            dofs.push(v);
        }
    }
    let n = dof_layout(case.kind()).n_dofs();
    if dofs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: dofs.len(),
        });
    }
    Ok(dofs)
}

/// Base mesh, deformed when a displacement file is given. An all-zero
/// displacement returns the base mesh untouched.
fn build_mesh(cfg: &SolveConfig) -> Result<TriMesh> {
    let base = cfg.case.mesh(cfg.mesh_h)?;
    let Some(path) = &cfg.displacement else {
        return Ok(base);
    };
    let dofs = read_displacement(path, cfg.case)?;
    if dofs.iter().all(|&d| d == 0.0) {
        return Ok(base);
    }
    let ffd = FfdBox::for_case(&base, cfg.case.kind())?;
    let d = ControlDisplacement::from_dofs(&dof_layout(cfg.case.kind()), &dofs)?;
    let m = ffd.deform(&d)?;
    let a = min_signed_area(&m)?;
    if a <= 0.0 {
        return Err(Error::DegenerateMesh(format!(
            "deformation tangles the mesh (minimum signed area {a:e})"
        )));
    }
    Ok(m)
}

/// Writes the (possibly deformed) mesh to `out` as VTK; fails without
/// writing if the deformation tangles it. Returns the minimum element area.
pub fn run_deform(cfg: &SolveConfig, out: &Path) -> Result<f64> {
    cfg.validate()?;
    let m = build_mesh(cfg)?;
    export_vtk(&m, None, out)?;
    min_signed_area(&m)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: ObjectiveReport,
    pub picard_iterations: usize,
    pub n_nodes: usize,
    pub n_triangles: usize,
    pub vtk: PathBuf,
    pub csv: PathBuf,
}

/// Runs the pipeline and writes `solution.vtk` and `objectives.csv` into
/// `out_dir`. Nothing is written when the mesh tangles or the solve fails.
pub fn run_solve(cfg: &SolveConfig, out_dir: &Path) -> Result<SolveOutcome> {
    cfg.validate()?;
    let m = build_mesh(cfg)?;
    let bcs = match cfg.case {
        SolveCase::Tjunction => BoundarySpec::tjunction(),
        SolveCase::Channel => BoundarySpec::channel(),
    };
    let sol = solve_flow(&m, &cfg.fluid, &bcs, &cfg.solver)?;
    if !sol.converged {
        return Err(Error::Domain(format!(
            "Picard iteration did not converge within {} iterations",
            cfg.solver.max_picard
        )));
    }
    let report = match cfg.case {
        SolveCase::Tjunction => tjunction_report(&m, &sol, cfg.fluid.rho)?,
        SolveCase::Channel => channel_report(&m, &sol, &PatchSpec::equal(&m, BoundaryTag::Out, 3)?, cfg.fluid.rho)?,
    };
    fs::create_dir_all(out_dir)?;
    let vtk = out_dir.join("solution.vtk");
    let csv = out_dir.join("objectives.csv");
    export_vtk(&m, Some(&sol), &vtk)?;
    write_objectives_csv(&report, cfg.case, sol.picard_iterations, &csv)?;
    Ok(SolveOutcome {
        report,
        picard_iterations: sol.picard_iterations,
        n_nodes: m.n_nodes(),
        n_triangles: m.triangles.len(),
        vtk,
        csv,
    })
}

/// One-row CSV: `case, picard_iterations`, then the report's columns.
pub fn write_objectives_csv(report: &ObjectiveReport, case: SolveCase, picard: usize, path: &Path) -> Result<()> {
    let cols = report.csv_columns();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["case".to_string(), "picard_iterations".to_string()];
    header.extend(cols.iter().map(|(k, _)| k.clone()));
    w.write_record(&header)?;
    let mut row = vec![case.name().to_string(), picard.to_string()];
    row.extend(cols.iter().map(|(_, v)| v.to_string()));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}
