use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rewards::{reward_ch_direct, reward_ch_incremental, reward_t_direct, reward_t_incremental};
use super::{Action, ActionSpace, EnvCase, EnvConfig, Environment, StepInfo, StepResult, Strategy};
use crate::error::{Error, Result};
use crate::ffd::{dof_layout, CaseKind, ControlDisplacement, DofLayout, FfdBox};
use crate::mesh::{generate_channel, generate_tjunction, min_signed_area, BoundaryTag};
use crate::objectives::{channel_report, tjunction_report, PatchSpec};
use crate::solver::{BoundarySpec, FlowSolver};

/// Which scalar the environment drives towards its goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Mass-flow ratio against a sampled target μ*.
    Ratio,
    /// Homogeneity sum against the fixed threshold q*.
    Homogeneity,
}

/// Outcome of one successful geometry evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    /// Leading observation entries: `[μ]` or the per-patch criteria.
    pub features: Vec<f64>,
}

/// Maps a DOF vector to objective values; `None` marks a failed simulation.
pub trait ShapeModel: Send {
    fn objective(&self) -> Objective;
    fn n_dofs(&self) -> usize;
    fn evaluate(&mut self, dofs: &[f64]) -> Result<Option<Evaluation>>;
}

/// Deform → tangling check → Picard solve → objectives.
pub struct FemModel {
    case: CaseKind,
    ffd: FfdBox,
    layout: DofLayout,
    solver: FlowSolver,
    bcs: BoundarySpec,
    patches: Option<PatchSpec>,
    cfg: EnvConfig,
}

impl FemModel {
    pub fn new(cfg: &EnvConfig) -> Result<Self> {
        let (case, mesh, bcs) = match cfg.case {
            EnvCase::TJunction => (CaseKind::TJunction, generate_tjunction(cfg.mesh_h)?, BoundarySpec::tjunction()),
            EnvCase::Channel => (CaseKind::Channel, generate_channel(cfg.mesh_h)?, BoundarySpec::channel()),
            other => return Err(Error::Config(format!("{} is not a FEM case", other.name()))),
        };
        let patches = match case {
            CaseKind::Channel => Some(PatchSpec::equal(&mesh, BoundaryTag::Out, 3)?),
            CaseKind::TJunction => None,
        };
        Ok(Self {
            case,
            solver: FlowSolver::new(&mesh),
            ffd: FfdBox::for_case(&mesh, case)?,
            layout: dof_layout(case),
            bcs,
            patches,
            cfg: cfg.clone(),
        })
    }

    pub fn ffd(&self) -> &FfdBox {
        &self.ffd
    }
}

impl ShapeModel for FemModel {
    fn objective(&self) -> Objective {
        match self.case {
            CaseKind::TJunction => Objective::Ratio,
            CaseKind::Channel => Objective::Homogeneity,
        }
    }

    fn n_dofs(&self) -> usize {
        self.layout.n_dofs()
    }

    fn evaluate(&mut self, dofs: &[f64]) -> Result<Option<Evaluation>> {
        let d = ControlDisplacement::from_dofs(&self.layout, dofs)?;
        let mesh = self.ffd.deform(&d)?;
        if min_signed_area(&mesh)? <= 0.0 {
            return Ok(None);
        }
        let sol = match self.solver.solve(&mesh, &self.cfg.fluid, &self.bcs, &self.cfg.solver) {
            Ok(s) if s.converged => s,
            Ok(_) | Err(Error::Solver(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let rho = self.cfg.fluid.rho;
        let report = match &self.patches {
            None => tjunction_report(&mesh, &sol, rho),
            Some(p) => channel_report(&mesh, &sol, p, rho),
        };
        Ok(match report {
            Ok(r) if self.case == CaseKind::TJunction => r.mu.map(|mu| Evaluation {
                objective: mu,
                features: vec![mu],
            }),
            Ok(r) => r.q.map(|q| Evaluation {
                objective: q,
                features: r.patches.iter().map(|p| p.q).collect(),
            }),
            Err(Error::DegenerateFlow(_)) => None,
            Err(e) => return Err(e),
        })
    }
}

const MAX_RESET_ATTEMPTS: usize = 100;

/// Shape-optimization episode logic shared by the FEM cases and the surrogate.
///
/// Observation layout: `[μ_t, μ*, dofs..]` for ratio goals and
/// `[q_out_1, q_out_2, q_out_3, dofs..]` for homogeneity goals.
pub struct ShapeEnv {
    model: Box<dyn ShapeModel>,
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    dofs: Vec<f64>,
    goal: f64,
    step_count: usize,
    last: Option<Evaluation>,
    base: Option<Evaluation>,
    done: bool,
}

impl ShapeEnv {
    pub fn new(model: Box<dyn ShapeModel>, cfg: EnvConfig) -> Self {
        let n = model.n_dofs();
        let goal = match model.objective() {
            Objective::Ratio => 1.0,
            Objective::Homogeneity => cfg.q_star,
        };
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            dofs: vec![0.0; n],
            goal,
            step_count: 0,
            last: None,
            base: None,
            done: true,
        }
    }

    pub fn dofs(&self) -> &[f64] {
        &self.dofs
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn last_objective(&self) -> Option<f64> {
        self.last.as_ref().map(|e| e.objective)
    }

    /// Overrides the sampled goal; used by evaluation scripts and tests.
    pub fn set_goal(&mut self, goal: f64) {
        self.goal = goal;
    }

    fn base_evaluation(&mut self) -> Result<Evaluation> {
        if let Some(b) = &self.base {
            return Ok(b.clone());
        }
        let zeros = vec![0.0; self.model.n_dofs()];
        let eval = self
            .model
            .evaluate(&zeros)?
            .ok_or_else(|| Error::Config("the base geometry fails to simulate".into()))?;
        self.base = Some(eval.clone());
        Ok(eval)
    }

    fn observation(&self) -> Vec<f64> {
        let features = self.last.as_ref().map(|e| e.features.clone()).unwrap_or_default();
        let mut obs = features;
        if self.model.objective() == Objective::Ratio {
            obs.push(self.goal);
        }
        obs.extend_from_slice(&self.dofs);
        obs
    }

    fn proposed_dofs(&self, action: &Action) -> Vec<f64> {
        let mut next = self.dofs.clone();
        match action {
            Action::Discrete(k) => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                next[k / 2] += sign * self.cfg.increment;
            }
            Action::Continuous(v) => {
                let [lo, hi] = self.cfg.bounds;
                for (d, &a) in next.iter_mut().zip(v) {
                    *d = a.clamp(lo, hi);
                }
            }
        }
        next
    }
}

impl Environment for ShapeEnv {
    fn observation_dim(&self) -> usize {
        match self.model.objective() {
            Objective::Ratio => 2 + self.model.n_dofs(),
            Objective::Homogeneity => 3 + self.model.n_dofs(),
        }
    }

    fn action_space(&self) -> ActionSpace {
        let n = self.model.n_dofs();
        match self.cfg.strategy {
            Strategy::Incremental => ActionSpace::Discrete {
                n_actions: 2 * n,
                increment: self.cfg.increment,
            },
            Strategy::Direct => ActionSpace::Continuous {
                n_dof: n,
                low: self.cfg.bounds[0],
                high: self.cfg.bounds[1],
            },
        }
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        let n = self.model.n_dofs();
        match self.model.objective() {
            Objective::Ratio => {
                let [lo, hi] = self.cfg.mu_star_range;
                self.goal = if lo < hi { self.rng.random_range(lo..hi) } else { lo };
                self.dofs = vec![0.0; n];
                self.last = Some(self.base_evaluation()?);
            }
            Objective::Homogeneity => {
                self.goal = self.cfg.q_star;
                let s = self.cfg.perturbation_scale;
                let mut accepted = None;
                for _ in 0..MAX_RESET_ATTEMPTS {
                    let dofs: Vec<f64> = (0..n)
                        .map(|_| if s > 0.0 { self.rng.random_range(-s..=s) } else { 0.0 })
                        .collect();
                    if let Some(e) = self.model.evaluate(&dofs)? {
                        accepted = Some((dofs, e));
                        break;
                    }
                }
                let (dofs, e) = accepted.ok_or_else(|| {
                    Error::Config(format!(
                        "{MAX_RESET_ATTEMPTS} consecutive reset perturbations failed (perturbation_scale = {s})"
                    ))
                })?;
                self.dofs = dofs;
                self.last = Some(e);
            }
        }
        self.step_count = 0;
        self.done = false;
        Ok(self.observation())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        self.action_space().check(action)?;
        let next = self.proposed_dofs(action);
        let eval = self.model.evaluate(&next)?;
        self.step_count += 1;
        let prev = self.last.as_ref().expect("reset performs an initial evaluation").objective;
        let failed = eval.is_none();
        let current = eval.as_ref().map_or(prev, |e| e.objective);

        let (reward, goal_reached) = match self.model.objective() {
            Objective::Ratio => {
                let e_t = (current - self.goal).abs();
                let e_prev = (prev - self.goal).abs();
                let eps = self.cfg.eps_goal;
                let r = match self.cfg.strategy {
                    Strategy::Direct => reward_t_direct(e_t, eps, failed),
                    Strategy::Incremental => reward_t_incremental(current, prev, e_t, e_prev, eps, failed),
                };
                (r, !failed && e_t < eps)
            }
            Objective::Homogeneity => {
                let q_star = self.goal;
                let r = match self.cfg.strategy {
                    Strategy::Direct => reward_ch_direct(current, q_star, failed),
                    Strategy::Incremental => reward_ch_incremental(current, prev, q_star, failed),
                };
                (r, !failed && current < q_star)
            }
        };

        self.dofs = next;
        if let Some(e) = eval {
            self.last = Some(e);
        }
        let capped = self.step_count >= self.cfg.max_steps;
        self.done = failed || goal_reached || capped;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            info: StepInfo {
                sim_failed: failed,
                goal_reached,
                truncated: capped && !failed && !goal_reached,
                objective: current,
            },
        })
    }

    fn goal(&self) -> f64 {
        self.goal
    }
}
