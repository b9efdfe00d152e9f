//! Gym-style environments: shape optimization on the FEM test cases, an
//! analytical surrogate with the same interface, and two small testbeds for
//! the agents.

mod rewards;
mod shape;
mod surrogate;
mod toy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{FluidProperties, SolverSettings};

pub use rewards::{
    reward_ch_direct, reward_ch_incremental, reward_t_direct, reward_t_incremental, FAILURE_REWARD, GOAL_REWARD,
};
pub use shape::{Objective, ShapeEnv, ShapeModel, Evaluation, FemModel};
pub use surrogate::{SurrogateModel, SURROGATE_MIN_OPENING};
pub use toy::{BanditEnv, ChainEnv};

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpace {
    /// `n_actions = 2 * n_dof`: action `k` moves DOF `k / 2` by `+increment`
    /// for even `k` and `-increment` for odd `k`.
    Discrete { n_actions: usize, increment: f64 },
    Continuous { n_dof: usize, low: f64, high: f64 },
}

impl ActionSpace {
    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Discrete { .. })
    }

    /// Number of logits (discrete) or action components (continuous).
    pub fn dim(&self) -> usize {
        match *self {
            Self::Discrete { n_actions, .. } => n_actions,
            Self::Continuous { n_dof, .. } => n_dof,
        }
    }

    pub fn check(&self, action: &Action) -> Result<()> {
        match (self, action) {
            (Self::Discrete { n_actions, .. }, Action::Discrete(k)) if k < n_actions => Ok(()),
            (Self::Continuous { n_dof, .. }, Action::Continuous(v))
                if v.len() == *n_dof && v.iter().all(|x| x.is_finite()) =>
            {
                Ok(())
            }
            _ => Err(Error::InvalidAction(format!("{action:?} does not fit {self:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Incremental,
    Direct,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Incremental => "incremental",
            Self::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvCase {
    #[serde(rename = "tjunction")]
    TJunction,
    Channel,
    /// Closed-form stand-in for the T-junction.
    Surrogate,
    /// Two-armed bandit (agent testbed).
    Bandit,
    /// Deterministic three-state chain (agent testbed).
    Chain,
}

impl EnvCase {
    pub fn name(self) -> &'static str {
        match self {
            Self::TJunction => "tjunction",
            Self::Channel => "channel",
            Self::Surrogate => "surrogate",
            Self::Bandit => "bandit",
            Self::Chain => "chain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub case: EnvCase,
    pub strategy: Strategy,
    pub max_steps: usize,
    /// Goal tolerance on `|μ - μ*|`.
    pub eps_goal: f64,
    /// Goal threshold on the homogeneity sum.
    pub q_star: f64,
    pub mu_star_range: [f64; 2],
    /// DOF increment of the incremental strategy, length units.
    pub increment: f64,
    /// Per-DOF bounds of the direct strategy.
    pub bounds: [f64; 2],
    /// Half-width of the uniform DOF perturbation at channel resets.
    pub perturbation_scale: f64,
    pub mesh_h: f64,
    pub seed: u64,
    /// Artificial per-step latency of the surrogate, milliseconds.
    pub sleep_ms: u64,
    pub fluid: FluidProperties,
    pub solver: SolverSettings,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            case: EnvCase::TJunction,
            strategy: Strategy::Incremental,
            max_steps: 100,
            eps_goal: 0.05,
            q_star: 0.358,
            mu_star_range: [0.1, 2.0],
            increment: 0.05,
            bounds: [-0.5, 0.5],
            perturbation_scale: 0.25,
            mesh_h: 0.125,
            seed: 0,
            sleep_ms: 0,
            fluid: FluidProperties::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1");
        }
        if !(self.eps_goal > 0.0) {
            return bad("eps_goal must be positive");
        }
        if !(self.q_star > 0.0) {
            return bad("q_star must be positive");
        }
        let [lo, hi] = self.mu_star_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("mu_star_range must satisfy 0 < lo <= hi");
        }
        if !(self.increment > 0.0) {
            return bad("increment must be positive");
        }
        if !(self.bounds[0] < self.bounds[1]) {
            return bad("bounds must satisfy lo < hi");
        }
        if !(self.perturbation_scale >= 0.0) {
            return bad("perturbation_scale must be non-negative");
        }
        if !(self.mesh_h > 0.0) {
            return bad("mesh_h must be positive");
        }
        self.fluid.validate()?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub sim_failed: bool,
    pub goal_reached: bool,
    /// Ended by the step cap alone.
    pub truncated: bool,
    /// μ_t, q_t, or the testbed's own score.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// The agent-facing interface. Each instance owns its random stream; `seed`
/// restarts it.
pub trait Environment: Send {
    fn observation_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn seed(&mut self, seed: u64);
    fn reset(&mut self) -> Result<Vec<f64>>;
    /// Errors on malformed actions and after `done` until the next reset.
    fn step(&mut self, action: &Action) -> Result<StepResult>;
    /// Current goal value (μ* or q*) for logging.
    fn goal(&self) -> f64;
}

/// Builds and seeds the environment described by `cfg`.
pub fn make_env(cfg: &EnvConfig) -> Result<Box<dyn Environment>> {
    cfg.validate()?;
    let mut env: Box<dyn Environment> = match cfg.case {
        EnvCase::TJunction | EnvCase::Channel => Box::new(ShapeEnv::new(Box::new(FemModel::new(cfg)?), cfg.clone())),
        EnvCase::Surrogate => Box::new(ShapeEnv::new(Box::new(SurrogateModel::new(cfg.sleep_ms)), cfg.clone())),
        EnvCase::Bandit => Box::new(BanditEnv::new()),
        EnvCase::Chain => Box::new(ChainEnv::new(cfg.max_steps)),
    };
    env.seed(cfg.seed);
    Ok(env)
}

/// One row of the per-step CSV log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLogRow {
    pub run_id: String,
    pub env_id: usize,
    pub episode: u64,
    pub step: usize,
    /// Discrete index, or the continuous vector joined with `;`.
    pub action: String,
    pub reward: f64,
    pub objective: f64,
    pub goal: f64,
    pub sim_failed: bool,
    pub wall_ms: f64,
}

pub fn format_action(a: &Action) -> String {
    match a {
        Action::Discrete(k) => k.to_string(),
        Action::Continuous(v) => v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";"),
    }
}
