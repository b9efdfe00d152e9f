//! PPO, A2C and DQN over the [`Environment`](crate::env::Environment)
//! interface, trained on a [`VecEnv`].

mod buffers;
mod checkpoint;
mod config;
mod dqn;
mod policy;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{format_action, make_env, Action, ActionSpace, EnvConfig, StepLogRow, Strategy};
use crate::error::{Error, Result};
use crate::vecenv::VecEnv;

pub use buffers::{Experience, ReplayBuffer, RolloutBuffer};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{check_compatibility, AgentConfig, Algorithm, COMPATIBILITY};
pub use dqn::{argmax, QLearner};
pub use policy::{ActorCritic, Distribution, Gradients, UpdateStats};

#[derive(Debug, Clone)]
pub enum Model {
    ActorCritic(ActorCritic),
    Q(QLearner),
}

/// A finished training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub env_id: usize,
    /// 1-based, counted across all environments in completion order.
    pub episode: u64,
    /// Environment steps taken by the whole batch when the episode ended.
    pub global_step: u64,
    pub reward: f64,
    pub steps: usize,
    pub goal_reached: bool,
    pub sim_failed: bool,
}

/// Training callbacks.
pub trait TrainObserver {
    fn on_episode(&mut self, _rec: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    /// After every parameter update (PPO/A2C) or batched step (DQN).
    fn on_update(&mut self, _agent: &Agent) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

impl TrainObserver for Vec<EpisodeRecord> {
    fn on_episode(&mut self, rec: &EpisodeRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub obs_dim: usize,
    pub space: ActionSpace,
    pub model: Model,
    pub seed: u64,
    pub global_step: u64,
    pub episodes: u64,
    rng: ChaCha8Rng,
}

fn strategy_of(space: &ActionSpace) -> Strategy {
    if space.is_discrete() {
        Strategy::Incremental
    } else {
        Strategy::Direct
    }
}

/// Per-environment running episode totals.
#[derive(Clone, Default)]
struct Running {
    reward: f64,
    steps: usize,
}

impl Agent {
    pub fn new(config: AgentConfig, obs_dim: usize, space: ActionSpace, seed: u64) -> Result<Self> {
        config.validate()?;
        check_compatibility(config.algorithm, strategy_of(&space))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = match config.algorithm {
            Algorithm::Ppo | Algorithm::A2c => Model::ActorCritic(ActorCritic::new(obs_dim, space, &config, &mut rng)?),
            Algorithm::Dqn => Model::Q(QLearner::new(obs_dim, space.dim(), &config, &mut rng)?),
        };
        Ok(Self::from_model(config, obs_dim, space, model, seed))
    }

    pub(crate) fn from_model(config: AgentConfig, obs_dim: usize, space: ActionSpace, model: Model, seed: u64) -> Self {
        Self {
            config,
            obs_dim,
            space,
            model,
            seed,
            global_step: 0,
            episodes: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Re-seeds the sampling stream, e.g. after loading a checkpoint.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Greedy or sampled action; DQN samples ε-greedily with its final ε.
    pub fn policy_action<R: Rng + ?Sized>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> Result<Action> {
        match &self.model {
            Model::ActorCritic(ac) => Ok(ac.act(obs, deterministic, rng)?.0),
            Model::Q(q) => {
                if !deterministic && rng.random::<f64>() < self.config.exploration_final {
                    Ok(Action::Discrete(rng.random_range(0..self.space.dim())))
                } else {
                    Ok(Action::Discrete(q.greedy(obs)?))
                }
            }
        }
    }

    fn check_env(&self, vec: &VecEnv) -> Result<()> {
        if vec.observation_dim() != self.obs_dim {
            return Err(Error::ShapeMismatch {
                expected: self.obs_dim,
                got: vec.observation_dim(),
            });
        }
        if vec.action_space() != self.space {
            return Err(Error::Config(format!(
                "agent action space {:?} differs from the environment's {:?}",
                self.space,
                vec.action_space()
            )));
        }
        Ok(())
    }

    /// Trains until `global_step` reaches `total_steps`.
    pub fn learn(&mut self, vec: &mut VecEnv, total_steps: u64, observer: &mut dyn TrainObserver) -> Result<()> {
        self.check_env(vec)?;
        match self.config.algorithm {
            Algorithm::Ppo | Algorithm::A2c => self.learn_on_policy(vec, total_steps, observer),
            Algorithm::Dqn => self.learn_dqn(vec, total_steps, observer),
        }
    }

    fn finish_steps(
        &mut self,
        transitions: &[crate::vecenv::Transition],
        running: &mut [Running],
        observer: &mut dyn TrainObserver,
    ) -> Result<()> {
        self.global_step += transitions.len() as u64;
        for (e, t) in transitions.iter().enumerate() {
            running[e].reward += t.reward;
            running[e].steps += 1;
            if t.done {
                self.episodes += 1;
                let rec = EpisodeRecord {
                    env_id: e,
                    episode: self.episodes,
                    global_step: self.global_step,
                    reward: running[e].reward,
                    steps: running[e].steps,
                    goal_reached: t.info.goal_reached,
                    sim_failed: t.info.sim_failed,
                };
                running[e] = Running::default();
                observer.on_episode(&rec)?;
            }
        }
        Ok(())
    }

    fn learn_on_policy(&mut self, vec: &mut VecEnv, total_steps: u64, observer: &mut dyn TrainObserver) -> Result<()> {
        let n_envs = vec.n_envs();
        let mut obs = vec.reset()?;
        let mut running = vec![Running::default(); n_envs];
        let mut buf = RolloutBuffer::new(n_envs);
        let cfg = self.config.clone();
        while self.global_step < total_steps {
            for _ in 0..cfg.rollout_steps() {
                let Model::ActorCritic(ac) = &self.model else { unreachable!() };
                let mut actions = Vec::with_capacity(n_envs);
                let mut meta = Vec::with_capacity(n_envs);
                for o in &obs {
                    let (a, lp, v) = ac.act(o, false, &mut self.rng)?;
                    actions.push(a);
                    meta.push((lp, v));
                }
                let trans = vec.step(&actions)?;
                for (e, t) in trans.iter().enumerate() {
                    buf.push(
                        std::mem::take(&mut obs[e]),
                        actions[e].clone(),
                        meta[e].0,
                        t.reward,
                        meta[e].1,
                        t.done,
                    );
                    obs[e] = t.observation.clone();
                }
                self.finish_steps(&trans, &mut running, observer)?;
            }
            let Model::ActorCritic(ac) = &mut self.model else { unreachable!() };
            let last: Vec<f64> = obs.iter().map(|o| ac.value_of(o)).collect::<Result<_>>()?;
            buf.compute_gae(&last, cfg.gamma, cfg.lambda());
            match cfg.algorithm {
                Algorithm::Ppo => ac.ppo_update(&buf, &cfg, &mut self.rng)?,
                _ => ac.a2c_update(&buf, &cfg)?,
            };
            buf.clear();
            debug_assert!(buf.is_empty());
            observer.on_update(self)?;
        }
        Ok(())
    }

    fn learn_dqn(&mut self, vec: &mut VecEnv, total_steps: u64, observer: &mut dyn TrainObserver) -> Result<()> {
        let n_envs = vec.n_envs();
        let cfg = self.config.clone();
        let n_actions = self.space.dim();
        let mut obs = vec.reset()?;
        let mut running = vec![Running::default(); n_envs];
        let mut replay = ReplayBuffer::new(cfg.buffer_size);
        let mut batches = 0u64;
        while self.global_step < total_steps {
            let eps = cfg.epsilon(self.global_step, total_steps);
            let Model::Q(q) = &self.model else { unreachable!() };
            let mut actions = Vec::with_capacity(n_envs);
            for o in &obs {
                let a = if self.rng.random::<f64>() < eps {
                    self.rng.random_range(0..n_actions)
                } else {
                    q.greedy(o)?
                };
                actions.push(a);
            }
            let acts: Vec<Action> = actions.iter().map(|&a| Action::Discrete(a)).collect();
            let trans = vec.step(&acts)?;
            for (e, t) in trans.iter().enumerate() {
                let next = t.terminal_observation.clone().unwrap_or_else(|| t.observation.clone());
                replay.push(Experience {
                    obs: std::mem::replace(&mut obs[e], t.observation.clone()),
                    action: actions[e],
                    reward: t.reward,
                    next_obs: next,
                    terminal: t.done && !t.info.truncated,
                });
            }
            let before = self.global_step;
            self.finish_steps(&trans, &mut running, observer)?;
            batches += 1;
            let Model::Q(q) = &mut self.model else { unreachable!() };
            if self.global_step > cfg.learning_starts && batches % cfg.train_freq == 0 {
                for _ in 0..cfg.gradient_steps {
                    let batch = replay.sample(cfg.minibatch(), &mut self.rng);
                    q.update(&batch, &cfg)?;
                }
            }
            if self.global_step / cfg.target_update > before / cfg.target_update {
                q.sync_target();
            }
            observer.on_update(self)?;
        }
        Ok(())
    }
}

/// Builds the agent for `env_cfg`, trains it on `n_envs` environments seeded
/// from `seed`, and returns it with its episode log.
pub fn train(
    agent_cfg: &AgentConfig,
    env_cfg: &EnvConfig,
    n_envs: usize,
    seed: u64,
    total_steps: u64,
) -> Result<(Agent, Vec<EpisodeRecord>)> {
    check_compatibility(agent_cfg.algorithm, env_cfg.strategy)?;
    let mut vec = VecEnv::new(env_cfg, n_envs, seed)?;
    let mut agent = Agent::new(agent_cfg.clone(), vec.observation_dim(), vec.action_space(), seed)?;
    let mut log = Vec::new();
    agent.learn(&mut vec, total_steps, &mut log)?;
    Ok((agent, log))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalStats {
    pub episodes: Vec<EpisodeRecord>,
    pub mean_reward: f64,
    pub mean_steps: f64,
    pub goal_rate: f64,
    /// Per-step rows with an empty `run_id`.
    pub steps: Vec<StepLogRow>,
}

/// Runs `n_episodes` on a fresh environment seeded with `seed`.
pub fn evaluate_policy(
    agent: &Agent,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    deterministic: bool,
    seed: u64,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Ok(EvalStats::default());
    }
    let mut env = make_env(&EnvConfig {
        seed,
        ..env_cfg.clone()
    })?;
    if env.observation_dim() != agent.obs_dim {
        return Err(Error::ShapeMismatch {
            expected: agent.obs_dim,
            got: env.observation_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::with_capacity(n_episodes);
    let mut rows = Vec::new();
    let mut steps_total = 0u64;
    for ep in 0..n_episodes {
        let mut obs = env.reset()?;
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let a = agent.policy_action(&obs, deterministic, &mut rng)?;
            let goal = env.goal();
            let t0 = std::time::Instant::now();
            let r = env.step(&a)?;
            total += r.reward;
            steps += 1;
            rows.push(StepLogRow {
                run_id: String::new(),
                env_id: 0,
                episode: ep as u64 + 1,
                step: steps,
                action: format_action(&a),
                reward: r.reward,
                objective: r.info.objective,
                goal,
                sim_failed: r.info.sim_failed,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
            obs = r.observation;
            if r.done {
                steps_total += steps as u64;
                episodes.push(EpisodeRecord {
                    env_id: 0,
                    episode: ep as u64 + 1,
                    global_step: steps_total,
                    reward: total,
                    steps,
                    goal_reached: r.info.goal_reached,
                    sim_failed: r.info.sim_failed,
                });
                break;
            }
        }
    }
    let n = episodes.len() as f64;
    Ok(EvalStats {
        mean_reward: episodes.iter().map(|e| e.reward).sum::<f64>() / n,
        mean_steps: episodes.iter().map(|e| e.steps as f64).sum::<f64>() / n,
        goal_rate: episodes.iter().filter(|e| e.goal_reached).count() as f64 / n,
        episodes,
        steps: rows,
    })
}
