//! Synchronous vectorized environments on persistent worker threads.
//!
//! Each worker owns one environment for its whole life. `step` sends one
//! action to every worker and blocks until all have answered, so the batch
//! advances in lockstep. A finished episode is reset inside the worker; the
//! batch then carries the new episode's first observation and keeps the
//! terminal one alongside.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread::JoinHandle;

use crate::env::{make_env, Action, ActionSpace, EnvConfig, Environment, StepInfo};
use crate::error::{Error, Result};

/// Seed of environment `i` under `master`; independent of the batch size.
pub fn env_seed(master: u64, i: usize) -> u64 {
    master.wrapping_add(i as u64)
}

enum Command {
    Reset,
    Step(Action),
}

enum Reply {
    Reset(Result<Vec<f64>>),
    Step(Result<Transition>),
}

/// One environment's share of a batched step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Observation to act on next: the post-reset one when `done`.
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
    /// Observation reached by this step when it ended the episode.
    pub terminal_observation: Option<Vec<f64>>,
    /// Goal the finished step was scored against.
    pub goal: f64,
}

struct Worker {
    tx: Option<Sender<Command>>,
    rx: Receiver<Reply>,
    handle: Option<JoinHandle<()>>,
}

fn worker_loop(mut env: Box<dyn Environment>, rx: Receiver<Command>, tx: Sender<Reply>) {
    for cmd in rx {
        let reply = match cmd {
            Command::Reset => Reply::Reset(env.reset()),
            Command::Step(a) => Reply::Step(step_with_reset(env.as_mut(), &a)),
        };
        if tx.send(reply).is_err() {
            break;
        }
    }
}

fn step_with_reset(env: &mut dyn Environment, a: &Action) -> Result<Transition> {
    let goal = env.goal();
    let r = env.step(a)?;
    if r.done {
        let next = env.reset()?;
        Ok(Transition {
            observation: next,
            reward: r.reward,
            done: true,
            info: r.info,
            terminal_observation: Some(r.observation),
            goal,
        })
    } else {
        Ok(Transition {
            observation: r.observation,
            reward: r.reward,
            done: false,
            info: r.info,
            terminal_observation: None,
            goal,
        })
    }
}

pub struct VecEnv {
    workers: Vec<Worker>,
    seeds: Vec<u64>,
    obs_dim: usize,
    space: ActionSpace,
}

impl VecEnv {
    /// `n_envs` copies of `cfg`, environment `i` seeded with
    /// [`env_seed`]`(master_seed, i)`.
    pub fn new(cfg: &EnvConfig, n_envs: usize, master_seed: u64) -> Result<Self> {
        if n_envs == 0 {
            return Err(Error::Config("n_envs must be at least 1".into()));
        }
        let mut envs = Vec::with_capacity(n_envs);
        let mut seeds = Vec::with_capacity(n_envs);
        for i in 0..n_envs {
            let seed = env_seed(master_seed, i);
            let env = make_env(&EnvConfig { seed, ..cfg.clone() }).map_err(|e| Error::VecEnv {
                env_id: i,
                source: Box::new(e),
            })?;
            envs.push(env);
            seeds.push(seed);
        }
        Self::from_envs(envs, seeds)
    }

    /// Wraps already-seeded environments of identical shape.
    pub fn from_envs(envs: Vec<Box<dyn Environment>>, seeds: Vec<u64>) -> Result<Self> {
        let first = envs.first().ok_or_else(|| Error::Config("no environments".into()))?;
        let (obs_dim, space) = (first.observation_dim(), first.action_space());
        if let Some(i) = envs
            .iter()
            .position(|e| e.observation_dim() != obs_dim || e.action_space() != space)
        {
            return Err(Error::Config(format!("environment {i} differs in shape from environment 0")));
        }
        let workers = envs
            .into_iter()
            .enumerate()
            .map(|(i, env)| {
                let (cmd_tx, cmd_rx) = channel();
                let (rep_tx, rep_rx) = channel();
                let handle = std::thread::Builder::new()
                    .name(format!("env-{i}"))
                    .spawn(move || worker_loop(env, cmd_rx, rep_tx))
                    .map_err(Error::Io)?;
                Ok(Worker {
                    tx: Some(cmd_tx),
                    rx: rep_rx,
                    handle: Some(handle),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            workers,
            seeds,
            obs_dim,
            space,
        })
    }

    pub fn n_envs(&self) -> usize {
        self.workers.len()
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn observation_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    fn send(&self, i: usize, cmd: Command) -> Result<()> {
        self.workers[i]
            .tx
            .as_ref()
            .and_then(|tx| tx.send(cmd).ok())
            .ok_or_else(|| dead_worker(i))
    }

    /// Resets every environment; row `i` comes from environment `i`.
    pub fn reset(&mut self) -> Result<Vec<Vec<f64>>> {
        for i in 0..self.n_envs() {
            self.send(i, Command::Reset)?;
        }
        self.collect(|i, reply| match reply {
            Reply::Reset(r) => r.map_err(|e| wrap(i, e)),
            Reply::Step(_) => Err(dead_worker(i)),
        })
    }

    /// Steps every environment once with its own action.
    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<Transition>> {
        if actions.len() != self.n_envs() {
            return Err(Error::ShapeMismatch {
                expected: self.n_envs(),
                got: actions.len(),
            });
        }
        for (i, a) in actions.iter().enumerate() {
            self.send(i, Command::Step(a.clone()))?;
        }
        self.collect(|i, reply| match reply {
            Reply::Step(r) => r.map_err(|e| wrap(i, e)),
            Reply::Reset(_) => Err(dead_worker(i)),
        })
    }

    /// Waits for every worker before reporting the first failure, so the
    /// channels never hold stale replies.
    fn collect<T>(&self, f: impl Fn(usize, Reply) -> Result<T>) -> Result<Vec<T>> {
        let replies: Vec<Result<T>> = self
            .workers
            .iter()
            .enumerate()
            .map(|(i, w)| w.rx.recv().map_err(|_| dead_worker(i)).and_then(|r| f(i, r)))
            .collect();
        replies.into_iter().collect()
    }
}

fn wrap(env_id: usize, e: Error) -> Error {
    Error::VecEnv {
        env_id,
        source: Box::new(e),
    }
}

fn dead_worker(env_id: usize) -> Error {
    wrap(env_id, Error::Config("worker thread stopped".into()))
}

impl Drop for VecEnv {
    fn drop(&mut self) {
        for w in &mut self.workers {
            w.tx.take();
        }
        for w in &mut self.workers {
            if let Some(h) = w.handle.take() {
                let _ = h.join();
            }
        }
    }
}
