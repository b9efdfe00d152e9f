//! Tiny environments with known optimal behavior, used as agent oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, Environment, StepInfo, StepResult};
use crate::error::{Error, Result};

fn discrete(action: &Action, space: ActionSpace) -> Result<usize> {
    space.check(action)?;
    match action {
        Action::Discrete(k) => Ok(*k),
        Action::Continuous(_) => unreachable!("checked above"),
    }
}

/// One-step episodes; arm 0 pays 1, arm 1 pays 0. Observation `[1]`.
#[derive(Debug, Clone, Default)]
pub struct BanditEnv {
    active: bool,
}

impl BanditEnv {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Environment for BanditEnv {
    fn observation_dim(&self) -> usize {
        1
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete {
            n_actions: 2,
            increment: 1.0,
        }
    }

    fn seed(&mut self, _seed: u64) {}

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.active = true;
        Ok(vec![1.0])
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if !self.active {
            return Err(Error::EpisodeFinished);
        }
        let k = discrete(action, self.action_space())?;
        self.active = false;
        let reward = if k == 0 { 1.0 } else { 0.0 };
        Ok(StepResult {
            observation: vec![1.0],
            reward,
            done: true,
            info: StepInfo {
                goal_reached: k == 0,
                objective: reward,
                ..Default::default()
            },
        })
    }

    fn goal(&self) -> f64 {
        1.0
    }
}

pub const CHAIN_STATES: usize = 3;

/// States `0, 1, 2` in a row, one-hot observed, uniformly random start.
/// Action 0 moves left (sticking at 0), action 1 moves right; moving right
/// from state 2 pays 1 and ends the episode. All other moves pay 0.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    rng: ChaCha8Rng,
    state: usize,
    steps: usize,
    max_steps: usize,
    active: bool,
}

impl ChainEnv {
    pub fn new(max_steps: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(0),
            state: 0,
            steps: 0,
            max_steps,
            active: false,
        }
    }

    fn observation(&self) -> Vec<f64> {
        let mut o = vec![0.0; CHAIN_STATES];
        o[self.state] = 1.0;
        o
    }

    /// Optimal action values under discount `gamma` by value iteration.
    pub fn optimal_q(gamma: f64) -> [[f64; 2]; CHAIN_STATES] {
        let mut q = [[0.0f64; 2]; CHAIN_STATES];
        for _ in 0..1000 {
            let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
            for s in 0..CHAIN_STATES {
                q[s][0] = gamma * v[s.saturating_sub(1)];
                q[s][1] = if s + 1 == CHAIN_STATES { 1.0 } else { gamma * v[s + 1] };
            }
        }
        q
    }
}

impl Environment for ChainEnv {
    fn observation_dim(&self) -> usize {
        CHAIN_STATES
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete {
            n_actions: 2,
            increment: 1.0,
        }
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.state = self.rng.random_range(0..CHAIN_STATES);
        self.steps = 0;
        self.active = true;
        Ok(self.observation())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if !self.active {
            return Err(Error::EpisodeFinished);
        }
        let k = discrete(action, self.action_space())?;
        self.steps += 1;
        let (reward, goal) = match k {
            1 if self.state + 1 == CHAIN_STATES => (1.0, true),
            1 => {
                self.state += 1;
                (0.0, false)
            }
            _ => {
                self.state = self.state.saturating_sub(1);
                (0.0, false)
            }
        };
        let capped = self.steps >= self.max_steps;
        self.active = !(goal || capped);
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: !self.active,
            info: StepInfo {
                goal_reached: goal,
                truncated: capped && !goal,
                objective: reward,
                ..Default::default()
            },
        })
    }

    fn goal(&self) -> f64 {
        1.0
    }
}
