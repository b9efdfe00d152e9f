use serde::{Deserialize, Serialize};

use crate::env::Strategy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ppo", alias = "PPO")]
    Ppo,
    #[serde(rename = "a2c", alias = "A2C")]
    A2c,
    #[serde(rename = "dqn", alias = "DQN")]
    Dqn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ppo => "PPO",
            Self::A2c => "A2C",
            Self::Dqn => "DQN",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Self::Ppo => 0,
            Self::A2c => 1,
            Self::Dqn => 2,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        [Self::Ppo, Self::A2c, Self::Dqn].into_iter().find(|a| a.tag() == t)
    }
}

/// One row of the agent/strategy compatibility table: `(algorithm,
/// incremental, direct, implemented)`.
pub const COMPATIBILITY: [(&str, bool, bool, bool); 5] = [
    ("PPO", true, true, true),
    ("DQN", true, false, true),
    ("A2C", true, true, true),
    ("SAC", false, true, false),
    ("DDPG", false, true, false),
];

pub fn check_compatibility(algorithm: Algorithm, strategy: Strategy) -> Result<()> {
    let row = COMPATIBILITY
        .iter()
        .find(|r| r.0 == algorithm.name())
        .expect("every implemented algorithm has a table row");
    let ok = match strategy {
        Strategy::Incremental => row.1,
        Strategy::Direct => row.2,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Incompatible {
            algorithm: algorithm.name(),
            strategy: strategy.name(),
        })
    }
}

/// Hyperparameters. Fields left unset take the algorithm's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub learning_rate: Option<f64>,
    pub gamma: f64,
    /// Steps per environment between on-policy updates.
    pub n_steps: Option<usize>,
    pub gae_lambda: Option<f64>,
    pub clip_range: f64,
    pub n_epochs: usize,
    pub batch_size: Option<usize>,
    pub normalize_advantage: Option<bool>,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: Option<f64>,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    pub buffer_size: usize,
    pub learning_starts: u64,
    pub train_freq: u64,
    pub gradient_steps: usize,
    pub target_update: u64,
    pub exploration_fraction: f64,
    pub exploration_initial: f64,
    pub exploration_final: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            learning_rate: None,
            gamma: 0.99,
            n_steps: None,
            gae_lambda: None,
            clip_range: 0.2,
            n_epochs: 10,
            batch_size: None,
            normalize_advantage: None,
            ent_coef: 0.0,
            vf_coef: 0.5,
            max_grad_norm: None,
            hidden: vec![64, 64],
            log_std_init: 0.0,
            buffer_size: 50_000,
            learning_starts: 100,
            train_freq: 4,
            gradient_steps: 1,
            target_update: 1000,
            exploration_fraction: 0.1,
            exploration_initial: 1.0,
            exploration_final: 0.05,
        }
    }
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Default::default()
        }
    }

    pub fn lr(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.algorithm {
            Algorithm::Ppo => 3e-4,
            Algorithm::A2c => 7e-4,
            Algorithm::Dqn => 1e-4,
        })
    }

    pub fn rollout_steps(&self) -> usize {
        self.n_steps.unwrap_or(match self.algorithm {
            Algorithm::A2c => 5,
            _ => 2048,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.gae_lambda.unwrap_or(match self.algorithm {
            Algorithm::A2c => 1.0,
            _ => 0.95,
        })
    }

    pub fn minibatch(&self) -> usize {
        self.batch_size.unwrap_or(match self.algorithm {
            Algorithm::Dqn => 32,
            _ => 64,
        })
    }

    pub fn normalize(&self) -> bool {
        self.normalize_advantage.unwrap_or(self.algorithm == Algorithm::Ppo)
    }

    pub fn grad_clip(&self) -> f64 {
        self.max_grad_norm.unwrap_or(match self.algorithm {
            Algorithm::Dqn => 10.0,
            _ => 0.5,
        })
    }

    /// ε of the DQN behavior policy after `step` of `total` steps.
    pub fn epsilon(&self, step: u64, total: u64) -> f64 {
        let horizon = self.exploration_fraction * total as f64;
        let frac = if horizon > 0.0 { (step as f64 / horizon).min(1.0) } else { 1.0 };
        self.exploration_initial + frac * (self.exploration_final - self.exploration_initial)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lr() > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda()) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.rollout_steps() == 0 || self.n_epochs == 0 || self.minibatch() == 0 {
            return bad("n_steps, n_epochs and batch_size must be positive");
        }
        if !(self.clip_range > 0.0) {
            return bad("clip_range must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if self.buffer_size == 0 || self.train_freq == 0 || self.target_update == 0 {
            return bad("buffer_size, train_freq and target_update must be positive");
        }
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.exploration_initial) || !eps_ok(self.exploration_final) {
            return bad("exploration rates must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compatibility_table() {
        for s in [Strategy::Incremental, Strategy::Direct] {
            assert!(check_compatibility(Algorithm::Ppo, s).is_ok());
            assert!(check_compatibility(Algorithm::A2c, s).is_ok());
        }
        assert!(check_compatibility(Algorithm::Dqn, Strategy::Incremental).is_ok());
        assert!(matches!(
            check_compatibility(Algorithm::Dqn, Strategy::Direct),
            Err(Error::Incompatible { algorithm: "DQN", strategy: "direct" })
        ));
    }

    #[test]
    fn per_algorithm_defaults() {
        let a2c = AgentConfig::new(Algorithm::A2c);
        assert_eq!((a2c.lr(), a2c.rollout_steps()), (7e-4, 5));
        let ppo = AgentConfig::new(Algorithm::Ppo);
        assert_eq!((ppo.lr(), ppo.rollout_steps(), ppo.minibatch()), (3e-4, 2048, 64));
        assert!(ppo.normalize() && !a2c.normalize());
        let dqn = AgentConfig::new(Algorithm::Dqn);
        assert_eq!((dqn.lr(), dqn.minibatch()), (1e-4, 32));
    }

    #[test]
    fn epsilon_schedule() {
        let c = AgentConfig::new(Algorithm::Dqn);
        assert_eq!(c.epsilon(0, 1000), 1.0);
        assert!((c.epsilon(50, 1000) - 0.525).abs() < 1e-12);
        assert!((c.epsilon(100, 1000) - 0.05).abs() < 1e-15);
        assert_eq!(c.epsilon(900, 1000), c.epsilon(100, 1000));
    }

    #[test]
    fn parses_from_toml() {
        let c: AgentConfig = toml::from_str("algorithm = \"a2c\"\nlearning_rate = 0.01").unwrap();
        assert_eq!(c.algorithm, Algorithm::A2c);
        assert_eq!(c.lr(), 0.01);
        assert!(toml::from_str::<AgentConfig>("algorithm = \"sac\"").is_err());
        assert!(toml::from_str::<AgentConfig>("lr = 1").is_err());
    }
}
