use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace, EnvCase, EnvConfig};
use crate::error::{Error, Result};
use crate::vecenv::VecEnv;

/// Environment-step throughput across vectorization widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n_envs: Vec<usize>,
    /// Step budget per width, summed over all environments.
    pub total_steps: u64,
    pub seed: u64,
    pub env: EnvConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_envs: vec![1, 2, 4, 8],
            total_steps: 20_000,
            seed: 0,
            env: EnvConfig {
                case: EnvCase::Surrogate,
                sleep_ms: 1,
                ..Default::default()
            },
        }
    }
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_envs.is_empty() || self.n_envs.contains(&0) {
            return Err(Error::Schema("n_envs must be a non-empty list of positive widths".into()));
        }
        if self.total_steps == 0 {
            return Err(Error::Schema("total_steps must be positive".into()));
        }
        self.env.validate()
    }
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_envs: usize,
    pub steps: u64,
    pub wall_s: f64,
    pub steps_per_s: f64,
    /// Wall time of the first listed width divided by this row's.
    pub speedup: f64,
}

fn random_action<R: Rng>(space: &ActionSpace, rng: &mut R) -> Action {
    match *space {
        ActionSpace::Discrete { n_actions, .. } => Action::Discrete(rng.random_range(0..n_actions)),
        ActionSpace::Continuous { n_dof, low, high } => {
            Action::Continuous((0..n_dof).map(|_| rng.random_range(low..=high)).collect())
        }
    }
}

/// Steps uniformly random actions through each width for the same total
/// budget; reset time is excluded from the measurement.
pub fn bench_vecenv(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows: Vec<BenchRow> = Vec::with_capacity(cfg.n_envs.len());
    for &n in &cfg.n_envs {
        let mut vec = VecEnv::new(&cfg.env, n, cfg.seed)?;
        let space = vec.action_space();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let batches = cfg.total_steps.div_ceil(n as u64);
        vec.reset()?;
        let start = Instant::now();
        for _ in 0..batches {
            let actions: Vec<Action> = (0..n).map(|_| random_action(&space, &mut rng)).collect();
            vec.step(&actions)?;
        }
        let wall_s = start.elapsed().as_secs_f64();
        let steps = batches * n as u64;
        let speedup = rows.first().map_or(1.0, |r| r.wall_s / wall_s);
        rows.push(BenchRow {
            n_envs: n,
            steps,
            wall_s,
            steps_per_s: steps as f64 / wall_s,
            speedup,
        });
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
