//! Run orchestration behind the command-line tool: validated run configs,
//! the training log, checkpoints, reward plots, the vectorization benchmark
//! and the one-shot solve/deform utilities.

mod bench;
mod plot;
mod solve;

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::{
    check_compatibility, load_checkpoint, save_checkpoint, Agent, AgentConfig, EpisodeRecord, EvalStats, TrainObserver,
};
use crate::env::{EnvConfig, StepLogRow};
use crate::error::{Error, Result};
use crate::vecenv::VecEnv;

pub use bench::{bench_vecenv, write_bench_csv, BenchConfig, BenchRow};
pub use plot::{moving_average, reward_svg, SMOOTHING_WINDOW};
pub use solve::{read_displacement, run_deform, run_solve, write_objectives_csv, SolveCase, SolveConfig, SolveOutcome};

/// Environment variable naming the default output root.
pub const OUTPUT_ENV_VAR: &str = "SHAPEOPT_OUTPUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// Column order of `train.csv`.
pub const TRAIN_LOG_COLUMNS: [&str; 11] = [
    "run_id",
    "algorithm",
    "strategy",
    "case",
    "n_envs",
    "seed",
    "global_step",
    "episode",
    "episode_reward",
    "steps_per_episode",
    "wall_s",
];

/// Column order of an evaluation's `episodes.csv`.
pub const EVAL_EPISODE_COLUMNS: [&str; 5] = ["episode", "episode_reward", "steps_per_episode", "goal_reached", "sim_failed"];

/// Column order of the per-step log.
pub const STEP_LOG_COLUMNS: [&str; 10] = [
    "run_id",
    "env_id",
    "episode",
    "step",
    "action",
    "reward",
    "objective",
    "goal",
    "sim_failed",
    "wall_ms",
];

/// Bumped whenever a CSV layout changes; recorded in each run's `manifest.toml`.
pub const LOG_SCHEMA_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRAIN_LOG_FILE: &str = "train.csv";
pub const FINAL_CHECKPOINT_FILE: &str = "final.ckpt";
pub const REWARD_PLOT_FILE: &str = "reward.svg";

/// Output root from the environment, falling back to `./runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    #[serde(default = "one")]
    pub n_envs: usize,
    pub total_steps: u64,
    /// Master seed: agent initialization and, via `seed + i`, environment `i`.
    #[serde(default)]
    pub seed: u64,
    /// Overrides the output root when set.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Save `checkpoints/step_<n>.ckpt` every this many steps; 0 saves only the final one.
    #[serde(default)]
    pub checkpoint_interval: u64,
    /// Record elapsed time in `wall_s`. When false the column is 0 and logs
    /// of repeated runs are byte-identical.
    #[serde(default = "yes")]
    pub wall_clock: bool,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub agent: AgentConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let ok_id = !self.run_id.is_empty()
            && self
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !self.run_id.starts_with('.');
        if !ok_id {
            return Err(Error::Schema(format!(
                "run_id {:?} must be non-empty and use only letters, digits, '-', '_' or '.'",
                self.run_id
            )));
        }
        if self.n_envs == 0 || self.n_envs > 256 {
            return Err(Error::Schema("n_envs must lie in 1..=256".into()));
        }
        if self.total_steps == 0 {
            return Err(Error::Schema("total_steps must be positive".into()));
        }
        self.env.validate()?;
        self.agent.validate()?;
        check_compatibility(self.agent.algorithm, self.env.strategy)
    }

    pub fn run_dir(&self, root: &Path) -> PathBuf {
        self.output_dir.as_deref().unwrap_or(root).join(&self.run_id)
    }
}

/// One row of `train.csv`, in [`TRAIN_LOG_COLUMNS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub run_id: String,
    pub algorithm: String,
    pub strategy: String,
    pub case: String,
    pub n_envs: usize,
    pub seed: u64,
    pub global_step: u64,
    pub episode: u64,
    pub episode_reward: f64,
    pub steps_per_episode: usize,
    pub wall_s: f64,
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainLogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRAIN_LOG_COLUMNS {
        return Err(Error::Schema(format!("{} has columns {header:?}", path.display())));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn headerless(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_path(path)?)
}

fn write_train_log(path: &Path, rows: &[TrainLogRow]) -> Result<()> {
    let mut w = headerless(path)?;
    w.write_record(TRAIN_LOG_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `episodes.csv` and the per-step `steps.csv` of an evaluation.
pub fn write_eval_csvs(stats: &EvalStats, run_id: &str, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("episodes.csv"))?;
    w.write_record(EVAL_EPISODE_COLUMNS)?;
    for e in &stats.episodes {
        w.write_record([
            e.episode.to_string(),
            e.reward.to_string(),
            e.steps.to_string(),
            e.goal_reached.to_string(),
            e.sim_failed.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = headerless(&dir.join("steps.csv"))?;
    w.write_record(STEP_LOG_COLUMNS)?;
    for row in &stats.steps {
        w.serialize(StepLogRow {
            run_id: run_id.to_string(),
            ..row.clone()
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub global_step: u64,
    /// Rows of `train.csv`, including those carried over on resume.
    pub episodes: usize,
    pub train_log: PathBuf,
    pub checkpoint: PathBuf,
    pub plot: PathBuf,
}

/// Streams finished episodes into the CSV log and saves periodic checkpoints.
struct RunLogger {
    writer: csv::Writer<File>,
    template: TrainLogRow,
    start: Instant,
    wall_offset: f64,
    wall_clock: bool,
    interval: u64,
    next_checkpoint: u64,
    checkpoint_dir: PathBuf,
}

impl TrainObserver for RunLogger {
    fn on_episode(&mut self, rec: &EpisodeRecord) -> Result<()> {
        let wall_s = if self.wall_clock {
            self.wall_offset + self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.writer.serialize(TrainLogRow {
            global_step: rec.global_step,
            episode: rec.episode,
            episode_reward: rec.reward,
            steps_per_episode: rec.steps,
            wall_s,
            ..self.template.clone()
        })?;
        Ok(())
    }

    fn on_update(&mut self, agent: &Agent) -> Result<()> {
        if self.interval > 0 && agent.global_step >= self.next_checkpoint {
            self.writer.flush()?;
            fs::create_dir_all(&self.checkpoint_dir)?;
            save_checkpoint(agent, &self.checkpoint_dir.join(format!("step_{}.ckpt", agent.global_step)))?;
            self.next_checkpoint = (agent.global_step / self.interval + 1) * self.interval;
        }
        Ok(())
    }
}

/// Trains per `cfg` into `<root>/<run_id>/` and plots the result.
///
/// A fresh run refuses to touch an existing run directory. With `resume`,
/// the directory must exist: log rows past the checkpoint's step are dropped
/// and training continues to `cfg.total_steps`.
pub fn run_train(cfg: &RunConfig, root: &Path, resume: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.run_dir(root);
    let log_path = dir.join(TRAIN_LOG_FILE);
    let (agent, kept) = match resume {
        None => {
            if dir.join(TRAIN_LOG_FILE).exists() || dir.join(CONFIG_FILE).exists() {
                return Err(Error::Config(format!(
                    "run {:?} already exists in {}; refusing to overwrite",
                    cfg.run_id,
                    dir.display()
                )));
            }
            fs::create_dir_all(&dir)?;
            (None, Vec::new())
        }
        Some(ckpt) => {
            let agent = load_checkpoint(ckpt)?;
            if agent.config != cfg.agent {
                return Err(Error::Config("checkpoint agent config differs from the run config".into()));
            }
            let rows: Vec<TrainLogRow> = read_train_log(&log_path)?
                .into_iter()
                .filter(|r| r.global_step <= agent.global_step)
                .collect();
            (Some(agent), rows)
        }
    };
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    fs::write(
        dir.join(MANIFEST_FILE),
        format!(
            "crate_version = \"{}\"\nlog_schema_version = {LOG_SCHEMA_VERSION}\n",
            env!("CARGO_PKG_VERSION")
        ),
    )?;
    write_train_log(&log_path, &kept)?;

    let env_seed = match &agent {
        Some(a) => cfg.seed ^ a.global_step.rotate_left(32),
        None => cfg.seed,
    };
    let mut vec = VecEnv::new(&cfg.env, cfg.n_envs, env_seed)?;
    let mut agent = match agent {
        Some(a) => a,
        None => Agent::new(cfg.agent.clone(), vec.observation_dim(), vec.action_space(), cfg.seed)?,
    };
    let file = fs::OpenOptions::new().append(true).open(&log_path)?;
    let interval = cfg.checkpoint_interval;
    let mut logger = RunLogger {
        writer: csv::WriterBuilder::new().has_headers(false).from_writer(file),
        template: TrainLogRow {
            run_id: cfg.run_id.clone(),
            algorithm: cfg.agent.algorithm.name().into(),
            strategy: cfg.env.strategy.name().into(),
            case: cfg.env.case.name().into(),
            n_envs: cfg.n_envs,
            seed: cfg.seed,
            global_step: 0,
            episode: 0,
            episode_reward: 0.0,
            steps_per_episode: 0,
            wall_s: 0.0,
        },
        start: Instant::now(),
        wall_offset: kept.last().map_or(0.0, |r| r.wall_s),
        wall_clock: cfg.wall_clock,
        interval,
        next_checkpoint: if interval > 0 { (agent.global_step / interval + 1) * interval } else { 0 },
        checkpoint_dir: dir.join("checkpoints"),
    };
    agent.learn(&mut vec, cfg.total_steps, &mut logger)?;
    logger.writer.flush()?;
    drop(logger);

    let checkpoint = dir.join(FINAL_CHECKPOINT_FILE);
    save_checkpoint(&agent, &checkpoint)?;
    let rows = read_train_log(&log_path)?;
    let plot = dir.join(REWARD_PLOT_FILE);
    fs::write(&plot, reward_svg(&rows, &cfg.run_id))?;
    Ok(RunSummary {
        run_dir: dir,
        global_step: agent.global_step,
        episodes: rows.len(),
        train_log: log_path,
        checkpoint,
        plot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;
    use crate::env::{EnvCase, Strategy};

    fn bandit_run(id: &str) -> RunConfig {
        RunConfig::from_toml_str(&format!(
            "run_id = \"{id}\"\ntotal_steps = 64\nwall_clock = false\n\
             [env]\ncase = \"bandit\"\n[agent]\nalgorithm = \"ppo\"\nn_steps = 16\nbatch_size = 8\n"
        ))
        .unwrap()
    }

    #[test]
    fn config_schema() {
        let c = bandit_run("a");
        assert_eq!((c.n_envs, c.seed, c.checkpoint_interval), (1, 0, 0));
        assert_eq!(c.env.case, EnvCase::Bandit);
        assert!(matches!(
            RunConfig::from_toml_str("run_id = \"a\"\ntotal_steps = 1\nbogus = 3"),
            Err(Error::Schema(_))
        ));
        assert!(RunConfig::from_toml_str("run_id = \"a\"\ntotal_steps = 1\n[env]\nmesh = 3").is_err());
        assert!(RunConfig::from_toml_str("run_id = \"../x\"\ntotal_steps = 1").is_err());
        assert!(RunConfig::from_toml_str("run_id = \"a\"\ntotal_steps = 0").is_err());
        let dqn_direct = "run_id = \"a\"\ntotal_steps = 1\n[env]\nstrategy = \"direct\"\n[agent]\nalgorithm = \"dqn\"";
        assert!(matches!(RunConfig::from_toml_str(dqn_direct), Err(Error::Incompatible { .. })));
        let back = RunConfig::from_toml_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.env.strategy, Strategy::Incremental);
        assert_eq!(back.agent.algorithm, Algorithm::Ppo);
    }

    #[test]
    fn run_writes_log_checkpoint_and_plot() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            checkpoint_interval: 32,
            ..bandit_run("r1")
        };
        let s = run_train(&cfg, tmp.path(), None).unwrap();
        assert_eq!(s.global_step, 64);
        let rows = read_train_log(&s.train_log).unwrap();
        assert_eq!(rows.len(), 64);
        assert_eq!(rows[0].algorithm, "PPO");
        assert_eq!(rows[0].case, "bandit");
        assert!(rows.iter().all(|r| r.wall_s == 0.0));
        let header = fs::read_to_string(&s.train_log).unwrap();
        assert!(header.starts_with(&TRAIN_LOG_COLUMNS.join(",")));
        assert!(s.checkpoint.exists() && s.plot.exists());
        assert!(s.run_dir.join("checkpoints/step_32.ckpt").exists());
        assert!(s.run_dir.join("checkpoints/step_64.ckpt").exists());
        assert!(matches!(run_train(&cfg, tmp.path(), None), Err(Error::Config(_))));
    }

    #[test]
    fn resume_continues_the_step_count() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            checkpoint_interval: 32,
            ..bandit_run("r2")
        };
        let first = run_train(&cfg, tmp.path(), None).unwrap();
        let more = RunConfig {
            total_steps: 128,
            ..cfg.clone()
        };
        let ckpt = first.run_dir.join("checkpoints/step_32.ckpt");
        let s = run_train(&more, tmp.path(), Some(&ckpt)).unwrap();
        assert_eq!(s.global_step, 128);
        let rows = read_train_log(&s.train_log).unwrap();
        assert_eq!(rows.len(), 128);
        assert!(rows.windows(2).all(|w| w[0].global_step < w[1].global_step));
        assert!(rows.windows(2).all(|w| w[0].episode + 1 == w[1].episode));
    }

    #[test]
    fn resume_rejects_a_different_agent() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = bandit_run("r3");
        let first = run_train(&cfg, tmp.path(), None).unwrap();
        let mut other = cfg.clone();
        other.agent.ent_coef = 0.5;
        assert!(run_train(&other, tmp.path(), Some(&first.checkpoint)).is_err());
    }
}
