use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use shapeopt_core::agents::{evaluate_policy, load_checkpoint};
use shapeopt_core::experiment::{
    bench_vecenv, output_root, run_deform, run_solve, run_train, write_bench_csv, write_eval_csvs, BenchConfig,
    RunConfig, SolveCase, SolveConfig,
};

/// Reinforcement-learning shape optimization of 2D flow channels.
#[derive(Parser)]
#[command(name = "shapeopt", version)]
struct Cli {
    /// Output root; defaults to $SHAPEOPT_OUTPUT, then ./runs.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the flow on a base or deformed geometry; writes VTK and an objectives CSV.
    Solve(GeometryArgs),
    /// Deform a base mesh and write it as VTK.
    Deform(GeometryArgs),
    /// Train an agent from a run config.
    Train {
        /// Run config (TOML).
        config: PathBuf,
        /// Continue from this checkpoint of the same run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Roll out a checkpoint and report reward statistics.
    Evaluate {
        checkpoint: PathBuf,
        /// Run config whose [env] section defines the environment.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Greedy actions instead of sampling.
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time environment stepping at several vectorization widths.
    BenchVecenv {
        /// Bench config (TOML); flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated widths.
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        sleep_ms: Option<u64>,
    },
}

#[derive(Args)]
struct GeometryArgs {
    /// Solve config (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_case)]
    case: Option<SolveCase>,
    #[arg(long)]
    mesh_h: Option<f64>,
    /// Whitespace- or comma-separated control-point DOFs.
    #[arg(long)]
    displacement: Option<PathBuf>,
    /// Output path (a directory for `solve`, a .vtk file for `deform`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_case(s: &str) -> std::result::Result<SolveCase, String> {
    match s {
        "tjunction" | "t-junction" => Ok(SolveCase::Tjunction),
        "channel" => Ok(SolveCase::Channel),
        _ => Err(format!("unknown case {s:?} (expected tjunction or channel)")),
    }
}

fn solve_config(g: &GeometryArgs) -> Result<SolveConfig> {
    let mut cfg: SolveConfig = match &g.config {
        Some(p) => SolveConfig::load(p).with_context(|| format!("invalid solve config {}", p.display()))?,
        None => SolveConfig::default(),
    };
    if let Some(c) = g.case {
        cfg.case = c;
    }
    if let Some(h) = g.mesh_h {
        cfg.mesh_h = h;
    }
    if let Some(d) = &g.displacement {
        cfg.displacement = Some(d.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let root = cli.output.clone().unwrap_or_else(output_root);
    match cli.command {
        Command::Solve(geometry) => {
            let cfg = solve_config(&geometry)?;
            let out = geometry.out.unwrap_or_else(|| root.join(format!("solve-{}", cfg.case.name())));
            let s = run_solve(&cfg, &out).context("solve failed")?;
            println!(
                "{} nodes, {} triangles, {} Picard iterations",
                s.n_nodes, s.n_triangles, s.picard_iterations
            );
            if let Some(mu) = s.report.mu {
                println!("mu = {mu:.6}");
            }
            if let Some(q) = s.report.q {
                println!("q = {q:.6}");
            }
            if let Some(r) = s.report.mass_imbalance() {
                println!("relative mass imbalance = {r:.3e}");
            }
            println!("wrote {} and {}", s.vtk.display(), s.csv.display());
        }
        Command::Deform(g) => {
            let cfg = solve_config(&g)?;
            if cfg.displacement.is_none() {
                bail!("deform needs --displacement or a config with `displacement`");
            }
            let out = g.out.unwrap_or_else(|| root.join(format!("deformed-{}.vtk", cfg.case.name())));
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let area = run_deform(&cfg, &out).context("deform failed")?;
            println!("minimum element area {area:.3e}; wrote {}", out.display());
        }
        Command::Train { config, resume } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("invalid run config {}", config.display()))?;
            let s = run_train(&cfg, &root, resume.as_deref())?;
            println!(
                "{} episodes, {} steps; log {}, checkpoint {}, plot {}",
                s.episodes,
                s.global_step,
                s.train_log.display(),
                s.checkpoint.display(),
                s.plot.display()
            );
        }
        Command::Evaluate {
            checkpoint,
            config,
            episodes,
            deterministic,
            seed,
        } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("invalid run config {}", config.display()))?;
            let agent = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let stats = evaluate_policy(&agent, &cfg.env, episodes, deterministic, seed)?;
            let dir = cfg.run_dir(&root).join("eval");
            write_eval_csvs(&stats, &cfg.run_id, &dir)?;
            println!(
                "{} episodes: mean reward {:.4}, mean steps {:.2}, goal rate {:.3}; wrote {}",
                stats.episodes.len(),
                stats.mean_reward,
                stats.mean_steps,
                stats.goal_rate,
                dir.display()
            );
        }
        Command::BenchVecenv {
            config,
            widths,
            steps,
            sleep_ms,
        } => {
            let mut cfg: BenchConfig = match &config {
                Some(p) => BenchConfig::load(p).with_context(|| format!("invalid bench config {}", p.display()))?,
                None => BenchConfig::default(),
            };
            if let Some(w) = widths {
                cfg.n_envs = w;
            }
            if let Some(s) = steps {
                cfg.total_steps = s;
            }
            if let Some(ms) = sleep_ms {
                cfg.env.sleep_ms = ms;
            }
            let rows = bench_vecenv(&cfg)?;
            println!("{:>6} {:>8} {:>10} {:>12} {:>8}", "n_envs", "steps", "wall_s", "steps/s", "speedup");
            for r in &rows {
                println!(
                    "{:>6} {:>8} {:>10.3} {:>12.1} {:>8.2}",
                    r.n_envs, r.steps, r.wall_s, r.steps_per_s, r.speedup
                );
            }
            fs::create_dir_all(&root)?;
            let out = root.join("bench_vecenv.csv");
            write_bench_csv(&rows, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
