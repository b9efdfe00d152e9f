//! Binary agent checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "SHAPEOPT"
//! version      u32
//! algorithm    u8       0 PPO, 1 A2C, 2 DQN
//! head         u8       0 categorical, 1 diagonal Gaussian, 2 Q-values
//! obs_dim      u32
//! action_dim   u32
//! space        2 × f64  (increment, 0) or (low, high)
//! seed         u64
//! global_step  u64
//! episodes     u64
//! config       u32 length + UTF-8 TOML of the agent config
//! n_nets       u32, then per net:
//!   n_widths   u32, widths u32 × n_widths
//!   n_params   u64, params f64 × n_params
//! n_log_std    u32, log_std f64 × n_log_std
//! ```
//!
//! Actor-critic checkpoints store `[policy, value]`, DQN stores `[q, target]`.
//! Optimizer moments are not stored.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ActorCritic, Agent, AgentConfig, Algorithm, Model, QLearner};
use crate::env::ActionSpace;
use crate::error::{Error, Result};
use crate::nn::{read_f64s, read_u32, read_u64, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SHAPEOPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn head_tag(agent: &Agent) -> u8 {
    match (&agent.model, agent.space) {
        (Model::Q(_), _) => 2,
        (_, ActionSpace::Discrete { .. }) => 0,
        (_, ActionSpace::Continuous { .. }) => 1,
    }
}

pub fn write_checkpoint(agent: &Agent, w: &mut impl Write) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&[agent.config.algorithm.tag(), head_tag(agent)])?;
    w.write_all(&(agent.obs_dim as u32).to_le_bytes())?;
    w.write_all(&(agent.space.dim() as u32).to_le_bytes())?;
    let (p, q) = match agent.space {
        ActionSpace::Discrete { increment, .. } => (increment, 0.0),
        ActionSpace::Continuous { low, high, .. } => (low, high),
    };
    for v in [p, q] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [agent.seed, agent.global_step, agent.episodes] {
        w.write_all(&v.to_le_bytes())?;
    }
    let cfg = toml::to_string(&agent.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(cfg.as_bytes())?;
    let (nets, log_std): (Vec<&Mlp>, &[f64]) = match &agent.model {
        Model::ActorCritic(ac) => (vec![&ac.policy, &ac.value], &ac.log_std),
        Model::Q(q) => (vec![&q.q, &q.target], &[]),
    };
    w.write_all(&(nets.len() as u32).to_le_bytes())?;
    for n in nets {
        n.write_to(w)?;
    }
    w.write_all(&(log_std.len() as u32).to_le_bytes())?;
    for s in log_std {
        w.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Agent> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for a header".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut tags = [0u8; 2];
    r.read_exact(&mut tags).map_err(Error::Io)?;
    let algorithm =
        Algorithm::from_tag(tags[0]).ok_or_else(|| Error::Checkpoint(format!("unknown algorithm tag {}", tags[0])))?;
    let head = tags[1];
    let obs_dim = read_u32(r)? as usize;
    let action_dim = read_u32(r)? as usize;
    let sp = read_f64s(r, 2)?;
    let space = match head {
        0 | 2 => ActionSpace::Discrete {
            n_actions: action_dim,
            increment: sp[0],
        },
        1 => ActionSpace::Continuous {
            n_dof: action_dim,
            low: sp[0],
            high: sp[1],
        },
        t => return Err(Error::Checkpoint(format!("unknown head tag {t}"))),
    };
    let seed = read_u64(r)?;
    let global_step = read_u64(r)?;
    let episodes = read_u64(r)?;
    let len = read_u32(r)? as usize;
    let mut text = vec![0u8; len];
    r.read_exact(&mut text).map_err(Error::Io)?;
    let text = String::from_utf8(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let config: AgentConfig = toml::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if config.algorithm != algorithm {
        return Err(Error::Checkpoint("algorithm tag disagrees with the stored config".into()));
    }
    let n_nets = read_u32(r)?;
    if n_nets != 2 {
        return Err(Error::Checkpoint(format!("expected 2 networks, found {n_nets}")));
    }
    let a = Mlp::read_from(r)?;
    let b = Mlp::read_from(r)?;
    let n_std = read_u32(r)? as usize;
    if n_std > 1 << 20 {
        return Err(Error::Checkpoint("implausible log_std length".into()));
    }
    let log_std = read_f64s(r, n_std)?;
    let dims_ok = a.input_dim() == obs_dim && b.input_dim() == obs_dim && a.output_dim() == action_dim;
    if !dims_ok {
        return Err(Error::Checkpoint("network widths disagree with the header".into()));
    }
    let model = match (algorithm, head) {
        (Algorithm::Dqn, 2) => {
            let mut q = QLearner::from_net(a, config.lr());
            q.target = b;
            Model::Q(q)
        }
        (Algorithm::Ppo | Algorithm::A2c, 0 | 1) => {
            let expected_std = if head == 1 { action_dim } else { 0 };
            if n_std != expected_std || b.output_dim() != 1 {
                return Err(Error::Checkpoint("value head or log_std has the wrong size".into()));
            }
            Model::ActorCritic(ActorCritic::from_parts(a, b, log_std, space, config.lr()))
        }
        _ => return Err(Error::Checkpoint("head type does not fit the algorithm".into())),
    };
    let mut agent = Agent::from_model(config, obs_dim, space, model, seed);
    agent.global_step = global_step;
    agent.episodes = episodes;
    agent.reseed(seed ^ global_step.rotate_left(32));
    Ok(agent)
}

pub fn save_checkpoint(agent: &Agent, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(agent, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Agent> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
