//! Actor-critic networks and the clipped policy-gradient update shared by
//! PPO and A2C.

use rand::seq::SliceRandom;
use rand::Rng;

use super::buffers::RolloutBuffer;
use super::config::AgentConfig;
use crate::env::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam, Cache, Categorical, DiagGaussian, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Categorical(Categorical),
    Gaussian(DiagGaussian),
}

impl Distribution {
    pub fn log_prob(&self, a: &Action) -> f64 {
        match (self, a) {
            (Self::Categorical(c), Action::Discrete(k)) => c.log_prob(*k),
            (Self::Gaussian(g), Action::Continuous(v)) => g.log_prob(v),
            _ => panic!("action kind does not match the policy head"),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            Self::Categorical(c) => c.entropy(),
            Self::Gaussian(g) => g.entropy(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        match self {
            Self::Categorical(c) => Action::Discrete(c.sample(rng)),
            Self::Gaussian(g) => Action::Continuous(g.sample(rng)),
        }
    }

    pub fn mode(&self) -> Action {
        match self {
            Self::Categorical(c) => Action::Discrete(c.mode()),
            Self::Gaussian(g) => Action::Continuous(g.mode()),
        }
    }
}

/// Separate policy and value networks; a state-independent `log_std` vector
/// for continuous actions.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub policy: Mlp,
    pub value: Mlp,
    pub log_std: Vec<f64>,
    pub space: ActionSpace,
    opt_policy: Adam,
    opt_value: Adam,
    opt_log_std: Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
    pub log_std: Vec<f64>,
}

/// Diagnostics of one update call, averaged over minibatches.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, space: ActionSpace, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        let policy = Mlp::new(&widths(obs_dim, &cfg.hidden, space.dim()), 1.0, 0.01, rng)?;
        let value = Mlp::new(&widths(obs_dim, &cfg.hidden, 1), 1.0, 1.0, rng)?;
        let log_std = match space {
            ActionSpace::Continuous { n_dof, .. } => vec![cfg.log_std_init; n_dof],
            ActionSpace::Discrete { .. } => Vec::new(),
        };
        Ok(Self::from_parts(policy, value, log_std, space, cfg.lr()))
    }

    pub fn from_parts(policy: Mlp, value: Mlp, log_std: Vec<f64>, space: ActionSpace, lr: f64) -> Self {
        Self {
            opt_policy: Adam::new(policy.params().len(), lr),
            opt_value: Adam::new(value.params().len(), lr),
            opt_log_std: Adam::new(log_std.len(), lr),
            policy,
            value,
            log_std,
            space,
        }
    }

    fn head(&self, out: &[f64]) -> Distribution {
        match self.space {
            ActionSpace::Discrete { .. } => Distribution::Categorical(Categorical::new(out)),
            ActionSpace::Continuous { .. } => {
                Distribution::Gaussian(DiagGaussian::new(out.to_vec(), self.log_std.clone()))
            }
        }
    }

    pub fn distribution(&self, obs: &[f64]) -> Result<Distribution> {
        Ok(self.head(&self.policy.predict(obs)?))
    }

    fn distribution_with_cache(&self, obs: &[f64]) -> Result<(Distribution, Cache)> {
        let cache = self.policy.forward(obs)?;
        Ok((self.head(cache.output()), cache))
    }

    pub fn value_of(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.predict(obs)?[0])
    }

    /// `(action, log π(action), V(obs))`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> Result<(Action, f64, f64)> {
        let dist = self.distribution(obs)?;
        let action = if deterministic { dist.mode() } else { dist.sample(rng) };
        let lp = dist.log_prob(&action);
        Ok((action, lp, self.value_of(obs)?))
    }

    /// One gradient step per minibatch on
    /// `-min(ρA, clip(ρ, 1±clip)A) + c_v (V - R)² - c_e H`, averaged over the
    /// minibatch.
    pub fn gradient_step(
        &mut self,
        buf: &RolloutBuffer,
        idx: &[usize],
        clip: f64,
        normalize: bool,
        cfg: &AgentConfig,
    ) -> Result<UpdateStats> {
        let (mut stats, grads) = self.loss_gradient(buf, idx, clip, normalize, cfg)?;
        // one global norm over all trainable parameters
        let mut all: Vec<f64> = grads.policy.iter().chain(&grads.value).chain(&grads.log_std).copied().collect();
        stats.grad_norm = clip_grad_norm(&mut all, cfg.grad_clip());
        let (p, rest) = all.split_at(grads.policy.len());
        let (v, s) = rest.split_at(grads.value.len());
        self.opt_policy.step(self.policy.params_mut(), p)?;
        self.opt_value.step(self.value.params_mut(), v)?;
        if !s.is_empty() {
            self.opt_log_std.step(&mut self.log_std, s)?;
        }
        Ok(stats)
    }

    /// Minibatch loss statistics and the exact gradient of the total loss.
    pub fn loss_gradient(
        &self,
        buf: &RolloutBuffer,
        idx: &[usize],
        clip: f64,
        normalize: bool,
        cfg: &AgentConfig,
    ) -> Result<(UpdateStats, Gradients)> {
        let b = idx.len() as f64;
        let mut adv: Vec<f64> = idx.iter().map(|&i| buf.advantages[i]).collect();
        if normalize && idx.len() > 1 {
            let mean = adv.iter().sum::<f64>() / b;
            let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (b - 1.0);
            let std = var.sqrt();
            adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
        }
        let mut g_pi = vec![0.0; self.policy.params().len()];
        let mut g_v = vec![0.0; self.value.params().len()];
        let mut g_std = vec![0.0; self.log_std.len()];
        let mut stats = UpdateStats::default();
        let mut clipped = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            let obs = &buf.observations[i];
            let action = &buf.actions[i];
            let (dist, cache) = self.distribution_with_cache(obs)?;
            let ratio = (dist.log_prob(action) - buf.log_probs[i]).exp();
            let a = adv[k];
            let unclipped = ratio * a;
            let clipped_obj = ratio.clamp(1.0 - clip, 1.0 + clip) * a;
            stats.policy_loss -= unclipped.min(clipped_obj) / b;
            if (ratio - 1.0).abs() > clip {
                clipped += 1;
            }
            // ∂L/∂ log π
            let d_logp = if unclipped <= clipped_obj { -ratio * a / b } else { 0.0 };
            let h = dist.entropy();
            stats.entropy += h / b;
            let d_h = -cfg.ent_coef / b;
            let d_out = match (&dist, action) {
                (Distribution::Categorical(c), Action::Discrete(act)) => {
                    let gl = c.grad_log_prob(*act);
                    let ge = c.grad_entropy();
                    gl.iter().zip(&ge).map(|(l, e)| d_logp * l + d_h * e).collect::<Vec<_>>()
                }
                (Distribution::Gaussian(g), Action::Continuous(x)) => {
                    let (gm, gs) = g.grad_log_prob(x);
                    for (acc, s) in g_std.iter_mut().zip(&gs) {
                        *acc += d_logp * s + d_h;
                    }
                    gm.iter().map(|m| d_logp * m).collect()
                }
                _ => return Err(Error::InvalidAction("stored action does not match the head".into())),
            };
            self.policy.backward(&cache, &d_out, &mut g_pi)?;

            let vc = self.value.forward(obs)?;
            let err = vc.output()[0] - buf.returns[i];
            stats.value_loss += err * err / b;
            self.value.backward(&vc, &[2.0 * cfg.vf_coef * err / b], &mut g_v)?;
        }
        stats.clip_fraction = clipped as f64 / b;
        let total = stats.policy_loss + cfg.vf_coef * stats.value_loss - cfg.ent_coef * stats.entropy;
        if !total.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {total} (policy {}, value {})",
                stats.policy_loss, stats.value_loss
            )));
        }
        Ok((
            stats,
            Gradients {
                policy: g_pi,
                value: g_v,
                log_std: g_std,
            },
        ))
    }

    /// Total minibatch loss, recomputed from scratch (for checks).
    pub fn loss(&self, buf: &RolloutBuffer, idx: &[usize], clip: f64, cfg: &AgentConfig) -> Result<f64> {
        let b = idx.len() as f64;
        let mut total = 0.0;
        for &i in idx {
            let d = self.distribution(&buf.observations[i])?;
            let ratio = (d.log_prob(&buf.actions[i]) - buf.log_probs[i]).exp();
            let a = buf.advantages[i];
            let surrogate = (ratio * a).min(ratio.clamp(1.0 - clip, 1.0 + clip) * a);
            let err = self.value_of(&buf.observations[i])? - buf.returns[i];
            total += (-surrogate + cfg.vf_coef * err * err - cfg.ent_coef * d.entropy()) / b;
        }
        Ok(total)
    }

    /// PPO: `n_epochs` passes over shuffled minibatches.
    pub fn ppo_update<R: Rng + ?Sized>(
        &mut self,
        buf: &RolloutBuffer,
        cfg: &AgentConfig,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        let n = buf.len();
        let mb = cfg.minibatch().min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut acc = UpdateStats::default();
        let mut count = 0.0;
        for _ in 0..cfg.n_epochs {
            if mb < n {
                order.shuffle(rng);
            }
            for chunk in order.chunks(mb) {
                let s = self.gradient_step(buf, chunk, cfg.clip_range, cfg.normalize(), cfg)?;
                accumulate(&mut acc, &s);
                count += 1.0;
            }
        }
        Ok(scale(acc, count))
    }

    /// A2C: a single full-batch step without clipping.
    pub fn a2c_update(&mut self, buf: &RolloutBuffer, cfg: &AgentConfig) -> Result<UpdateStats> {
        let idx: Vec<usize> = (0..buf.len()).collect();
        self.gradient_step(buf, &idx, f64::INFINITY, cfg.normalize(), cfg)
    }
}

fn accumulate(acc: &mut UpdateStats, s: &UpdateStats) {
    acc.policy_loss += s.policy_loss;
    acc.value_loss += s.value_loss;
    acc.entropy += s.entropy;
    acc.clip_fraction += s.clip_fraction;
    acc.grad_norm += s.grad_norm;
}

fn scale(mut s: UpdateStats, n: f64) -> UpdateStats {
    if n > 0.0 {
        s.policy_loss /= n;
        s.value_loss /= n;
        s.entropy /= n;
        s.clip_fraction /= n;
        s.grad_norm /= n;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::config::Algorithm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn discrete_space(n: usize) -> ActionSpace {
        ActionSpace::Discrete {
            n_actions: n,
            increment: 1.0,
        }
    }

    fn buffer(ac: &ActorCritic, rng: &mut ChaCha8Rng, n: usize, obs_dim: usize) -> RolloutBuffer {
        let mut b = RolloutBuffer::new(1);
        for _ in 0..n {
            let obs: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (a, lp, v) = ac.act(&obs, false, rng).unwrap();
            b.push(obs, a, lp, rng.random_range(-1.0..1.0), v, rng.random_bool(0.2));
        }
        b.compute_gae(&[0.0], 0.99, 0.95);
        b
    }

    #[test]
    fn unchanged_policy_loss_is_minus_mean_advantage() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = AgentConfig::new(Algorithm::Ppo);
        let mut ac = ActorCritic::new(3, discrete_space(4), &cfg, &mut rng).unwrap();
        let b = buffer(&ac, &mut rng, 16, 3);
        let idx: Vec<usize> = (0..16).collect();
        let s = ac.gradient_step(&b, &idx, 0.2, false, &cfg).unwrap();
        let mean_adv = b.advantages.iter().sum::<f64>() / 16.0;
        assert!((s.policy_loss + mean_adv).abs() < 1e-12);
        assert_eq!(s.clip_fraction, 0.0);
    }

    #[test]
    fn clipped_branch_has_no_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = AgentConfig {
            vf_coef: 0.0,
            ..AgentConfig::new(Algorithm::Ppo)
        };
        let mut ac = ActorCritic::new(2, discrete_space(3), &cfg, &mut rng).unwrap();
        let mut b = buffer(&ac, &mut rng, 4, 2);
        // old log-probs far below the current ones: ρ ≫ 1 + clip
        b.log_probs.iter_mut().for_each(|l| *l -= 5.0);
        b.advantages = vec![1.0; 4];
        let before = ac.policy.params().to_vec();
        let s = ac.gradient_step(&b, &[0, 1, 2, 3], 0.2, false, &cfg).unwrap();
        assert_eq!(s.clip_fraction, 1.0);
        assert_eq!(ac.policy.params(), &before[..]);
    }

    #[test]
    fn zero_advantages_leave_policy_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = AgentConfig {
            vf_coef: 0.0,
            ent_coef: 0.0,
            ..AgentConfig::new(Algorithm::A2c)
        };
        let mut ac = ActorCritic::new(2, discrete_space(3), &cfg, &mut rng).unwrap();
        let mut b = buffer(&ac, &mut rng, 5, 2);
        b.advantages = vec![0.0; 5];
        let (p, v) = (ac.policy.params().to_vec(), ac.value.params().to_vec());
        ac.a2c_update(&b, &cfg).unwrap();
        assert_eq!(ac.policy.params(), &p[..]);
        assert_eq!(ac.value.params(), &v[..]);
    }

    #[test]
    fn a2c_equals_unclipped_single_epoch_full_batch_ppo() {
        for space in [
            discrete_space(5),
            ActionSpace::Continuous {
                n_dof: 3,
                low: -1.0,
                high: 1.0,
            },
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let a2c_cfg = AgentConfig {
                ent_coef: 0.01,
                ..AgentConfig::new(Algorithm::A2c)
            };
            let ac = ActorCritic::new(4, space, &a2c_cfg, &mut rng).unwrap();
            let b = buffer(&ac, &mut rng, 10, 4);
            let ppo_cfg = AgentConfig {
                algorithm: Algorithm::Ppo,
                learning_rate: Some(a2c_cfg.lr()),
                clip_range: f64::INFINITY,
                n_epochs: 1,
                batch_size: Some(10),
                normalize_advantage: Some(false),
                ..a2c_cfg.clone()
            };
            let mut x = ac.clone();
            let mut y = ac.clone();
            x.a2c_update(&b, &a2c_cfg).unwrap();
            y.ppo_update(&b, &ppo_cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            assert_eq!(x.policy, y.policy);
            assert_eq!(x.value, y.value);
            assert_eq!(x.log_std, y.log_std);
            assert_ne!(x.policy, ac.policy);
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for space in [
            discrete_space(4),
            ActionSpace::Continuous {
                n_dof: 2,
                low: -1.0,
                high: 1.0,
            },
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let cfg = AgentConfig {
                hidden: vec![8, 8],
                ent_coef: 0.1,
                ..AgentConfig::new(Algorithm::Ppo)
            };
            let mut ac = ActorCritic::new(3, space, &cfg, &mut rng).unwrap();
            ac.log_std.iter_mut().for_each(|s| *s = rng.random_range(-0.5..0.5));
            let b = buffer(&ac, &mut rng, 6, 3);
            let idx: Vec<usize> = (0..6).collect();
            let clip = 0.2;
            let (_, g) = ac.loss_gradient(&b, &idx, clip, false, &cfg).unwrap();
            let h = 1e-5;
            let check = |fd: f64, an: f64| {
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(err < 1e-4, "fd {fd} vs analytic {an}");
            };
            for i in 0..ac.policy.params().len() {
                let mut p = ac.clone();
                p.policy.params_mut()[i] += h;
                let mut m = ac.clone();
                m.policy.params_mut()[i] -= h;
                check((p.loss(&b, &idx, clip, &cfg).unwrap() - m.loss(&b, &idx, clip, &cfg).unwrap()) / (2.0 * h), g.policy[i]);
            }
            for i in 0..ac.value.params().len() {
                let mut p = ac.clone();
                p.value.params_mut()[i] += h;
                let mut m = ac.clone();
                m.value.params_mut()[i] -= h;
                check((p.loss(&b, &idx, clip, &cfg).unwrap() - m.loss(&b, &idx, clip, &cfg).unwrap()) / (2.0 * h), g.value[i]);
            }
            for i in 0..ac.log_std.len() {
                let mut p = ac.clone();
                p.log_std[i] += h;
                let mut m = ac.clone();
                m.log_std[i] -= h;
                check((p.loss(&b, &idx, clip, &cfg).unwrap() - m.loss(&b, &idx, clip, &cfg).unwrap()) / (2.0 * h), g.log_std[i]);
            }
        }
    }
}
