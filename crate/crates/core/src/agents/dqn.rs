use rand::Rng;

use super::buffers::Experience;
use super::config::AgentConfig;
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam, Mlp};

/// Online Q-network, its periodically synchronized target copy and optimizer.
#[derive(Debug, Clone)]
pub struct QLearner {
    pub q: Mlp,
    pub target: Mlp,
    opt: Adam,
}

impl QLearner {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, n_actions: usize, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        let mut w = vec![obs_dim];
        w.extend_from_slice(&cfg.hidden);
        w.push(n_actions);
        Ok(Self::from_net(Mlp::new(&w, 1.0, 1.0, rng)?, cfg.lr()))
    }

    pub fn from_net(q: Mlp, lr: f64) -> Self {
        Self {
            target: q.clone(),
            opt: Adam::new(q.params().len(), lr),
            q,
        }
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.q.predict(obs)
    }

    pub fn greedy(&self, obs: &[f64]) -> Result<usize> {
        let q = self.q_values(obs)?;
        Ok(argmax(&q))
    }

    /// `r + γ max_a' Q_target(s', a')`, without bootstrap on terminal steps.
    pub fn td_target(&self, x: &Experience, gamma: f64) -> Result<f64> {
        if x.terminal {
            return Ok(x.reward);
        }
        let next = self.target.predict(&x.next_obs)?;
        Ok(x.reward + gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    /// One step on the mean squared TD error; returns the loss.
    pub fn update(&mut self, batch: &[&Experience], cfg: &AgentConfig) -> Result<f64> {
        let b = batch.len() as f64;
        let mut grad = vec![0.0; self.q.params().len()];
        let mut loss = 0.0;
        for x in batch {
            let y = self.td_target(x, cfg.gamma)?;
            let cache = self.q.forward(&x.obs)?;
            let err = cache.output()[x.action] - y;
            loss += err * err / b;
            let mut d = vec![0.0; cache.output().len()];
            d[x.action] = 2.0 * err / b;
            self.q.backward(&cache, &d, &mut grad)?;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("TD loss {loss}")));
        }
        clip_grad_norm(&mut grad, cfg.grad_clip());
        self.opt.step(self.q.params_mut(), &grad)?;
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target
            .copy_params_from(&self.q)
            .expect("target and online nets share widths");
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
