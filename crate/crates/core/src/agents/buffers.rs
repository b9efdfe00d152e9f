use rand::Rng;

use crate::env::Action;

/// On-policy storage, step-major: entry `t * n_envs + e`.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// The transition ended its episode.
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize) -> Self {
        Self {
            n_envs,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, obs: Vec<f64>, action: Action, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn clear(&mut self) {
        let n_envs = self.n_envs;
        *self = Self::new(n_envs);
    }

    /// GAE(λ) advantages and `returns = advantages + values`, bootstrapping
    /// each environment from `last_values` unless its last step was terminal.
    pub fn compute_gae(&mut self, last_values: &[f64], gamma: f64, lambda: f64) {
        let n = self.n_envs;
        assert_eq!(last_values.len(), n);
        assert_eq!(self.len() % n, 0, "buffer holds whole batches");
        let steps = self.len() / n;
        self.advantages = vec![0.0; self.len()];
        for e in 0..n {
            let mut gae = 0.0;
            for t in (0..steps).rev() {
                let i = t * n + e;
                let next_value = if t + 1 == steps { last_values[e] } else { self.values[i + n] };
                let live = if self.dones[i] { 0.0 } else { 1.0 };
                let delta = self.rewards[i] + gamma * next_value * live - self.values[i];
                gae = delta + gamma * lambda * live * gae;
                self.advantages[i] = gae;
            }
        }
        self.returns = self.advantages.iter().zip(&self.values).map(|(a, v)| a + v).collect();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True episode end (not a step-cap truncation): no bootstrap.
    pub terminal: bool,
}

/// FIFO ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, x: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(x);
        } else {
            self.items[self.next] = x;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `n` draws with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Vec<&'a Experience> {
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}
