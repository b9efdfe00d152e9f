use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Softmax distribution over logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    log_probs: Vec<f64>,
}

impl Categorical {
    pub fn new(logits: &[f64]) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Self {
            log_probs: logits.iter().map(|l| l - lse).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.log_probs.len()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, a: usize) -> f64 {
        self.log_probs[a]
    }

    pub fn entropy(&self) -> f64 {
        -self.log_probs.iter().map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * l }).sum::<f64>()
    }

    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF draw from one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, l) in self.log_probs.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return i;
            }
        }
        self.mode()
    }

    /// `∂ log π(a) / ∂ logits = onehot(a) - p`.
    pub fn grad_log_prob(&self, a: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs().iter().map(|p| -p).collect();
        g[a] += 1.0;
        g
    }

    /// `∂H / ∂ logit_i = -p_i (log p_i + H)`.
    pub fn grad_entropy(&self) -> Vec<f64> {
        let h = self.entropy();
        self.log_probs
            .iter()
            .map(|&l| {
                let p = l.exp();
                if p == 0.0 {
                    0.0
                } else {
                    -p * (l + h)
                }
            })
            .collect()
    }
}

/// Independent normals per action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len(), "mean and log_std widths differ");
        Self { mean, log_std }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s.exp() * z
            })
            .collect()
    }

    pub fn mode(&self) -> Vec<f64> {
        self.mean.clone()
    }

    /// Log density of the unclamped action.
    pub fn log_prob(&self, a: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(a)
            .map(|((&m, &s), &x)| {
                let z = (x - m) / s.exp();
                -0.5 * z * z - s - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 * (LN_2PI + 1.0)).sum()
    }

    /// `(∂ log π / ∂ mean, ∂ log π / ∂ log_std)`.
    pub fn grad_log_prob(&self, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(a)
            .map(|((&m, &s), &x)| {
                let var = (2.0 * s).exp();
                let d = x - m;
                (d / var, d * d / var - 1.0)
            })
            .unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn near_deterministic_categorical() {
        let c = Categorical::new(&[1000.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hits = (0..10_000).filter(|_| c.sample(&mut rng) == 0).count();
        assert!(hits as f64 / 1e4 > 0.99);
        assert!(c.entropy().abs() < 1e-12);
    }

    #[test]
    fn uniform_entropy_is_ln_n() {
        let c = Categorical::new(&[0.3, 0.3, 0.3]);
        assert!((c.entropy() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..7).map(|_| rng.random_range(-20.0..20.0)).collect();
            let s: f64 = Categorical::new(&logits).probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn categorical_sampling_frequencies() {
        let c = Categorical::new(&[0.0, 2f64.ln()]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ones = (0..30_000).filter(|_| c.sample(&mut rng) == 1).count() as f64 / 30_000.0;
        assert!((ones - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn categorical_gradients_match_finite_differences() {
        let logits = [0.4, -1.2, 2.0, 0.1];
        let h = 1e-6;
        for a in 0..4 {
            let g = Categorical::new(&logits).grad_log_prob(a);
            let ge = Categorical::new(&logits).grad_entropy();
            for i in 0..4 {
                let mut p = logits;
                p[i] += h;
                let mut m = logits;
                m[i] -= h;
                let (cp, cm) = (Categorical::new(&p), Categorical::new(&m));
                let fd = (cp.log_prob(a) - cm.log_prob(a)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-8);
                let fd = (cp.entropy() - cm.entropy()) / (2.0 * h);
                assert!((fd - ge[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gaussian_collapses_to_mean() {
        let g = DiagGaussian::new(vec![0.3, -0.2], vec![-60.0, -60.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = g.sample(&mut rng);
        assert!((a[0] - 0.3).abs() < 1e-20 && (a[1] + 0.2).abs() < 1e-20);
    }

    #[test]
    fn gaussian_log_prob_and_entropy() {
        let g = DiagGaussian::new(vec![0.0], vec![0.0]);
        assert!((g.log_prob(&[0.0]) + 0.5 * LN_2PI).abs() < 1e-15);
        assert!((g.entropy() - 0.5 * (LN_2PI + 1.0)).abs() < 1e-15);
        let mean = vec![0.5, -1.0, 2.0];
        let log_std = vec![-0.3, 0.2, 0.0];
        let a = [0.1, -0.4, 2.5];
        let (gm, gs) = DiagGaussian::new(mean.clone(), log_std.clone()).grad_log_prob(&a);
        let h = 1e-6;
        for i in 0..3 {
            let mut p = mean.clone();
            p[i] += h;
            let mut m = mean.clone();
            m[i] -= h;
            let fd = (DiagGaussian::new(p, log_std.clone()).log_prob(&a)
                - DiagGaussian::new(m, log_std.clone()).log_prob(&a))
                / (2.0 * h);
            assert!((fd - gm[i]).abs() < 1e-7);
            let mut p = log_std.clone();
            p[i] += h;
            let mut m = log_std.clone();
            m[i] -= h;
            let fd = (DiagGaussian::new(mean.clone(), p).log_prob(&a) - DiagGaussian::new(mean.clone(), m).log_prob(&a))
                / (2.0 * h);
            assert!((fd - gs[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = DiagGaussian::new(vec![0.0; 4], vec![0.0; 4]);
        let a = g.sample(&mut ChaCha8Rng::seed_from_u64(77));
        let b = g.sample(&mut ChaCha8Rng::seed_from_u64(77));
        assert_eq!(a, b);
    }
}
