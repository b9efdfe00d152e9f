//! Dense multilayer perceptrons with hand-written reverse-mode gradients, an
//! Adam optimizer and the two policy heads.

mod heads;

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};

pub use heads::{Categorical, DiagGaussian};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Parameters live in one flat vector, layer by layer, each layer storing its
/// `out × in` weight matrix row-major followed by its bias.
#[derive(Debug)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
    id: u64,
    version: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            widths: self.widths.clone(),
            params: self.params.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.widths == other.widths && self.params == other.params
    }
}

/// Activations recorded by [`Mlp::forward`], consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    /// Layer inputs followed by the output: `activations[0]` is `x`.
    activations: Vec<Vec<f64>>,
    stamp: (u64, u64),
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least input and output")
    }
}

pub fn n_params(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self {
            widths: widths.to_vec(),
            params: vec![0.0; n_params(widths)],
            id: fresh_id(),
            version: 0,
        })
    }

    /// Glorot-uniform weights scaled by `gain`, zero biases; the output layer
    /// is further scaled by `out_gain`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], gain: f64, out_gain: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        let n_layers = widths.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let g = if l + 1 == n_layers { gain * out_gain } else { gain };
            let limit = g * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = rng.random_range(-limit..=limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameters. Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn copy_params_from(&mut self, other: &Mlp) -> Result<()> {
        if other.widths != self.widths {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                got: other.params.len(),
            });
        }
        self.params_mut().copy_from_slice(&other.params);
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Cache> {
        self.check_input(x)?;
        let n_layers = self.widths.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = activations.last().unwrap();
            let mut out: Vec<f64> = b.to_vec();
            for (o, row) in out.iter_mut().zip(w.chunks_exact(n_in)) {
                *o += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < n_layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
            off += n_in * n_out + n_out;
        }
        Ok(Cache {
            activations,
            stamp: (self.id, self.version),
        })
    }

    /// Output only.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.activations.pop().unwrap())
    }

    /// Adds `∂L/∂θ` to `grad` (same layout as the parameters) and returns
    /// `∂L/∂x`.
    pub fn backward(&self, cache: &Cache, d_out: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if cache.stamp != (self.id, self.version) {
            return Err(Error::StaleCache);
        }
        if d_out.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.output_dim(),
                got: d_out.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let n_layers = self.widths.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            if l + 1 < n_layers {
                // tanh' = 1 - y²
                for (d, y) in delta.iter_mut().zip(&cache.activations[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let input = &cache.activations[l];
            let off = offsets[l];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                if d != 0.0 {
                    for (g, &a) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (p, &wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * wv;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Writes widths and parameters (little-endian).
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&(self.widths.len() as u32).to_le_bytes())?;
        for &width in &self.widths {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let n = read_u32(r)? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        let widths = (0..n).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let len = read_u64(r)? as usize;
        if widths.contains(&0) || len != n_params(&widths) {
            return Err(Error::Checkpoint(format!("{len} parameters do not fit widths {widths:?}")));
        }
        let params = read_f64s(r, len)?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Self::from_params(&widths, params)
    }
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_u64(r).map(f64::from_bits)).collect()
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated file".into())
    } else {
        Error::Io(e)
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Scales `grads` in place so its Euclidean norm is at most `max_norm`;
/// returns the norm before scaling.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Straightforward re-implementation with explicit weight indexing.
    fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let w = net.widths();
        let p = net.params();
        let mut a = x.to_vec();
        let mut off = 0;
        for l in 0..w.len() - 1 {
            let mut z = vec![0.0; w[l + 1]];
            for o in 0..w[l + 1] {
                let mut s = p[off + w[l] * w[l + 1] + o];
                for i in 0..w[l] {
                    s += p[off + o * w[l] + i] * a[i];
                }
                z[o] = if l + 2 < w.len() { s.tanh() } else { s };
            }
            off += w[l] * w[l + 1] + w[l + 1];
            a = z;
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 8, 2]).unwrap();
        assert_eq!(net.predict(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let net = Mlp::from_params(&[2, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net.predict(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn matches_reference_implementation() {
        let net = Mlp::new(&[2, 16, 2], 1.0, 1.0, &mut rng(42)).unwrap();
        let mut r = rng(1);
        for _ in 0..20 {
            let x = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            let a = net.predict(&x).unwrap();
            let b = reference_forward(&net, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::ShapeMismatch { .. })));
        assert!(Mlp::zeros(&[3]).is_err());
        assert!(Mlp::from_params(&[3, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = Mlp::new(&[2, 4, 1], 1.0, 1.0, &mut rng(0)).unwrap();
        let cache = net.forward(&[0.1, 0.2]).unwrap();
        net.params_mut()[0] += 1.0;
        let mut g = vec![0.0; net.params().len()];
        assert!(matches!(net.backward(&cache, &[1.0], &mut g), Err(Error::StaleCache)));
        let other = net.clone();
        let cache = other.forward(&[0.1, 0.2]).unwrap();
        assert!(matches!(net.backward(&cache, &[1.0], &mut g), Err(Error::StaleCache)));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let net = Mlp::new(&[3, 8, 8, 2], 1.0, 1.0, &mut rng(3)).unwrap();
        let cache = net.forward(&[0.5, -0.1, 0.9]).unwrap();
        let mut g = vec![0.0; net.params().len()];
        let dx = net.backward(&cache, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.iter().chain(&dx).all(|&v| v == 0.0));
    }

    #[test]
    fn linear_least_squares_gradient_matches_closed_form() {
        // L = ½ Σ_k |W x_k + b - y_k|², ∂L/∂W = Σ r_k x_kᵀ, ∂L/∂b = Σ r_k
        let net = Mlp::new(&[3, 2], 1.0, 1.0, &mut rng(5)).unwrap();
        let mut r = rng(6);
        let xs: Vec<[f64; 3]> = (0..10).map(|_| [r.random(), r.random(), r.random()]).collect();
        let ys: Vec<[f64; 2]> = (0..10).map(|_| [r.random(), r.random()]).collect();
        let mut g = vec![0.0; net.params().len()];
        let mut expected = vec![0.0; net.params().len()];
        for (x, y) in xs.iter().zip(&ys) {
            let cache = net.forward(x).unwrap();
            let res: Vec<f64> = cache.output().iter().zip(y).map(|(a, b)| a - b).collect();
            net.backward(&cache, &res, &mut g).unwrap();
            for o in 0..2 {
                for i in 0..3 {
                    expected[o * 3 + i] += res[o] * x[i];
                }
                expected[6 + o] += res[o];
            }
        }
        for (a, b) in g.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_gradients() {
        let mut r = rng(9);
        for trial in 0..5 {
            let widths = [4, 1 + trial * 12, 3 + trial, 3];
            let net = Mlp::new(&widths, 1.0, 1.0, &mut r).unwrap();
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
            // L = Σ c_k y_k
            let loss = |n: &Mlp| n.predict(&x).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
            let cache = net.forward(&x).unwrap();
            let mut g = vec![0.0; net.params().len()];
            net.backward(&cache, &c, &mut g).unwrap();
            let h = 1e-5;
            for i in 0..net.params().len() {
                let mut plus = net.clone();
                plus.params_mut()[i] += h;
                let mut minus = net.clone();
                minus.params_mut()[i] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
                assert!(err < 1e-4, "param {i}: fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = vec![1.0, -2.0];
        let mut adam = Adam::new(2, 1e-2);
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![0.0, 0.0];
        let mut adam = Adam::new(2, 1e-3);
        adam.step(&mut p, &[3.0, -0.25]).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn adam_minimizes_a_parabola() {
        let mut w = vec![5.0f64];
        let mut adam = Adam::new(1, 1e-2);
        let mut steps = 0;
        while w[0].abs() >= 1e-2 {
            let g = [2.0 * w[0]];
            adam.step(&mut w, &g).unwrap();
            steps += 1;
            assert!(steps <= 2000, "w = {}", w[0]);
        }
    }

    #[test]
    fn grad_norm_clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn binary_round_trip() {
        let net = Mlp::new(&[5, 7, 3], 1.0, 1.0, &mut rng(2)).unwrap();
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let back = Mlp::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::read_from(&mut &buf[..buf.len() - 3]).is_err());
    }
}
