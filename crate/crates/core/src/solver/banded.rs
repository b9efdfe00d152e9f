//! Banded Gaussian elimination with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl`
//! super-diagonals hold fill-in created by row interchanges.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub column: usize,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku, "({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Replaces row `i` with `diag` on the diagonal and zeros elsewhere.
    pub fn set_identity_row(&mut self, i: usize, diag: f64) {
        let row = &mut self.data[i * self.width..(i + 1) * self.width];
        row.fill(0.0);
        row[self.kl] = diag;
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(0.0);
    }

    /// Solves `A x = b` in place, destroying the matrix.
    pub fn solve_in_place(&mut self, b: &mut [f64]) -> Result<(), SingularPivot> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let reach = self.kl + self.ku;
        let w = self.width;
        let kl = self.kl;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(SingularPivot { column: k });
            }
            if p != k {
                for j in k..=last_col {
                    let (a, c) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            let pivot = self.data[self.idx(k, k)];
            let kstart = k * w + kl; // (k, k)
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let f = self.data[ik] / pivot;
                if f == 0.0 {
                    continue;
                }
                let span = last_col - k;
                let (head, tail) = self.data.split_at_mut(ik);
                let pivot_row = &head[kstart..=kstart + span];
                for (x, &y) in tail[..=span].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
                b[i] -= f * b[k];
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + reach).min(n - 1);
            let mut s = b[i];
            let base = self.idx(i, i);
            for (off, j) in (i + 1..=last_col).enumerate() {
                s -= self.data[base + 1 + off] * b[j];
            }
            b[i] = s / self.data[base];
        }
        Ok(())
    }
}
