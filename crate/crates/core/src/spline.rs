//! Tensor-product B-spline kernel used by the free-form deformation.
//!
//! Only clamped (open) knot vectors on `[0, 1]` are supported. Basis
//! functions are evaluated with the Cox–de Boor triangular scheme, returning
//! the `degree + 1` functions that do not vanish on the knot span.

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Clamped knot vector on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Validates an explicit knot sequence.
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        let m = knots.len();
        if m < 2 * (degree + 1) {
            return Err(Error::Config(format!(
                "knot vector of degree {degree} needs at least {} knots, got {m}",
                2 * (degree + 1)
            )));
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Config("knots must be non-decreasing".into()));
        }
        let clamped_lo = knots[..=degree].iter().all(|&k| k == 0.0);
        let clamped_hi = knots[m - degree - 1..].iter().all(|&k| k == 1.0);
        if !clamped_lo || !clamped_hi {
            return Err(Error::Config(format!(
                "knot vector must start with {0} zeros and end with {0} ones",
                degree + 1
            )));
        }
        Ok(Self { degree, knots })
    }

    /// Open uniform knot vector with `n_basis` basis functions.
    pub fn clamped_uniform(degree: usize, n_basis: usize) -> Result<Self> {
        if n_basis < degree + 1 {
            return Err(Error::Config(format!(
                "{n_basis} basis functions cannot carry degree {degree}"
            )));
        }
        let n_interior = n_basis - degree - 1;
        let mut knots = vec![0.0; degree + 1];
        let segments = (n_interior + 1) as f64;
        knots.extend((1..=n_interior).map(|k| k as f64 / segments));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Greville abscissae: mean of `degree` consecutive knots starting at `i + 1`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        if p == 0 {
            return (0..self.n_basis())
                .map(|i| 0.5 * (self.knots[i] + self.knots[i + 1]))
                .collect();
        }
        (0..self.n_basis())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// Index `s` of the knot span `[t_s, t_{s+1})` containing `u`; the last
    /// non-empty span is used for `u = 1`.
    fn find_span(&self, u: f64) -> usize {
        let n = self.n_basis();
        if u >= self.knots[n] {
            return n - 1;
        }
        let (mut lo, mut hi) = (self.degree, n);
        let mut mid = (lo + hi) / 2;
        while u < self.knots[mid] || u >= self.knots[mid + 1] {
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2;
        }
        mid
    }
}

/// Non-vanishing basis functions at `u`.
///
/// Returns the span index `s`; entry `k` of the values belongs to basis
/// function `s - degree + k`.
pub fn eval_basis(kv: &KnotVector, u: f64) -> Result<(usize, Vec<f64>)> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("parameter {u} outside [0, 1]")));
    }
    let p = kv.degree;
    let t = &kv.knots;
    let span = kv.find_span(u);
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = u - t[span + 1 - j];
        right[j] = t[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    Ok((span, n))
}

/// Tensor-product B-spline surface mapping `[0,1]^2` into the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BSpline2D {
    knots_u: KnotVector,
    knots_v: KnotVector,
    /// Row-major over `u`: control point `(i, j)` lives at `i * n_v + j`.
    control_points: Vec<Point2>,
}

impl BSpline2D {
    pub fn new(knots_u: KnotVector, knots_v: KnotVector, control_points: Vec<Point2>) -> Result<Self> {
        let expected = knots_u.n_basis() * knots_v.n_basis();
        if control_points.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: control_points.len(),
            });
        }
        Ok(Self {
            knots_u,
            knots_v,
            control_points,
        })
    }

    pub fn knots_u(&self) -> &KnotVector {
        &self.knots_u
    }

    pub fn knots_v(&self) -> &KnotVector {
        &self.knots_v
    }

    /// `(n_u, n_v)`.
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.knots_u.n_basis(), self.knots_v.n_basis())
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub fn control_points_mut(&mut self) -> &mut [Point2] {
        &mut self.control_points
    }

    pub fn control_point(&self, i: usize, j: usize) -> Point2 {
        self.control_points[i * self.knots_v.n_basis() + j]
    }

    pub fn evaluate(&self, uv: Point2) -> Result<Point2> {
        let (su, nu) = eval_basis(&self.knots_u, uv[0])?;
        let (sv, nv) = eval_basis(&self.knots_v, uv[1])?;
        let (pu, pv) = (self.knots_u.degree, self.knots_v.degree);
        let n_v = self.knots_v.n_basis();
        let mut out = [0.0; 2];
        for (a, &bu) in nu.iter().enumerate() {
            let i = su - pu + a;
            for (b, &bv) in nv.iter().enumerate() {
                let j = sv - pv + b;
                let w = bu * bv;
                let cp = self.control_points[i * n_v + j];
                out[0] += w * cp[0];
                out[1] += w * cp[1];
            }
        }
        Ok(out)
    }

    /// Applies `f` to every control point.
    pub fn map_control_points(&self, f: impl Fn(Point2) -> Point2) -> Self {
        Self {
            knots_u: self.knots_u.clone(),
            knots_v: self.knots_v.clone(),
            control_points: self.control_points.iter().map(|&p| f(p)).collect(),
        }
    }
}

/// Spline whose control points sit at the Greville abscissae, so that it maps
/// every `(u, v)` to itself.
pub fn identity_spline(degrees: (usize, usize), grid_dims: (usize, usize)) -> Result<BSpline2D> {
    if degrees.0 == 0 || degrees.1 == 0 {
        return Err(Error::Config("identity spline needs degree >= 1 in both directions".into()));
    }
    let ku = KnotVector::clamped_uniform(degrees.0, grid_dims.0)?;
    let kv = KnotVector::clamped_uniform(degrees.1, grid_dims.1)?;
    let gu = ku.greville();
    let gv = kv.greville();
    let cps = gu
        .iter()
        .flat_map(|&u| gv.iter().map(move |&v| [u, v]))
        .collect();
    BSpline2D::new(ku, kv, cps)
}
