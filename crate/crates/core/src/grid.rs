//! Discretization grids and the weighted inner product they induce.
//!
//! A [`Grid`] stores the evaluation points on `[0, h]`, one quadrature weight
//! per point and an optional point mass at `t = h`. With `endpoint_atom = 1`
//! the induced inner product is that of `L²([0,h], λ + δ(h))`, where
//! evaluation at the right endpoint is a bounded functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
    endpoint_atom: f64,
}

impl Grid {
    /// Builds a grid from explicit points and weights.
    pub fn new(points: Vec<f64>, weights: Vec<f64>, endpoint_atom: f64) -> Result<Self> {
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("points must be strictly increasing".into()));
        }
        Self::checked(points, weights, endpoint_atom)
    }

    /// Trapezoid weights on the given points.
    pub fn trapezoid(points: Vec<f64>, endpoint_atom: f64) -> Result<Self> {
        let weights = trapezoid_weights(&points);
        Self::new(points, weights, endpoint_atom)
    }

    /// `m` equispaced points on `[0, h]` with trapezoid weights.
    pub fn uniform(m: usize, h: f64, endpoint_atom: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("interval length must be positive, got {h}")));
        }
        let step = h / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|i| i as f64 * step).collect();
        points[m - 1] = h;
        Self::trapezoid(points, endpoint_atom)
    }

    /// Concatenation of quadrature blocks whose boundaries may coincide.
    ///
    /// Used for lag-embedded curves, which jump at block boundaries: the
    /// shared abscissa appears once per block, each copy carrying its own
    /// value and weight.
    pub fn composite(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidGrid("points must be nondecreasing".into()));
        }
        Self::checked(points, weights, 0.0)
    }

    fn checked(points: Vec<f64>, weights: Vec<f64>, endpoint_atom: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) || points[0] < 0.0 {
            return Err(Error::InvalidGrid("points must be finite and start at t >= 0".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidGrid("weights must be finite and nonnegative".into()));
        }
        if !(endpoint_atom >= 0.0 && endpoint_atom.is_finite()) {
            return Err(Error::InvalidGrid("endpoint atom must be nonnegative".into()));
        }
        if weights.iter().sum::<f64>() + endpoint_atom <= 0.0 {
            return Err(Error::InvalidGrid("total weight must be positive".into()));
        }
        Ok(Self {
            points,
            weights,
            endpoint_atom,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Quadrature weights, excluding the endpoint atom.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn endpoint_atom(&self) -> f64 {
        self.endpoint_atom
    }

    /// Right end of the interval.
    pub fn h(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// The full discrete measure: quadrature weights with the atom added at the last point.
    pub fn measure_weights(&self) -> Vec<f64> {
        let mut w = self.weights.clone();
        let last = w.len() - 1;
        w[last] += self.endpoint_atom;
        w
    }

    pub fn with_atom(&self, endpoint_atom: f64) -> Result<Self> {
        Self::checked(self.points.clone(), self.weights.clone(), endpoint_atom)
    }

    /// `Σ wᵢ f(tᵢ) g(tᵢ) + atom · f(h) g(h)`.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        let m = self.len();
        if f.len() != m || g.len() != m {
            return Err(Error::Dimension(format!(
                "curves of length {} and {} on a grid of {m} points",
                f.len(),
                g.len()
            )));
        }
        Ok(self.dot_unchecked(f, g))
    }

    pub fn norm_sq(&self, f: &[f64]) -> Result<f64> {
        self.inner_product(f, f)
    }

    pub(crate) fn dot_unchecked(&self, f: &[f64], g: &[f64]) -> f64 {
        let m = self.len();
        let s: f64 = self
            .weights
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, a), b)| w * a * b)
            .sum();
        s + self.endpoint_atom * f[m - 1] * g[m - 1]
    }
}

/// Free-function form of [`Grid::inner_product`].
pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    grid.inner_product(f, g)
}

fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let m = points.len();
    let mut w = vec![0.0; m];
    for k in 0..m.saturating_sub(1) {
        let half = 0.5 * (points[k + 1] - points[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    w
}
