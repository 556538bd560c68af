//! ARH(z) and nonlinear functional autoregressions driven by Brownian-bridge
//! noise, with kernel constructors and a stationarity check on the
//! discretized companion operator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::{self, Rng};
use crate::sample::FunctionalSample;

pub const DEFAULT_BURN_IN: usize = 200;
/// Curves with a norm above this abort the recursion.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// `c (2 − (2s−1)² − (2t−1)²)`
    Parabolic,
    /// `c exp(−(s² + t²)/2)`
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub constant: f64,
    /// When set, the constant is replaced by the one giving this HS norm.
    pub target_hs_norm: Option<f64>,
}

impl KernelSpec {
    pub fn with_norm(family: KernelFamily, norm: f64) -> Self {
        Self {
            family,
            constant: 1.0,
            target_hs_norm: Some(norm),
        }
    }

    pub fn with_constant(family: KernelFamily, constant: f64) -> Self {
        Self {
            family,
            constant,
            target_hs_norm: None,
        }
    }

    fn unit_value(&self, s: f64, t: f64) -> f64 {
        match self.family {
            KernelFamily::Parabolic => 2.0 - (2.0 * s - 1.0).powi(2) - (2.0 * t - 1.0).powi(2),
            KernelFamily::Gaussian => (-(s * s + t * t) / 2.0).exp(),
        }
    }
}

/// Kernel values `ρ(sₖ, tₗ)` on a grid and the constant actually used.
#[derive(Clone, Debug)]
pub struct KernelSurface {
    /// Row index `s`, column index `t`.
    pub matrix: DMatrix<f64>,
    pub constant: f64,
}

pub fn kernel_surface(spec: &KernelSpec, grid: &Grid) -> Result<KernelSurface> {
    if (grid.h() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidGrid(format!("kernels live on [0, 1], grid ends at {}", grid.h())));
    }
    let t = grid.points();
    let m = t.len();
    let unit = DMatrix::from_fn(m, m, |k, l| spec.unit_value(t[k], t[l]));
    let constant = match spec.target_hs_norm {
        Some(target) => {
            let norm = hs_norm(&unit, grid);
            if norm == 0.0 {
                return Err(Error::Degenerate("kernel has zero norm".into()));
            }
            target / norm
        }
        None => spec.constant,
    };
    Ok(KernelSurface {
        matrix: unit * constant,
        constant,
    })
}

/// Quadrature Hilbert–Schmidt norm `√(∬ ρ²)`.
pub fn hs_norm(kernel: &DMatrix<f64>, grid: &Grid) -> f64 {
    let w = grid.measure_weights();
    let mut s = 0.0;
    for l in 0..kernel.ncols() {
        for k in 0..kernel.nrows() {
            s += w[k] * w[l] * kernel[(k, l)] * kernel[(k, l)];
        }
    }
    s.sqrt()
}

/// `Γ(f)(tₗ) = Σₖ wₖ ρ(sₖ, tₗ) f(sₖ)`.
pub fn apply_kernel(kernel: &DMatrix<f64>, curve: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let m = grid.len();
    if kernel.shape() != (m, m) || curve.len() != m {
        return Err(Error::Dimension(format!(
            "kernel {:?}, curve of {} points, grid of {m}",
            kernel.shape(),
            curve.len()
        )));
    }
    let w = grid.measure_weights();
    let wf = DVector::from_iterator(m, curve.iter().zip(&w).map(|(f, w)| f * w));
    Ok(kernel.tr_mul(&wf).iter().copied().collect())
}

/// `W(t) − (t/h) W(h)` from exact Gaussian increments.
pub fn brownian_bridge(grid: &Grid, seed: u64) -> Vec<f64> {
    brownian_bridge_from(grid, &mut rng::from_seed(seed))
}

pub fn brownian_bridge_from(grid: &Grid, rng: &mut Rng) -> Vec<f64> {
    let t = grid.points();
    let m = t.len();
    let mut w = vec![0.0; m];
    let mut prev_t = 0.0;
    let mut acc = 0.0;
    for (k, tk) in t.iter().enumerate() {
        let dt = tk - prev_t;
        if dt > 0.0 {
            acc += dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
        w[k] = acc;
        prev_t = *tk;
    }
    let h = t[m - 1];
    let wh = w[m - 1];
    t.iter().zip(&w).map(|(tk, wk)| wk - (tk / h) * wh).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    None,
    Square,
    SqrtAbs,
}

impl Nonlinearity {
    fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::None => x,
            Nonlinearity::Square => x * x,
            Nonlinearity::SqrtAbs => x.abs().sqrt(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArhSpec {
    /// `kernels[r − 1]` acts on lag `r`.
    pub kernels: Vec<KernelSpec>,
    pub nonlinearity: Nonlinearity,
    pub grid: Arc<Grid>,
    pub burn_in: usize,
}

impl ArhSpec {
    pub fn order(&self) -> usize {
        self.kernels.len()
    }

    pub fn surfaces(&self) -> Result<Vec<KernelSurface>> {
        self.kernels.iter().map(|k| kernel_surface(k, &self.grid)).collect()
    }
}

/// Simulates `n + z` curves after a burn-in, so that lag embedding yields `n` pairs.
pub fn simulate_arh(spec: &ArhSpec, n: usize, seed: u64) -> Result<FunctionalSample> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let grid = &spec.grid;
    let m = grid.len();
    let z = spec.order();
    let w = grid.measure_weights();
    // operator matrices acting on plain curve values: out = Kᵀ diag(w) f
    let ops: Vec<DMatrix<f64>> = spec
        .surfaces()?
        .into_iter()
        .map(|s| {
            let mut op = s.matrix.transpose();
            for (k, wk) in w.iter().enumerate() {
                op.column_mut(k).scale_mut(*wk);
            }
            op
        })
        .collect();

    let mut r = rng::from_seed(seed);
    let keep = n + z;
    let total = z + spec.burn_in + keep;
    let mut curves: Vec<DVector<f64>> = Vec::with_capacity(total);
    for _ in 0..z {
        curves.push(DVector::from_vec(brownian_bridge_from(grid, &mut r)));
    }
    for idx in z..total {
        let mut next = DVector::from_vec(brownian_bridge_from(grid, &mut r));
        for (lag, op) in ops.iter().enumerate() {
            let past = curves[idx - lag - 1].map(|x| spec.nonlinearity.apply(x));
            next.gemv(1.0, op, &past, 1.0);
        }
        let norm = grid.dot_unchecked(next.as_slice(), next.as_slice()).sqrt();
        if !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Unstable { index: idx, norm });
        }
        curves.push(next);
    }
    let values = DMatrix::from_fn(keep, m, |i, k| curves[total - keep + i][k]);
    FunctionalSample::new(values, grid.clone())
}

/// Estimates `‖Γ̄ᵏ‖` for `k = 1..=k_max`, where `Γ̄` is the discretized
/// companion operator of the kernels; stationary iff some estimate is below 1.
pub fn check_stationarity(kernels: &[DMatrix<f64>], grid: &Grid, k_max: usize) -> Result<(bool, Vec<f64>)> {
    let z = kernels.len();
    if z == 0 {
        return Err(Error::Precondition("need at least one kernel".into()));
    }
    let m = grid.len();
    let sw: Vec<f64> = grid.measure_weights().iter().map(|w| w.sqrt()).collect();
    let d = z * m;
    let mut comp = DMatrix::zeros(d, d);
    for (r, kernel) in kernels.iter().enumerate() {
        if kernel.shape() != (m, m) {
            return Err(Error::Dimension("kernel does not match the grid".into()));
        }
        // orthonormal coordinates u = W^{1/2} f: Γ ↦ W^{1/2} Kᵀ W^{1/2}
        for a in 0..m {
            for b in 0..m {
                comp[(a, r * m + b)] = sw[a] * kernel[(b, a)] * sw[b];
            }
        }
    }
    for r in 1..z {
        for a in 0..m {
            comp[(r * m + a, (r - 1) * m + a)] = 1.0;
        }
    }
    let mut power = comp.clone();
    let mut norms = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k > 1 {
            power = &comp * &power;
        }
        norms.push(spectral_norm(&power));
    }
    Ok((norms.iter().any(|v| *v < 1.0), norms))
}

/// Largest singular value by power iteration on `AᵀA`.
fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let ata = a.tr_mul(a);
    let d = ata.nrows();
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..2000 {
        let next = &ata * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = next / norm;
        if (norm - est).abs() <= 1e-13 * norm {
            est = norm;
            break;
        }
        est = norm;
    }
    est.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::uniform(101, 1.0, 0.0).unwrap()
    }

    #[test]
    fn published_constants_give_published_norms() {
        let g = grid();
        for (family, c, norm) in [
            (KernelFamily::Parabolic, 0.500568, 0.7),
            (KernelFamily::Gaussian, 0.669502, 0.5),
            (KernelFamily::Gaussian, 0.401701, 0.3),
        ] {
            let s = kernel_surface(&KernelSpec::with_constant(family, c), &g).unwrap();
            assert_abs_diff_eq!(hs_norm(&s.matrix, &g), norm, epsilon = 1e-3);
            let r = kernel_surface(&KernelSpec::with_norm(family, norm), &g).unwrap();
            assert_abs_diff_eq!(hs_norm(&r.matrix, &g), norm, epsilon = 1e-12);
            assert_abs_diff_eq!(r.constant, c, epsilon = 1e-3);
        }
        let zero = kernel_surface(&KernelSpec::with_constant(KernelFamily::Gaussian, 0.0), &g).unwrap();
        assert_eq!(hs_norm(&zero.matrix, &g), 0.0);
    }

    #[test]
    fn separable_kernel_identity() {
        let g = grid();
        let t = g.points().to_vec();
        let psi: Vec<f64> = t.iter().map(|s| s * s).collect();
        let phi: Vec<f64> = t.iter().map(|s| (3.0 * s).cos()).collect();
        let k = DMatrix::from_fn(101, 101, |a, b| psi[a] * phi[b]);
        let x: Vec<f64> = t.iter().map(|s| 1.0 + s).collect();
        let out = apply_kernel(&k, &x, &g).unwrap();
        let ip = g.inner_product(&psi, &x).unwrap();
        for (o, p) in out.iter().zip(&phi) {
            assert_abs_diff_eq!(*o, ip * p, epsilon = 1e-12);
        }
        let ones = DMatrix::from_element(101, 101, 1.0);
        for v in apply_kernel(&ones, &vec![1.0; 101], &g).unwrap() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        assert!(apply_kernel(&DMatrix::zeros(101, 101), &x, &g).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bridge_pins_and_variance() {
        let g = grid();
        let b = brownian_bridge(&g, 5);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[100], 0.0);
        assert_eq!(b, brownian_bridge(&g, 5));
        let mut r = rng::from_seed(6);
        let draws = 100_000;
        let mut s = 0.0;
        for _ in 0..draws {
            let v = brownian_bridge_from(&g, &mut r)[50];
            s += v * v;
        }
        let var = s / draws as f64;
        assert!((var - 0.25).abs() < 0.02 * 0.25, "variance {var}");
    }

    #[test]
    fn order_zero_is_noise() {
        let spec = ArhSpec {
            kernels: vec![],
            nonlinearity: Nonlinearity::None,
            grid: Arc::new(grid()),
            burn_in: 0,
        };
        let s = simulate_arh(&spec, 3, 11).unwrap();
        let mut r = rng::from_seed(11);
        for i in 0..3 {
            assert_eq!(s.curve(i), brownian_bridge_from(&grid(), &mut r));
        }
    }

    #[test]
    fn arh1_slope_matches_operator_norm() {
        let spec = ArhSpec {
            kernels: vec![KernelSpec::with_norm(KernelFamily::Parabolic, 0.7)],
            nonlinearity: Nonlinearity::None,
            grid: Arc::new(grid()),
            burn_in: DEFAULT_BURN_IN,
        };
        let s = simulate_arh(&spec, 2000, 3).unwrap();
        assert_eq!(s.n(), 2001);
        let (c, _) = s.center();
        let (_, scores) = crate::fpca::fpca(&c, 6).unwrap();
        let x = scores.0.rows(0, 2000).into_owned();
        let y = scores.0.rows(1, 2000).into_owned();
        let slope = (x.tr_mul(&x)).lu().solve(&x.tr_mul(&y)).unwrap();
        let top = slope.singular_values()[0];
        assert!((top - 0.7).abs() < 0.15 * 0.7, "top singular value {top}");
    }

    #[test]
    fn stationarity_examples() {
        let g = grid();
        let k07 = kernel_surface(&KernelSpec::with_norm(KernelFamily::Parabolic, 0.7), &g).unwrap();
        let (ok, norms) = check_stationarity(std::slice::from_ref(&k07.matrix), &g, 1).unwrap();
        assert!(ok);
        assert!(norms[0] <= 0.7 + 1e-9);

        let k5 = kernel_surface(&KernelSpec::with_norm(KernelFamily::Parabolic, 5.0), &g).unwrap();
        let (ok, norms) = check_stationarity(&[k5.matrix], &g, 10).unwrap();
        assert!(!ok);
        assert!(norms.iter().all(|v| *v > 1.0));

        let k1 = kernel_surface(&KernelSpec::with_norm(KernelFamily::Gaussian, 0.5), &g).unwrap();
        let k2 = kernel_surface(&KernelSpec::with_norm(KernelFamily::Gaussian, 0.3), &g).unwrap();
        let (ok, norms) = check_stationarity(&[k1.matrix.clone(), k2.matrix.clone()], &g, 10).unwrap();
        assert!(ok);
        // loose sanity bound at k = 1
        let bound = (2.0 * (0.25 + 0.09) + 2.0f64).sqrt();
        assert!(norms[0] <= 2.0 * bound);
    }

    #[test]
    fn divergence_detected() {
        let spec = ArhSpec {
            kernels: vec![KernelSpec::with_norm(KernelFamily::Gaussian, 3.0)],
            nonlinearity: Nonlinearity::Square,
            grid: Arc::new(grid()),
            burn_in: 200,
        };
        assert!(matches!(simulate_arh(&spec, 10, 1), Err(Error::Unstable { .. })));
    }

    proptest! {
        #[test]
        fn kernel_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let g = Grid::uniform(31, 1.0, 0.0).unwrap();
            let k = kernel_surface(&KernelSpec::with_norm(KernelFamily::Gaussian, 0.5), &g).unwrap().matrix;
            let x = brownian_bridge(&g, seed);
            let y = brownian_bridge(&g, seed + 1);
            let comb: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let lhs = apply_kernel(&k, &comb, &g).unwrap();
            let kx = apply_kernel(&k, &x, &g).unwrap();
            let ky = apply_kernel(&k, &y, &g).unwrap();
            for i in 0..31 {
                prop_assert!((lhs[i] - a * kx[i] - b * ky[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn simulation_is_reproducible(seed in 0u64..10_000) {
            let spec = ArhSpec {
                kernels: vec![KernelSpec::with_norm(KernelFamily::Parabolic, 0.7)],
                nonlinearity: Nonlinearity::None,
                grid: Arc::new(Grid::uniform(21, 1.0, 0.0).unwrap()),
                burn_in: 20,
            };
            let a = simulate_arh(&spec, 5, seed).unwrap();
            let b = simulate_arh(&spec, 5, seed).unwrap();
            prop_assert_eq!(a.values(), b.values());
        }
    }
}
