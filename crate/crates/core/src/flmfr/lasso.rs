//! Row-group LASSO on score matrices.
//!
//! Minimizes `(1/2n)‖Y − XB‖²_F + λ Σⱼ ‖Bⱼ‖₂` where `Bⱼ` is row `j` of the
//! p×q coefficient matrix, by cyclic block coordinate descent on the Gram
//! form `G = XᵀX/n`, `C = XᵀY/n`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// `λ` selection rule for [`select_lambda`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LambdaRule {
    Cv,
    OneSe,
}

/// Precomputed `XᵀX/n`, `XᵀY/n` and `‖Y‖²/n` for one design.
#[derive(Clone, Debug)]
pub struct GramSystem {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    y_energy: f64,
}

impl GramSystem {
    pub fn new(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "X has {} rows, Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Dimension("empty design".into()));
        }
        let n = x.nrows() as f64;
        Ok(Self {
            gram: x.tr_mul(x) / n,
            cross: x.tr_mul(y) / n,
            y_energy: y.norm_squared() / n,
        })
    }

    pub fn p(&self) -> usize {
        self.gram.nrows()
    }

    pub fn q(&self) -> usize {
        self.cross.ncols()
    }

    /// Smallest `λ` for which the all-zero matrix is optimal.
    pub fn lambda_max(&self) -> f64 {
        (0..self.p())
            .map(|j| self.cross.row(j).norm())
            .fold(0.0, f64::max)
    }

    /// Objective value at `b`.
    pub fn objective(&self, b: &DMatrix<f64>, lambda: f64) -> f64 {
        let gb = &self.gram * b;
        let quad = b.dot(&gb) - 2.0 * b.dot(&self.cross) + self.y_energy;
        let penalty: f64 = (0..b.nrows()).map(|j| b.row(j).norm()).sum();
        0.5 * quad + lambda * penalty
    }

    /// Block coordinate descent from `start`.
    pub fn solve(
        &self,
        lambda: f64,
        start: DMatrix<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<DMatrix<f64>> {
        let (p, q) = (self.p(), self.q());
        if !(lambda >= 0.0) {
            return Err(Error::Precondition(format!("lambda must be >= 0, got {lambda}")));
        }
        if start.shape() != (p, q) {
            return Err(Error::Dimension("warm start has the wrong shape".into()));
        }
        let mut b = start;
        // gb = G·B, kept in sync with every row update
        let mut gb = &self.gram * &b;
        let gram = self.gram.as_slice();
        let mut row = vec![0.0; q];
        let mut delta = vec![0.0; q];
        let mut change = f64::INFINITY;

        for _ in 0..max_iter {
            let mut max_delta: f64 = 0.0;
            for j in 0..p {
                let gjj = self.gram[(j, j)];
                let shrink = if gjj <= 0.0 {
                    row.fill(0.0);
                    0.0
                } else {
                    let mut norm_sq = 0.0;
                    for k in 0..q {
                        let v = b[(j, k)] - (gb[(j, k)] - self.cross[(j, k)]) / gjj;
                        row[k] = v;
                        norm_sq += v * v;
                    }
                    let norm = norm_sq.sqrt();
                    if gjj * norm > lambda * (1.0 + 1e-12) {
                        1.0 - lambda / (gjj * norm)
                    } else {
                        0.0
                    }
                };
                let mut moved = false;
                for k in 0..q {
                    let new = shrink * row[k];
                    let d = new - b[(j, k)];
                    delta[k] = d;
                    if d != 0.0 {
                        moved = true;
                        max_delta = max_delta.max(d.abs());
                        b[(j, k)] = new;
                    }
                }
                if moved {
                    rank_one_update(gb.as_mut_slice(), &gram[j * p..(j + 1) * p], &delta);
                }
            }
            let scale = b.amax();
            change = if max_delta == 0.0 { 0.0 } else { max_delta / scale.max(f64::MIN_POSITIVE) };

            if change < tol {
                return Ok(b);
            }
        }
        Err(Error::Convergence {
            iterations: max_iter,
            change,
            last: Box::new(b),
        })
    }
}

// gb += g·deltaᵀ with gb stored column-major
fn rank_one_update(gb: &mut [f64], g: &[f64], delta: &[f64]) {
    let p = g.len();
    for (col, &d) in gb.chunks_exact_mut(p).zip(delta) {
        if d != 0.0 {
            for (x, &gi) in col.iter_mut().zip(g) {
                *x += d * gi;
            }
        }
    }
}

/// Group-LASSO coefficients for a single `λ`, started from zero.
pub fn group_lasso(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DMatrix<f64>> {
    let sys = GramSystem::new(x, y)?;
    sys.solve(lambda, DMatrix::zeros(sys.p(), sys.q()), tol, max_iter)
}

/// Log-spaced decreasing path from `λ_max` to `λ_max · 1e-3`.
pub fn lambda_path(x: &DMatrix<f64>, y: &DMatrix<f64>, n_lambdas: usize) -> Result<Vec<f64>> {
    let sys = GramSystem::new(x, y)?;
    path_from_max(sys.lambda_max(), n_lambdas)
}

fn path_from_max(lambda_max: f64, n_lambdas: usize) -> Result<Vec<f64>> {
    if n_lambdas < 2 {
        return Err(Error::Precondition(format!("need at least 2 path points, got {n_lambdas}")));
    }
    if !(lambda_max > 0.0) {
        return Err(Error::Degenerate("X'Y is zero, the path is empty".into()));
    }
    let top = lambda_max.ln();
    let bottom = (lambda_max * 1e-3).ln();
    let mut path: Vec<f64> = (0..n_lambdas)
        .map(|k| (top + (bottom - top) * k as f64 / (n_lambdas - 1) as f64).exp())
        .collect();
    path[0] = lambda_max;
    path[n_lambdas - 1] = lambda_max * 1e-3;
    Ok(path)
}

/// Cross-validation error curve along a `λ` path.
#[derive(Clone, Debug)]
pub struct CvCurve {
    pub lambdas: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl CvCurve {
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (k, e) in self.mean_error.iter().enumerate() {
            if *e < self.mean_error[best] {
                best = k;
            }
        }
        best
    }

    pub fn select(&self, rule: LambdaRule) -> f64 {
        let best = self.argmin();
        match rule {
            LambdaRule::Cv => self.lambdas[best],
            LambdaRule::OneSe => {
                let bound = self.mean_error[best] + self.std_error[best];
                // the path is decreasing, so the first admissible point is the largest λ
                let k = self
                    .mean_error
                    .iter()
                    .position(|e| *e <= bound)
                    .unwrap_or(best);
                self.lambdas[k]
            }
        }
    }
}

/// Seeded K-fold cross-validation of the group-LASSO path.
pub fn cross_validate(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    folds: usize,
    n_lambdas: usize,
    seed: u64,
) -> Result<CvCurve> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Dimension(format!("X has {n} rows, Y has {}", y.nrows())));
    }
    if folds < 2 || folds > n {
        return Err(Error::Precondition(format!("folds must be in 2..={n}, got {folds}")));
    }
    let lambdas = lambda_path(x, y, n_lambdas)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::from_seed(seed));
    let mut assignment = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    for f in 0..folds {
        let rows = assignment.iter().filter(|a| **a == f).count();
        if rows < 2 {
            return Err(Error::FoldSize { fold: f, rows });
        }
    }

    let (p, q) = (x.ncols(), y.ncols());
    let mut errors = vec![vec![0.0; folds]; lambdas.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| assignment[*i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|i| assignment[*i] == f).collect();
        let sys = GramSystem::new(&x.select_rows(&train), &y.select_rows(&train))?;
        let xt = x.select_rows(&test);
        let yt = y.select_rows(&test);
        let mut b = DMatrix::zeros(p, q);
        for (k, &lambda) in lambdas.iter().enumerate() {
            b = sys.solve(lambda, b, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let resid = &yt - &xt * &b;
            errors[k][f] = resid.norm_squared() / test.len() as f64;
        }
    }

    let kf = folds as f64;
    let mean_error: Vec<f64> = errors.iter().map(|e| e.iter().sum::<f64>() / kf).collect();
    let std_error: Vec<f64> = errors
        .iter()
        .zip(&mean_error)
        .map(|(e, m)| {
            let var = e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (kf - 1.0);
            (var / kf).sqrt()
        })
        .collect();
    Ok(CvCurve {
        lambdas,
        mean_error,
        std_error,
    })
}

/// `λ` chosen by K-fold CV (50-point path) under `rule`.
pub fn select_lambda(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    rule: LambdaRule,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    Ok(cross_validate(x, y, folds, super::DEFAULT_PATH_LEN, seed)?.select(rule))
}
