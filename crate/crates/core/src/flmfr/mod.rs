//! Functional linear model with functional response, estimated by FPCR-L1S:
//! FPC truncation of both samples, row-group LASSO selection of predictor
//! directions, then an unpenalized refit on the selected directions.

mod lasso;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fpca::{ev_cutoff, fpca, reconstruct, synthesize, FpcBasis, ScoreMatrix};
use crate::sample::FunctionalSample;

pub use lasso::{
    cross_validate, group_lasso, lambda_path, select_lambda, CvCurve, GramSystem, LambdaRule,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};

pub const DEFAULT_PATH_LEN: usize = 50;
pub const DEFAULT_FOLDS: usize = 10;

/// p×q coefficients on `Ψⱼ ⊗ Φₖ`; unselected rows are zero.
pub type CoefMatrix = DMatrix<f64>;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub ev_threshold: f64,
    pub rule: LambdaRule,
    pub folds: usize,
    pub n_lambdas: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ev_threshold: 0.995,
            rule: LambdaRule::OneSe,
            folds: DEFAULT_FOLDS,
            n_lambdas: DEFAULT_PATH_LEN,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub coef: CoefMatrix,
    /// Selected predictor directions, 0-based and increasing.
    pub selected: Vec<usize>,
    pub lambda: f64,
    pub hat_matrix: DMatrix<f64>,
    pub residual_scores: DMatrix<f64>,
    pub x_scores: DMatrix<f64>,
    pub y_scores: DMatrix<f64>,
    pub x_basis: FpcBasis,
    pub y_basis: FpcBasis,
}

/// JSON view of a fit (bases and the hat matrix omitted).
#[derive(Serialize)]
pub struct FitSummary<'a> {
    pub p: usize,
    pub q: usize,
    pub lambda: f64,
    pub selected: &'a [usize],
    pub coef: Vec<Vec<f64>>,
    pub residual_norm_sq: f64,
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.x_basis.len()
    }

    pub fn q(&self) -> usize {
        self.y_basis.len()
    }

    pub fn fitted_scores(&self) -> DMatrix<f64> {
        &self.x_scores * &self.coef
    }

    pub fn summary(&self) -> FitSummary<'_> {
        FitSummary {
            p: self.p(),
            q: self.q(),
            lambda: self.lambda,
            selected: &self.selected,
            coef: (0..self.coef.nrows())
                .map(|j| self.coef.row(j).iter().copied().collect())
                .collect(),
            residual_norm_sq: self.residual_scores.norm_squared(),
        }
    }
}

/// FPCA followed by the explained-variance cutoff, with zero-variance
/// directions removed.
pub fn truncated_fpca(sample: &FunctionalSample, ev_threshold: f64) -> Result<(FpcBasis, ScoreMatrix)> {
    let k = sample.n().min(sample.m());
    let (basis, scores) = fpca(sample, k)?;
    let p = ev_cutoff(basis.eigenvalues(), ev_threshold)?;
    let top = basis.eigenvalues()[0];
    let kept = basis.eigenvalues()[..p]
        .iter()
        .take_while(|l| **l > 1e-12 * top)
        .count();
    if kept == 0 {
        return Err(Error::Degenerate("no direction with positive variance".into()));
    }
    let basis = basis.truncate(kept)?;
    let scores = ScoreMatrix(scores.into_inner().columns(0, kept).into_owned());
    Ok((basis, scores))
}

/// Number of CV folds used for `n` paired observations.
pub fn fold_count(n: usize, requested: usize) -> usize {
    requested.min(n / 2).max(2)
}

/// FPCR-L1S with default options apart from the threshold and rule.
pub fn fpcr_l1s_fit(
    x_sample: &FunctionalSample,
    y_sample: &FunctionalSample,
    ev_threshold: f64,
    rule: LambdaRule,
    seed: u64,
) -> Result<FitResult> {
    let opts = FitOptions {
        ev_threshold,
        rule,
        ..FitOptions::default()
    };
    fpcr_l1s_fit_with(x_sample, y_sample, &opts, seed)
}

pub fn fpcr_l1s_fit_with(
    x_sample: &FunctionalSample,
    y_sample: &FunctionalSample,
    opts: &FitOptions,
    seed: u64,
) -> Result<FitResult> {
    let n = x_sample.n();
    if y_sample.n() != n {
        return Err(Error::Dimension(format!(
            "{n} predictor curves but {} response curves",
            y_sample.n()
        )));
    }
    let (x_basis, x_scores) = truncated_fpca(x_sample, opts.ev_threshold)?;
    let (y_basis, y_scores) = truncated_fpca(y_sample, opts.ev_threshold)?;
    let x = x_scores.into_inner();
    let y = y_scores.into_inner();

    let folds = fold_count(n, opts.folds);
    let lambda = lasso::cross_validate(&x, &y, folds, opts.n_lambdas, seed)?.select(opts.rule);
    fit_at_lambda(x, y, x_basis, y_basis, lambda)
}

/// Selection at a fixed `λ` and refit on precomputed scores.
pub fn fit_at_lambda(
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    x_basis: FpcBasis,
    y_basis: FpcBasis,
    lambda: f64,
) -> Result<FitResult> {
    let n = x.nrows();
    let sys = GramSystem::new(&x, &y)?;
    let b = sys.solve(lambda, DMatrix::zeros(sys.p(), sys.q()), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let selected: Vec<usize> = (0..b.nrows()).filter(|j| b.row(*j).amax() != 0.0).collect();

    let mut coef = DMatrix::zeros(x.ncols(), y.ncols());
    let (hat_matrix, residual_scores) = if selected.is_empty() {
        (DMatrix::zeros(n, n), y.clone())
    } else {
        let xs = x.select_columns(&selected);
        let gram = xs.tr_mul(&xs);
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Degenerate("selected scores are collinear".into()))?;
        let refit = chol.solve(&xs.tr_mul(&y));
        for (r, &j) in selected.iter().enumerate() {
            coef.set_row(j, &refit.row(r));
        }
        let hat = &xs * chol.solve(&xs.transpose());
        let hat = (&hat + hat.transpose()) * 0.5;
        let resid = &y - &xs * &refit;
        (hat, resid)
    };

    Ok(FitResult {
        coef,
        selected,
        lambda,
        hat_matrix,
        residual_scores,
        x_scores: x,
        y_scores: y,
        x_basis,
        y_basis,
    })
}

/// Residual scores mapped back to curves through the response basis.
pub fn residual_curves(fit: &FitResult) -> Result<FunctionalSample> {
    let values = synthesize(&fit.residual_scores, &fit.y_basis);
    FunctionalSample::new(values, fit.y_basis.grid().clone())
}

/// Fitted response curves (response mean included).
pub fn fitted_curves(fit: &FitResult) -> Result<FunctionalSample> {
    reconstruct(&ScoreMatrix(fit.fitted_scores()), &fit.y_basis)
}
