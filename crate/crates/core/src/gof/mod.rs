//! Goodness-of-fit test for ARH(z) models: lag embedding into a functional
//! linear model, the projected Cramér–von Mises statistic, and wild
//! bootstrap calibration with golden-section multipliers.

mod adot;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flmfr::{self, FitOptions, FitResult, LambdaRule};
use crate::grid::Grid;
use crate::rng;
use crate::sample::FunctionalSample;

pub use adot::{adot, adot_with, angle, angle_scale, AdotMatrix, COINCIDE_TOL};

/// Bootstrap sizes below this get a warning in the result.
pub const MIN_RECOMMENDED_B: usize = 100;

/// Builds the `(X̃, Ỹ)` pairs of an ARH(z) sample written as a functional
/// linear model.
///
/// For `z = 1` the predictors are the previous curves on the original grid.
/// For `z > 1` predictor `i` concatenates lags `1..=z` on a composite grid of
/// `z·m` points over `[0, h]`; block `r` carries lag `r` compressed into
/// `[(r−1)h/z, rh/z]` with weights (atom included) divided by `z`.
pub fn lag_embed(sample: &FunctionalSample, z: usize) -> Result<(FunctionalSample, FunctionalSample)> {
    let total = sample.n();
    if z == 0 || z >= total {
        return Err(Error::InsufficientLags { z, curves: total });
    }
    let n = total - z;
    let m = sample.m();
    let y = sample.rows(z, n)?;
    if z == 1 {
        return Ok((sample.rows(0, n)?, y));
    }

    let grid = sample.grid();
    let h = grid.h();
    let w = grid.measure_weights();
    let zf = z as f64;
    let mut points = Vec::with_capacity(z * m);
    let mut weights = Vec::with_capacity(z * m);
    for r in 1..=z {
        let offset = (r - 1) as f64 * h / zf;
        for k in 0..m {
            points.push(offset + grid.points()[k] / zf);
            weights.push(w[k] / zf);
        }
    }
    let embedded_grid = Arc::new(Grid::composite(points, weights)?);
    let values = sample.values();
    let x = DMatrix::from_fn(n, z * m, |i, c| {
        let r = c / m + 1;
        values[(i + z - r, c % m)]
    });
    Ok((FunctionalSample::new(x, embedded_grid)?, y))
}

/// `2π^{p̃/2+q/2−1} / (q Γ(p̃/2) Γ(q/2))`.
pub fn pcvm_constant(p_tilde: usize, q: usize) -> f64 {
    let (hp, hq) = (p_tilde as f64 / 2.0, q as f64 / 2.0);
    2.0 * PI.powf(hp + hq - 1.0) / (q as f64 * gamma(hp) * gamma(hq))
}

/// `(1/n²) · const · Tr[Eᵀ A• E]`.
pub fn pcvm_statistic(residual_scores: &DMatrix<f64>, adot: &AdotMatrix, p_tilde: usize, q: usize) -> Result<f64> {
    let n = residual_scores.nrows();
    if adot.n() != n || residual_scores.ncols() != q {
        return Err(Error::Dimension(format!(
            "residuals {}x{}, A• {}x{}, q = {q}",
            n,
            residual_scores.ncols(),
            adot.n(),
            adot.n()
        )));
    }
    Ok(pcvm_constant(p_tilde, q) * quadratic_trace(residual_scores, &adot.entries) / (n * n) as f64)
}

fn quadratic_trace(e: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let ae = a * e;
    e.dot(&ae)
}

/// Golden-section two-point law: zero mean, unit variance.
pub fn golden_multiplier<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let s5 = 5f64.sqrt();
    if rng.random::<f64>() < (5.0 + s5) / 10.0 {
        (1.0 - s5) / 2.0
    } else {
        (1.0 + s5) / 2.0
    }
}

pub fn wild_multipliers(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::from_seed(seed);
    (0..n).map(|_| golden_multiplier(&mut r)).collect()
}

/// Everything a bootstrap replicate needs, fixed across replicates.
#[derive(Clone, Debug)]
pub struct WildBootstrap {
    pub residuals: DMatrix<f64>,
    /// Projection onto the selected regressors; `None` resamples the centered
    /// multiplied residuals directly.
    pub hat_matrix: Option<DMatrix<f64>>,
    pub adot: AdotMatrix,
    pub q: usize,
}

impl WildBootstrap {
    pub fn statistic(&self) -> Result<f64> {
        pcvm_statistic(&self.residuals, &self.adot, self.adot.p_tilde, self.q)
    }

    /// Statistic of replicate `b`, drawn from stream `b` of `seed`.
    pub fn replicate(&self, seed: u64, b: u64) -> f64 {
        let mut r = rng::substream(seed, b);
        let (n, q) = self.residuals.shape();
        let mut e = self.residuals.clone();
        for i in 0..n {
            let v = golden_multiplier(&mut r);
            e.row_mut(i).scale_mut(v);
        }
        for k in 0..q {
            let mean = e.column(k).mean();
            e.column_mut(k).add_scalar_mut(-mean);
        }
        if let Some(h) = &self.hat_matrix {
            e -= h * &e;
        }
        pcvm_constant(self.adot.p_tilde, q) * quadratic_trace(&e, &self.adot.entries) / (n * n) as f64
    }

    pub fn run(&self, b: usize, seed: u64, exec: Execution) -> Vec<f64> {
        exec.map(b, |k| self.replicate(seed, k as u64))
    }
}

/// `#{boot ≥ statistic} / B`.
pub fn bootstrap_p_value(statistic: f64, boot: &[f64]) -> f64 {
    if boot.is_empty() {
        return f64::NAN;
    }
    boot.iter().filter(|s| **s >= statistic).count() as f64 / boot.len() as f64
}

#[derive(Clone, Debug)]
pub struct GofOptions {
    pub b: usize,
    pub ev_threshold: f64,
    pub folds: usize,
    pub n_lambdas: usize,
    pub execution: Execution,
}

impl Default for GofOptions {
    fn default() -> Self {
        Self {
            b: 500,
            ev_threshold: 0.995,
            folds: flmfr::DEFAULT_FOLDS,
            n_lambdas: flmfr::DEFAULT_PATH_LEN,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub p: usize,
    pub q: usize,
    /// 1-based indices of the regressor directions entering A•.
    pub p_tilde_set: Vec<usize>,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub z: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(skip)]
    pub boot_statistics: Vec<f64>,
}

/// Intermediate objects of a test run, kept for callers that reuse the fit.
#[derive(Clone, Debug)]
pub struct GofRun {
    pub result: GofResult,
    /// Centered predictors and responses after embedding.
    pub x: FunctionalSample,
    pub y: FunctionalSample,
    /// Absent for the `z = 0` test.
    pub fit: Option<FitResult>,
}

pub fn arh_gof_test(raw: &FunctionalSample, z: usize, b: usize, ev_threshold: f64, seed: u64) -> Result<GofResult> {
    let opts = GofOptions {
        b,
        ev_threshold,
        ..GofOptions::default()
    };
    Ok(arh_gof_run(raw, z, &opts, seed)?.result)
}

pub fn arh_gof_test_with(raw: &FunctionalSample, z: usize, opts: &GofOptions, seed: u64) -> Result<GofResult> {
    Ok(arh_gof_run(raw, z, opts, seed)?.result)
}

/// Tests `H₀: ARH(z)`; `z = 0` tests absence of any lag-1 linear effect.
pub fn arh_gof_run(raw: &FunctionalSample, z: usize, opts: &GofOptions, seed: u64) -> Result<GofRun> {
    let lag = z.max(1);
    if raw.n() < lag + 2 {
        return Err(Error::InsufficientLags { z: lag, curves: raw.n() });
    }
    if opts.b == 0 {
        return Err(Error::Precondition("B must be at least 1".into()));
    }
    let (centered, _) = raw.center();
    let (x_raw, y_raw) = lag_embed(&centered, lag)?;
    let x = x_raw.center().0;
    let y = y_raw.center().0;

    let fit_opts = FitOptions {
        ev_threshold: opts.ev_threshold,
        rule: LambdaRule::OneSe,
        folds: opts.folds,
        n_lambdas: opts.n_lambdas,
    };
    let boot_seed = rng::child_seed(seed, 1);

    let (boot, fit, p_tilde_set, p, q, lambda) = if z == 0 {
        let (xb, xs) = flmfr::truncated_fpca(&x, opts.ev_threshold)?;
        let (yb, ys) = flmfr::truncated_fpca(&y, opts.ev_threshold)?;
        let a = adot_with(xs.matrix(), opts.execution);
        let boot = WildBootstrap {
            residuals: ys.into_inner(),
            hat_matrix: None,
            adot: a,
            q: yb.len(),
        };
        let set: Vec<usize> = (1..=xb.len()).collect();
        (boot, None, set, xb.len(), yb.len(), None)
    } else {
        let fit = flmfr::fpcr_l1s_fit_with(&x, &y, &fit_opts, rng::child_seed(seed, 0))?;
        let cols: Vec<usize> = if fit.selected.is_empty() {
            (0..fit.p()).collect()
        } else {
            fit.selected.clone()
        };
        let a = adot_with(&fit.x_scores.select_columns(&cols), opts.execution);
        let hat = if fit.selected.is_empty() {
            None
        } else {
            Some(fit.hat_matrix.clone())
        };
        let boot = WildBootstrap {
            residuals: fit.residual_scores.clone(),
            hat_matrix: hat,
            adot: a,
            q: fit.q(),
        };
        let set = cols.iter().map(|j| j + 1).collect();
        let (p, q, lambda) = (fit.p(), fit.q(), fit.lambda);
        (boot, Some(fit), set, p, q, Some(lambda))
    };

    let statistic = boot.statistic()?;
    let boot_statistics = boot.run(opts.b, boot_seed, opts.execution);
    let p_value = bootstrap_p_value(statistic, &boot_statistics);
    let warning = (opts.b < MIN_RECOMMENDED_B)
        .then(|| format!("B = {} is below {MIN_RECOMMENDED_B}; the p-value is coarse", opts.b));

    Ok(GofRun {
        result: GofResult {
            statistic,
            p_value,
            b: opts.b,
            p,
            q,
            p_tilde_set,
            lambda,
            seed,
            z,
            warning,
            boot_statistics,
        },
        x,
        y,
        fit,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderScan {
    /// Smallest non-rejected order, `None` when every order up to `z_max` was rejected.
    pub order: Option<usize>,
    pub alpha: f64,
    pub tests: Vec<GofResult>,
}

/// Tests `z = 0, 1, …, z_max` in turn and stops at the first `p ≥ alpha`.
pub fn arh_order_scan(
    raw: &FunctionalSample,
    z_max: usize,
    opts: &GofOptions,
    alpha: f64,
    seed: u64,
) -> Result<OrderScan> {
    let mut tests = Vec::new();
    for z in 0..=z_max {
        let res = arh_gof_test_with(raw, z, opts, rng::child_seed(seed, 1000 + z as u64))?;
        let accept = res.p_value >= alpha;
        tests.push(res);
        if accept {
            return Ok(OrderScan {
                order: Some(z),
                alpha,
                tests,
            });
        }
    }
    Ok(OrderScan {
        order: None,
        alpha,
        tests,
    })
}
