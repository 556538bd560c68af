//! Two-stage specification test for a centered Ornstein–Uhlenbeck diffusion.
//!
//! Stage 1 checks that the daily curves form an ARH(1) process. Stage 2
//! compares the OU operator `X ↦ e^{−κt} X(h)` with an unrestricted
//! FPCR-L1S fit through a functional F statistic, calibrated by a
//! parametric OU bootstrap. The stages are combined with a Bonferroni rule.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flmfr::{self, FitOptions, FitResult, LambdaRule};
use crate::fpca::synthesize;
use crate::gof::{self, GofOptions};
use crate::rng;
use crate::sample::FunctionalSample;
use crate::sde::{self, PathRecord, SdeKind, SdeModel};

/// `rᵢ(t) = Ỹᵢ(t) − e^{−κt} X̃ᵢ(h)`.
pub fn ou_residuals(x: &FunctionalSample, y: &FunctionalSample, kappa: f64) -> Result<FunctionalSample> {
    if x.n() != y.n() {
        return Err(Error::Dimension(format!("{} predictors, {} responses", x.n(), y.n())));
    }
    let t = y.grid().points();
    let decay: Vec<f64> = t.iter().map(|t| (-kappa * t).exp()).collect();
    let last = x.m() - 1;
    let values = DMatrix::from_fn(y.n(), y.m(), |i, k| y.values()[(i, k)] - decay[k] * x.values()[(i, last)]);
    FunctionalSample::new(values, y.grid().clone())
}

/// Residual sum of squared norms.
pub fn rssn(residuals: &FunctionalSample) -> f64 {
    residuals.total_norm_sq()
}

/// `(RSSN_OU − RSSN_FLMFR) / RSSN_FLMFR`.
pub fn f_statistic(rssn_ou: f64, rssn_flmfr: f64) -> Result<f64> {
    if rssn_flmfr == 0.0 {
        return Err(Error::PerfectFit);
    }
    Ok((rssn_ou - rssn_flmfr) / rssn_flmfr)
}

/// Functional residuals `Ỹ − fitted` of an FPCR-L1S fit, truncation error included.
pub fn flmfr_residuals(y: &FunctionalSample, fit: &FitResult) -> Result<FunctionalSample> {
    let fitted = synthesize(&fit.fitted_scores(), &fit.y_basis);
    FunctionalSample::new(y.values() - fitted, y.grid().clone())
}

fn f_from_fit(x: &FunctionalSample, y: &FunctionalSample, fit: &FitResult, kappa: f64) -> Result<f64> {
    let ou = rssn(&ou_residuals(x, y, kappa)?);
    let lm = rssn(&flmfr_residuals(y, fit)?);
    f_statistic(ou, lm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    RejectStage1,
    RejectStage2,
    NotRejected,
}

impl Decision {
    pub fn rejects(self) -> bool {
        self != Decision::NotRejected
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecTestResult {
    pub p1: f64,
    pub p2: Option<f64>,
    pub f_statistic: Option<f64>,
    pub kappa_hat: f64,
    pub sigma_hat: f64,
    pub decision: Decision,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub n_curves: usize,
    /// Mean removed from the path before testing.
    pub path_mean: f64,
}

#[derive(Clone, Debug)]
pub struct SpecTestOptions {
    pub b: usize,
    pub alpha: f64,
    pub ev_threshold: f64,
    pub execution: Execution,
}

impl Default for SpecTestOptions {
    fn default() -> Self {
        Self {
            b: 500,
            alpha: 0.05,
            ev_threshold: 0.995,
            execution: Execution::default(),
        }
    }
}

impl SpecTestOptions {
    fn fit_options(&self) -> FitOptions {
        FitOptions {
            ev_threshold: self.ev_threshold,
            rule: LambdaRule::OneSe,
            ..FitOptions::default()
        }
    }
}

pub fn two_stage_test(path: &PathRecord, h: f64, b: usize, alpha: f64, ev_threshold: f64, seed: u64) -> Result<SpecTestResult> {
    let opts = SpecTestOptions {
        b,
        alpha,
        ev_threshold,
        ..SpecTestOptions::default()
    };
    two_stage_test_with(path, h, &opts, seed)
}

/// Runs the test on curves that tile a path (consecutive curves share endpoints).
pub fn two_stage_test_curves(curves: &FunctionalSample, opts: &SpecTestOptions, seed: u64) -> Result<SpecTestResult> {
    let path = PathRecord::from_curves(curves)?;
    two_stage_test_with(&path, curves.grid().h(), opts, seed)
}

pub fn two_stage_test_with(path: &PathRecord, h: f64, opts: &SpecTestOptions, seed: u64) -> Result<SpecTestResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Precondition(format!("alpha must be in (0, 1), got {}", opts.alpha)));
    }
    let (centered, path_mean) = path.centered();
    let m = (h / path.delta).round() as usize + 1;
    let curves = sde::split_path(&centered, h, m)?;

    let gof_opts = GofOptions {
        b: opts.b,
        ev_threshold: opts.ev_threshold,
        execution: opts.execution,
        ..GofOptions::default()
    };
    let stage1 = gof::arh_gof_run(&curves, 1, &gof_opts, rng::child_seed(seed, 0))?;
    let p1 = stage1.result.p_value;
    let kappa_hat = sde::estimate_kappa(&centered)?;
    let sigma_hat = sde::estimate_sigma(&centered);
    let half = opts.alpha / 2.0;

    let mut result = SpecTestResult {
        p1,
        p2: None,
        f_statistic: None,
        kappa_hat,
        sigma_hat,
        decision: Decision::RejectStage1,
        alpha: opts.alpha,
        b: opts.b,
        seed,
        n_curves: curves.n(),
        path_mean,
    };
    if p1 < half {
        return Ok(result);
    }

    let fit = stage1
        .fit
        .as_ref()
        .ok_or_else(|| Error::Precondition("stage 1 produced no fit".into()))?;
    let f = f_from_fit(&stage1.x, &stage1.y, fit, kappa_hat)?;
    let boot = parametric_bootstrap_f_from(
        &BootstrapDesign {
            kappa: kappa_hat,
            sigma: sigma_hat,
            x0: centered.values[0],
            n: curves.n(),
            h,
            delta: path.delta,
        },
        opts,
        rng::child_seed(seed, 1),
    )?;
    let p2 = boot.iter().filter(|v| f <= **v).count() as f64 / boot.len() as f64;
    result.p2 = Some(p2);
    result.f_statistic = Some(f);
    result.decision = if p2 < half {
        Decision::RejectStage2
    } else {
        Decision::NotRejected
    };
    debug_assert!(result.p2.is_some() == (p1 >= half));
    Ok(result)
}

/// The null model and sampling design of the parametric bootstrap.
#[derive(Clone, Copy, Debug)]
pub struct BootstrapDesign {
    pub kappa: f64,
    pub sigma: f64,
    pub x0: f64,
    /// Number of curves.
    pub n: usize,
    pub h: f64,
    pub delta: f64,
}

/// `B` bootstrap F statistics from OU paths started at zero.
#[allow(clippy::too_many_arguments)]
pub fn parametric_bootstrap_f(
    kappa_hat: f64,
    sigma_hat: f64,
    n: usize,
    h: f64,
    delta: f64,
    b: usize,
    ev_threshold: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let design = BootstrapDesign {
        kappa: kappa_hat,
        sigma: sigma_hat,
        x0: 0.0,
        n,
        h,
        delta,
    };
    let opts = SpecTestOptions {
        b,
        ev_threshold,
        ..SpecTestOptions::default()
    };
    parametric_bootstrap_f_from(&design, &opts, seed)
}

pub fn parametric_bootstrap_f_from(design: &BootstrapDesign, opts: &SpecTestOptions, seed: u64) -> Result<Vec<f64>> {
    if opts.b == 0 {
        return Err(Error::Precondition("B must be at least 1".into()));
    }
    let fit_opts = opts.fit_options();
    let b = opts.b as u64;
    opts.execution.try_map(opts.b, |k| {
        let k = k as u64;
        bootstrap_replicate(design, &fit_opts, seed, k).or_else(|e| match e {
            Error::Degenerate(_) | Error::PerfectFit | Error::BlowUp { .. } | Error::FoldSize { .. } => {
                bootstrap_replicate(design, &fit_opts, seed, k + b)
            }
            other => Err(other),
        })
    })
}

fn bootstrap_replicate(design: &BootstrapDesign, fit_opts: &FitOptions, seed: u64, index: u64) -> Result<f64> {
    let model = SdeModel::new(
        SdeKind::Ou {
            kappa: design.kappa,
            sigma: design.sigma,
        },
        design.x0,
    );
    let horizon = design.n as f64 * design.h;
    let path = sde::euler_maruyama(&model, horizon, design.delta, rng::child_seed(seed, 2 * index))?;
    let (centered, _) = path.centered();
    let kappa = sde::estimate_kappa(&centered)?;
    let m = (design.h / design.delta).round() as usize + 1;
    let curves = sde::split_path(&centered, design.h, m)?;
    let (c, _) = curves.center();
    let (x, y) = gof::lag_embed(&c, 1)?;
    let (x, y) = (x.center().0, y.center().0);
    let fit = flmfr::fpcr_l1s_fit_with(&x, &y, fit_opts, rng::child_seed(seed, 2 * index + 1))?;
    f_from_fit(&x, &y, &fit, kappa)
}
