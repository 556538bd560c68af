//! Scalar diffusions: the drift/volatility zoo, Euler–Maruyama paths,
//! splitting a path into curves, and the drift and volatility estimators.

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng;
use crate::sample::FunctionalSample;

/// Floor used to reflect positivity-constrained paths.
pub const REFLECT_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SdeKind {
    /// `dξ = −κξ dt + σ dW`
    Ou { kappa: f64, sigma: f64 },
    /// `dξ = κ(μ − ξ) dt + σ ξ^γ dW`
    Ckls { kappa: f64, mu: f64, sigma: f64, gamma: f64 },
    /// `dξ = ξ(κ − (σ² − κμ)ξ) dt + σ ξ^{3/2} dW`
    InverseFeller { kappa: f64, mu: f64, sigma: f64 },
    /// `dξ = (τ₋₁/ξ + τ₀ + τ₁ξ + τ₂ξ²) dt + σ ξ^{3/2} dW`
    AitSahalia { tau_m1: f64, tau0: f64, tau1: f64, tau2: f64, sigma: f64 },
    /// `dξ = (λ/ξ − κξ) dt + σ dW`
    RadialOu { lambda: f64, kappa: f64, sigma: f64 },
    /// `dξ = σ dW`
    Null { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeModel {
    #[serde(flatten)]
    pub kind: SdeKind,
    pub x0: f64,
}

impl SdeModel {
    pub fn new(kind: SdeKind, x0: f64) -> Self {
        Self { kind, x0 }
    }

    pub fn family(&self) -> &'static str {
        match self.kind {
            SdeKind::Ou { .. } => "ou",
            SdeKind::Ckls { .. } => "ckls",
            SdeKind::InverseFeller { .. } => "inverse_feller",
            SdeKind::AitSahalia { .. } => "ait_sahalia",
            SdeKind::RadialOu { .. } => "radial_ou",
            SdeKind::Null { .. } => "null",
        }
    }

    /// Whether simulated paths are kept positive by reflection.
    pub fn positive(&self) -> bool {
        match self.kind {
            SdeKind::Ckls { gamma, .. } => gamma != 0.0,
            SdeKind::InverseFeller { .. } | SdeKind::AitSahalia { .. } | SdeKind::RadialOu { .. } => true,
            SdeKind::Ou { .. } | SdeKind::Null { .. } => false,
        }
    }

    /// Drift `m(x)` and volatility `σ(x)`.
    pub fn drift_vol(&self, x: f64) -> Result<(f64, f64)> {
        let family = self.family();
        let need_positive = |x: f64| {
            if x > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain { family, x })
            }
        };
        Ok(match self.kind {
            SdeKind::Ou { kappa, sigma } => (-kappa * x, sigma),
            SdeKind::Ckls { kappa, mu, sigma, gamma } => {
                if gamma != 0.0 {
                    need_positive(x)?;
                }
                (kappa * (mu - x), sigma * x.powf(gamma))
            }
            SdeKind::InverseFeller { kappa, mu, sigma } => {
                need_positive(x)?;
                (x * (kappa - (sigma * sigma - kappa * mu) * x), sigma * x.powf(1.5))
            }
            SdeKind::AitSahalia { tau_m1, tau0, tau1, tau2, sigma } => {
                need_positive(x)?;
                (tau_m1 / x + tau0 + tau1 * x + tau2 * x * x, sigma * x.powf(1.5))
            }
            SdeKind::RadialOu { lambda, kappa, sigma } => {
                need_positive(x)?;
                (lambda / x - kappa * x, sigma)
            }
            SdeKind::Null { sigma } => (0.0, sigma),
        })
    }
}

pub fn drift_vol(model: &SdeModel, x: f64) -> Result<(f64, f64)> {
    model.drift_vol(x)
}

/// A path observed at `tᵢ = iΔ`, `i = 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub delta: f64,
    pub values: Vec<f64>,
    pub model: Option<SdeModel>,
}

impl PathRecord {
    pub fn new(delta: f64, values: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Precondition(format!("step must be positive, got {delta}")));
        }
        if values.len() < 2 {
            return Err(Error::Precondition("a path needs at least 2 points".into()));
        }
        Ok(Self {
            delta,
            values,
            model: None,
        })
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.delta
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| i as f64 * self.delta).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// The path minus its empirical mean, and that mean.
    pub fn centered(&self) -> (PathRecord, f64) {
        let mean = self.mean();
        let values = self.values.iter().map(|v| v - mean).collect();
        (
            PathRecord {
                delta: self.delta,
                values,
                model: self.model,
            },
            mean,
        )
    }

    /// Concatenates curves on a uniform grid, dropping the first point of each
    /// curve after the first (it repeats the previous curve's last point).
    pub fn from_curves(sample: &FunctionalSample) -> Result<Self> {
        let t = sample.grid().points();
        let m = t.len();
        let delta = (t[m - 1] - t[0]) / (m - 1) as f64;
        if t.windows(2).any(|w| ((w[1] - w[0]) - delta).abs() > 1e-9 * delta.max(1.0)) {
            return Err(Error::InvalidGrid("curves must lie on a uniform grid".into()));
        }
        let mut values = Vec::with_capacity(sample.n() * (m - 1) + 1);
        for i in 0..sample.n() {
            let row = sample.values().row(i);
            let skip = if i == 0 { 0 } else { 1 };
            values.extend(row.iter().skip(skip));
        }
        Self::new(delta, values)
    }

    /// Two columns `time,value` after an optional `# model=<json>` comment.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if let Some(model) = &self.model {
            writeln!(out, "# model={}", serde_json::to_string(model)?)?;
        }
        writeln!(out, "# delta={}", self.delta)?;
        writeln!(out, "time,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", i as f64 * self.delta, v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut model = None;
        let mut delta = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(json) = comment.strip_prefix("model=") {
                    model = Some(serde_json::from_str(json)?);
                } else if let Some(d) = comment.strip_prefix("delta=") {
                    delta = Some(d.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
                }
                continue;
            }
            let mut cols = line.split(',');
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected time,value", lineno + 1)));
            };
            match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    times.push(t);
                    values.push(v);
                }
                _ if times.is_empty() => continue, // header row
                _ => return Err(Error::Parse(format!("line {}: bad number", lineno + 1))),
            }
        }
        if values.len() < 2 {
            return Err(Error::Parse("a path needs at least 2 rows".into()));
        }
        let delta = delta.unwrap_or_else(|| (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64);
        let span = times[times.len() - 1] - times[0];
        if ((times.len() - 1) as f64 * delta - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::Parse("times are not uniformly spaced".into()));
        }
        let mut path = Self::new(delta, values)?;
        path.model = model;
        Ok(path)
    }
}

/// Euler–Maruyama on `[0, T]` with step `delta`.
pub fn euler_maruyama(model: &SdeModel, horizon: f64, delta: f64, seed: u64) -> Result<PathRecord> {
    if !(delta > 0.0) || !(horizon > 0.0) {
        return Err(Error::Precondition("T and delta must be positive".into()));
    }
    let steps = (horizon / delta).round();
    if (steps * delta - horizon).abs() > 1e-9 * horizon.max(1.0) || steps < 1.0 {
        return Err(Error::Precondition(format!("T = {horizon} is not a multiple of delta = {delta}")));
    }
    let steps = steps as usize;
    let mut r = rng::from_seed(seed);
    let sqrt_dt = delta.sqrt();
    let positive = model.positive();
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = model.x0;
    if positive && x < REFLECT_FLOOR {
        x = x.abs().max(REFLECT_FLOOR);
    }
    values.push(x);
    for step in 1..=steps {
        let (m, s) = model.drift_vol(x)?;
        let z: f64 = r.sample(StandardNormal);
        x += m * delta + s * sqrt_dt * z;
        if !x.is_finite() {
            return Err(Error::BlowUp { step });
        }
        if positive && x < REFLECT_FLOOR {
            x = x.abs().max(REFLECT_FLOOR);
        }
        values.push(x);
    }
    Ok(PathRecord {
        delta,
        values,
        model: Some(*model),
    })
}

/// Cuts a path into windows `[ih, (i+1)h]` of `m` points each; consecutive
/// curves share their boundary value. Curves live on the `λ + δ(h)` grid.
pub fn split_path(path: &PathRecord, h: f64, m: usize) -> Result<FunctionalSample> {
    let per = (h / path.delta).round();
    if per < 1.0 || (per * path.delta - h).abs() > 1e-9 * h.max(1.0) {
        return Err(Error::Split(format!("h = {h} is not a multiple of delta = {}", path.delta)));
    }
    let per = per as usize;
    if m != per + 1 {
        return Err(Error::Split(format!("windows of h = {h} hold {} points, not {m}", per + 1)));
    }
    let steps = path.steps();
    if !steps.is_multiple_of(per) {
        return Err(Error::Split(format!(
            "T = {} is not a multiple of h = {h}",
            path.horizon()
        )));
    }
    let n = steps / per;
    let grid = Arc::new(Grid::uniform(m, h, 1.0)?);
    let values = DMatrix::from_fn(n, m, |i, k| path.values[i * per + k]);
    FunctionalSample::new(values, grid)
}

/// `κ̂ = −Σ ξᵢ(ξᵢ₊₁ − ξᵢ) / Σ ξᵢ² Δ`.
pub fn estimate_kappa(path: &PathRecord) -> Result<f64> {
    let v = &path.values;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..v.len() - 1 {
        num += v[i] * (v[i + 1] - v[i]);
        den += v[i] * v[i];
    }
    den *= path.delta;
    if !(den > 0.0) {
        return Err(Error::Degenerate("path is identically zero".into()));
    }
    Ok(-num / den)
}

/// `σ̂ = √(Σ (Δξ)² / (NΔ))`.
pub fn estimate_sigma(path: &PathRecord) -> f64 {
    let v = &path.values;
    let qv: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    (qv / (path.steps() as f64 * path.delta)).sqrt()
}
