//! Monte Carlo rejection-rate experiments over named scenarios.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::arh::{self, ArhSpec, KernelFamily, KernelSpec, Nonlinearity};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gof::{self, GofOptions};
use crate::grid::Grid;
use crate::rng;
use crate::sample::FunctionalSample;
use crate::sde::{self, PathRecord, SdeKind, SdeModel};
use crate::spectest::{self, SpecTestOptions};
use crate::stats;

/// Attempts per replicate before an unstable or degenerate draw is fatal.
const MAX_ATTEMPTS: u64 = 20;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Arh {
        name: String,
        kernels: Vec<KernelSpec>,
        nonlinearity: Nonlinearity,
    },
    Diffusion {
        name: String,
        model: SdeModel,
    },
}

/// Names accepted by [`Scenario::parse`]; `ou:kappa=<k>,sigma2=<s>` is also accepted.
pub const SCENARIO_NAMES: &[&str] = &[
    "arh0", "arh1", "arh2", "nlq", "nls", "null-s1", "null-s2", "if", "as", "ckls-s1", "ckls-s2", "ckls-s3",
    "rou-s1", "rou-s2", "rou-s3", "rou-s4",
];

impl Scenario {
    pub fn parse(name: &str) -> Result<Scenario> {
        let key = name.trim().to_ascii_lowercase();
        let arh = |kernels: Vec<KernelSpec>, nonlinearity| Scenario::Arh {
            name: key.clone(),
            kernels,
            nonlinearity,
        };
        let diff = |kind: SdeKind, x0: f64| Scenario::Diffusion {
            name: key.clone(),
            model: SdeModel::new(kind, x0),
        };
        let gauss = |norm| KernelSpec::with_norm(KernelFamily::Gaussian, norm);
        let ckls = |kappa, sigma| SdeKind::Ckls {
            kappa,
            mu: 0.09,
            sigma,
            gamma: 1.5,
        };
        let rou = |lambda: f64| {
            (
                SdeKind::RadialOu {
                    lambda,
                    kappa: 0.1,
                    sigma: 0.5,
                },
                (lambda / 0.1).sqrt(),
            )
        };
        Ok(match key.as_str() {
            "arh0" => arh(vec![], Nonlinearity::None),
            "arh1" => arh(vec![KernelSpec::with_norm(KernelFamily::Parabolic, 0.7)], Nonlinearity::None),
            "arh2" => arh(vec![gauss(0.5), gauss(0.3)], Nonlinearity::None),
            "nlq" => arh(vec![gauss(0.5)], Nonlinearity::Square),
            "nls" => arh(vec![gauss(0.5)], Nonlinearity::SqrtAbs),
            "null-s1" => diff(SdeKind::Null { sigma: 0.1 }, 0.0),
            "null-s2" => diff(SdeKind::Null { sigma: 0.5 }, 0.0),
            "if" => diff(
                SdeKind::InverseFeller {
                    kappa: 0.364,
                    mu: 0.08,
                    sigma: 1.6384f64.sqrt(),
                },
                0.08,
            ),
            "as" => diff(
                SdeKind::AitSahalia {
                    tau_m1: 0.00107,
                    tau0: -0.0517,
                    tau1: 0.877,
                    tau2: -4.604,
                    sigma: 0.8,
                },
                0.08,
            ),
            "ckls-s1" => diff(ckls(0.9, 0.5), 0.09),
            "ckls-s2" => diff(ckls(0.2, 1.5), 0.09),
            "ckls-s3" => diff(ckls(0.2, 3.0), 0.09),
            "rou-s1" | "rou-s2" | "rou-s3" | "rou-s4" => {
                let lambda = [0.05, 0.075, 0.1, 0.125][(key.as_bytes()[5] - b'1') as usize];
                let (kind, x0) = rou(lambda);
                diff(kind, x0)
            }
            other if other.starts_with("ou:") => {
                let (kappa, sigma2) = parse_ou(&other[3..])?;
                diff(
                    SdeKind::Ou {
                        kappa,
                        sigma: sigma2.sqrt(),
                    },
                    0.0,
                )
            }
            _ => {
                return Err(Error::Usage(format!(
                    "unknown scenario {name:?}; expected one of {} or ou:kappa=<k>,sigma2=<s>",
                    SCENARIO_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Scenario::Arh { name, .. } | Scenario::Diffusion { name, .. } => name,
        }
    }
}

fn parse_ou(spec: &str) -> Result<(f64, f64)> {
    let mut kappa = None;
    let mut sigma2 = None;
    for part in spec.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("expected key=value in {spec:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad number {v:?} in scenario")))?;
        match k.trim() {
            "kappa" => kappa = Some(v),
            "sigma2" => sigma2 = Some(v),
            "sigma" => sigma2 = Some(v * v),
            other => return Err(Error::Usage(format!("unknown OU parameter {other:?}"))),
        }
    }
    match (kappa, sigma2) {
        (Some(k), Some(s)) if k > 0.0 && s > 0.0 => Ok((k, s)),
        _ => Err(Error::Usage("OU scenarios need kappa > 0 and sigma2 > 0".into())),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: f64,
    pub ev: f64,
    pub seed: u64,
    /// Null orders tested on ARH scenarios.
    pub z: Vec<usize>,
    pub h: f64,
    pub delta: f64,
    pub burn_in: usize,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "arh0".into(),
            n: 150,
            m: 200,
            b: 500,
            alpha: 0.05,
            ev: 0.995,
            seed: 1,
            z: vec![0, 1],
            h: 1.0,
            delta: 0.01,
            burn_in: arh::DEFAULT_BURN_IN,
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")))
        }
        match key {
            "scenario" => self.scenario = value.to_string(),
            "n" => self.n = num(key, value)?,
            "M" | "m" => self.m = num(key, value)?,
            "B" | "b" => self.b = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "ev" => self.ev = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "z" => {
                self.z = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "h" => self.h = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "burn_in" => self.burn_in = num(key, value)?,
            "out" => self.out = Some(value.to_string()),
            other => return Err(Error::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.b == 0 {
            return Err(Error::Usage("M and B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Usage(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.ev > 0.0 && self.ev <= 1.0) {
            return Err(Error::Usage(format!("ev must be in (0, 1], got {}", self.ev)));
        }
        if self.z.is_empty() {
            return Err(Error::Usage("z needs at least one order".into()));
        }
        if self.n < 4 {
            return Err(Error::Usage("n must be at least 4".into()));
        }
        grid_points(self.h, self.delta)?;
        Ok(())
    }
}

/// Points per curve for window length `h` and step `delta`.
pub fn grid_points(h: f64, delta: f64) -> Result<usize> {
    let per = (h / delta).round();
    if !(per >= 1.0) || (per * delta - h).abs() > 1e-9 * h.max(1.0) {
        return Err(Error::Usage(format!("h = {h} must be a positive multiple of delta = {delta}")));
    }
    Ok(per as usize + 1)
}

/// Simulated data for one scenario draw.
pub enum Draw {
    Curves(FunctionalSample),
    Path(PathRecord),
}

/// One dataset from `scenario`. ARH draws carry `n + extra` curves beyond
/// the order of the generating model; diffusion draws span `T = n h`.
pub fn simulate_scenario(scenario: &Scenario, cfg: &ExperimentConfig, extra: usize, seed: u64) -> Result<Draw> {
    match scenario {
        Scenario::Arh {
            kernels, nonlinearity, ..
        } => {
            let m = grid_points(cfg.h, cfg.delta)?;
            let spec = ArhSpec {
                kernels: kernels.clone(),
                nonlinearity: *nonlinearity,
                grid: Arc::new(Grid::uniform(m, cfg.h, 0.0)?),
                burn_in: cfg.burn_in,
            };
            let z = spec.order();
            let count = (cfg.n + extra).saturating_sub(z).max(1);
            Ok(Draw::Curves(arh::simulate_arh(&spec, count, seed)?))
        }
        Scenario::Diffusion { model, .. } => {
            let horizon = cfg.n as f64 * cfg.h;
            Ok(Draw::Path(sde::euler_maruyama(model, horizon, cfg.delta, seed)?))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub scenario: String,
    pub test: String,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: f64,
    pub rejections: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub test: String,
    pub p_value: f64,
    /// Stage-2 p-value of the two-stage test, when stage 2 ran.
    pub p2: Option<f64>,
    pub rejected: bool,
    pub attempts: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub rows: Vec<RateRow>,
    pub replicates: Vec<ReplicateRecord>,
}

fn test_label(z: usize) -> String {
    format!("H0: ARH({z})")
}

/// Runs `M` seeded replicates; replicate `r` uses the stream keyed by `(seed, r)`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    cfg.validate()?;
    let scenario = Scenario::parse(&cfg.scenario)?;
    let per_rep = exec.try_map(cfg.m, |r| run_replicate(&scenario, cfg, r))?;

    let labels: Vec<String> = match &scenario {
        Scenario::Arh { .. } => cfg.z.iter().map(|z| test_label(*z)).collect(),
        Scenario::Diffusion { .. } => vec!["two-stage OU".to_string()],
    };
    let replicates: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let mut rows = Vec::with_capacity(labels.len());
    for label in labels {
        let rejections = replicates.iter().filter(|r| r.test == label && r.rejected).count();
        let (lo, hi) = stats::clopper_pearson(rejections, cfg.m, 0.95)?;
        rows.push(RateRow {
            scenario: scenario.name().to_string(),
            test: label,
            n: cfg.n,
            m: cfg.m,
            b: cfg.b,
            alpha: cfg.alpha,
            rejections,
            rate: rejections as f64 / cfg.m as f64,
            ci_low: lo,
            ci_high: hi,
        });
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        scenario,
        rows,
        replicates,
    })
}

fn run_replicate(scenario: &Scenario, cfg: &ExperimentConfig, r: usize) -> Result<Vec<ReplicateRecord>> {
    let rep_seed = rng::child_seed(cfg.seed, r as u64);
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        match try_replicate(scenario, cfg, r, rep_seed, attempt) {
            Ok(records) => return Ok(records),
            Err(
                e @ (Error::Unstable { .. }
                | Error::BlowUp { .. }
                | Error::Degenerate(_)
                | Error::PerfectFit
                | Error::Convergence { .. }),
            ) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Degenerate("replicate failed".into())))
}

fn try_replicate(
    scenario: &Scenario,
    cfg: &ExperimentConfig,
    r: usize,
    rep_seed: u64,
    attempt: u64,
) -> Result<Vec<ReplicateRecord>> {
    let sim_seed = rng::child_seed(rep_seed, 2 * attempt);
    let test_seed = rng::child_seed(rep_seed, 2 * attempt + 1);
    match scenario {
        Scenario::Arh { .. } => {
            let max_lag = cfg.z.iter().map(|z| (*z).max(1)).max().unwrap_or(1);
            let Draw::Curves(curves) = simulate_scenario(scenario, cfg, max_lag, sim_seed)? else {
                unreachable!()
            };
            let opts = GofOptions {
                b: cfg.b,
                ev_threshold: cfg.ev,
                execution: Execution::Sequential,
                ..GofOptions::default()
            };
            cfg.z
                .iter()
                .map(|&z| {
                    // every order is tested on its last n embedded pairs
                    let lag = z.max(1);
                    let start = curves.n() - (cfg.n + lag);
                    let data = curves.rows(start, cfg.n + lag)?;
                    let res = gof::arh_gof_test_with(&data, z, &opts, rng::child_seed(test_seed, z as u64))?;
                    Ok(ReplicateRecord {
                        replicate: r,
                        test: test_label(z),
                        p_value: res.p_value,
                        p2: None,
                        rejected: res.p_value < cfg.alpha,
                        attempts: attempt + 1,
                    })
                })
                .collect()
        }
        Scenario::Diffusion { .. } => {
            let Draw::Path(path) = simulate_scenario(scenario, cfg, 0, sim_seed)? else {
                unreachable!()
            };
            let opts = SpecTestOptions {
                b: cfg.b,
                alpha: cfg.alpha,
                ev_threshold: cfg.ev,
                execution: Execution::Sequential,
            };
            let res = spectest::two_stage_test_with(&path, cfg.h, &opts, test_seed)?;
            Ok(vec![ReplicateRecord {
                replicate: r,
                test: "two-stage OU".to_string(),
                p_value: res.p1,
                p2: res.p2,
                rejected: res.decision.rejects(),
                attempts: attempt + 1,
            }])
        }
    }
}

impl ExperimentReport {
    pub fn results_csv(&self) -> String {
        let mut s = String::from("scenario,test,n,M,B,alpha,rejections,rate,ci_low,ci_high\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario, r.test, r.n, r.m, r.b, r.alpha, r.rejections, r.rate, r.ci_low, r.ci_high
            );
        }
        s
    }

    pub fn replicates_csv(&self) -> String {
        let mut s = String::from("replicate,test,p_value,p2,rejected,attempts\n");
        for r in &self.replicates {
            let p2 = r.p2.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.replicate, r.test, r.p_value, p2, r.rejected, r.attempts
            );
        }
        s
    }

    /// Writes `results.csv`, `results.json` and `replicates.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.results_csv())?;
        fs::write(dir.join("results.json"), serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(dir.join("replicates.csv"), self.replicates_csv())?;
        Ok(())
    }
}
