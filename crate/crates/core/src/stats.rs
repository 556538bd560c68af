//! Small statistical helpers for Monte Carlo summaries.

use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};

/// Exact binomial confidence interval for `k` successes out of `n`.
pub fn clopper_pearson(k: usize, n: usize, level: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Precondition(format!("need 0 <= k <= n and n > 0, got k={k}, n={n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("level must be in (0, 1), got {level}")));
    }
    let a = (1.0 - level) / 2.0;
    let (kf, nf) = (k as f64, n as f64);
    let beta = |x: f64, y: f64| Beta::new(x, y).map_err(|e| Error::Precondition(e.to_string()));
    let lo = if k == 0 { 0.0 } else { beta(kf, nf - kf + 1.0)?.inverse_cdf(a) };
    let hi = if k == n { 1.0 } else { beta(kf + 1.0, nf - kf)?.inverse_cdf(1.0 - a) };
    Ok((lo, hi))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against Uniform(0, 1), with the
/// Stephens finite-sample correction of the asymptotic distribution.
pub fn ks_uniform(samples: &[f64]) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Precondition("empty sample".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = v.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
