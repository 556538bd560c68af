//! The A• geometry matrix of projected regressor scores.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::function::gamma::gamma;

use crate::exec::Execution;

/// Squared distance below which two score vectors are treated as equal.
pub const COINCIDE_TOL: f64 = 1e-12;

/// Fixed number of `r`-chunks, so the summation order does not depend on
/// the execution mode or the thread count.
const CHUNKS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct AdotMatrix {
    pub entries: DMatrix<f64>,
    pub p_tilde: usize,
}

impl AdotMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

/// `π^{p̃/2−1} / Γ(p̃/2)`.
pub fn angle_scale(p_tilde: usize) -> f64 {
    let half = p_tilde as f64 / 2.0;
    PI.powf(half - 1.0) / gamma(half)
}

/// The angle `A^∠_{ijr}` in `[0, 2π]` for explicit points.
pub fn angle(xi: &[f64], xj: &[f64], xr: &[f64]) -> f64 {
    let di: Vec<f64> = xi.iter().zip(xr).map(|(a, b)| a - b).collect();
    let dj: Vec<f64> = xj.iter().zip(xr).map(|(a, b)| a - b).collect();
    let ni: f64 = di.iter().map(|v| v * v).sum();
    let nj: f64 = dj.iter().map(|v| v * v).sum();
    let ci = ni <= COINCIDE_TOL;
    let cj = nj <= COINCIDE_TOL;
    match (ci, cj) {
        (true, true) => 2.0 * PI,
        (true, false) | (false, true) => PI,
        _ => {
            let (si, sj) = (ni.sqrt(), nj.sqrt());
            let ui: Vec<f64> = di.iter().map(|v| v / si).collect();
            let uj: Vec<f64> = dj.iter().map(|v| v / sj).collect();
            let cos: f64 = ui.iter().zip(&uj).map(|(a, b)| a * b).sum();
            PI - unit_angle(&ui, &uj, cos)
        }
    }
}

/// Angle between unit vectors with known cosine. Near `±1` the cosine loses
/// half its digits under `acos`, so the half-angle form is used there.
fn unit_angle<'a>(
    u: impl IntoIterator<Item = &'a f64> + Clone,
    v: impl IntoIterator<Item = &'a f64> + Clone,
    cos: f64,
) -> f64 {
    if cos.abs() < 0.9 {
        return cos.acos();
    }
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in u.into_iter().zip(v) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    2.0 * minus.sqrt().atan2(plus.sqrt())
}

pub fn adot(x_scores: &DMatrix<f64>) -> AdotMatrix {
    adot_with(x_scores, Execution::default())
}

/// `A•(i,j) = Σ_r A_{ijr}` for the rows of `x_scores`.
pub fn adot_with(x_scores: &DMatrix<f64>, exec: Execution) -> AdotMatrix {
    let (n, p_tilde) = x_scores.shape();
    let chunks = CHUNKS.min(n).max(1);
    let partial = exec.map(chunks, |c| {
        let lo = c * n / chunks;
        let hi = (c + 1) * n / chunks;
        let mut acc = DMatrix::zeros(n, n);
        let mut unit = DMatrix::zeros(n, p_tilde);
        let mut coincide = vec![false; n];
        for r in lo..hi {
            accumulate_r(x_scores, r, &mut unit, &mut coincide, &mut acc);
        }
        acc
    });
    let mut sum = DMatrix::zeros(n, n);
    for m in &partial {
        sum += m;
    }
    let scale = angle_scale(p_tilde);
    for j in 0..n {
        for i in j..n {
            let v = sum[(i, j)] * scale;
            sum[(i, j)] = v;
            sum[(j, i)] = v;
        }
    }
    AdotMatrix {
        entries: sum,
        p_tilde,
    }
}

/// Adds the angles `A^∠_{ijr}` (j ≤ i) for one `r` into the lower triangle of `acc`.
fn accumulate_r(
    x: &DMatrix<f64>,
    r: usize,
    unit: &mut DMatrix<f64>,
    coincide: &mut [bool],
    acc: &mut DMatrix<f64>,
) {
    let (n, p) = x.shape();
    for i in 0..n {
        let mut sq = 0.0;
        for k in 0..p {
            let d = x[(i, k)] - x[(r, k)];
            unit[(i, k)] = d;
            sq += d * d;
        }
        coincide[i] = sq <= COINCIDE_TOL;
        let inv = if coincide[i] { 0.0 } else { 1.0 / sq.sqrt() };
        for k in 0..p {
            unit[(i, k)] *= inv;
        }
    }
    let cos = &*unit * unit.transpose();
    for j in 0..n {
        for i in j..n {
            let a = match (coincide[i], coincide[j]) {
                (true, true) => 2.0 * PI,
                (true, false) | (false, true) => PI,
                _ if i == j => PI,
                _ => PI - unit_angle(unit.row(i).iter(), unit.row(j).iter(), cos[(i, j)]),
            };
            acc[(i, j)] += a;
        }
    }
}
