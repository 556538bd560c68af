//! Functional principal components under a weighted grid measure.
//!
//! With `W` the diagonal of grid weights (atom included) and `X` the n×m
//! curve matrix, the empirical covariance operator is `(1/n) XᵀX W`. It is
//! diagonalized through the symmetric matrix `W^{1/2} (XᵀX/n) W^{1/2}`;
//! mapping its eigenvectors back by `W^{-1/2}` yields eigenfunctions that
//! are orthonormal in the weighted inner product.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sample::FunctionalSample;

#[derive(Clone, Debug)]
pub struct FpcBasis {
    /// m×p, column j is Ψⱼ on the grid.
    eigenfunctions: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    mean_curve: Vec<f64>,
    grid: Arc<Grid>,
}

/// Per-curve scores, entry `(i, j) = ⟨Xᵢ − mean, Ψⱼ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix(pub DMatrix<f64>);

impl ScoreMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl FpcBasis {
    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfunctions
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean_curve(&self) -> &[f64] {
        &self.mean_curve
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.eigenfunctions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first `p` components.
    pub fn truncate(&self, p: usize) -> Result<FpcBasis> {
        if p == 0 {
            return Err(Error::Precondition("a basis needs at least one component".into()));
        }
        if p > self.len() {
            return Err(Error::Dimension(format!(
                "requested {p} components from a basis of {}",
                self.len()
            )));
        }
        Ok(FpcBasis {
            eigenfunctions: self.eigenfunctions.columns(0, p).into_owned(),
            eigenvalues: self.eigenvalues[..p].to_vec(),
            mean_curve: self.mean_curve.clone(),
            grid: self.grid.clone(),
        })
    }
}

/// Eigen-decomposition of the empirical covariance operator of a centered sample.
pub fn fpca(sample: &FunctionalSample, max_components: usize) -> Result<(FpcBasis, ScoreMatrix)> {
    let (n, m) = (sample.n(), sample.m());
    if max_components == 0 || max_components > n.min(m) {
        return Err(Error::Precondition(format!(
            "max_components must be in 1..={}, got {max_components}",
            n.min(m)
        )));
    }
    if !sample.is_centered() {
        return Err(Error::Precondition("fpca requires a centered sample".into()));
    }
    let grid = sample.grid().clone();
    let w = grid.measure_weights();
    if w.iter().any(|x| *x <= 0.0) {
        return Err(Error::InvalidGrid("fpca needs strictly positive weights".into()));
    }
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();

    let mut z = sample.values().clone();
    for (j, s) in sqrt_w.iter().enumerate() {
        z.column_mut(j).scale_mut(*s);
    }
    let mut cov = z.tr_mul(&z);
    cov /= n as f64;
    // exact symmetry before the symmetric solver
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(max_components);

    let mut vectors = DMatrix::zeros(m, max_components);
    let mut eigenvalues = Vec::with_capacity(max_components);
    for (c, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        // sign convention: largest |entry| of the eigenfunction is positive
        let mut best = 0;
        let mut best_abs = -1.0;
        for r in 0..m {
            let a = (v[r] / sqrt_w[r]).abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if v[best] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(c, &v);
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }

    let scores = &z * &vectors;
    let mut eigenfunctions = vectors;
    for (r, s) in sqrt_w.iter().enumerate() {
        eigenfunctions.row_mut(r).scale_mut(1.0 / s);
    }

    Ok((
        FpcBasis {
            eigenfunctions,
            eigenvalues,
            mean_curve: sample.mean_curve(),
            grid,
        },
        ScoreMatrix(scores),
    ))
}

/// Smallest `p` whose leading eigenvalues explain at least `threshold` of the total.
pub fn ev_cutoff(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Precondition(format!(
            "threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 || eigenvalues.is_empty() {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    let mut acc = 0.0;
    let mut positive = 0;
    for (j, l) in eigenvalues.iter().enumerate() {
        acc += l.max(0.0);
        if *l > 0.0 {
            positive = j + 1;
        }
        if acc / total >= threshold {
            return Ok(j + 1);
        }
    }
    // rounding kept the ratio just below a threshold of 1
    Ok(positive.max(1))
}

/// Scores of `sample` on `basis` (the basis mean is removed first).
pub fn project(sample: &FunctionalSample, basis: &FpcBasis) -> Result<ScoreMatrix> {
    check_compatible(sample.grid(), basis)?;
    let w = basis.grid.measure_weights();
    let mut centered = sample.values().clone();
    for (j, (mu, wj)) in basis.mean_curve.iter().zip(&w).enumerate() {
        let mut col = centered.column_mut(j);
        col.add_scalar_mut(-mu);
        col.scale_mut(*wj);
    }
    Ok(ScoreMatrix(centered * &basis.eigenfunctions))
}

/// Curves `mean + Σⱼ scoreᵢⱼ Ψⱼ`.
pub fn reconstruct(scores: &ScoreMatrix, basis: &FpcBasis) -> Result<FunctionalSample> {
    if basis.is_empty() {
        return Err(Error::Precondition("cannot reconstruct from an empty basis".into()));
    }
    if scores.0.ncols() != basis.len() {
        return Err(Error::Dimension(format!(
            "{} score columns for a basis of {} components",
            scores.0.ncols(),
            basis.len()
        )));
    }
    let mut values = &scores.0 * basis.eigenfunctions.transpose();
    for (j, mu) in basis.mean_curve.iter().enumerate() {
        values.column_mut(j).add_scalar_mut(*mu);
    }
    FunctionalSample::new(values, basis.grid.clone())
}

/// Reconstruction without re-adding the basis mean, for residual-type scores.
pub(crate) fn synthesize(scores: &DMatrix<f64>, basis: &FpcBasis) -> DMatrix<f64> {
    scores * basis.eigenfunctions.transpose()
}

fn check_compatible(grid: &Grid, basis: &FpcBasis) -> Result<()> {
    if basis.is_empty() {
        return Err(Error::Precondition("cannot project on an empty basis".into()));
    }
    if grid.len() != basis.grid.len() || grid.points() != basis.grid.points() {
        return Err(Error::Dimension("sample and basis live on different grids".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn random_sample(n: usize, m: usize, atom: f64, seed: u64) -> FunctionalSample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grid = Arc::new(Grid::uniform(m, 1.0, atom).unwrap());
        let values = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        FunctionalSample::new(values, grid).unwrap().center().0
    }

    #[test]
    fn rank_one_sample() {
        let grid = Arc::new(Grid::uniform(51, 1.0, 0.0).unwrap());
        let psi: Vec<f64> = grid.points().iter().map(|t| 1.0 + t * t).collect();
        let a = [-1.5, 0.5, 2.0, -1.0];
        let rows: Vec<Vec<f64>> = a.iter().map(|ai| psi.iter().map(|p| ai * p).collect()).collect();
        let s = FunctionalSample::from_rows(&rows, grid.clone()).unwrap().center().0;
        let (basis, _) = fpca(&s, 4).unwrap();
        let norm = grid.norm_sq(&psi).unwrap().sqrt();
        // psi is positive everywhere, so the sign convention picks +psi/|psi|
        for (k, p) in psi.iter().enumerate() {
            assert_abs_diff_eq!(basis.eigenfunctions()[(k, 0)], p / norm, epsilon = 1e-8);
        }
        // λ₁ = (1/n) Σ aᵢ² ‖ψ‖²
        let lam1 = a.iter().map(|x| x * x).sum::<f64>() / 4.0 * norm * norm;
        assert_abs_diff_eq!(basis.eigenvalues()[0], lam1, epsilon = 1e-9 * lam1);
        for l in &basis.eigenvalues()[1..] {
            assert!(l.abs() < 1e-10);
        }
    }

    #[test]
    fn two_curve_gram_oracle() {
        let s = random_sample(2, 9, 1.0, 3);
        let g = s.grid().clone();
        let c0 = s.curve(0);
        let c1 = s.curve(1);
        // eigenvalues of the weighted Gram matrix / n
        let gram = [
            [g.norm_sq(&c0).unwrap(), g.inner_product(&c0, &c1).unwrap()],
            [g.inner_product(&c0, &c1).unwrap(), g.norm_sq(&c1).unwrap()],
        ];
        let tr = gram[0][0] + gram[1][1];
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let l1 = (tr / 2.0 + disc) / 2.0;
        let l2 = (tr / 2.0 - disc) / 2.0;
        let (basis, _) = fpca(&s, 2).unwrap();
        assert_abs_diff_eq!(basis.eigenvalues()[0], l1, epsilon = 1e-10);
        assert_abs_diff_eq!(basis.eigenvalues()[1], l2.max(0.0), epsilon = 1e-10);
    }

    #[test]
    fn zero_sample_has_zero_spectrum() {
        let grid = Arc::new(Grid::uniform(7, 1.0, 0.0).unwrap());
        let s = FunctionalSample::new(DMatrix::zeros(5, 7), grid).unwrap();
        let (basis, scores) = fpca(&s, 5).unwrap();
        assert!(basis.eigenvalues().iter().all(|l| *l == 0.0));
        assert!(scores.0.amax() == 0.0);
    }

    #[test]
    fn orthonormal_and_consistent_scores() {
        for atom in [0.0, 1.0] {
            let s = random_sample(40, 25, atom, 11);
            let (basis, scores) = fpca(&s, 20).unwrap();
            let g = s.grid();
            let psi = basis.eigenfunctions();
            for j in 0..20 {
                let pj: Vec<f64> = psi.column(j).iter().copied().collect();
                for k in 0..20 {
                    let pk: Vec<f64> = psi.column(k).iter().copied().collect();
                    let ip = g.inner_product(&pj, &pk).unwrap();
                    assert_abs_diff_eq!(ip, if j == k { 1.0 } else { 0.0 }, epsilon = 1e-8);
                }
                let var = scores.0.column(j).iter().map(|x| x * x).sum::<f64>() / 40.0;
                let lam = basis.eigenvalues()[j];
                assert!((var - lam).abs() <= 1e-8 * lam.max(1e-12));
                // scores are the inner products
                for i in [0, 17, 39] {
                    let ip = g.inner_product(&s.curve(i), &pj).unwrap();
                    assert_abs_diff_eq!(ip, scores.0[(i, j)], epsilon = 1e-10);
                }
            }
            for w in basis.eigenvalues().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn uncentered_input_rejected() {
        let grid = Arc::new(Grid::uniform(4, 1.0, 0.0).unwrap());
        let s = FunctionalSample::new(DMatrix::from_element(3, 4, 1.0), grid).unwrap();
        assert!(matches!(fpca(&s, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn cutoff_examples() {
        let l = [0.90, 0.08, 0.02];
        assert_eq!(ev_cutoff(&l, 0.95).unwrap(), 2);
        assert_eq!(ev_cutoff(&l, 0.995).unwrap(), 3);
        assert_eq!(ev_cutoff(&[0.3], 0.5).unwrap(), 1);
        assert_eq!(ev_cutoff(&[0.3], 1.0).unwrap(), 1);
        assert!(matches!(ev_cutoff(&[0.0, 0.0], 0.9), Err(Error::Degenerate(_))));
    }

    #[test]
    fn projection_reconstruction() {
        let s = random_sample(30, 12, 1.0, 5);
        let (basis, scores) = fpca(&s, 12).unwrap();
        let proj = project(&s, &basis).unwrap();
        assert!((proj.0.clone() - scores.0).amax() < 1e-10);
        // full rank: exact reconstruction
        let back = reconstruct(&proj, &basis).unwrap();
        assert!((back.values() - s.values()).amax() < 1e-8);

        // reconstruction error nonincreasing in p
        let mut last = f64::INFINITY;
        for p in 1..=12 {
            let b = basis.truncate(p).unwrap();
            let rec = reconstruct(&project(&s, &b).unwrap(), &b).unwrap();
            let diff = FunctionalSample::new(s.values() - rec.values(), s.grid().clone()).unwrap();
            let err = diff.total_norm_sq();
            assert!(err <= last + 1e-10);
            last = err;
        }
        assert!(last < 1e-12);

        // a curve in the span of the first 3 components is reproduced exactly
        let b3 = basis.truncate(3).unwrap();
        let coef = DMatrix::from_row_slice(1, 3, &[0.3, -1.2, 2.0]);
        let curve = reconstruct(&ScoreMatrix(coef.clone()), &b3).unwrap();
        let again = project(&curve, &b3).unwrap();
        assert!((again.0 - coef).amax() < 1e-8);

        assert!(basis.truncate(0).is_err());
    }
}
