//! Samples of curves sharing one grid.

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `n` curves evaluated on a shared grid; row `i` of `values` is curve `i`.
#[derive(Clone, Debug)]
pub struct FunctionalSample {
    values: DMatrix<f64>,
    grid: Arc<Grid>,
    mean_removed: bool,
}

impl FunctionalSample {
    pub fn new(values: DMatrix<f64>, grid: Arc<Grid>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Precondition("a sample needs at least one curve".into()));
        }
        if values.ncols() != grid.len() {
            return Err(Error::Dimension(format!(
                "curves have {} points, grid has {}",
                values.ncols(),
                grid.len()
            )));
        }
        Ok(Self {
            values,
            grid,
            mean_removed: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], grid: Arc<Grid>) -> Result<Self> {
        let m = grid.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::Dimension(format!(
                "curve of length {} on a grid of {m} points",
                bad.len()
            )));
        }
        let n = rows.len();
        let values = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
        Self::new(values, grid)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mean_removed(&self) -> bool {
        self.mean_removed
    }

    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn rows(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.n() || count == 0 {
            return Err(Error::Dimension(format!(
                "rows {start}..{} of a sample with {} curves",
                start + count,
                self.n()
            )));
        }
        Self::new(self.values.rows(start, count).into_owned(), self.grid.clone())
    }

    /// Pointwise mean curve.
    pub fn mean_curve(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.values.row_sum().iter().map(|s| s / n).collect()
    }

    /// Removes the pointwise mean and returns it for later re-addition.
    pub fn center(&self) -> (FunctionalSample, Vec<f64>) {
        let mean = self.mean_curve();
        let mut values = self.values.clone();
        for (j, mu) in mean.iter().enumerate() {
            values.column_mut(j).add_scalar_mut(-mu);
        }
        (
            Self {
                values,
                grid: self.grid.clone(),
                mean_removed: true,
            },
            mean,
        )
    }

    /// Whether pointwise column means vanish (relative to the sample scale).
    pub fn is_centered(&self) -> bool {
        let scale = 1.0 + self.values.amax();
        self.mean_curve().iter().all(|mu| mu.abs() <= 1e-10 * scale)
    }

    /// Sum of squared norms of all curves.
    pub fn total_norm_sq(&self) -> f64 {
        (0..self.n())
            .map(|i| {
                let c = self.curve(i);
                self.grid.dot_unchecked(&c, &c)
            })
            .sum()
    }

    /// Writes the curve-matrix CSV: a `# atom=<value>` comment, the grid row,
    /// then one row per curve.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# atom={}", self.grid.endpoint_atom())?;
        write_row(&mut out, self.grid.points())?;
        for i in 0..self.n() {
            let row: Vec<f64> = self.values.row(i).iter().copied().collect();
            write_row(&mut out, &row)?;
        }
        Ok(())
    }

    /// Reads the format written by [`FunctionalSample::write_csv`]; trapezoid
    /// weights are rebuilt from the grid row.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut atom = 0.0;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("atom=") {
                    atom = v.trim().parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad atom value {v:?}", lineno + 1))
                    })?;
                }
                continue;
            }
            let row = trimmed
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            rows.push(row);
        }
        if rows.len() < 2 {
            return Err(Error::Parse("need a grid row and at least one curve".into()));
        }
        let points = rows.remove(0);
        let grid = Arc::new(Grid::trapezoid(points, atom)?);
        Self::from_rows(&rows, grid)
    }
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            out.write_all(b",")?;
        }
        write!(out, "{v}")?;
        first = false;
    }
    out.write_all(b"\n")?;
    Ok(())
}
