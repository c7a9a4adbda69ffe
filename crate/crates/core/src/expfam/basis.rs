use nalgebra::DMatrix;

use crate::numerics::{hermite_all, DensityVector, Grid};
use crate::{invalid, Error, Result};

/// `p` real functions on a grid: the sufficient statistic `T(mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticBasis {
    grid: Grid,
    columns: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl StatisticBasis {
    pub fn new(grid: Grid, columns: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if columns.is_empty() {
            return Err(invalid("basis must have at least one statistic"));
        }
        if labels.len() != columns.len() {
            return Err(invalid(format!(
                "{} labels for {} statistics",
                labels.len(),
                columns.len()
            )));
        }
        for (j, c) in columns.iter().enumerate() {
            grid.check_len(c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("statistic {} has non-finite values", labels[j])));
            }
        }
        Ok(Self {
            grid,
            columns,
            labels,
        })
    }

    /// A single statistic.
    pub fn single(grid: Grid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(grid, vec![values], vec![label.into()])
    }

    /// Builds column `j` as `f(j, mu)` for `j = 1..=p`.
    pub fn from_fn(grid: Grid, p: usize, label: &str, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let columns = (1..=p)
            .map(|j| grid.points().iter().map(|&mu| f(j, mu)).collect())
            .collect();
        let labels = (1..=p).map(|j| format!("{label}{j}")).collect();
        Self::new(grid, columns, labels)
    }

    /// Monomials `mu, mu^2, ..., mu^p` (the log-polynomial model).
    pub fn polynomial(grid: Grid, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid("polynomial degree must be at least 1"));
        }
        let columns = (1..=p as i32)
            .map(|j| grid.points().iter().map(|mu| mu.powi(j)).collect())
            .collect();
        let labels = (1..=p).map(|j| format!("mu^{j}")).collect();
        Self::new(grid, columns, labels)
    }

    /// Normalized Hermite polynomials `H_j(mu / sigma)`, `j = 1..=p`.
    pub fn hermite(grid: Grid, p: usize, sigma: f64) -> Result<Self> {
        if p == 0 {
            return Err(invalid("Hermite basis dimension must be at least 1"));
        }
        if !(sigma > 0.0) {
            return Err(invalid(format!("sigma must be positive, got {sigma}")));
        }
        let table: Vec<Vec<f64>> = grid
            .points()
            .iter()
            .map(|&mu| hermite_all(p, mu / sigma))
            .collect();
        let columns = (1..=p)
            .map(|j| table.iter().map(|h| h[j]).collect())
            .collect();
        let labels = (1..=p).map(|j| format!("H{j}")).collect();
        Self::new(grid, columns, labels)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `eta . T(mu_i)` at every grid point.
    pub fn linear_combination(&self, eta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (c, &e) in self.columns.iter().zip(eta) {
            if e != 0.0 {
                out.iter_mut().zip(c).for_each(|(o, v)| *o += e * v);
            }
        }
        out
    }

    /// Basis `Q T`, i.e. new statistic `a` is `sum_b Q[a, b] T_b`.
    pub fn transformed(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.ncols() != self.dim() {
            return Err(invalid(format!(
                "transform has {} columns for a {}-dimensional basis",
                q.ncols(),
                self.dim()
            )));
        }
        let columns = (0..q.nrows())
            .map(|a| {
                let row: Vec<f64> = q.row(a).iter().cloned().collect();
                self.linear_combination(&row)
            })
            .collect();
        let labels = (1..=q.nrows()).map(|a| format!("QT{a}")).collect();
        Self::new(self.grid.clone(), columns, labels)
    }

    /// Mean of each statistic under a density.
    pub fn means(&self, density: &DensityVector) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| self.grid.inner(c, density.values()))
            .collect()
    }

    /// Covariance matrix of `T` under a density.
    pub fn covariance(&self, density: &DensityVector) -> DMatrix<f64> {
        let means = self.means(density);
        let centred: Vec<Vec<f64>> = self
            .columns
            .iter()
            .zip(&means)
            .map(|(c, m)| c.iter().map(|v| v - m).collect())
            .collect();
        let g = density.values();
        let p = self.dim();
        let mut cov = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let s: f64 = self
                    .grid
                    .weights()
                    .iter()
                    .zip(g)
                    .zip(centred[a].iter().zip(&centred[b]))
                    .map(|((w, gi), (x, y))| w * gi * x * y)
                    .sum();
                cov[(a, b)] = s;
                cov[(b, a)] = s;
            }
        }
        cov
    }

    /// Fails unless the statistics are linearly independent (and non-constant)
    /// in `L2(density)`: the smallest eigenvalue of the correlation matrix must
    /// exceed `1e-10`.
    pub fn check_independent(&self, density: &DensityVector) -> Result<()> {
        let cov = self.covariance(density);
        let p = self.dim();
        for a in 0..p {
            if !(cov[(a, a)] > 1e-12) {
                return Err(Error::DegenerateBasis(format!(
                    "statistic {} has variance {:e}",
                    self.labels[a], cov[(a, a)]
                )));
            }
        }
        let corr = DMatrix::from_fn(p, p, |a, b| {
            cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt()
        });
        let min = corr.symmetric_eigenvalues().min();
        if !(min > 1e-10) {
            return Err(Error::DegenerateBasis(format!(
                "smallest correlation eigenvalue {min:e}"
            )));
        }
        Ok(())
    }
}
