use nalgebra::{DMatrix, DVector};

use super::grid::{DensityVector, Grid};
use crate::{invalid, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `sum_{|k| <= terms} sigma^-1 phi((d + k P) / sigma)`, summed in symmetric
/// pairs so the result is exactly even in `d`.
pub fn wrapped_normal_pdf(d: f64, sigma: f64, period: f64, terms: usize) -> f64 {
    let mut acc = normal_pdf(d / sigma);
    for k in 1..=terms {
        let shift = k as f64 * period;
        acc += normal_pdf((d + shift) / sigma) + normal_pdf((d - shift) / sigma);
    }
    acc / sigma
}

/// Wrapped `N(0, sigma^2)` density on the grid.
pub fn wrapped_gaussian(grid: &Grid, sigma: f64, terms: usize) -> Result<DensityVector> {
    wrapped_normal(grid, 0.0, sigma, terms)
}

/// Wrapped `N(mean, sigma^2)` density on the grid, renormalized by quadrature.
pub fn wrapped_normal(grid: &Grid, mean: f64, sigma: f64, terms: usize) -> Result<DensityVector> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    if terms == 0 {
        return Err(invalid("at least one wrap term is required"));
    }
    let period = grid.period();
    let values = grid
        .points()
        .iter()
        .map(|&x| wrapped_normal_pdf(x - mean, sigma, period, terms))
        .collect();
    DensityVector::normalized(grid.clone(), values)
}

/// Cyclic Gaussian convolution kernel `K_M(mu, x)` tabulated on a grid.
///
/// Entry `(i, j)` is `K_M(mu_j, x_i)`. Because the grid is uniform and the
/// kernel depends only on `|x - mu|`, the matrix is symmetric Toeplitz.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: Grid,
    terms: usize,
    values: DMatrix<f64>,
}

pub fn cyclic_kernel(grid: &Grid, terms: usize) -> Result<KernelMatrix> {
    KernelMatrix::new(grid, terms)
}

impl KernelMatrix {
    pub fn new(grid: &Grid, terms: usize) -> Result<Self> {
        if terms == 0 {
            return Err(invalid("at least one wrap term is required"));
        }
        let n = grid.len();
        let h = grid.spacing();
        let period = grid.period();
        let lag: Vec<f64> = (0..n)
            .map(|m| wrapped_normal_pdf(m as f64 * h, 1.0, period, terms))
            .collect();
        let values = DMatrix::from_fn(n, n, |i, j| lag[i.abs_diff(j)]);
        Ok(Self {
            grid: grid.clone(),
            terms,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `K_M(mu, x)` at arbitrary points.
    pub fn eval(&self, mu: f64, x: f64) -> f64 {
        wrapped_normal_pdf(x - mu, 1.0, self.grid.period(), self.terms)
    }

    /// `K_M(mu_j, x)` for every grid point `mu_j`.
    pub fn row(&self, x: f64) -> Vec<f64> {
        let period = self.grid.period();
        self.grid
            .points()
            .iter()
            .map(|&mu| wrapped_normal_pdf(x - mu, 1.0, period, self.terms))
            .collect()
    }

    /// `(K h)(x_i) = sum_j w_j K(mu_j, x_i) h(mu_j)`.
    pub fn convolve(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(h.len())?;
        let weighted =
            DVector::from_iterator(h.len(), self.grid.weights().iter().zip(h).map(|(w, v)| w * v));
        Ok((&self.values * weighted).data.into())
    }

    /// Column integrals `sum_i w_i K(mu_j, x_i)`; each should be 1.
    pub fn column_masses(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        self.values.column_iter().map(|c| c.sum() * h).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn wrapped_gaussian_normalized_and_even() {
        let g = make_grid(8.0, 1024).unwrap();
        let d = wrapped_gaussian(&g, 1.0, 8).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-8);
        let v = d.values();
        for i in 0..512 {
            assert_eq!(v[i], v[1023 - i]);
        }
    }

    #[test]
    fn wrapped_value_at_origin() {
        // Oracle: direct sum of phi(2jM) over |j| <= 8 with M = 8.
        let direct: f64 = (-8i32..=8)
            .map(|j| (-0.5 * (16.0 * j as f64).powi(2)).exp() / (2.0 * PI).sqrt())
            .sum();
        let v = wrapped_normal_pdf(0.0, 1.0, 16.0, 8);
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 0.398_942_280_4).abs() < 1e-6);
        assert_eq!(wrapped_normal_pdf(1.7, 1.0, 16.0, 8), wrapped_normal_pdf(-1.7, 1.0, 16.0, 8));
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let g = make_grid(8.0, 64).unwrap();
        assert!(wrapped_gaussian(&g, 0.0, 8).is_err());
        assert!(wrapped_gaussian(&g, -1.0, 8).is_err());
    }

    #[test]
    fn kernel_invariants() {
        let g = make_grid(8.0, 512).unwrap();
        let k = cyclic_kernel(&g, 8).unwrap();
        for m in k.column_masses() {
            assert!((m - 1.0).abs() < 1e-8, "column mass {m}");
        }
        let a = k.matrix();
        assert!(a.iter().all(|&v| v > 0.0));
        for i in (0..512).step_by(37) {
            for j in (0..512).step_by(41) {
                assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        assert!((k.eval(0.0, 0.0) - 0.398_942_280_4).abs() < 1e-6);
        assert_eq!(k.eval(1.2, -3.1), k.eval(-3.1, 1.2));
    }

    #[test]
    fn convolving_a_spike_gives_its_column() {
        let g = make_grid(8.0, 256).unwrap();
        let k = cyclic_kernel(&g, 8).unwrap();
        let mut spike = vec![0.0; 256];
        spike[100] = 1.0 / g.spacing();
        let f = k.convolve(&spike).unwrap();
        for (i, v) in f.iter().enumerate() {
            assert!((v - k.matrix()[(i, 100)]).abs() < 1e-14);
        }
    }
}
