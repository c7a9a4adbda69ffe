//! Relative efficiency of statistics and the most favorable families.
//!
//! For a statistic `t`, the relative efficiency `rho(t) = Var[E[t | X]] /
//! Var[t]` is the fraction of the Fisher information about the tilt in
//! direction `t` that survives the noise. Its multivariate version is the
//! smallest generalized eigenvalue of `(I_X, I_mu)`. The operator `P_g` has
//! `sqrt(g)` as leading eigenfunction with eigenvalue 1; its next
//! eigenfunctions, divided by `sqrt(g)`, span the families with the largest
//! attainable efficiency.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::expfam::{ExpFamModel, StatisticBasis};
use crate::numerics::{sym_eigen, symmetrize, DensityVector, Grid, KernelMatrix};
use crate::{invalid, par, Error, Result};

/// Floor applied to carriers with zeros, relative to the carrier maximum.
pub const DEFAULT_FLOOR: f64 = 1e-10;

const MIN_VARIANCE: f64 = 1e-12;
const DEGENERATE_GAP: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EfficiencyReport {
    /// Worst-direction efficiency `min_a a'I_X a / a'I_mu a`.
    pub rho: f64,
    /// Unit vector `a*` attaining the minimum.
    pub worst_direction: Vec<f64>,
    pub i_mu: DMatrix<f64>,
    pub i_x: DMatrix<f64>,
    /// All generalized eigenvalues, descending.
    pub generalized_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub grid: Grid,
    /// Carrier actually used, after flooring.
    pub carrier: DensityVector,
    /// Floor fraction applied to the carrier, if any.
    pub floor: Option<f64>,
    /// Eigenvalues of `P_g`, descending.
    pub eigenvalues: Vec<f64>,
    /// `zeta_k` on the grid, orthonormal under `quad`.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// `T_j = zeta_{j+1} / sqrt(g0)` for `j = 1..=p`.
    pub favorable_stats: Vec<Vec<f64>>,
    /// `rho_per_dim[j - 1] = lambda_{j+1}`: efficiency of the `j`-dimensional
    /// favorable family.
    pub rho_per_dim: Vec<f64>,
    /// Set when two of the leading `p + 1` eigenvalues coincide, in which case
    /// the favorable family is only determined up to rotation within the
    /// eigenspace.
    pub degenerate_spectrum: bool,
}

impl SpectralResult {
    pub fn dim(&self) -> usize {
        self.favorable_stats.len()
    }

    /// The first `p` favorable statistics as a basis.
    pub fn favorable_basis(&self, p: usize) -> Result<StatisticBasis> {
        if p == 0 || p + 1 >= self.eigenfunctions.len() {
            return Err(invalid(format!("favorable family dimension {p} out of range")));
        }
        let columns = (1..=p).map(|j| self.statistic(j)).collect();
        let labels = (1..=p).map(|j| format!("T{j}")).collect();
        StatisticBasis::new(self.grid.clone(), columns, labels)
    }

    /// `T_j = zeta_{j+1} / sqrt(g0)`, available for any `j` below the grid
    /// size.
    pub fn statistic(&self, j: usize) -> Vec<f64> {
        self.eigenfunctions[j]
            .iter()
            .zip(self.carrier.values())
            .map(|(z, g)| z / g.sqrt())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltApproximation {
    /// `gamma_j = quad(tau T_j g0)` for `j = 1..=p`.
    pub coefficients: Vec<f64>,
    /// `(1/2) quad(tau^2 g0) lambda_{p+2}`.
    pub kl_bound: f64,
    /// g0-norm of the part of `tau` (minus its mean) outside the span of the
    /// first `p` favorable statistics.
    pub residual_norm: f64,
}

fn model_at_carrier(
    carrier: &DensityVector,
    kernel: &Arc<KernelMatrix>,
    basis: StatisticBasis,
) -> Result<ExpFamModel> {
    ExpFamModel::at_carrier(carrier.clone(), basis, Arc::clone(kernel))
}

/// `Var[E[t | X]] / Var[t]` under the carrier.
pub fn rho_univariate(carrier: &DensityVector, kernel: &Arc<KernelMatrix>, t: &[f64]) -> Result<f64> {
    let grid = carrier.grid().clone();
    grid.check_len(t.len())?;
    let basis = StatisticBasis::single(grid, t.to_vec(), "t")?;
    let var = basis.covariance(carrier)[(0, 0)];
    if !(var > MIN_VARIANCE) {
        return Err(Error::DegenerateStatistic(var));
    }
    let model = model_at_carrier(carrier, kernel, basis)?;
    Ok(model.fisher_x()?[(0, 0)] / model.fisher_mu()[(0, 0)])
}

/// Worst-direction efficiency of a multivariate statistic.
///
/// With `Sigma = L L'` the carrier covariance of `T` and `Q = L^{-T}`, the
/// generalized problem reduces to the ordinary eigenproblem of `Q' M Q`, where
/// `M = Var[E[T | X]]`. The minimizing direction is `a* = Q b* / |Q b*|` for
/// `b*` the eigenvector of the smallest eigenvalue.
pub fn rho_multivariate(
    carrier: &DensityVector,
    kernel: &Arc<KernelMatrix>,
    basis: &StatisticBasis,
) -> Result<EfficiencyReport> {
    basis.check_independent(carrier)?;
    let model = model_at_carrier(carrier, kernel, basis.clone())?;
    let i_mu = model.fisher_mu();
    let i_x = model.fisher_x()?;
    let p = basis.dim();

    let chol = i_mu
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateBasis("covariance is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::DegenerateBasis("singular Cholesky factor".into()))?;
    let q = l_inv.transpose();
    let reduced = symmetrize(&(q.transpose() * &i_x * &q));
    let eig = sym_eigen(&reduced)?;

    let b_star = eig.vectors.column(p - 1).into_owned();
    let mut a = &q * b_star;
    a /= a.norm();
    orient(&mut a);
    Ok(EfficiencyReport {
        rho: eig.values[p - 1].max(0.0),
        worst_direction: a.iter().copied().collect(),
        i_mu,
        i_x,
        generalized_eigenvalues: eig.values.iter().copied().collect(),
    })
}

fn orient(v: &mut DVector<f64>) {
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v.neg_mut();
    }
}

/// The discretized operator `A[i, j] = sqrt(w_i) P_g(mu_i, mu_j) sqrt(w_j)`.
///
/// `A = B'B` with `B[k, i] = K(mu_i, x_k) sqrt(w_i g_i) sqrt(w_k / f_k)`,
/// which makes `A` positive semi-definite by construction. The carrier must be
/// strictly positive on the grid; floor carriers with zeros first.
pub fn operator_pg(carrier: &DensityVector, kernel: &KernelMatrix) -> Result<DMatrix<f64>> {
    let grid = carrier.grid();
    grid.check_same(kernel.grid())?;
    let ratio = carrier.min_value() / carrier.max_value();
    if !(ratio > 0.0) {
        return Err(Error::DegenerateCarrier { min_ratio: ratio });
    }
    let n = grid.len();
    let w = grid.weights();
    let g = carrier.values();
    let f = kernel.convolve(g)?;
    let k = kernel.matrix();

    let col_scale: Vec<f64> = (0..n).map(|i| (w[i] * g[i]).sqrt()).collect();
    let row_scale: Vec<f64> = (0..n).map(|r| (w[r] / f[r]).sqrt()).collect();
    let b = DMatrix::from_fn(n, n, |r, i| k[(r, i)] * col_scale[i] * row_scale[r]);

    // Column blocks of B'B, assembled independently.
    const BLOCK: usize = 64;
    let blocks = n.div_ceil(BLOCK);
    let bt = b.transpose();
    let parts = par::map_indexed(blocks, |blk| {
        let start = blk * BLOCK;
        let width = BLOCK.min(n - start);
        &bt * b.columns(start, width)
    });
    let mut a = DMatrix::zeros(n, n);
    for (blk, part) in parts.into_iter().enumerate() {
        a.columns_mut(blk * BLOCK, part.ncols()).copy_from(&part);
    }
    Ok(symmetrize(&a))
}

/// Spectrum of `P_g` and the first `p` most favorable statistics.
///
/// With `floor = Some(eps)` the carrier is first raised to `eps` times its
/// maximum and renormalized; carriers with zeros need this.
pub fn most_favorable(
    carrier: &DensityVector,
    kernel: &KernelMatrix,
    p: usize,
    floor: Option<f64>,
) -> Result<SpectralResult> {
    let grid = carrier.grid().clone();
    if p == 0 || p + 1 >= grid.len() {
        return Err(invalid(format!(
            "family dimension {p} must be in 1..{}",
            grid.len() - 1
        )));
    }
    let carrier = match floor {
        Some(eps) => carrier.floored(eps)?,
        None => carrier.clone(),
    };
    let a = operator_pg(&carrier, kernel)?;
    let eig = sym_eigen(&a)?;
    let eigenvalues: Vec<f64> = eig.values.iter().copied().collect();

    let w = grid.weights();
    let eigenfunctions: Vec<Vec<f64>> = eig
        .vectors
        .column_iter()
        .map(|v| v.iter().zip(w).map(|(vi, wi)| vi / wi.sqrt()).collect())
        .collect();

    let lead = eigenvalues[0].abs().max(f64::MIN_POSITIVE);
    let degenerate_spectrum = eigenvalues[..=p + 1]
        .windows(2)
        .any(|pair| (pair[0] - pair[1]).abs() <= DEGENERATE_GAP * lead);

    let mut result = SpectralResult {
        grid,
        carrier,
        floor,
        rho_per_dim: eigenvalues[1..=p].to_vec(),
        eigenvalues,
        eigenfunctions,
        favorable_stats: Vec::new(),
        degenerate_spectrum,
    };
    result.favorable_stats = (1..=p).map(|j| result.statistic(j)).collect();
    Ok(result)
}

/// Coefficients of the best `p`-dimensional favorable approximation to the
/// tilt `tau`, and the bound on `lim n KL` between the noised marginals.
pub fn approx_tilt(spectral: &SpectralResult, tau: &[f64], p: usize) -> Result<TiltApproximation> {
    let grid = &spectral.grid;
    grid.check_len(tau.len())?;
    if p + 2 > spectral.eigenvalues.len() {
        return Err(invalid(format!("dimension {p} exceeds the available spectrum")));
    }
    let g = spectral.carrier.values();
    let tau_g: Vec<f64> = tau.iter().zip(g).map(|(t, gi)| t * gi).collect();
    let second = grid.inner(tau, &tau_g);
    if !second.is_finite() {
        return Err(invalid("tilt has infinite second moment under the carrier"));
    }
    let mean = grid.quad(&tau_g)?;
    let coefficients: Vec<f64> = (1..=p)
        .map(|j| grid.inner(&tau_g, &spectral.statistic(j)))
        .collect();
    let explained = mean * mean + coefficients.iter().map(|c| c * c).sum::<f64>();
    Ok(TiltApproximation {
        kl_bound: 0.5 * second * spectral.eigenvalues[p + 1],
        residual_norm: (second - explained).max(0.0).sqrt(),
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cyclic_kernel, hermite, make_grid, wrapped_gaussian};

    fn setup(sigma: f64) -> (DensityVector, Arc<KernelMatrix>) {
        setup_on(8.0 * sigma.max(1.0), sigma)
    }

    fn setup_on(m: f64, sigma: f64) -> (DensityVector, Arc<KernelMatrix>) {
        let grid = make_grid(m, 512).unwrap();
        (
            wrapped_gaussian(&grid, sigma, 8).unwrap(),
            Arc::new(cyclic_kernel(&grid, 8).unwrap()),
        )
    }

    fn hermite_column(grid: &Grid, j: i32) -> Vec<f64> {
        grid.points().iter().map(|&m| hermite(j, m).unwrap()).collect()
    }

    #[test]
    fn hermite_efficiencies() {
        let (carrier, kernel) = setup(1.0);
        let grid = carrier.grid().clone();
        for (j, want) in [(1, 0.5), (2, 0.25), (3, 0.125)] {
            let rho = rho_univariate(&carrier, &kernel, &hermite_column(&grid, j)).unwrap();
            assert!((rho - want).abs() < 1e-4, "H{j}: {rho}");
        }
    }

    #[test]
    fn constant_statistic_is_degenerate() {
        let (carrier, kernel) = setup(1.0);
        let err = rho_univariate(&carrier, &kernel, &vec![2.0; 512]);
        assert!(matches!(err, Err(Error::DegenerateStatistic(_))));
    }

    #[test]
    fn hermite_basis_worst_direction() {
        let (carrier, kernel) = setup(1.0);
        let basis = StatisticBasis::hermite(carrier.grid().clone(), 3, 1.0).unwrap();
        let report = rho_multivariate(&carrier, &kernel, &basis).unwrap();
        assert!((report.rho - 0.125).abs() < 1e-4);
        assert!((report.worst_direction[2] - 1.0).abs() < 1e-6);
        let t = basis.linear_combination(&report.worst_direction);
        let single = rho_univariate(&carrier, &kernel, &t).unwrap();
        assert!((single - report.rho).abs() < 1e-8);
    }

    #[test]
    fn univariate_and_multivariate_agree() {
        let (carrier, kernel) = setup(1.0);
        let grid = carrier.grid().clone();
        let t: Vec<f64> = grid.points().iter().map(|m| m.sin() + 0.3 * m).collect();
        let basis = StatisticBasis::single(grid, t.clone(), "t").unwrap();
        let report = rho_multivariate(&carrier, &kernel, &basis).unwrap();
        assert_eq!(report.worst_direction, vec![1.0]);
        let direct = rho_univariate(&carrier, &kernel, &t).unwrap();
        assert!((report.rho - direct).abs() < 1e-12);
    }

    #[test]
    fn gaussian_spectrum_is_geometric() {
        let (carrier, kernel) = setup(1.0);
        let spectral = most_favorable(&carrier, &kernel, 4, None).unwrap();
        for j in 0..7 {
            let want = 0.5f64.powi(j as i32);
            assert!((spectral.eigenvalues[j] - want).abs() < 1e-3);
        }
        assert!(!spectral.degenerate_spectrum);
        let grid = &spectral.grid;
        let lead: Vec<f64> = carrier.values().iter().map(|g| g.sqrt()).collect();
        let zeta = &spectral.eigenfunctions[0];
        let cos = grid.inner(zeta, &lead) / (grid.inner(zeta, zeta) * grid.inner(&lead, &lead)).sqrt();
        assert!(cos > 1.0 - 1e-6);
        for a in 0..4 {
            for b in 0..4 {
                let tg: Vec<f64> = spectral.favorable_stats[a]
                    .iter()
                    .zip(carrier.values())
                    .map(|(t, g)| t * g)
                    .collect();
                let v = grid.inner(&tg, &spectral.favorable_stats[b]);
                assert!((v - f64::from(u8::from(a == b))).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_carrier_needs_floor() {
        let grid = make_grid(8.0, 256).unwrap();
        let values: Vec<f64> = grid
            .points()
            .iter()
            .map(|m| if m.abs() <= 2.0 { 1.0 } else { 0.0 })
            .collect();
        let carrier = DensityVector::normalized(grid.clone(), values).unwrap();
        let kernel = cyclic_kernel(&grid, 8).unwrap();
        assert!(matches!(
            operator_pg(&carrier, &kernel),
            Err(Error::DegenerateCarrier { .. })
        ));
        let spectral = most_favorable(&carrier, &kernel, 2, Some(DEFAULT_FLOOR)).unwrap();
        assert!((spectral.eigenvalues[0] - 1.0).abs() < 1e-4);
        assert_eq!(spectral.floor, Some(DEFAULT_FLOOR));
    }

    #[test]
    fn tilt_bound_for_fifth_hermite() {
        // At M = 8 the cyclic wrap leaves H5 with a 3e-5 component along T1.
        let (carrier, kernel) = setup_on(10.0, 1.0);
        let spectral = most_favorable(&carrier, &kernel, 2, None).unwrap();
        let tau = hermite_column(&spectral.grid, 5);
        let approx = approx_tilt(&spectral, &tau, 2).unwrap();
        assert!(approx.coefficients.iter().all(|c| c.abs() < 1e-6));
        assert!((approx.kl_bound - 0.0625).abs() < 1e-3);

        let t1 = spectral.favorable_stats[0].clone();
        let own = approx_tilt(&spectral, &t1, 2).unwrap();
        assert!((own.coefficients[0] - 1.0).abs() < 1e-9);
        assert!(own.residual_norm < 1e-6);
    }
}
