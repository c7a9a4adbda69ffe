use std::sync::Arc;

use nalgebra::DMatrix;

use super::basis::StatisticBasis;
use crate::numerics::{DensityVector, KernelMatrix};
use crate::{invalid, Error, Result};

/// Smallest marginal density we are willing to condition on.
const MIN_MARGINAL: f64 = 1e-300;

/// `psi(eta) = log sum_i w_i g0_i exp(eta . T_i)`, with the largest exponent
/// over the carrier's support factored out.
pub fn log_partition(carrier: &DensityVector, basis: &StatisticBasis, eta: &[f64]) -> Result<f64> {
    Ok(tilt(carrier, basis, eta)?.0)
}

/// The tilted density `g0 exp(eta . T - psi)`.
pub fn tilt_density(
    carrier: &DensityVector,
    basis: &StatisticBasis,
    eta: &[f64],
) -> Result<DensityVector> {
    Ok(tilt(carrier, basis, eta)?.1)
}

/// Noised marginal `f(x_i) = sum_j w_j K(mu_j, x_i) g(mu_j)`.
pub fn marginal(kernel: &KernelMatrix, g: &DensityVector) -> Result<DensityVector> {
    kernel.grid().check_same(g.grid())?;
    let f = kernel.convolve(g.values())?;
    let f = f.into_iter().map(|v| v.max(0.0)).collect();
    DensityVector::new(g.grid().clone(), f)
}

fn tilt(carrier: &DensityVector, basis: &StatisticBasis, eta: &[f64]) -> Result<(f64, DensityVector)> {
    carrier.grid().check_same(basis.grid())?;
    if eta.len() != basis.dim() {
        return Err(invalid(format!(
            "eta has {} entries for a {}-dimensional basis",
            eta.len(),
            basis.dim()
        )));
    }
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(invalid("eta has non-finite entries"));
    }
    if eta.iter().all(|&e| e == 0.0) {
        return Ok((0.0, carrier.clone()));
    }
    let g0 = carrier.values();
    let s = basis.linear_combination(eta);
    let peak = s
        .iter()
        .zip(g0)
        .filter(|(_, &c)| c > 0.0)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = s
        .iter()
        .zip(g0)
        .map(|(v, &c)| if c > 0.0 { c * (v - peak).exp() } else { 0.0 })
        .collect();
    let z = carrier.grid().quad(&unnorm)?;
    let psi = peak + z.ln();
    if !psi.is_finite() || !(z > 0.0) {
        return Err(Error::NumericOverflow(format!(
            "log-partition is not finite (peak exponent {peak}, normalizer {z})"
        )));
    }
    let values = unnorm.into_iter().map(|v| v / z).collect();
    Ok((psi, DensityVector::new(carrier.grid().clone(), values)?))
}

/// A member of the exponential family together with its marginal.
#[derive(Debug, Clone)]
pub struct ExpFamModel {
    carrier: DensityVector,
    basis: StatisticBasis,
    kernel: Arc<KernelMatrix>,
    eta: Vec<f64>,
    psi: f64,
    g_eta: DensityVector,
    f_eta: DensityVector,
    mean_stat: Vec<f64>,
}

impl ExpFamModel {
    pub fn new(
        carrier: DensityVector,
        basis: StatisticBasis,
        kernel: Arc<KernelMatrix>,
        eta: &[f64],
    ) -> Result<Self> {
        kernel.grid().check_same(carrier.grid())?;
        let (psi, g_eta) = tilt(&carrier, &basis, eta)?;
        let f_eta = marginal(&kernel, &g_eta)?;
        let mean_stat = basis.means(&g_eta);
        Ok(Self {
            carrier,
            basis,
            kernel,
            eta: eta.to_vec(),
            psi,
            g_eta,
            f_eta,
            mean_stat,
        })
    }

    /// The model at `eta = 0`.
    pub fn at_carrier(
        carrier: DensityVector,
        basis: StatisticBasis,
        kernel: Arc<KernelMatrix>,
    ) -> Result<Self> {
        let p = basis.dim();
        Self::new(carrier, basis, kernel, &vec![0.0; p])
    }

    /// Same carrier, basis and kernel at a different parameter.
    pub fn with_eta(&self, eta: &[f64]) -> Result<Self> {
        Self::new(
            self.carrier.clone(),
            self.basis.clone(),
            Arc::clone(&self.kernel),
            eta,
        )
    }

    pub fn carrier(&self) -> &DensityVector {
        &self.carrier
    }

    pub fn basis(&self) -> &StatisticBasis {
        &self.basis
    }

    pub fn kernel(&self) -> &Arc<KernelMatrix> {
        &self.kernel
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn g(&self) -> &DensityVector {
        &self.g_eta
    }

    pub fn f(&self) -> &DensityVector {
        &self.f_eta
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `E_eta[T(mu)]`.
    pub fn mean_stat(&self) -> &[f64] {
        &self.mean_stat
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if !self.g_eta.grid().contains(x) || !x.is_finite() {
            return Err(invalid(format!(
                "x = {x} lies outside [-{m}, {m}]",
                m = self.g_eta.grid().m_half()
            )));
        }
        Ok(())
    }

    /// Exact marginal density `f_eta(x)` at an arbitrary point.
    pub fn marginal_at(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let row = self.kernel.row(x);
        Ok(self.g_eta.grid().inner(&row, self.g_eta.values()))
    }

    pub fn log_marginal_at(&self, x: f64) -> Result<f64> {
        Ok(self.marginal_at(x)?.ln())
    }

    /// `E_eta[T(mu) | X = x]` by Bayes' rule on the grid.
    pub fn posterior_mean_stat(&self, x: f64) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        let grid = self.g_eta.grid();
        let post: Vec<f64> = self
            .kernel
            .row(x)
            .iter()
            .zip(self.g_eta.values())
            .map(|(k, g)| k * g)
            .collect();
        let fx = grid.inner(&post, &vec![1.0; post.len()]);
        if !(fx >= MIN_MARGINAL) {
            return Err(Error::DegenerateMarginal { x, density: fx });
        }
        Ok(self
            .basis
            .columns()
            .iter()
            .map(|t| {
                // A constant statistic is its own conditional expectation.
                let num = grid.inner(t, &post);
                if t.iter().all(|&v| v == t[0]) {
                    t[0]
                } else {
                    num / fx
                }
            })
            .collect())
    }

    /// `d/d eta log f_eta(x) = E[T | X = x] - E[T]`.
    pub fn score(&self, x: f64) -> Result<Vec<f64>> {
        let post = self.posterior_mean_stat(x)?;
        Ok(post
            .iter()
            .zip(&self.mean_stat)
            .map(|(a, b)| a - b)
            .collect())
    }

    /// Centred statistics `T_a - E[T_a]` on the grid.
    pub(crate) fn centred_stats(&self) -> Vec<Vec<f64>> {
        self.basis
            .columns()
            .iter()
            .zip(&self.mean_stat)
            .map(|(c, m)| c.iter().map(|v| v - m).collect())
            .collect()
    }

    /// `df_eta / d eta_a` on the grid: `K * (g (T_a - E T_a))`.
    pub fn marginal_derivatives(&self) -> Result<Vec<Vec<f64>>> {
        let g = self.g_eta.values();
        self.centred_stats()
            .iter()
            .map(|c| {
                let h: Vec<f64> = c.iter().zip(g).map(|(t, gi)| t * gi).collect();
                self.kernel.convolve(&h)
            })
            .collect()
    }

    /// Scores `E[T | x_i] - E[T]` at every grid point (zero where the marginal
    /// underflows).
    pub fn score_table(&self) -> Result<Vec<Vec<f64>>> {
        let f = self.f_eta.values();
        Ok(self
            .marginal_derivatives()?
            .into_iter()
            .map(|d| {
                d.iter()
                    .zip(f)
                    .map(|(di, &fi)| if fi >= MIN_MARGINAL { di / fi } else { 0.0 })
                    .collect()
            })
            .collect())
    }

    /// `I_mu(eta) = Var_eta[T(mu)]`.
    pub fn fisher_mu(&self) -> DMatrix<f64> {
        self.basis.covariance(&self.g_eta)
    }

    /// `I_X(eta) = Var_eta[E[T(mu) | X]]`, the variance over `x ~ f_eta` of the
    /// posterior mean of the statistic.
    pub fn fisher_x(&self) -> Result<DMatrix<f64>> {
        let scores = self.score_table()?;
        let grid = self.f_eta.grid();
        let f = self.f_eta.values();
        let p = self.dim();
        let means: Vec<f64> = scores.iter().map(|s| grid.inner(s, f)).collect();
        let mut info = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let v: f64 = grid
                    .weights()
                    .iter()
                    .zip(f)
                    .zip(scores[a].iter().zip(&scores[b]))
                    .map(|((w, fi), (sa, sb))| w * fi * (sa - means[a]) * (sb - means[b]))
                    .sum();
                info[(a, b)] = v;
                info[(b, a)] = v;
            }
        }
        Ok(info)
    }

    /// `E_f[s s^T]` with `s` the score: equals [`Self::fisher_x`] because the
    /// score has mean zero.
    pub fn fisher_x_outer(&self) -> Result<DMatrix<f64>> {
        let scores = self.score_table()?;
        let grid = self.f_eta.grid();
        let f = self.f_eta.values();
        let p = self.dim();
        Ok(DMatrix::from_fn(p, p, |a, b| {
            grid.weights()
                .iter()
                .zip(f)
                .zip(scores[a].iter().zip(&scores[b]))
                .map(|((w, fi), (sa, sb))| w * fi * sa * sb)
                .sum()
        }))
    }
}
