//! Gaussian sequence reduction and minimax risk constants.
//!
//! Local tilts `tau = sum gamma_j H_j(mu / sigma)` of a Gaussian carrier of
//! scale `sigma` are observed through the noise as independent coordinates
//! `Z_j ~ N(gamma_j, r^{2j})` with `r^2 = (1 + sigma^2) / sigma^2`. Over the
//! ellipsoid `sum kappa^{2j} gamma_j^2 <= C^2` the truncation estimator that
//! keeps the first `p` coordinates is within a constant factor `beta / alpha`
//! of the minimax risk.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::efficiency::SpectralResult;
use crate::numerics::{hermite_all, KernelMatrix};
use crate::{invalid, par, Error, Result};

const MIN_RHO: f64 = 1e-12;

/// Ellipsoid of tilts `{sum_j kappa^{2j} <tau, H_j>^2 <= C^2}` around a
/// Gaussian carrier of scale `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    pub sigma: f64,
    pub kappa: f64,
    pub c: f64,
}

impl EllipsoidSpec {
    pub fn new(sigma: f64, kappa: f64, c: f64) -> Result<Self> {
        let spec = Self { sigma, kappa, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_sigma_kappa(self.sigma, self.kappa)?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("C must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

fn check_sigma_kappa(sigma: f64, kappa: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(invalid(format!("kappa must exceed 1, got {kappa}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxReport {
    pub spec: EllipsoidSpec,
    pub r_sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Power of `C` shared by both bounds.
    pub exponent: f64,
    pub p_star: usize,
    pub mu_c: f64,
    pub j_c: usize,
    /// Pinsker linear minimax risk.
    pub linear_risk: f64,
    /// Worst-case risk of truncation at `p_star`.
    pub poly_risk_bound: f64,
    /// `alpha C^exponent`.
    pub minimax_lower_bound: f64,
    /// `beta C^exponent`.
    pub poly_upper_bound: f64,
    pub ratio_bound: f64,
    /// Default number of coefficients to keep, `p_star + 4`.
    pub j_max: usize,
    /// Set when `C < 10 sigma`, outside the large-signal regime the bounds
    /// describe.
    pub small_signal_warning: bool,
}

/// `Z_j` for `j = 1..=j_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
    pub j_max: usize,
    pub n: usize,
}

/// `r_sigma = sqrt((1 + sigma^2) / sigma^2)`.
pub fn r_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(((1.0 + sigma * sigma) / (sigma * sigma)).sqrt())
}

/// `r_sigma^2 = (1 + sigma^2) / sigma^2`, without the rounding of squaring a
/// square root.
pub fn r_sigma_sq(sigma: f64) -> Result<f64> {
    r_sigma(sigma)?;
    Ok((1.0 + sigma * sigma) / (sigma * sigma))
}

/// `2 log r / (log r + log kappa)`.
pub fn rate_exponent(sigma: f64, kappa: f64) -> Result<f64> {
    check_sigma_kappa(sigma, kappa)?;
    let lr = r_sigma(sigma)?.ln();
    Ok(2.0 * lr / (lr + kappa.ln()))
}

/// Constant of the minimax lower bound `alpha C^exponent`.
pub fn alpha(sigma: f64, kappa: f64) -> Result<f64> {
    let e = rate_exponent(sigma, kappa)?;
    let r2 = r_sigma_sq(sigma)?;
    let lead = 0.8 * r2 * (kappa - 1.0) / ((r2 - 1.0) * (r2 * kappa - 1.0));
    let inner = (r2 * kappa - 1.0) * (r2 * kappa * kappa - 1.0) / (r2 * kappa * (kappa - 1.0));
    Ok(lead * inner.powf(e))
}

/// Constant of the truncation-estimator upper bound `beta C^exponent`.
pub fn beta(sigma: f64, kappa: f64) -> Result<f64> {
    check_sigma_kappa(sigma, kappa)?;
    let r2 = r_sigma_sq(sigma)?;
    let e = 2.0 * kappa.ln() / (0.5 * r2.ln() + kappa.ln());
    Ok((1.0 + r2) * sigma.powf(e))
}

/// Truncation level `max(2, ceil(log(C / sigma) / log(r kappa)) - 1)`.
pub fn choose_p(sigma: f64, kappa: f64, c: f64) -> Result<usize> {
    EllipsoidSpec::new(sigma, kappa, c)?;
    let r = r_sigma(sigma)?;
    let raw = ((c / sigma).ln() / (r * kappa).ln()).ceil() - 1.0;
    Ok(if raw > 2.0 { raw as usize } else { 2 })
}

fn pinsker_lhs(r2: f64, kappa: f64, mu: f64) -> f64 {
    let mut total = 0.0;
    let mut j = 1;
    loop {
        let kj = kappa.powi(j);
        if kj >= mu {
            return total;
        }
        total += r2.powi(j) * kj * (mu - kj);
        j += 1;
    }
}

/// Solves `sum_j r^{2j} kappa^j (mu - kappa^j)_+ = C^2` and returns
/// `(mu_C, J_C)` with `J_C = floor(log mu_C / log kappa)`.
pub fn solve_mu_c(sigma: f64, kappa: f64, c: f64) -> Result<(f64, usize)> {
    EllipsoidSpec::new(sigma, kappa, c)?;
    let r2 = r_sigma_sq(sigma)?;
    let target = c * c;
    let mut lo = kappa;
    let mut hi = 2.0 * kappa;
    while pinsker_lhs(r2, kappa, hi) < target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NumericOverflow("mu_C bracket diverged".into()));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if pinsker_lhs(r2, kappa, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut mu = 0.5 * (lo + hi);

    // The left side is linear between powers of kappa; solve that piece exactly.
    let j_c = active_count(kappa, mu);
    let (mut a, mut b) = (0.0, 0.0);
    for j in 1..=j_c as i32 {
        let w = r2.powi(j) * kappa.powi(j);
        a += w;
        b += w * kappa.powi(j);
    }
    if a > 0.0 {
        let exact = (target + b) / a;
        if active_count(kappa, exact) == j_c {
            mu = exact;
        }
    }
    Ok((mu, active_count(kappa, mu)))
}

fn active_count(kappa: f64, mu: f64) -> usize {
    let mut j = 0;
    while kappa.powi(j as i32 + 1) < mu {
        j += 1;
    }
    j
}

/// Pinsker linear minimax risk `sum_j r^{2j} (1 - kappa^j / mu_C)_+`.
pub fn pinsker_linear_risk(sigma: f64, kappa: f64, c: f64) -> Result<f64> {
    let (mu, j_c) = solve_mu_c(sigma, kappa, c)?;
    let r2 = r_sigma_sq(sigma)?;
    Ok((1..=j_c as i32)
        .map(|j| r2.powi(j) * (1.0 - kappa.powi(j) / mu))
        .sum())
}

/// Worst-case risk of keeping the first `p` coordinates:
/// `sum_{j <= p} r^{2j} + C^2 kappa^{-2(p+1)}`.
pub fn truncation_risk(spec: &EllipsoidSpec, p: usize) -> Result<f64> {
    spec.validate()?;
    let r2 = r_sigma_sq(spec.sigma)?;
    let variance: f64 = (1..=p as i32).map(|j| r2.powi(j)).sum();
    Ok(variance + spec.c * spec.c * spec.kappa.powi(-2 * (p as i32 + 1)))
}

/// Monte Carlo risk of the truncation estimator in the sequence model, with
/// all signal on coordinate `p + 1`. Replicate `i` uses seed `seed + i`.
pub fn simulate_truncation_risk(
    spec: &EllipsoidSpec,
    p: usize,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    if replicates == 0 {
        return Err(invalid("need at least one replicate"));
    }
    let r = r_sigma(spec.sigma)?;
    let gamma_tail = spec.c * spec.kappa.powi(-(p as i32 + 1));
    let losses = par::map_indexed(replicates, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut loss = 0.0;
        for j in 1..=p as i32 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let err = r.powi(j) * z;
            loss += err * err;
        }
        loss + gamma_tail * gamma_tail
    });
    Ok(losses.iter().sum::<f64>() / replicates as f64)
}

/// `Z_j = n^{-1/2} r^j sum_i H_j(X_i / sqrt(1 + sigma^2))`.
pub fn empirical_coefficients(samples: &[f64], sigma: f64, j_max: usize) -> Result<CoefficientVector> {
    if samples.is_empty() || j_max == 0 {
        return Err(invalid("need at least one sample and one coefficient"));
    }
    let r = r_sigma(sigma)?;
    let scale = (1.0 + sigma * sigma).sqrt();
    let mut sums = vec![0.0; j_max];
    for &x in samples {
        let h = hermite_all(j_max, x / scale);
        for (s, v) in sums.iter_mut().zip(&h[1..]) {
            *s += v;
        }
    }
    let root_n = (samples.len() as f64).sqrt();
    let values = sums
        .iter()
        .enumerate()
        .map(|(k, s)| r.powi(k as i32 + 1) * s / root_n)
        .collect();
    finish(values, j_max, samples.len())
}

fn finish(values: Vec<f64>, j_max: usize, n: usize) -> Result<CoefficientVector> {
    if values.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::NumericOverflow("non-finite coefficient".into()));
    }
    Ok(CoefficientVector { values, j_max, n })
}

/// `U_j = K(T_j g0) / f0` on the grid for `j = 1..=j_max`.
pub fn favorable_scores(
    spectral: &SpectralResult,
    kernel: &KernelMatrix,
    j_max: usize,
) -> Result<Vec<Vec<f64>>> {
    spectral.grid.check_same(kernel.grid())?;
    if j_max + 1 >= spectral.eigenvalues.len() {
        return Err(invalid(format!("j_max = {j_max} exceeds the available spectrum")));
    }
    let g = spectral.carrier.values();
    let f0 = kernel.convolve(g)?;
    (1..=j_max)
        .map(|j| {
            let tg: Vec<f64> = spectral.statistic(j).iter().zip(g).map(|(t, gi)| t * gi).collect();
            let num = kernel.convolve(&tg)?;
            Ok(num.iter().zip(&f0).map(|(a, b)| a / b).collect())
        })
        .collect()
}

/// `Z_j = n^{-1/2} rho_j^{-1} sum_i U_j(X_i)` with `rho_j = lambda_{j+1}`.
pub fn general_coefficients(
    samples: &[f64],
    spectral: &SpectralResult,
    kernel: &KernelMatrix,
    j_max: usize,
) -> Result<CoefficientVector> {
    if samples.is_empty() || j_max == 0 {
        return Err(invalid("need at least one sample and one coefficient"));
    }
    for j in 1..=j_max.min(spectral.eigenvalues.len() - 1) {
        let rho = spectral.eigenvalues[j];
        if !(rho > MIN_RHO) {
            return Err(Error::DegenerateDirection { index: j, rho });
        }
    }
    let scores = favorable_scores(spectral, kernel, j_max)?;
    let grid = &spectral.grid;
    let root_n = (samples.len() as f64).sqrt();
    let values = scores
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let total: f64 = samples.iter().map(|&x| grid.interpolate_cubic(u, x)).sum();
            total / (root_n * spectral.eigenvalues[k + 1])
        })
        .collect();
    finish(values, j_max, samples.len())
}

/// Every constant of the minimax comparison for one ellipsoid.
pub fn minimax_report(spec: &EllipsoidSpec) -> Result<MinimaxReport> {
    spec.validate()?;
    let EllipsoidSpec { sigma, kappa, c } = *spec;
    let alpha = alpha(sigma, kappa)?;
    let beta = beta(sigma, kappa)?;
    let exponent = rate_exponent(sigma, kappa)?;
    let p_star = choose_p(sigma, kappa, c)?;
    let (mu_c, j_c) = solve_mu_c(sigma, kappa, c)?;
    let scale = c.powf(exponent);
    Ok(MinimaxReport {
        spec: *spec,
        r_sigma: r_sigma(sigma)?,
        alpha,
        beta,
        exponent,
        p_star,
        mu_c,
        j_c,
        linear_risk: pinsker_linear_risk(sigma, kappa, c)?,
        poly_risk_bound: truncation_risk(spec, p_star)?,
        minimax_lower_bound: alpha * scale,
        poly_upper_bound: beta * scale,
        ratio_bound: beta / alpha,
        j_max: p_star + 4,
        small_signal_warning: c < 10.0 * sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_at_unit_sigma() {
        assert!((r_sigma(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!((r_sigma(0.5).unwrap() - 5f64.sqrt()).abs() < 1e-14);
        assert!((r_sigma(100.0).unwrap() - 1.00005).abs() < 1e-5);
        assert!(r_sigma(0.0).is_err());
        let a = alpha(1.0, 2.0).unwrap();
        assert!((a - 0.8 * (2.0 / 3.0) * 5.25f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((a - 1.611).abs() < 1e-3);
        assert_eq!(beta(1.0, 2.0).unwrap(), 3.0);
        assert!(alpha(1.0, 1.0).is_err());
        assert!(beta(1.0, 0.5).is_err());
    }

    #[test]
    fn truncation_level() {
        assert_eq!(choose_p(1.0, 2.0, 100.0).unwrap(), 4);
        assert_eq!(choose_p(1.0, 2.0, 1.0).unwrap(), 2);
    }

    #[test]
    fn pinsker_two_coordinate_case() {
        let (mu, j) = solve_mu_c(1.0, 2.0, 2.0).unwrap();
        assert!((mu - 3.0).abs() < 1e-12);
        assert_eq!(j, 1);
        let risk = pinsker_linear_risk(1.0, 2.0, 2.0).unwrap();
        assert!((risk - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn single_sample_coefficient() {
        let z = empirical_coefficients(&[0.0], 1.0, 2).unwrap();
        assert!((z.values[1] + 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(z.values[0], 0.0);
    }

    #[test]
    fn report_composes() {
        let report = minimax_report(&EllipsoidSpec::new(1.0, 2.0, 100.0).unwrap()).unwrap();
        assert_eq!(report.p_star, 4);
        assert_eq!(report.beta, 3.0);
        assert!((report.ratio_bound - 3.0 / report.alpha).abs() < 1e-14);
        assert!(report.ratio_bound < 1.9);
        assert!(!report.small_signal_warning);
        assert_eq!(report.j_max, 8);
    }
}
