use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::StatisticBasis;
use super::model::ExpFamModel;
use crate::numerics::{DensityVector, Grid, Interp, KernelMatrix};
use crate::{invalid, Error, Result};

/// What to do with samples outside `[-M, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPolicy {
    /// Fail, listing the offending indices.
    #[default]
    Reject,
    /// Clamp to the nearest end of the domain.
    Clamp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged once `||gradient|| <= tolerance * n`.
    pub tolerance: f64,
    /// Ridge penalty `lambda ||eta||^2` subtracted from the log-likelihood.
    pub ridge: f64,
    pub domain: DomainPolicy,
    pub max_halvings: usize,
    pub initial_eta: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-8,
            ridge: 0.0,
            domain: DomainPolicy::Reject,
            max_halvings: 60,
            initial_eta: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: ExpFamModel,
    /// Sample log-likelihood `sum_i log f(X_i)` at the estimate (no penalty).
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Negative Hessian of the total log-likelihood at the estimate.
    pub observed_information: DMatrix<f64>,
    /// Per-observation expected information `I_X` at the estimate.
    pub expected_information: DMatrix<f64>,
    pub gradient_norm: f64,
    /// Penalized objective after each accepted step, starting from the initial
    /// point.
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    /// Standard errors `sqrt(diag(I_X^-1) / n)`.
    pub fn standard_errors(&self, n: usize) -> Option<Vec<f64>> {
        let inv = self.expected_information.clone().try_inverse()?;
        Some(
            (0..inv.nrows())
                .map(|a| (inv[(a, a)] / n as f64).max(0.0).sqrt())
                .collect(),
        )
    }
}

/// Starting point for a polynomial basis `mu, mu^2, ..., mu^p`: the normal
/// density whose convolution with `N(0, 1)` matches the sample mean and
/// variance. The deconvolved variance is floored at a tenth of `Var(X)`.
pub fn polynomial_start(samples: &[f64], p: usize) -> Vec<f64> {
    let mut eta = vec![0.0; p];
    if samples.len() < 2 || p < 2 {
        return eta;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var_x = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let var = (var_x - 1.0).max(0.1 * var_x);
    eta[0] = mean / var;
    eta[1] = -0.5 / var;
    eta
}

/// Sample log-likelihood with `f` linearly interpolated between grid points.
pub fn sample_log_likelihood(grid: &Grid, f: &DensityVector, samples: &[f64]) -> f64 {
    samples
        .iter()
        .map(|&x| grid.interpolate(f.values(), x).ln())
        .sum()
}

const DECREMENT_RESOLUTION: f64 = 1e-13;

struct Evaluation {
    model: ExpFamModel,
    loglik: f64,
    objective: f64,
    interp_f: Vec<f64>,
}

struct Fitter<'a> {
    carrier: &'a DensityVector,
    basis: &'a StatisticBasis,
    kernel: &'a Arc<KernelMatrix>,
    stencils: Vec<Interp>,
    ridge: f64,
}

impl Fitter<'_> {
    fn evaluate(&self, eta: &[f64]) -> Result<Evaluation> {
        let model = ExpFamModel::new(
            self.carrier.clone(),
            self.basis.clone(),
            Arc::clone(self.kernel),
            eta,
        )?;
        let f = model.f().values();
        let interp_f: Vec<f64> = self
            .stencils
            .iter()
            .map(|s| (1.0 - s.t) * f[s.lo] + s.t * f[s.hi])
            .collect();
        let loglik: f64 = interp_f.iter().map(|v| v.ln()).sum();
        let penalty: f64 = self.ridge * eta.iter().map(|e| e * e).sum::<f64>();
        Ok(Evaluation {
            model,
            loglik,
            objective: loglik - penalty,
            interp_f,
        })
    }

    /// Gradient and Hessian of the penalized objective.
    fn derivatives(&self, ev: &Evaluation) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let model = &ev.model;
        let p = model.dim();
        let n_grid = model.g().grid().len();
        let d1 = model.marginal_derivatives()?;

        // c_k = sum over samples touching grid point k of stencil weight / f~.
        let mut c = vec![0.0; n_grid];
        for (s, fx) in self.stencils.iter().zip(&ev.interp_f) {
            c[s.lo] += (1.0 - s.t) / fx;
            c[s.hi] += s.t / fx;
        }
        let dot = |v: &[f64]| -> f64 { c.iter().zip(v).map(|(a, b)| a * b).sum() };

        let eta = model.eta();
        let grad = DVector::from_fn(p, |a, _| dot(&d1[a]) - 2.0 * self.ridge * eta[a]);

        // Second derivative of f: K * (g (T_a - m_a)(T_b - m_b)) - Sigma_ab f.
        let centred = model.centred_stats();
        let g = model.g().values();
        let cov = model.fisher_mu();
        let n = self.stencils.len() as f64;
        let mut hess = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let h: Vec<f64> = (0..n_grid)
                    .map(|k| g[k] * centred[a][k] * centred[b][k])
                    .collect();
                let second = self.kernel.convolve(&h)?;
                let v = dot(&second) - cov[(a, b)] * n;
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        // Minus sum_i (df~_i)(df~_i)^T / f~_i^2.
        let mut grads_i = vec![0.0; p];
        for (s, fx) in self.stencils.iter().zip(&ev.interp_f) {
            for a in 0..p {
                grads_i[a] = ((1.0 - s.t) * d1[a][s.lo] + s.t * d1[a][s.hi]) / fx;
            }
            for a in 0..p {
                for b in a..p {
                    hess[(a, b)] -= grads_i[a] * grads_i[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
            hess[(a, a)] -= 2.0 * self.ridge;
        }
        Ok((grad, hess))
    }
}

/// Solves `A d = g` for symmetric positive definite `A` after Jacobi scaling.
fn spd_solve(a: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let p = a.nrows();
    if (0..p).any(|i| !(a[(i, i)] > 0.0)) {
        return None;
    }
    let s = DVector::from_fn(p, |i, _| 1.0 / a[(i, i)].sqrt());
    let scaled = DMatrix::from_fn(p, p, |i, j| a[(i, j)] * s[i] * s[j]);
    let chol = scaled.cholesky()?;
    let rhs = g.component_mul(&s);
    let y = chol.solve(&rhs);
    let d = y.component_mul(&s);
    d.iter().all(|v| v.is_finite()).then_some(d)
}

/// Maximum-likelihood estimate of `eta` from noisy samples.
///
/// Damped Newton ascent on the sample log-likelihood, where `f_eta(X_i)` is
/// linearly interpolated from the grid. The exact Hessian is used while it is
/// negative definite; otherwise the expected information `n I_X(eta)` is used,
/// and if that direction fails to ascend the step falls back to the gradient.
/// Every accepted step is non-decreasing in the objective. Iteration stops when
/// the gradient is small or the Newton decrement falls below floating-point
/// resolution of the objective.
pub fn fit_mle(
    carrier: &DensityVector,
    basis: &StatisticBasis,
    kernel: &Arc<KernelMatrix>,
    samples: &[f64],
    options: &FitOptions,
) -> Result<FitResult> {
    let grid = carrier.grid();
    grid.check_same(basis.grid())?;
    grid.check_same(kernel.grid())?;
    let p = basis.dim();
    if samples.len() < p {
        return Err(invalid(format!(
            "need at least {p} samples for a {p}-parameter model, got {}",
            samples.len()
        )));
    }
    if options.ridge < 0.0 {
        return Err(invalid("ridge penalty must be nonnegative"));
    }
    let outside: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, x)| !grid.contains(**x))
        .map(|(i, _)| i)
        .collect();
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(invalid("samples contain non-finite values"));
    }
    let m = grid.m_half();
    let clean: Vec<f64> = match options.domain {
        DomainPolicy::Reject if !outside.is_empty() => {
            let shown: Vec<String> = outside.iter().take(10).map(|i| i.to_string()).collect();
            return Err(invalid(format!(
                "{} samples outside [-{m}, {m}] (indices {}{})",
                outside.len(),
                shown.join(", "),
                if outside.len() > 10 { ", ..." } else { "" }
            )));
        }
        _ => samples.iter().map(|x| x.clamp(-m, m)).collect(),
    };

    let fitter = Fitter {
        carrier,
        basis,
        kernel,
        stencils: clean.iter().map(|&x| grid.interp(x)).collect(),
        ridge: options.ridge,
    };
    let n = clean.len() as f64;
    let eta0 = options.initial_eta.clone().unwrap_or_else(|| vec![0.0; p]);
    if eta0.len() != p {
        return Err(invalid("initial eta has the wrong dimension"));
    }

    let mut current = fitter.evaluate(&eta0)?;
    let mut trace = vec![current.objective];
    let mut iterations = 0;
    let mut converged = false;
    let (mut grad, mut hess) = fitter.derivatives(&current)?;

    while iterations < options.max_iterations {
        if grad.norm() <= options.tolerance * n {
            converged = true;
            break;
        }
        iterations += 1;

        let newton = spd_solve(&(-&hess), &grad).filter(|d| d.dot(&grad) > 0.0);
        let direction = match newton {
            Some(d) => {
                // The predicted gain is below the resolution of the objective.
                if 0.5 * d.dot(&grad) <= DECREMENT_RESOLUTION * (1.0 + current.objective.abs()) {
                    converged = true;
                    break;
                }
                d
            }
            None => {
                let expected = current.model.fisher_x()? * n
                    + DMatrix::identity(p, p) * (2.0 * options.ridge);
                match spd_solve(&expected, &grad).filter(|d| d.dot(&grad) > 0.0) {
                    Some(d) => d,
                    None => {
                        let scale = (0..p).map(|a| hess[(a, a)].abs()).fold(1.0, f64::max);
                        &grad / scale
                    }
                }
            }
        };

        let eta = DVector::from_column_slice(current.model.eta());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let trial = &eta + &direction * step;
            match fitter.evaluate(trial.as_slice()) {
                Ok(ev) if ev.objective.is_finite() && ev.objective >= current.objective => {
                    accepted = Some(ev);
                    break;
                }
                Ok(_) | Err(Error::NumericOverflow(_)) | Err(Error::InvalidArgument(_)) => {
                    step *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some(ev) => {
                let gain = ev.objective - current.objective;
                current = ev;
                trace.push(current.objective);
                let derivs = fitter.derivatives(&current)?;
                grad = derivs.0;
                hess = derivs.1;
                // A step that no longer changes the objective at all means we
                // are at the floating-point optimum.
                if gain == 0.0 && step < 1.0 {
                    converged = grad.norm() <= options.tolerance * n;
                    break;
                }
            }
            None => break,
        }
    }
    if !converged && grad.norm() <= options.tolerance * n {
        converged = true;
    }

    let expected_information = current.model.fisher_x()?;
    Ok(FitResult {
        log_likelihood: current.loglik,
        iterations,
        converged,
        observed_information: -hess,
        expected_information,
        gradient_norm: grad.norm(),
        objective_trace: trace,
        model: current.model,
    })
}
