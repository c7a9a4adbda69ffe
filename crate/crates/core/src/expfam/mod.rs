//! Exponential-family tilts of a carrier density and their noised marginals.
//!
//! A model is `g_eta(mu) = g0(mu) exp(eta . T(mu) - psi(eta))` for a statistic
//! basis `T`, observed through the cyclic Gaussian kernel as
//! `f_eta = K * g_eta`. Scores and informations are computed by quadrature on
//! the grid; [`fit_mle`] maximizes the sample log-likelihood.

mod basis;
mod fit;
mod model;

pub use basis::StatisticBasis;
pub use fit::{fit_mle, polynomial_start, sample_log_likelihood, DomainPolicy, FitOptions, FitResult};
pub use model::{log_partition, marginal, tilt_density, ExpFamModel};
