//! Density deconvolution under Gaussian measurement error.
//!
//! Observations follow the hierarchical model `mu ~ g`, `X = mu + eps`,
//! `eps ~ N(0, 1)`, on the cyclic domain `[-M, M]`. The crate provides:
//!
//! - [`numerics`]: midpoint grids, wrapped Gaussians, the cyclic convolution
//!   kernel, normalized Hermite polynomials and a symmetric eigensolver.
//! - [`expfam`]: exponential-family tilts `g_eta = g0 exp(eta . T - psi)`, their
//!   noised marginals, scores, Fisher informations and a maximum-likelihood
//!   fitter for the log-polynomial (g-modeling) estimator.
//! - [`efficiency`]: the relative-efficiency coefficient of a statistic, the
//!   operator `P_g` whose eigenfunctions give the most favorable families, and
//!   the approximation bound in terms of its spectrum.
//! - [`minimax`]: Gaussian sequence model constants, the Pinsker linear risk and
//!   empirical Hermite coefficients.
//! - [`sim`]: carriers, data generators, losses, a Fourier kernel-deconvolution
//!   baseline, the replicate runner and the crime-rate pipeline.
//!
//! Inner loops that are embarrassingly parallel (kernel assembly, operator
//! assembly, Monte Carlo replicates) run on rayon when the `parallel` feature
//! is enabled and sequentially otherwise. Results are identical either way.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod efficiency;
pub mod expfam;
pub mod minimax;
pub mod numerics;
pub mod par;
pub mod sim;

use thiserror::Error;

pub use efficiency::{
    approx_tilt, most_favorable, operator_pg, rho_multivariate, rho_univariate, EfficiencyReport,
    SpectralResult, TiltApproximation,
};
pub use expfam::{
    fit_mle, log_partition, marginal, tilt_density, DomainPolicy, ExpFamModel, FitOptions,
    FitResult, StatisticBasis,
};
pub use minimax::{CoefficientVector, EllipsoidSpec, MinimaxReport};
pub use numerics::{
    cyclic_kernel, hermite, make_grid, quad, sym_eigen, wrapped_gaussian, DensityVector, Grid,
    KernelMatrix, SymEigen,
};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("marginal density {density:e} at x = {x} is too small to condition on")]
    DegenerateMarginal { x: f64, density: f64 },

    #[error("statistic has variance {0:e} under the carrier")]
    DegenerateStatistic(f64),

    #[error("statistic basis is rank deficient: {0}")]
    DegenerateBasis(String),

    #[error("carrier is not bounded away from zero (min/max = {min_ratio:e}); floor it first")]
    DegenerateCarrier { min_ratio: f64 },

    #[error("favorable direction {index} has vanishing efficiency {rho:e}")]
    DegenerateDirection { index: usize, rho: f64 },

    #[error("bandwidth {bandwidth} amplifies noise by {amplification:e}")]
    UnstableBandwidth { bandwidth: f64, amplification: f64 },

    #[error("{failed} of {total} replicates failed")]
    ReplicateFailures { failed: usize, total: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
