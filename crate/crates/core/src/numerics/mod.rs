//! Discretization primitives shared by every other module.
//!
//! All functions of `mu` or `x` live as vectors on a uniform midpoint [`Grid`]
//! over `[-M, M]`. Integrals are midpoint-rule sums, which are spectrally
//! accurate for the smooth periodic integrands produced by cyclic convolution.

mod grid;
mod hermite;
mod kernel;
mod linalg;

pub use grid::{make_grid, quad, DensityVector, Grid, Interp};
pub use hermite::{hermite, hermite_all, hermite_probabilists};
pub use kernel::{
    cyclic_kernel, normal_pdf, wrapped_gaussian, wrapped_normal, wrapped_normal_pdf, KernelMatrix,
};
pub use linalg::{sym_eigen, symmetrize, SymEigen};

/// Default number of wrap-around terms on each side in the periodic sums.
pub const DEFAULT_WRAP_TERMS: usize = 8;

/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1024;

/// Default half-width for a carrier of scale `sigma`: `8 max(sigma, 1)`.
pub fn default_half_width(sigma: f64) -> f64 {
    8.0 * sigma.max(1.0)
}
