//! Normalized Hermite polynomials
//! `H_j(x) = (j!)^{-1/2} exp(x^2/2) (d/dx)^j exp(-x^2/2)`.
//!
//! This convention carries a factor `(-1)^j` relative to the probabilists'
//! polynomials `He_j`, so `H_1(x) = -x`. Spans, squared coefficients and
//! efficiencies are unaffected by the sign.

use crate::{invalid, Result};

/// `H_j(x)` for `j >= 0`.
pub fn hermite(j: i32, x: f64) -> Result<f64> {
    if j < 0 {
        return Err(invalid(format!("Hermite degree must be nonnegative, got {j}")));
    }
    Ok(*hermite_all(j as usize, x).last().expect("non-empty"))
}

/// `[H_0(x), ..., H_{j_max}(x)]`.
pub fn hermite_all(j_max: usize, x: f64) -> Vec<f64> {
    let mut out = hermite_probabilists(j_max, x);
    for (j, v) in out.iter_mut().enumerate() {
        if j % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// Orthonormal probabilists' polynomials `He_j(x) / sqrt(j!)`, via
/// `h_{j+1} = (x h_j - sqrt(j) h_{j-1}) / sqrt(j+1)`.
pub fn hermite_probabilists(j_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(1.0);
    if j_max == 0 {
        return out;
    }
    out.push(x);
    for j in 1..j_max {
        let next = (x * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
        out.push(next);
    }
    out
}
