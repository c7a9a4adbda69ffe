use serde::{Deserialize, Serialize};

use crate::numerics::{wrapped_gaussian, DensityVector, Grid, DEFAULT_WRAP_TERMS};
use crate::{invalid, Result};

/// Named densities used in the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CarrierSpec {
    /// Wrapped `N(0, sigma^2)`.
    Gaussian { sigma: f64 },
    /// Variant 1: `(1/2) 1(1 <= |mu| <= 2)`; variant 2: `(1/6) 1(3 <= |mu| <= 6)`.
    TwoTowers { variant: u8 },
    /// Half `N(0, 2)`, half a point mass at `location` (one grid cell).
    GaussSpike { location: f64 },
    /// `0.95 (1/4)(2 - |mu|)_+ + 0.05 (1/20) 1(|mu| <= 10)`.
    GeneMixture,
    /// Proportional to `exp(-mu^2 / (mu^2 + 4))` on `(-2, 2)`.
    Bump,
    /// Arbitrary nonnegative values on the grid, normalized.
    Custom { values: Vec<f64> },
}

impl CarrierSpec {
    /// Half-width of the support, if bounded.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Self::TwoTowers { variant: 1 } => Some(2.0),
            Self::TwoTowers { .. } => Some(6.0),
            Self::GeneMixture => Some(10.0),
            Self::Bump => Some(2.0),
            Self::GaussSpike { location } => Some(location.abs()),
            Self::Gaussian { .. } | Self::Custom { .. } => None,
        }
    }
}

/// Fraction of cell `i` covered by `[a, b]`.
fn covered(grid: &Grid, i: usize, a: f64, b: f64) -> f64 {
    let left = grid.cell_left(i);
    let right = left + grid.spacing();
    (right.min(b) - left.max(a)).max(0.0) / grid.spacing()
}

/// Cell averages of `height * 1(a <= |mu| <= b)`.
fn symmetric_band(grid: &Grid, a: f64, b: f64, height: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| height * (covered(grid, i, a, b) + covered(grid, i, -b, -a)))
        .collect()
}

pub fn carrier_library(spec: &CarrierSpec, grid: &Grid) -> Result<DensityVector> {
    if let Some(r) = spec.support_radius() {
        if r > grid.m_half() {
            return Err(invalid(format!(
                "support radius {r} exceeds the grid half-width {}",
                grid.m_half()
            )));
        }
    }
    let values = match spec {
        CarrierSpec::Gaussian { sigma } => return wrapped_gaussian(grid, *sigma, DEFAULT_WRAP_TERMS),
        CarrierSpec::TwoTowers { variant: 1 } => symmetric_band(grid, 1.0, 2.0, 0.5),
        CarrierSpec::TwoTowers { variant: 2 } => symmetric_band(grid, 3.0, 6.0, 1.0 / 6.0),
        CarrierSpec::TwoTowers { variant } => {
            return Err(invalid(format!("two-towers variant must be 1 or 2, got {variant}")))
        }
        CarrierSpec::GaussSpike { location } => {
            let gauss = wrapped_gaussian(grid, 2f64.sqrt(), DEFAULT_WRAP_TERMS)?;
            let mut v: Vec<f64> = gauss.values().iter().map(|g| 0.5 * g).collect();
            v[grid.cell_of(*location)] += 0.5 / grid.spacing();
            v
        }
        CarrierSpec::GeneMixture => {
            let h = grid.spacing();
            let wide = symmetric_band(grid, 0.0, 10.0, 0.05 / 20.0);
            // Exact cell averages of the triangle (2 - |mu|)_+ / 4.
            let antideriv = |m: f64| {
                let c = m.clamp(-2.0, 2.0);
                0.25 * (2.0 * c - c * c.abs() / 2.0)
            };
            grid.points()
                .iter()
                .zip(wide)
                .map(|(&m, w)| 0.95 * (antideriv(m + h / 2.0) - antideriv(m - h / 2.0)) / h + w)
                .collect()
        }
        CarrierSpec::Bump => grid
            .points()
            .iter()
            .map(|&m| {
                if m.abs() < 2.0 {
                    (-m * m / (m * m + 4.0)).exp()
                } else {
                    0.0
                }
            })
            .collect(),
        CarrierSpec::Custom { values } => values.clone(),
    };
    DensityVector::normalized(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::make_grid;

    #[test]
    fn gene_mixture_mass_near_zero() {
        let grid = make_grid(16.0, 1024).unwrap();
        let g = carrier_library(&CarrierSpec::GeneMixture, &grid).unwrap();
        assert!((g.mass_between(-2.0, 2.0).unwrap() - 0.96).abs() < 1e-3);
        let narrow = make_grid(8.0, 256).unwrap();
        assert!(carrier_library(&CarrierSpec::GeneMixture, &narrow).is_err());
    }

    #[test]
    fn towers_have_the_stated_support() {
        let grid = make_grid(8.0, 512).unwrap();
        let g = carrier_library(&CarrierSpec::TwoTowers { variant: 2 }, &grid).unwrap();
        for (m, v) in grid.points().iter().zip(g.values()) {
            let inside = (3.0..=6.0).contains(&m.abs());
            assert_eq!(*v > 0.0, inside, "mu = {m}");
        }
        let v1 = carrier_library(&CarrierSpec::TwoTowers { variant: 1 }, &grid).unwrap();
        assert!((v1.values()[grid.cell_of(1.5)] - 0.5).abs() < 1e-12);
        assert!(carrier_library(&CarrierSpec::TwoTowers { variant: 3 }, &grid).is_err());
    }

    #[test]
    fn bump_is_symmetric_and_compact() {
        let grid = make_grid(4.0, 200).unwrap();
        let g = carrier_library(&CarrierSpec::Bump, &grid).unwrap();
        let v = g.values();
        for i in 0..v.len() {
            assert_eq!(v[i], v[v.len() - 1 - i]);
            if grid.points()[i].abs() >= 2.0 {
                assert_eq!(v[i], 0.0);
            }
        }
    }

    #[test]
    fn spike_carries_half_the_mass() {
        let grid = make_grid(8.0, 256).unwrap();
        let g = carrier_library(&CarrierSpec::GaussSpike { location: 2.0 }, &grid).unwrap();
        let cell = grid.cell_of(2.0);
        let spike = g.values()[cell] * grid.spacing();
        assert!(spike > 0.5 && spike < 0.51);
    }
}
