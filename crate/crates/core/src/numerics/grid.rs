use serde::{Deserialize, Serialize};

use crate::{invalid, Result};

/// Fewest points a grid may have.
pub const MIN_POINTS: usize = 4;

/// Uniform midpoint discretization of `[-M, M]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    m_half: f64,
    n_points: usize,
    spacing: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Linear interpolation stencil on the periodic grid: value at `x` is
/// `(1 - t) v[lo] + t v[hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interp {
    pub lo: usize,
    pub hi: usize,
    pub t: f64,
}

pub fn make_grid(m_half: f64, n_points: usize) -> Result<Grid> {
    Grid::new(m_half, n_points)
}

impl Grid {
    pub fn new(m_half: f64, n_points: usize) -> Result<Self> {
        if !(m_half.is_finite() && m_half > 0.0) {
            return Err(invalid(format!("half-width must be positive, got {m_half}")));
        }
        if n_points < MIN_POINTS {
            return Err(invalid(format!(
                "grid needs at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        let spacing = 2.0 * m_half / n_points as f64;
        let centre = n_points as f64 / 2.0;
        // (i + 1/2 - n/2) is exact, so the points are exactly symmetric about 0.
        let points = (0..n_points)
            .map(|i| (i as f64 + 0.5 - centre) * spacing)
            .collect();
        Ok(Self {
            m_half,
            n_points,
            spacing,
            points,
            weights: vec![spacing; n_points],
        })
    }

    pub fn m_half(&self) -> f64 {
        self.m_half
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Period of the cyclic domain, `2M`.
    pub fn period(&self) -> f64 {
        2.0 * self.m_half
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= -self.m_half && x <= self.m_half
    }

    /// Maps `x` onto `[-M, M)` by periodic wrap-around.
    pub fn wrap(&self, x: f64) -> f64 {
        let p = self.period();
        let y = (x + self.m_half).rem_euclid(p) - self.m_half;
        if y >= self.m_half {
            -self.m_half
        } else {
            y
        }
    }

    /// Index of the cell containing `x` (after wrapping).
    pub fn cell_of(&self, x: f64) -> usize {
        let u = (self.wrap(x) + self.m_half) / self.spacing;
        (u.floor() as usize).min(self.n_points - 1)
    }

    /// Left edge of cell `i`.
    pub fn cell_left(&self, i: usize) -> f64 {
        self.points[i] - 0.5 * self.spacing
    }

    /// Periodic linear-interpolation stencil between neighbouring midpoints.
    pub fn interp(&self, x: f64) -> Interp {
        let n = self.n_points as f64;
        let u = (self.wrap(x) + self.m_half) / self.spacing - 0.5;
        let k = u.floor();
        let t = u - k;
        let lo = (k.rem_euclid(n)) as usize % self.n_points;
        let hi = (lo + 1) % self.n_points;
        Interp { lo, hi, t }
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = self.interp(x);
        (1.0 - s.t) * values[s.lo] + s.t * values[s.hi]
    }

    /// Periodic cubic (Catmull-Rom) interpolation.
    pub fn interpolate_cubic(&self, values: &[f64], x: f64) -> f64 {
        let s = self.interp(x);
        let n = self.n_points;
        let p0 = values[(s.lo + n - 1) % n];
        let p1 = values[s.lo];
        let p2 = values[s.hi];
        let p3 = values[(s.hi + 1) % n];
        let t = s.t;
        let t2 = t * t;
        let t3 = t2 * t;
        0.5 * (2.0 * p1
            + (-p0 + p2) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3)
    }

    /// Midpoint-rule integral.
    pub fn quad(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        Ok(self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Integral over `[a, b]` treating `values` as piecewise constant on cells;
    /// partially covered cells contribute their covered fraction.
    pub fn quad_interval(&self, values: &[f64], a: f64, b: f64) -> Result<f64> {
        self.check_len(values.len())?;
        if !(a <= b) {
            return Err(invalid(format!("empty interval [{a}, {b}]")));
        }
        let h = self.spacing;
        let mut total = 0.0;
        for (i, v) in values.iter().enumerate() {
            let left = self.cell_left(i);
            let right = left + h;
            let overlap = (right.min(b) - left.max(a)).max(0.0);
            if overlap > 0.0 {
                total += v * overlap;
            }
        }
        Ok(total)
    }

    /// Weighted inner product `sum w a b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_points {
            return Err(invalid(format!(
                "vector of length {len} does not match grid of {} points",
                self.n_points
            )));
        }
        Ok(())
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n_points != other.n_points || self.m_half != other.m_half {
            return Err(invalid(format!(
                "grid mismatch: (M={}, n={}) vs (M={}, n={})",
                self.m_half, self.n_points, other.m_half, other.n_points
            )));
        }
        Ok(())
    }
}

pub fn quad(grid: &Grid, values: &[f64]) -> Result<f64> {
    grid.quad(values)
}

/// Nonnegative grid function integrating to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityVector {
    grid: Grid,
    values: Vec<f64>,
}

/// Tolerance on the unit integral of a density.
pub const MASS_TOLERANCE: f64 = 1e-8;

impl DensityVector {
    /// Wraps already-normalized values, checking the invariants.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::check_values(&grid, &values)?;
        let mass = grid.quad(&values)?;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(format!("density integrates to {mass}, not 1")));
        }
        Ok(Self { grid, values })
    }

    /// Divides nonnegative values by their integral.
    pub fn normalized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        Self::check_values(&grid, &values)?;
        let mass = grid.quad(&values)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("cannot normalize: total mass {mass}")));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { grid, values })
    }

    fn check_values(grid: &Grid, values: &[f64]) -> Result<()> {
        grid.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!(
                "density value {} at index {i} is negative or non-finite",
                values[i]
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.inner(&self.values, &vec![1.0; self.values.len()])
    }

    /// `E[h(mu)]` under this density.
    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .points()
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| h(x) * v)
            .sum::<f64>()
            * self.grid.spacing()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Mass on `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        self.grid.quad_interval(&self.values, a, b)
    }

    /// Raises every value to at least `fraction * max` and renormalizes.
    pub fn floored(&self, fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(invalid(format!("floor fraction {fraction} outside [0, 1)")));
        }
        let floor = fraction * self.max_value();
        let values = self.values.iter().map(|v| v.max(floor)).collect();
        Self::normalized(self.grid.clone(), values)
    }

    /// Cumulative distribution at the right edge of each cell.
    pub fn cdf(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let mut acc = 0.0;
        self.values
            .iter()
            .map(|v| {
                acc += v * h;
                acc
            })
            .collect()
    }
}

impl From<DensityVector> for Vec<f64> {
    fn from(d: DensityVector) -> Self {
        d.values
    }
}

impl AsRef<[f64]> for DensityVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
