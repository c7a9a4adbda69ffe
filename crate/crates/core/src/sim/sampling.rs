use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::DensityVector;

/// Draws `(mu_i, X_i)` with `mu_i ~ g` and `X_i = mu_i + eps_i` wrapped into
/// `[-M, M)`.
///
/// `mu` is sampled by inverting the grid CDF and then placed uniformly within
/// its cell.
pub fn sample_pairs(g: &DensityVector, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let grid = g.grid();
    let cdf = g.cdf();
    let total = *cdf.last().expect("grid is non-empty");
    let h = grid.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let cell = cdf.partition_point(|&c| c <= u).min(grid.len() - 1);
            let mu = grid.cell_left(cell) + h * rng.random::<f64>();
            let eps: f64 = rng.sample(StandardNormal);
            (mu, grid.wrap(mu + eps))
        })
        .collect()
}

/// Noisy observations `X_i` only.
pub fn sample_hierarchical(g: &DensityVector, n: usize, seed: u64) -> Vec<f64> {
    sample_pairs(g, n, seed).into_iter().map(|(_, x)| x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{make_grid, wrapped_gaussian};

    #[test]
    fn moments_add() {
        let grid = make_grid(10.0, 512).unwrap();
        let g = wrapped_gaussian(&grid, 1.5, 8).unwrap();
        let n = 200_000;
        let xs = sample_hierarchical(&g, n, 3);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let want = 1.5f64.powi(2) + 1.0;
        assert!(mean.abs() < 4.0 * (want / n as f64).sqrt());
        assert!((var - want).abs() < 0.03 * want);
        assert!(xs.iter().all(|x| grid.contains(*x)));
    }

    #[test]
    fn deterministic_per_seed() {
        let grid = make_grid(8.0, 128).unwrap();
        let g = wrapped_gaussian(&grid, 1.0, 8).unwrap();
        let a = sample_hierarchical(&g, 1000, 42);
        let b = sample_hierarchical(&g, 1000, 42);
        let c = sample_hierarchical(&g, 1000, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
