use crate::numerics::DensityVector;
use crate::Result;

/// `KL(g, g_hat) = int g log(g / g_hat)`; infinite when `g_hat` vanishes where
/// `g` does not.
pub fn kl_loss(g: &DensityVector, g_hat: &DensityVector) -> Result<f64> {
    let grid = g.grid();
    grid.check_same(g_hat.grid())?;
    let mut total = 0.0;
    for ((w, p), q) in grid.weights().iter().zip(g.values()).zip(g_hat.values()) {
        if *p > 0.0 {
            if *q <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += w * p * (p / q).ln();
        }
    }
    Ok(total.max(0.0))
}

/// `n KL(g, g_hat)`.
pub fn scaled_deviance(n: usize, g: &DensityVector, g_hat: &DensityVector) -> Result<f64> {
    Ok(n as f64 * kl_loss(g, g_hat)?)
}

/// `int (g_hat - g)^2`.
pub fn ise_loss(g: &DensityVector, g_hat: &DensityVector) -> Result<f64> {
    let grid = g.grid();
    grid.check_same(g_hat.grid())?;
    let sq: Vec<f64> = g
        .values()
        .iter()
        .zip(g_hat.values())
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    grid.quad(&sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{make_grid, wrapped_gaussian, wrapped_normal};

    #[test]
    fn gaussian_shift_divergence() {
        let grid = make_grid(10.0, 1024).unwrap();
        let a = wrapped_gaussian(&grid, 1.0, 8).unwrap();
        let b = wrapped_normal(&grid, 0.1, 1.0, 8).unwrap();
        assert!(kl_loss(&a, &a).unwrap().abs() < 1e-10);
        assert!((kl_loss(&a, &b).unwrap() - 0.005).abs() < 1e-5);
        assert_eq!(ise_loss(&a, &b).unwrap(), ise_loss(&b, &a).unwrap());
        assert_eq!(ise_loss(&a, &a).unwrap(), 0.0);
        assert!((scaled_deviance(100, &a, &b).unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn support_violation_is_infinite() {
        let grid = make_grid(4.0, 8).unwrap();
        let p = DensityVector::normalized(grid.clone(), vec![1.0; 8]).unwrap();
        let mut v = vec![1.0; 8];
        v[3] = 0.0;
        let q = DensityVector::normalized(grid, v).unwrap();
        assert_eq!(kl_loss(&p, &q).unwrap(), f64::INFINITY);
        assert!(kl_loss(&q, &p).unwrap().is_finite());
    }
}
