use nalgebra::{DMatrix, DVector};

use crate::{invalid, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Symmetric eigensolver. The input is symmetrized first; each eigenvector is
/// signed so that its largest-magnitude entry is positive.
pub fn sym_eigen(matrix: &DMatrix<f64>) -> Result<SymEigen> {
    if !matrix.is_square() {
        return Err(invalid(format!(
            "matrix is {}x{}, not square",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let n = matrix.nrows();
    if n == 0 {
        return Ok(SymEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = symmetrize(matrix).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col
            .iter()
            .cloned()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    Ok(SymEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity() {
        let e = sym_eigen(&DMatrix::identity(3, 3)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_sorted_with_permuted_basis() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eigen(&a).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 2.0, 1.0]);
        let expect = [0usize, 2, 1];
        for (col, &axis) in expect.iter().enumerate() {
            assert!((e.vectors[(axis, col)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        let a = symmetrize(&b);
        let e = sym_eigen(&a).unwrap();
        let v = &e.vectors;
        let rebuilt = v * DMatrix::from_diagonal(&e.values) * v.transpose();
        assert!((rebuilt - &a).amax() < 1e-8);
        assert!((v.transpose() * v - DMatrix::identity(8, 8)).amax() < 1e-8);
        let norm = a.norm();
        for k in 0..8 {
            let r = &a * v.column(k) - v.column(k) * e.values[k];
            assert!(r.norm() <= 1e-8 * norm);
            let pivot = v.column(k).iter().cloned().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot > 0.0);
        }
        assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(sym_eigen(&a).is_err());
    }
}
