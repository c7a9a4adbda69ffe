pub mod crime;
pub mod efficiency;
pub mod fit;
pub mod minimax;
pub mod simulate;

use nalgebra::DMatrix;

/// Row-major nested vectors for JSON.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
