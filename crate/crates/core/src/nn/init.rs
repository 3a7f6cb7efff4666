use rand::Rng;

use super::matrix::{Matrix, Scalar};
use crate::error::{FeaeError, Result};

/// Glorot-uniform initialization: entries uniform in `±sqrt(6 / (rows + cols))`.
pub fn xavier_init<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(FeaeError::Dimension(format!(
            "cannot initialize a {rows}x{cols} weight matrix"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Ok(Matrix::from_fn(rows, cols, |_, _| {
        T::lit(rng.random_range(-bound..bound))
    }))
}
