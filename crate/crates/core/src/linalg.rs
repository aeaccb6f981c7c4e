//! Thin wrappers over `nalgebra` eigensolvers that return ascending order.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{MistError, Result};

const MAX_SWEEPS: usize = 100_000;

/// Ascending eigenvalues and matching eigenvector columns of a real symmetric matrix.
pub fn symmetric_eigen(m: DMatrix<f64>, context: &str) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_SWEEPS).ok_or_else(|| {
        MistError::EigenNonConvergence {
            context: context.to_string(),
        }
    })?;
    let order = ascending_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Ascending eigenvalues of a complex Hermitian matrix.
pub fn hermitian_eigenvalues(m: DMatrix<Complex64>, context: &str) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_SWEEPS).ok_or_else(|| {
        MistError::EigenNonConvergence {
            context: context.to_string(),
        }
    })?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps index order for exact ties
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Largest absolute deviation from Hermiticity.
pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}
