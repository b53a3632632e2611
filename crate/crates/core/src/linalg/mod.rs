//! Eigenvalue and linear-programming kernels plus small dense helpers.

pub mod eig;
pub mod lp;

pub use eig::{eig_largest, eig_smallest, EigResult};
pub use lp::{lp_min, LinearProgram};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense solve by LU with partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let lu = a.clone().lu();
    let x = lu.solve(&DVector::from_column_slice(b)).ok_or(Error::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(x.iter().copied().collect())
}

/// `Σ_k w_k M_k` for dense matrices of equal shape.
pub fn dense_combination(weights: &[f64], mats: &[DMatrix<f64>], nrows: usize, ncols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nrows, ncols);
    for (w, m) in weights.iter().zip(mats) {
        out += m * *w;
    }
    out
}
