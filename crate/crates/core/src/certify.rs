//! Error-bound arithmetic independent of any discretization, and the
//! tridiagonal example showing how pessimistic the plain residual bound is.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::eig_smallest;
use crate::sparse::{norm2, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    /// `‖ê‖_X`
    pub err_approx_norm: f64,
    /// `‖ρ‖_Y = ‖r − L ê‖_Y`
    pub aux_res_norm: f64,
    pub alpha: f64,
    /// `‖r‖_Y`, when known.
    pub res_norm: Option<f64>,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return invalid(format!("coercivity constant must be positive, got {}", self.alpha));
        }
        if self.err_approx_norm < 0.0 || self.aux_res_norm < 0.0 || self.res_norm.is_some_and(|r| r < 0.0) {
            return invalid("norms must be nonnegative");
        }
        Ok(())
    }

    /// `‖ρ‖_Y / (√α ‖ê‖_X)`; infinite when `ê = 0` and `ρ ≠ 0`.
    pub fn indicator(&self) -> f64 {
        indicator(self.aux_res_norm, self.alpha, self.err_approx_norm)
    }
}

/// `‖ρ‖ / (√α ‖ê‖)` with the conventions `0/0 = 0` and `x/0 = ∞`.
pub fn indicator(aux_res: f64, alpha: f64, err_norm: f64) -> f64 {
    let den = alpha.sqrt() * err_norm;
    if den > 0.0 {
        aux_res / den
    } else if aux_res == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `‖r‖_Y / √α`.
pub fn loose_bound(res_norm: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return invalid(format!("coercivity constant must be positive, got {alpha}"));
    }
    if res_norm < 0.0 {
        return invalid("residual norm must be nonnegative");
    }
    Ok(res_norm / alpha.sqrt())
}

/// `‖ê‖_X + ‖ρ‖_Y / √α`.
pub fn tight_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.err_approx_norm + inputs.aux_res_norm / inputs.alpha.sqrt())
}

/// Worst-case ratio of the tight bound to the true error when the
/// indicator is at most `delta`.
pub fn effectivity_ceiling(delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return invalid(format!("effectivity ceiling needs 0 <= delta < 1, got {delta}"));
    }
    Ok((1.0 + delta) / (1.0 - delta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TridiagRecord {
    pub n: usize,
    pub error: f64,
    pub residual: f64,
    pub lambda_min: f64,
    /// `residual / √λ_min`
    pub ratio: f64,
    /// `4 √(n−1) / π`
    pub lower_bound: f64,
}

pub fn tridiag_matrix(n: usize) -> CsrMatrix {
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, 2.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// `A = tridiag(−1,2,−1)`, `f = e_1 + e_n`, exact solution all ones and the
/// oscillating approximation `û_i = 1 + (−1)^i / n` (1-based `i`). All
/// quantities are computed from the assembled matrix.
pub fn tridiag_demo(n: usize) -> Result<TridiagRecord> {
    if n < 2 {
        return invalid(format!("tridiagonal demo needs n >= 2, got {n}"));
    }
    let a = tridiag_matrix(n);
    let mut f = vec![0.0; n];
    f[0] = 1.0;
    f[n - 1] = 1.0;
    let u_hat: Vec<f64> = (1..=n).map(|i| 1.0 + if i % 2 == 0 { 1.0 } else { -1.0 } / n as f64).collect();
    let err: Vec<f64> = u_hat.iter().map(|v| 1.0 - v).collect();
    let au = a.matvec(&u_hat);
    let r: Vec<f64> = f.iter().zip(&au).map(|(x, y)| x - y).collect();
    let lambda = eig_smallest(&a, &CsrMatrix::identity(n))?.eigenvalue;
    let residual = norm2(&r);
    Ok(TridiagRecord {
        n,
        error: norm2(&err),
        residual,
        lambda_min: lambda,
        ratio: residual / lambda.sqrt(),
        lower_bound: 4.0 * ((n - 1) as f64).sqrt() / std::f64::consts::PI,
    })
}
