//! Asymptotic variance of additive functionals.

use nalgebra::{DMatrix, DVector};

use crate::engine::mixing::invariant_and_mixing;
use crate::error::{RaredynError, Result};
use crate::measure::Potential;
use crate::FiniteMarkovKernel;

/// Asymptotic variance of `n^{-1/2} sum_k (f(x_k) - <f, mu*>)`.
///
/// Solves the Poisson equation `psi - P psi = f - <f, mu*>` with the side
/// condition `<psi, mu*> = 0` (via the rank-one corrected system
/// `(I - P + 1 mu*^T) psi = f_centered`) and returns
/// `sigma_f^2 = <psi^2, mu*> - <(P psi)^2, mu*> >= 0`.
pub fn clt_variance(kernel: &FiniteMarkovKernel, f: &Potential) -> Result<f64> {
    let n = kernel.len();
    if f.len() != n {
        return Err(RaredynError::Config("function length mismatch".into()));
    }
    let mix = invariant_and_mixing(kernel)?;
    let mu = mix.mu_star.to_dense(n);
    let mean: f64 = f.values.iter().zip(&mu).map(|(v, w)| v * w).sum();
    let centered: Vec<f64> = f.values.iter().map(|v| v - mean).collect();

    let a = DMatrix::from_fn(n, n, |i, j| {
        let eye = if i == j { 1.0 } else { 0.0 };
        eye - kernel.matrix[i][j] + mu[j]
    });
    let rhs = DVector::from_column_slice(&centered);
    let psi = a.lu().solve(&rhs).ok_or_else(|| RaredynError::SolveFailed {
        what: "Poisson equation system is singular beyond its one-dimensional kernel".into(),
    })?;

    let p_psi: Vec<f64> = kernel
        .matrix
        .iter()
        .map(|row| row.iter().zip(psi.iter()).map(|(p, v)| p * v).sum())
        .collect();
    let e_psi2: f64 = psi.iter().zip(&mu).map(|(v, w)| v * v * w).sum();
    let e_ppsi2: f64 = p_psi.iter().zip(&mu).map(|(v, w)| v * v * w).sum();
    Ok((e_psi2 - e_ppsi2).max(0.0))
}
