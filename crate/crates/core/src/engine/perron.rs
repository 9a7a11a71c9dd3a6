//! Principal eigendata of nonnegative matrices.

use nalgebra::DMatrix;

use crate::error::{RaredynError, Result};
use crate::{engine::graph, engine::tilted::TiltedKernel};

/// Eigendata `(lambda, h, mu)` of a tilted operator: `Q h = lambda h`,
/// `Q* mu = lambda mu`, with `mu` a probability vector and `<h, mu> = 1`.
#[derive(Debug, Clone)]
pub struct PerronTriple {
    pub lambda: f64,
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
}

const LAMBDA_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 100_000;

/// Perron triple of an irreducible tilted kernel.
///
/// Simultaneous forward/adjoint power iteration with per-step normalization;
/// a dense eigensolve takes over when the iteration stalls (periodic
/// spectra), and `PeriodicSpectrum` is reported only if the principal
/// eigenvalue is not simple in modulus.
pub fn perron_triple(tk: &TiltedKernel) -> Result<PerronTriple> {
    let adj = graph::support_adjacency(&tk.base.matrix);
    let cond = graph::condense(&adj);
    if cond.classes.len() != 1 {
        return Err(RaredynError::NotIrreducible { classes: cond.classes });
    }
    let triple = matrix_perron(&tk.matrix)?;
    Ok(triple)
}

/// Perron data of a raw nonnegative irreducible matrix.
///
/// Errors with `PeriodicSpectrum` when the principal eigenvalue is not
/// simple in modulus, i.e. when the normalized power iterates cannot
/// converge.
pub fn matrix_perron(q: &[Vec<f64>]) -> Result<PerronTriple> {
    matrix_perron_impl(q, true)
}

/// Perron data tolerant of periodic spectra: the Perron root of an
/// irreducible nonnegative matrix is always a simple eigenvalue with
/// positive left/right eigenvectors, even when other eigenvalues share its
/// modulus, so shifted inverse iteration recovers the pair regardless.
pub fn class_perron(q: &[Vec<f64>]) -> Result<PerronTriple> {
    matrix_perron_impl(q, false)
}

fn matrix_perron_impl(q: &[Vec<f64>], reject_periodic: bool) -> Result<PerronTriple> {
    let n = q.len();
    if n == 1 {
        let lambda = q[0][0];
        if lambda <= 0.0 {
            return Err(RaredynError::SolveFailed {
                what: "singleton class without a cycle has spectral radius 0".into(),
            });
        }
        return Ok(PerronTriple { lambda, h: vec![1.0], mu: vec![1.0] });
    }

    let apply = |v: &[f64]| -> Vec<f64> {
        q.iter().map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum()).collect()
    };
    let apply_t = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (x, row) in q.iter().enumerate() {
            for (y, a) in row.iter().enumerate() {
                out[y] += a * v[x];
            }
        }
        out
    };

    let mut h = vec![1.0 / n as f64; n];
    let mut mu = vec![1.0 / n as f64; n];
    let mut lambda_prev = f64::NAN;
    for _ in 0..MAX_ITERS {
        let qh = apply(&h);
        let qtm = apply_t(&mu);
        let lambda = qh.iter().sum::<f64>() / h.iter().sum::<f64>();
        let s: f64 = qh.iter().sum();
        let t: f64 = qtm.iter().sum();
        if s <= 0.0 || t <= 0.0 {
            return Err(RaredynError::SolveFailed { what: "power iteration collapsed to zero".into() });
        }
        let h_next: Vec<f64> = qh.iter().map(|v| v / s).collect();
        let mu_next: Vec<f64> = qtm.iter().map(|v| v / t).collect();
        // The eigenvalue estimate of a stochastic matrix stabilizes
        // immediately, so both eigenvector iterates must settle as well.
        let h_moved = h_next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let mu_moved = mu_next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h = h_next;
        mu = mu_next;
        if (lambda - lambda_prev).abs() < LAMBDA_TOL * lambda.max(1.0)
            && h_moved < 1e-13
            && mu_moved < 1e-13
        {
            return Ok(finalize(q, lambda, h, mu));
        }
        lambda_prev = lambda;
    }

    // Dense fallback for stalled (periodic) iterations.
    let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
    let eigs = m.complex_eigenvalues();
    let mut moduli: Vec<f64> = eigs.iter().map(|c| c.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let lambda = moduli[0];
    if reject_periodic && moduli.len() > 1 && moduli[1] >= lambda * (1.0 - 1e-9) {
        return Err(RaredynError::PeriodicSpectrum);
    }
    // Shifted inverse iteration for both eigenvectors.
    let h = inverse_iterate(q, lambda, false)?;
    let mu = inverse_iterate(q, lambda, true)?;
    Ok(finalize(q, lambda, h, mu))
}

fn inverse_iterate(q: &[Vec<f64>], lambda: f64, transpose: bool) -> Result<Vec<f64>> {
    let n = q.len();
    let shift = lambda * (1.0 + 1e-8) + 1e-300;
    let a = DMatrix::from_fn(n, n, |i, j| {
        let v = if transpose { q[j][i] } else { q[i][j] };
        if i == j { shift - v } else { -v }
    });
    let lu = a.lu();
    let mut x = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..200 {
        let mut y = lu
            .solve(&x)
            .ok_or_else(|| RaredynError::SolveFailed { what: "singular shifted system".into() })?;
        let norm = y.amax();
        y /= norm;
        if (&y - &x).amax() < 1e-14 {
            x = y;
            break;
        }
        x = y;
    }
    Ok(x.iter().cloned().collect())
}

fn finalize(q: &[Vec<f64>], lambda_est: f64, h: Vec<f64>, mu: Vec<f64>) -> PerronTriple {
    // Rayleigh-quotient polish of the eigenvalue, then normalize:
    // mu sums to 1 and <h, mu> = 1.
    let qh: Vec<f64> = q.iter().map(|row| row.iter().zip(&h).map(|(a, x)| a * x).sum()).collect();
    let num: f64 = qh.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let den: f64 = h.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let lambda = if den > 0.0 { num / den } else { lambda_est };
    let mu_sum: f64 = mu.iter().sum();
    let mu: Vec<f64> = mu.iter().map(|v| v / mu_sum).collect();
    let hm: f64 = h.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let h: Vec<f64> = h.iter().map(|v| v / hm).collect();
    PerronTriple { lambda, h, mu }
}
