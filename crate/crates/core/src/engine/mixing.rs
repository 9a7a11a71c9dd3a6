//! Invariant measures and spectral mixing rates.

use nalgebra::DMatrix;

use crate::engine::graph;
use crate::engine::perron::matrix_perron;
use crate::error::{RaredynError, Result};
use crate::measure::DiscreteMeasure;
use crate::FiniteMarkovKernel;

#[derive(Debug, Clone)]
pub struct MixingResult {
    pub mu_star: DiscreteMeasure<usize>,
    /// Spectral mixing rate `-log |lambda_2|`; `None` when the kernel mixes
    /// in one step (second eigenvalue of modulus 0).
    pub gamma: Option<f64>,
    /// Second-largest eigenvalue modulus.
    pub lambda2: f64,
}

/// Unique invariant measure and mixing rate of a kernel.
///
/// Requires a unique closed communicating class that is aperiodic (an
/// irreducible aperiodic kernel is the special case where that class covers
/// every state; transient states feeding into the closed class are allowed
/// and carry zero invariant mass).
pub fn invariant_and_mixing(kernel: &FiniteMarkovKernel) -> Result<MixingResult> {
    let adj = graph::support_adjacency(&kernel.matrix);
    let cond = graph::condense(&adj);
    let terminal: Vec<usize> = (0..cond.classes.len())
        .filter(|&c| graph::is_terminal(&cond, &adj, c))
        .collect();
    if terminal.len() != 1 {
        return Err(RaredynError::NotMixing {
            reason: format!(
                "{} closed communicating classes (need exactly one): {:?}",
                terminal.len(),
                terminal.iter().map(|&c| cond.classes[c].clone()).collect::<Vec<_>>()
            ),
        });
    }
    let class = &cond.classes[terminal[0]];
    let period = graph::class_period(&adj, class);
    if period != 1 {
        return Err(RaredynError::NotMixing {
            reason: format!("closed class {class:?} has period {period}"),
        });
    }

    let sub: Vec<Vec<f64>> = class
        .iter()
        .map(|&i| class.iter().map(|&j| kernel.matrix[i][j]).collect())
        .collect();
    let triple = matrix_perron(&sub)?;
    let n = kernel.len();
    let mut dense = vec![0.0; n];
    for (local, &state) in class.iter().enumerate() {
        dense[state] = triple.mu[local];
    }
    let mu_star = DiscreteMeasure::from_dense(&dense);

    let m = DMatrix::from_fn(n, n, |i, j| kernel.matrix[i][j]);
    let mut moduli: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let lambda2 = if moduli.len() > 1 { moduli[1] } else { 0.0 };
    let gamma = if lambda2 > 1e-14 { Some(-lambda2.ln()) } else { None };
    Ok(MixingResult { mu_star, gamma, lambda2 })
}
