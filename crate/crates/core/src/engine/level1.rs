//! Scalar-observable rate functions and constrained rate minimization.

use crate::engine::convex::{project_simplex_slice, LinearConstraint};
use crate::engine::rate::{dv_induced_potential, rate_dv, RateValue, INFINITE_RATE};
use crate::error::{RaredynError, Result};
use crate::measure::{DiscreteMeasure, Potential};
use crate::FiniteMarkovKernel;

/// Minimize the occupation rate over a polytope of measures
/// (`simplex intersect constraints`) by projected gradient descent.
///
/// The gradient of the rate at `sigma` is the potential induced by its DV
/// optimizer. Iterates that wander into the infinite-rate region are
/// rejected by halving the step. Returns the infimum and a minimizer.
pub fn minimize_rate_over(
    kernel: &FiniteMarkovKernel,
    constraints: &[LinearConstraint],
) -> Result<(RateValue, Option<Vec<f64>>)> {
    let n = kernel.len();
    let tol = 1e-9;

    // Candidate starts: the projected barycenter and each projected vertex.
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(s) = project_simplex_slice(&vec![1.0 / n as f64; n], constraints, tol) {
        starts.push(s);
    }
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        if let Some(s) = project_simplex_slice(&v, constraints, tol) {
            starts.push(s);
        }
    }
    if starts.is_empty() {
        return Err(RaredynError::SolveFailed {
            what: "constraint polytope is empty".into(),
        });
    }

    let eval = |sigma: &[f64]| -> Result<(RateValue, Option<Vec<f64>>)> {
        let m = DiscreteMeasure::from_dense(sigma);
        let r = rate_dv(kernel, &m)?;
        Ok((r.value, r.optimizer))
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let (v, _) = eval(start)?;
        if let Some(f) = v.finite() {
            if best.as_ref().map_or(true, |(b, _)| f < *b) {
                best = Some((f, start.clone()));
            }
        }
    }
    let Some((mut value, mut sigma)) = best else {
        return Ok((INFINITE_RATE, None));
    };

    let mut step = 1.0f64;
    for _ in 0..2000 {
        let (_, opt) = eval(&sigma)?;
        let Some(u) = opt else { break };
        let grad = dv_induced_potential(kernel, &u).values;
        let mut improved = false;
        let mut alpha = (2.0 * step).min(64.0).max(1e-12);
        for _ in 0..60 {
            let trial_raw: Vec<f64> =
                sigma.iter().zip(&grad).map(|(s, g)| s - alpha * g).collect();
            let Some(trial) = project_simplex_slice(&trial_raw, constraints, tol) else {
                alpha *= 0.5;
                continue;
            };
            match eval(&trial)? {
                (RateValue::Finite(tv), _) if tv < value - 1e-14 => {
                    let moved: f64 =
                        trial.iter().zip(&sigma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    sigma = trial;
                    value = tv;
                    step = alpha;
                    improved = true;
                    if moved < 1e-12 {
                        return Ok((RateValue::Finite(value), Some(sigma)));
                    }
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        if !improved {
            break;
        }
    }
    Ok((RateValue::Finite(value), Some(sigma)))
}

/// Rate function of the observable `f` at level `p`:
/// the infimum of the occupation rate over `{sigma : <f, sigma> = p}`.
///
/// `p` outside `[min f, max f]` is infeasible.
pub fn level1_rate(kernel: &FiniteMarkovKernel, f: &Potential, p: f64) -> Result<RateValue> {
    let lo = f.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if p < lo - 1e-12 || p > hi + 1e-12 {
        return Err(RaredynError::Infeasible { p, lo, hi });
    }
    let c = LinearConstraint::eq(f.values.clone(), p.clamp(lo, hi));
    let (value, _) = minimize_rate_over(kernel, &[c])?;
    Ok(value)
}
