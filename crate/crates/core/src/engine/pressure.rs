//! Exponential growth rates of tilted semigroups.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::engine::graph;
use crate::engine::tilted::TiltedKernel;
use crate::error::Result;
use crate::measure::Potential;
use crate::FiniteMarkovKernel;

/// Tolerance for declaring two growth rates equal.
pub const RATE_TIE_TOL: f64 = 1e-10;

/// Growth data of `Q_n 1`: the overall rate, per-state rates, and the
/// class decomposition that produces them.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PressureResult {
    /// Overall rate: the log of the limsup growth over all states.
    pub lambda: f64,
    /// `lim (1/n) log Q_n 1 (x)` per state.
    pub per_state_rates: Vec<f64>,
    /// Log spectral radius per strongly connected class; `None` marks a
    /// cycle-free singleton (zero radius).
    pub class_rates: Vec<Option<f64>>,
    /// Strongly connected classes, each a sorted list of states.
    pub classes: Vec<Vec<usize>>,
    /// True when all per-state rates agree, i.e. the growth rate exists as a
    /// limit uniformly in the initial state.
    pub net_converges: bool,
}

/// Spectral radius of a nonnegative matrix restricted to one strongly
/// connected class. `None` when the class carries no cycle.
pub fn class_spectral_radius(sub: &[Vec<f64>]) -> Option<f64> {
    let n = sub.len();
    if n == 1 {
        return if sub[0][0] > 0.0 { Some(sub[0][0]) } else { None };
    }
    // Power iteration on the L1-normalized vector; Rayleigh tolerance 1e-13.
    let mut x = vec![1.0 / n as f64; n];
    let mut prev = f64::NAN;
    for _ in 0..100_000 {
        let y: Vec<f64> = sub.iter().map(|row| row.iter().zip(&x).map(|(a, v)| a * v).sum()).collect();
        let s: f64 = y.iter().sum();
        if s <= 0.0 {
            return None;
        }
        let lambda = s / x.iter().sum::<f64>();
        x = y.iter().map(|v| v / s).collect();
        if (lambda - prev).abs() < 1e-13 * lambda.max(1.0) {
            return Some(lambda);
        }
        prev = lambda;
    }
    // Dense fallback for periodic classes.
    let m = DMatrix::from_fn(n, n, |i, j| sub[i][j]);
    let radius = m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if radius > 0.0 { Some(radius) } else { None }
}

/// Pressure of a potential over a finite kernel.
///
/// The growth of `Q_n 1` from state `x` is governed by the largest class
/// spectral radius among classes reachable from `x`; the overall rate is the
/// maximum over states.
pub fn pressure(kernel: &FiniteMarkovKernel, v: &Potential) -> Result<PressureResult> {
    let tk = TiltedKernel::new(kernel, v)?;
    let adj = graph::support_adjacency(&kernel.matrix);
    let cond = graph::condense(&adj);

    let class_rates: Vec<Option<f64>> = cond
        .classes
        .iter()
        .map(|class| {
            let sub: Vec<Vec<f64>> = class
                .iter()
                .map(|&i| class.iter().map(|&j| tk.matrix[i][j]).collect())
                .collect();
            class_spectral_radius(&sub).map(f64::ln)
        })
        .collect();

    let n = kernel.len();
    let mut per_state_rates = vec![f64::NEG_INFINITY; n];
    for x in 0..n {
        let c = cond.class_of[x];
        for &c2 in &cond.reachable[c] {
            if let Some(rate) = class_rates[c2] {
                per_state_rates[x] = per_state_rates[x].max(rate);
            }
        }
        debug_assert!(per_state_rates[x].is_finite(), "every state reaches a cycling class");
    }
    let lambda = per_state_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let net_converges = per_state_rates.iter().all(|r| (r - lambda).abs() <= RATE_TIE_TOL);

    Ok(PressureResult {
        lambda,
        per_state_rates,
        class_rates,
        classes: cond.classes,
        net_converges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_has_pressure_c_everywhere() {
        for kernel in [
            FiniteMarkovKernel::toy_chain(),
            FiniteMarkovKernel::iid(&[0.3, 0.7]).unwrap(),
        ] {
            let c = 0.37;
            let p = pressure(&kernel, &Potential::constant(c, kernel.len())).unwrap();
            assert!((p.lambda - c).abs() < 1e-12);
            assert!(p.net_converges);
            for r in &p.per_state_rates {
                assert!((r - c).abs() < 1e-12);
            }
        }
    }

    /// Class rates e^{V(0)} = 1 and (1/2) e^{V(1)} = 2; states 1, 2 see the
    /// dominant lazy class, state 0 does not, so the net diverges.
    #[test]
    fn toy_chain_with_large_tilt_diverges() {
        let k = FiniteMarkovKernel::toy_chain();
        let v = Potential::new(vec![0.0, 2.0 * 2.0f64.ln(), 0.0]).unwrap();
        let p = pressure(&k, &v).unwrap();
        assert!((p.lambda - 2.0f64.ln()).abs() < 1e-12);
        assert!((p.per_state_rates[0] - 0.0).abs() < 1e-12);
        assert!((p.per_state_rates[1] - 2.0f64.ln()).abs() < 1e-12);
        assert!((p.per_state_rates[2] - 2.0f64.ln()).abs() < 1e-12);
        assert!(!p.net_converges);
        // Class {2} has no cycle.
        assert_eq!(p.class_rates[2], None);
    }

    /// Cumulant generating function of the row law for i.i.d. kernels.
    #[test]
    fn iid_pressure_is_log_mgf() {
        let k = FiniteMarkovKernel::iid(&[0.3, 0.7]).unwrap();
        let v = Potential::new(vec![0.0, 1.0]).unwrap();
        let p = pressure(&k, &v).unwrap();
        let expected = (0.3 + 0.7 * 1.0f64.exp()).ln();
        assert!((p.lambda - expected).abs() < 1e-12);
        assert!(p.net_converges);
    }

    #[test]
    fn lambda_is_max_of_per_state_rates() {
        let k = FiniteMarkovKernel::toy_chain();
        let v = Potential::new(vec![0.1, 0.9, -0.4]).unwrap();
        let p = pressure(&k, &v).unwrap();
        let max = p.per_state_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(p.lambda, max);
    }

    /// Pressure of a periodic irreducible chain: the dense fallback must
    /// produce the spectral radius that power iteration cannot reach.
    #[test]
    fn periodic_class_radius_via_dense_fallback() {
        // 2-cycle with asymmetric tilt: radius sqrt(e^{v0} e^{v1}).
        let sub = vec![vec![0.0, 2.0], vec![0.5, 0.0]];
        let r = class_spectral_radius(&sub).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
    }
}
