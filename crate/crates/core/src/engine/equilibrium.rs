//! Equilibrium states and the admissible-potential test.

use serde::Serialize;

use crate::engine::perron::class_perron;
use crate::engine::pressure::{pressure, PressureResult, RATE_TIE_TOL};
use crate::engine::tilted::TiltedKernel;
use crate::error::Result;
use crate::measure::{DiscreteMeasure, Potential};
use crate::FiniteMarkovKernel;

/// Measures attaining the pressure, one per maximizing class.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    /// Extremal equilibrium measures (`h . mu` of the class-restricted
    /// Perron data, embedded in the full state space).
    pub states: Vec<DiscreteMeasure<usize>>,
    /// Class ids (into `pressure.classes`) attaining the maximal rate.
    pub attaining_classes: Vec<usize>,
    pub unique: bool,
    pub pressure: PressureResult,
}

/// All extremal equilibrium states of `V`.
///
/// Each strongly connected class whose log spectral radius ties the overall
/// rate (within 1e-10) contributes the measure `h . mu` built from its
/// class-restricted Perron data; Perron-Frobenius gives uniqueness within a
/// class, so the equilibrium state is unique exactly when one class attains
/// the maximum. Ties are reported rather than silently broken.
pub fn equilibrium_states(kernel: &FiniteMarkovKernel, v: &Potential) -> Result<EquilibriumResult> {
    let pres = pressure(kernel, v)?;
    let tk = TiltedKernel::new(kernel, v)?;
    let n = kernel.len();

    let mut attaining = Vec::new();
    for (c, rate) in pres.class_rates.iter().enumerate() {
        if let Some(r) = rate {
            if (r - pres.lambda).abs() <= RATE_TIE_TOL {
                attaining.push(c);
            }
        }
    }

    let mut states = Vec::new();
    for &c in &attaining {
        let class = &pres.classes[c];
        let sub: Vec<Vec<f64>> = class
            .iter()
            .map(|&i| class.iter().map(|&j| tk.matrix[i][j]).collect())
            .collect();
        let triple = class_perron(&sub)?;
        let mut dense = vec![0.0; n];
        for (local, &state) in class.iter().enumerate() {
            dense[state] = triple.h[local] * triple.mu[local];
        }
        // <h, mu> = 1 already normalizes the product to total mass 1.
        let total: f64 = dense.iter().sum();
        dense.iter_mut().for_each(|w| *w /= total);
        states.push(DiscreteMeasure::from_dense(&dense));
    }

    let unique = attaining.len() == 1;
    Ok(EquilibriumResult { states, attaining_classes: attaining, unique, pressure: pres })
}

/// Verdict of the admissibility test for a potential.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MembershipResult {
    pub in_v: bool,
    pub reasons: Vec<String>,
}

/// A potential is admissible when the pressure limit exists uniformly in the
/// initial state (all per-state rates agree) and the equilibrium state is
/// unique. On finite spaces both conditions are decidable exactly.
pub fn membership_test(kernel: &FiniteMarkovKernel, v: &Potential) -> Result<MembershipResult> {
    let eq = equilibrium_states(kernel, v)?;
    let mut reasons = Vec::new();
    if !eq.pressure.net_converges {
        let rates: Vec<String> =
            eq.pressure.per_state_rates.iter().map(|r| format!("{r:.12}")).collect();
        reasons.push(format!(
            "per-state pressure rates differ, so the growth limit depends on the initial state: [{}]",
            rates.join(", ")
        ));
    }
    if !eq.unique {
        reasons.push(format!(
            "equilibrium state is not unique: {} classes tie at the maximal rate",
            eq.attaining_classes.len()
        ));
    }
    Ok(MembershipResult { in_v: reasons.is_empty(), reasons })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_chain_zero_potential_has_unique_dirac_equilibrium() {
        let k = FiniteMarkovKernel::toy_chain();
        let eq = equilibrium_states(&k, &Potential::zero(3)).unwrap();
        assert!(eq.unique);
        assert_eq!(eq.states.len(), 1);
        assert_eq!(eq.states[0].support, vec![0]);
        assert!((eq.states[0].weights[0] - 1.0).abs() < 1e-14);
    }

    /// Class-rate comparison max(0, v - log 2) selects the equilibrium.
    #[test]
    fn toy_chain_tilt_selects_class_by_rate() {
        let k = FiniteMarkovKernel::toy_chain();
        let log2 = 2.0f64.ln();
        for (v1, expect_state) in [(log2 + 0.3, 1usize), (log2 - 0.3, 0usize)] {
            let v = Potential::new(vec![0.0, v1, 0.0]).unwrap();
            let eq = equilibrium_states(&k, &v).unwrap();
            assert!(eq.unique, "v1={v1}");
            assert_eq!(eq.states[0].support, vec![expect_state]);
        }
    }

    /// At the tie the objective is affine in the mixture parameter, so both
    /// extremal Diracs are equilibria.
    #[test]
    fn toy_chain_tie_reports_both_extremals() {
        let k = FiniteMarkovKernel::toy_chain();
        let v = Potential::new(vec![0.0, 2.0f64.ln(), 0.0]).unwrap();
        let eq = equilibrium_states(&k, &v).unwrap();
        assert!(!eq.unique);
        assert_eq!(eq.states.len(), 2);
        let supports: Vec<Vec<usize>> = eq.states.iter().map(|s| s.support.clone()).collect();
        assert!(supports.contains(&vec![0]));
        assert!(supports.contains(&vec![1]));
    }

    #[test]
    fn membership_rejects_large_tilt_for_rate_mismatch() {
        let k = FiniteMarkovKernel::toy_chain();
        let v = Potential::new(vec![0.0, 2.0 * 2.0f64.ln(), 0.0]).unwrap();
        let m = membership_test(&k, &v).unwrap();
        assert!(!m.in_v);
        assert!(m.reasons.iter().any(|r| r.contains("per-state")));
    }

    #[test]
    fn membership_rejects_tie_for_non_uniqueness() {
        let k = FiniteMarkovKernel::toy_chain();
        let v = Potential::new(vec![0.0, 2.0f64.ln(), 0.0]).unwrap();
        let m = membership_test(&k, &v).unwrap();
        assert!(!m.in_v);
        assert!(m.reasons.iter().any(|r| r.contains("not unique")));
        assert!(!m.reasons.iter().any(|r| r.contains("per-state")));
    }

    #[test]
    fn membership_accepts_zero_on_irreducible_aperiodic_chain() {
        let k = FiniteMarkovKernel::with_line_embedding(vec![
            vec![0.9, 0.1],
            vec![0.2, 0.8],
        ])
        .unwrap();
        let m = membership_test(&k, &Potential::zero(2)).unwrap();
        assert!(m.in_v);
        assert!(m.reasons.is_empty());
    }

    /// Equilibrium identity: pressure = <V, sigma_V> - I(sigma_V).
    #[test]
    fn equilibrium_identity_on_random_irreducible_kernels() {
        use crate::engine::rate::rate_dv;
        let stream = crate::rng::KickStream::new(808, 0);
        for case in 0..25 {
            let n = 2 + (stream.bits(case, 0) % 4) as usize;
            let mut rows = Vec::new();
            for i in 0..n {
                let mut row: Vec<f64> =
                    (0..n).map(|j| stream.uniform(case, (7 + i * n + j) as u64) + 0.05).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                rows.push(row);
            }
            let k = FiniteMarkovKernel::with_line_embedding(rows).unwrap();
            let vals: Vec<f64> = (0..n).map(|i| stream.uniform(case, (90 + i) as u64)).collect();
            let v = Potential::new(vals).unwrap();
            let eq = equilibrium_states(&k, &v).unwrap();
            assert!(eq.unique);
            let sigma = &eq.states[0];
            let i_sigma = rate_dv(&k, sigma).unwrap().value.expect_finite();
            let inner = crate::measure::integrate(&v, sigma).unwrap();
            assert!(
                (eq.pressure.lambda - (inner - i_sigma)).abs() < 1e-8,
                "pressure {} vs duality value {}",
                eq.pressure.lambda,
                inner - i_sigma
            );
        }
    }

    /// A transient state feeding an irreducible class changes neither the
    /// pressure nor the equilibrium state.
    #[test]
    fn transient_feeder_state_is_inert() {
        let core = FiniteMarkovKernel::with_line_embedding(vec![
            vec![0.7, 0.3],
            vec![0.4, 0.6],
        ])
        .unwrap();
        let extended = FiniteMarkovKernel::with_line_embedding(vec![
            vec![0.7, 0.3, 0.0],
            vec![0.4, 0.6, 0.0],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        let v2 = Potential::new(vec![0.2, -0.1]).unwrap();
        let v3 = Potential::new(vec![0.2, -0.1, 0.8]).unwrap();
        let eq2 = equilibrium_states(&core, &v2).unwrap();
        let eq3 = equilibrium_states(&extended, &v3).unwrap();
        assert!((eq2.pressure.lambda - eq3.pressure.lambda).abs() < 1e-12);
        assert!(eq3.unique);
        let d2 = eq2.states[0].to_dense(2);
        let d3 = eq3.states[0].to_dense(3);
        for i in 0..2 {
            assert!((d2[i] - d3[i]).abs() < 1e-10);
        }
        assert_eq!(d3[2], 0.0);
        // The feeder state still sees the same growth rate, so the net converges.
        assert!(eq3.pressure.net_converges);
    }
}
