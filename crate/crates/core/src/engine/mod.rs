//! Exact large-deviation computations on finite Markov kernels.

pub mod clt;
pub mod convex;
pub mod equilibrium;
pub mod graph;
pub mod level1;
pub mod mixing;
pub mod perron;
pub mod pressure;
pub mod rate;
pub mod tilted;

pub use clt::clt_variance;
pub use equilibrium::{equilibrium_states, membership_test, EquilibriumResult, MembershipResult};
pub use level1::{level1_rate, minimize_rate_over};
pub use mixing::{invariant_and_mixing, MixingResult};
pub use perron::{class_perron, matrix_perron, perron_triple, PerronTriple};
pub use pressure::{pressure, PressureResult};
pub use rate::{dv_induced_potential, rate_dv, rate_legendre, RateResult, RateValue};
pub use tilted::{feynman_kac_apply, TiltedKernel};

use serde::Serialize;

/// Serializable results document; the field names are a stable contract.
#[derive(Debug, Clone, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_state_rates: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_rates: Option<Vec<Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triple: Option<TripleDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_v: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasons: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TripleDocument {
    pub lambda: f64,
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
}

impl ChainDocument {
    pub fn with_pressure(mut self, p: &PressureResult) -> Self {
        self.lambda = Some(p.lambda);
        self.per_state_rates = Some(p.per_state_rates.clone());
        self.class_rates = Some(p.class_rates.clone());
        self
    }

    pub fn with_triple(mut self, t: &PerronTriple) -> Self {
        self.triple = Some(TripleDocument { lambda: t.lambda, h: t.h.clone(), mu: t.mu.clone() });
        self
    }
}
