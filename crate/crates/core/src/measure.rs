//! Probability measures with finite support and bounded potentials.

use crate::error::{RaredynError, Result};

/// A finitely supported measure: atoms in `support` with matching `weights`.
///
/// For probability measures the weights sum to 1 (within 1e-12) and the
/// support points are pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<P> {
    pub support: Vec<P>,
    pub weights: Vec<f64>,
}

impl<P: Clone + PartialEq> DiscreteMeasure<P> {
    pub fn new(support: Vec<P>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(RaredynError::InvalidMeasure {
                reason: format!(
                    "support has {} atoms but {} weights",
                    support.len(),
                    weights.len()
                ),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RaredynError::InvalidMeasure {
                reason: "weights must be finite and non-negative".into(),
            });
        }
        for i in 0..support.len() {
            for j in (i + 1)..support.len() {
                if support[i] == support[j] {
                    return Err(RaredynError::InvalidMeasure {
                        reason: format!("duplicate support atoms at indices {i} and {j}"),
                    });
                }
            }
        }
        Ok(DiscreteMeasure { support, weights })
    }

    /// A Dirac mass at `point`.
    pub fn dirac(point: P) -> Self {
        DiscreteMeasure { support: vec![point], weights: vec![1.0] }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.mass() - 1.0).abs() <= 1e-12
    }

    pub fn weight_of(&self, point: &P) -> f64 {
        self.support
            .iter()
            .position(|q| q == point)
            .map_or(0.0, |i| self.weights[i])
    }
}

impl DiscreteMeasure<usize> {
    /// Measure on states `0..n` from a dense weight vector, dropping zeros.
    pub fn from_dense(weights: &[f64]) -> Self {
        let mut support = Vec::new();
        let mut w = Vec::new();
        for (i, &wi) in weights.iter().enumerate() {
            if wi != 0.0 {
                support.push(i);
                w.push(wi);
            }
        }
        DiscreteMeasure { support, weights: w }
    }

    /// Dense weight vector over `0..n` (atoms outside `0..n` are an error upstream).
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &w) in self.support.iter().zip(&self.weights) {
            out[i] += w;
        }
        out
    }
}

/// A bounded function on the states of a finite kernel.
///
/// `lipschitz` and `oscillation` are optional recorded bounds; on finite
/// spaces they must match the exhaustively computed values when present.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub values: Vec<f64>,
    pub lipschitz: Option<f64>,
    pub oscillation: Option<f64>,
}

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RaredynError::NonFiniteValue { context: "potential values".into() });
        }
        Ok(Potential { values, lipschitz: None, oscillation: None })
    }

    pub fn constant(c: f64, n: usize) -> Self {
        Potential { values: vec![c; n], lipschitz: Some(0.0), oscillation: Some(0.0) }
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(0.0, n)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// sup f - inf f, computed exhaustively.
    pub fn computed_oscillation(&self) -> f64 {
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if self.values.is_empty() { 0.0 } else { max - min }
    }

    /// Lipschitz constant with respect to a metric on state indices.
    pub fn computed_lipschitz(&self, metric: impl Fn(usize, usize) -> f64) -> f64 {
        let n = self.values.len();
        let mut lip: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric(i, j);
                if d > 0.0 {
                    lip = lip.max((self.values[i] - self.values[j]).abs() / d);
                }
            }
        }
        lip
    }

    /// Check recorded Lip/Osc bounds against the exhaustive computation.
    pub fn validate(&self, metric: impl Fn(usize, usize) -> f64) -> Result<()> {
        if let Some(osc) = self.oscillation {
            let actual = self.computed_oscillation();
            if (osc - actual).abs() > 1e-12 {
                return Err(RaredynError::InvalidMeasure {
                    reason: format!("recorded Osc {osc} differs from computed {actual}"),
                });
            }
        }
        if let Some(lip) = self.lipschitz {
            let actual = self.computed_lipschitz(metric);
            if (lip - actual).abs() > 1e-12 {
                return Err(RaredynError::InvalidMeasure {
                    reason: format!("recorded Lip {lip} differs from computed {actual}"),
                });
            }
        }
        Ok(())
    }
}

/// Integral of a state-indexed function against a measure on state indices.
pub fn integrate(f: &Potential, m: &DiscreteMeasure<usize>) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &w) in m.support.iter().zip(&m.weights) {
        let v = *f.values.get(x).ok_or_else(|| RaredynError::NonFiniteValue {
            context: format!("potential undefined at state {x}"),
        })?;
        acc += w * v;
    }
    if !acc.is_finite() {
        return Err(RaredynError::NonFiniteValue { context: "integral".into() });
    }
    Ok(acc)
}
