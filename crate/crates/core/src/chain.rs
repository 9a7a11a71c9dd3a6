//! Finite Markov kernels with a metric embedding.

use crate::error::{RaredynError, Result};

/// A labeled state with a coordinate in a finite-dimensional embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub label: String,
    pub coord: Vec<f64>,
}

/// A finite state space with a row-stochastic transition matrix.
///
/// The metric between states is the Euclidean distance between their
/// embedded coordinates. This is the exact-computation substrate: every
/// operation in the finite engine and the oracle runs on this type.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMarkovKernel {
    pub states: Vec<ChainState>,
    pub matrix: Vec<Vec<f64>>,
}

impl FiniteMarkovKernel {
    pub fn new(states: Vec<ChainState>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(RaredynError::Config("kernel needs at least one state".into()));
        }
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(RaredynError::Config(format!(
                "transition matrix must be {n}x{n}"
            )));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(RaredynError::Config(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(RaredynError::Config(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        let dim = states[0].coord.len();
        if states.iter().any(|s| s.coord.len() != dim) {
            return Err(RaredynError::Config("state coordinates have mixed dimensions".into()));
        }
        let kernel = FiniteMarkovKernel { states, matrix };
        kernel.check_metric()?;
        Ok(kernel)
    }

    /// States at coordinates `0, 1, ..., n-1` on the line.
    pub fn with_line_embedding(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let states = (0..matrix.len())
            .map(|i| ChainState { label: i.to_string(), coord: vec![i as f64] })
            .collect();
        Self::new(states, matrix)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Euclidean distance between the embedded coordinates of two states.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(&self.states[i].coord, &self.states[j].coord)
    }

    /// Metric axioms by exhaustion: distinct points separated, symmetry,
    /// triangle inequality.
    fn check_metric(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let d = self.distance(i, j);
                if i != j && d <= 0.0 {
                    return Err(RaredynError::MetricDegenerate { a: i, b: j });
                }
                if (d - self.distance(j, i)).abs() > 1e-12 {
                    return Err(RaredynError::Config("metric is not symmetric".into()));
                }
                for k in 0..n {
                    if d > self.distance(i, k) + self.distance(k, j) + 1e-12 {
                        return Err(RaredynError::Config("triangle inequality fails".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Restrict to a closed subset of states. Errors if probability mass
    /// leaks out of the subset.
    pub fn restrict_to(&self, subset: &[usize]) -> Result<FiniteMarkovKernel> {
        let mut matrix = Vec::with_capacity(subset.len());
        for &i in subset {
            let mut row = Vec::with_capacity(subset.len());
            let mut kept = 0.0;
            for &j in subset {
                row.push(self.matrix[i][j]);
                kept += self.matrix[i][j];
            }
            if (kept - 1.0).abs() > 1e-12 {
                return Err(RaredynError::Config(format!(
                    "state {i} leaks mass {} outside the subset",
                    1.0 - kept
                )));
            }
            matrix.push(row);
        }
        let states = subset.iter().map(|&i| self.states[i].clone()).collect();
        FiniteMarkovKernel::new(states, matrix)
    }

    /// The three-state chain with an absorbing state 0, a lazy state 1 and a
    /// transient state 2, embedded at coordinates 0, 1, 2.
    pub fn toy_chain() -> FiniteMarkovKernel {
        FiniteMarkovKernel::with_line_embedding(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .expect("toy chain is valid")
    }

    /// An i.i.d. kernel: every row equals `law`.
    pub fn iid(law: &[f64]) -> Result<FiniteMarkovKernel> {
        let n = law.len();
        FiniteMarkovKernel::with_line_embedding(vec![law.to_vec(); n])
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
