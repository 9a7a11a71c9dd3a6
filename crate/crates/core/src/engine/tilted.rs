//! Exponentially tilted transition operators.

use crate::error::{RaredynError, Result};
use crate::measure::Potential;
use crate::FiniteMarkovKernel;

/// The tilted operator `Q(x,y) = pi(x,y) e^{V(y)}`, acting on functions by
/// `Qf(x) = sum_y Q(x,y) f(y)` and on measures by the transpose.
///
/// Iterates of `Q` encode exponential moments of occupation sums, so powers
/// are always taken in the log domain where they cannot overflow.
#[derive(Debug, Clone)]
pub struct TiltedKernel {
    pub base: FiniteMarkovKernel,
    pub potential: Potential,
    /// Linear-domain entries; zero exactly where the base kernel is zero.
    pub matrix: Vec<Vec<f64>>,
    /// `ln pi(x,y) + V(y)` where `pi(x,y) > 0`, `-inf` elsewhere.
    pub log_matrix: Vec<Vec<f64>>,
}

impl TiltedKernel {
    pub fn new(base: &FiniteMarkovKernel, potential: &Potential) -> Result<Self> {
        let n = base.len();
        if potential.len() != n {
            return Err(RaredynError::Config(format!(
                "potential has {} values for a {n}-state kernel",
                potential.len()
            )));
        }
        let mut matrix = vec![vec![0.0; n]; n];
        let mut log_matrix = vec![vec![f64::NEG_INFINITY; n]; n];
        for x in 0..n {
            for y in 0..n {
                let p = base.matrix[x][y];
                if p > 0.0 {
                    matrix[x][y] = p * potential.values[y].exp();
                    log_matrix[x][y] = p.ln() + potential.values[y];
                }
            }
        }
        Ok(TiltedKernel { base: base.clone(), potential: potential.clone(), matrix, log_matrix })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// One application `Qf` in the linear domain.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(f).map(|(q, v)| q * v).sum())
            .collect()
    }

    /// One adjoint application `Q* m` in the linear domain.
    pub fn apply_adjoint(&self, m: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (x, row) in self.matrix.iter().enumerate() {
            for (y, q) in row.iter().enumerate() {
                out[y] += q * m[x];
            }
        }
        out
    }

    /// `(Q)^n f` for sign-free `f > 0`, returned as `ln` values.
    pub fn log_apply_positive(&self, log_f: &[f64], n: usize) -> Vec<f64> {
        let mut cur = log_f.to_vec();
        for _ in 0..n {
            cur = self
                .log_matrix
                .iter()
                .map(|row| log_sum_exp_terms(row.iter().zip(&cur).map(|(lq, lf)| lq + lf)))
                .collect();
        }
        cur
    }
}

/// A signed value stored as `(sign, ln|v|)`; `sign == 0` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub log_abs: f64,
}

impl SignedLog {
    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            SignedLog { sign: 0, log_abs: f64::NEG_INFINITY }
        } else {
            SignedLog { sign: if v > 0.0 { 1 } else { -1 }, log_abs: v.abs().ln() }
        }
    }

    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_abs.exp(),
        }
    }
}

pub fn log_sum_exp_terms(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Signed log-domain row application: `sum_y e^{lq_y} f_y` with signed `f`.
fn signed_row_apply(log_row: &[f64], f: &[SignedLog]) -> SignedLog {
    let mut m = f64::NEG_INFINITY;
    for (lq, fv) in log_row.iter().zip(f) {
        if fv.sign != 0 {
            m = m.max(lq + fv.log_abs);
        }
    }
    if m == f64::NEG_INFINITY {
        return SignedLog { sign: 0, log_abs: f64::NEG_INFINITY };
    }
    let mut acc = 0.0;
    for (lq, fv) in log_row.iter().zip(f) {
        if fv.sign != 0 {
            acc += f64::from(fv.sign) * (lq + fv.log_abs - m).exp();
        }
    }
    if acc == 0.0 {
        SignedLog { sign: 0, log_abs: f64::NEG_INFINITY }
    } else {
        SignedLog { sign: if acc > 0.0 { 1 } else { -1 }, log_abs: m + acc.abs().ln() }
    }
}

/// `(Q^V)^n f` computed in the signed log domain; `n = 0` returns `f`.
///
/// The result is brought back to the linear domain, which is an error if a
/// value exceeds the floating-point range.
pub fn feynman_kac_apply(tk: &TiltedKernel, f: &Potential, n: usize) -> Result<Potential> {
    if f.len() != tk.len() {
        return Err(RaredynError::Config("function length mismatch".into()));
    }
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(RaredynError::NonFiniteValue { context: "feynman_kac_apply input".into() });
    }
    let mut cur: Vec<SignedLog> = f.values.iter().map(|&v| SignedLog::from_value(v)).collect();
    for _ in 0..n {
        cur = tk.log_matrix.iter().map(|row| signed_row_apply(row, &cur)).collect();
    }
    let values: Vec<f64> = cur.iter().map(SignedLog::value).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RaredynError::NonFiniteValue {
            context: format!("feynman_kac_apply result after {n} steps exceeds f64 range"),
        });
    }
    Potential::new(values)
}
