//! Projections onto simplex slices and polytopes (Dykstra's alternation).

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// A linear constraint `coeffs . sigma (op) rhs` on dense weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub op: ConstraintOp,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Le,
    Ge,
    Eq,
}

impl LinearConstraint {
    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        LinearConstraint { coeffs, op: ConstraintOp::Eq, rhs }
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        let v: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.op {
            ConstraintOp::Le => v <= self.rhs + tol,
            ConstraintOp::Ge => v >= self.rhs - tol,
            ConstraintOp::Eq => (v - self.rhs).abs() <= tol,
        }
    }

    /// Projection onto the constraint set (hyperplane or halfspace).
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let dot: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        let norm2: f64 = self.coeffs.iter().map(|a| a * a).sum();
        if norm2 == 0.0 {
            return x.to_vec();
        }
        let violation = match self.op {
            ConstraintOp::Eq => dot - self.rhs,
            ConstraintOp::Le => (dot - self.rhs).max(0.0),
            ConstraintOp::Ge => (dot - self.rhs).min(0.0),
        };
        let scale = violation / norm2;
        x.iter().zip(&self.coeffs).map(|(v, a)| v - scale * a).collect()
    }
}

/// Dykstra projection onto `simplex intersect constraints`.
///
/// Returns `None` when the alternation fails to satisfy every constraint,
/// which signals an empty (or numerically empty) intersection.
pub fn project_simplex_slice(
    y: &[f64],
    constraints: &[LinearConstraint],
    tol: f64,
) -> Option<Vec<f64>> {
    let n = y.len();
    let sets = constraints.len() + 1;
    let mut x = y.to_vec();
    let mut corrections = vec![vec![0.0; n]; sets];
    for _ in 0..20_000 {
        let prev = x.clone();
        for s in 0..sets {
            let adjusted: Vec<f64> = x.iter().zip(&corrections[s]).map(|(a, b)| a + b).collect();
            let projected = if s == 0 {
                project_simplex(&adjusted)
            } else {
                constraints[s - 1].project(&adjusted)
            };
            for i in 0..n {
                corrections[s][i] = adjusted[i] - projected[i];
            }
            x = projected;
        }
        let moved: f64 = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < 1e-15 {
            break;
        }
    }
    let feasible = x.iter().all(|&v| v >= -tol)
        && (x.iter().sum::<f64>() - 1.0).abs() <= tol
        && constraints.iter().all(|c| c.satisfied(&x, tol));
    if feasible {
        // Clean tiny negatives introduced by the alternation.
        let mut out: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= s);
        Some(out)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_basics() {
        let p = project_simplex(&[0.3, 0.3, 0.4]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(p, vec![0.3, 0.3, 0.4]);
        let q = project_simplex(&[2.0, -1.0]);
        assert!((q[0] - 1.0).abs() < 1e-14 && q[1].abs() < 1e-14);
    }

    #[test]
    fn slice_projection_meets_constraint() {
        // sigma_1 = 0.25 on the 3-simplex.
        let c = LinearConstraint::eq(vec![0.0, 1.0, 0.0], 0.25);
        let x = project_simplex_slice(&[1.0, 0.0, 0.0], &[c.clone()], 1e-9).unwrap();
        assert!(c.satisfied(&x, 1e-9));
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn infeasible_slice_returns_none() {
        let c = LinearConstraint::eq(vec![0.0, 1.0], 2.0); // sigma_1 = 2 impossible
        assert!(project_simplex_slice(&[0.5, 0.5], &[c], 1e-9).is_none());
    }

    #[test]
    fn halfspace_projection() {
        let c = LinearConstraint { coeffs: vec![1.0, 0.0], op: ConstraintOp::Ge, rhs: 0.9 };
        let x = project_simplex_slice(&[0.5, 0.5], &[c.clone()], 1e-9).unwrap();
        assert!(c.satisfied(&x, 1e-9));
        assert!((x[0] - 0.9).abs() < 1e-8);
    }
}
