//! A dense dictionary-form simplex solver.
//!
//! Solves `max c'x  s.t.  Ax <= b, x >= 0` with `b >= 0`, so the all-slack
//! dictionary is feasible and no phase-1 is needed. The tableau keeps only
//! the structural columns (m x (n+1) storage), which keeps the
//! pairwise-constraint polytopes of the dual-Lipschitz program affordable.

use crate::error::{RaredynError, Result};

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TOL: f64 = 1e-12;

pub struct SimplexSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// Deterministic pivoting: largest reduced cost with lowest-index ties,
/// switching to Bland's rule after a pivot budget to rule out cycling.
pub fn maximize(c: &[f64], rows: &[Vec<f64>], b: &[f64]) -> Result<SimplexSolution> {
    let n = c.len();
    let m = rows.len();
    assert_eq!(b.len(), m);
    debug_assert!(b.iter().all(|&v| v >= 0.0));

    // tab[i] = [coeffs over nonbasic vars..., const]; basic_i = const - sum coeff*nonbasic
    let mut tab: Vec<Vec<f64>> = rows
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    // Objective in the same row convention: z = zrow[n] - sum zrow[j]*nonbasic_j,
    // so zrow starts as [-c, 0] and pivots like an ordinary row.
    let mut zrow: Vec<f64> = c.iter().map(|v| -v).collect();
    zrow.push(0.0);

    // Labels: 0..n structural, n..n+m slack.
    let mut nonbasic: Vec<usize> = (0..n).collect();
    let mut basic: Vec<usize> = (n..n + m).collect();

    let budget = 20 * (n + m) + 200;
    let mut iter = 0usize;
    loop {
        iter += 1;
        let bland = iter > budget;
        // Entering column: reduced cost -zrow[j] must be positive.
        let mut enter: Option<usize> = None;
        if bland {
            let mut best_label = usize::MAX;
            for (j, &zj) in zrow[..n].iter().enumerate() {
                if zj < -PIVOT_TOL && nonbasic[j] < best_label {
                    best_label = nonbasic[j];
                    enter = Some(j);
                }
            }
        } else {
            let mut best = -PIVOT_TOL;
            for (j, &zj) in zrow[..n].iter().enumerate() {
                if zj < best {
                    best = zj;
                    enter = Some(j);
                }
            }
        }
        let Some(e) = enter else {
            break;
        };

        // Ratio test; ties to the lowest basic label.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab[i][e];
            if a > RATIO_TOL {
                let ratio = tab[i][n] / a;
                let better = ratio < best_ratio - RATIO_TOL
                    || (ratio < best_ratio + RATIO_TOL
                        && leave.map_or(true, |l| basic[i] < basic[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else {
            return Err(RaredynError::SolveFailed { what: "simplex: unbounded program".into() });
        };

        pivot(&mut tab, &mut zrow, n, l, e);
        std::mem::swap(&mut basic[l], &mut nonbasic[e]);

        if iter > 4 * budget {
            return Err(RaredynError::SolveFailed { what: "simplex: pivot budget exhausted".into() });
        }
    }

    let mut x = vec![0.0; n];
    for (i, &label) in basic.iter().enumerate() {
        if label < n {
            x[label] = tab[i][n];
        }
    }
    Ok(SimplexSolution { objective: zrow[n], x })
}

fn pivot(tab: &mut [Vec<f64>], zrow: &mut [f64], n: usize, l: usize, e: usize) {
    let a_le = tab[l][e];
    let inv = 1.0 / a_le;
    // Rewrite the pivot row for the entering variable.
    for v in tab[l].iter_mut() {
        *v *= inv;
    }
    tab[l][e] = inv;
    // Eliminate the entering variable from the other rows and the objective.
    for i in 0..tab.len() {
        if i == l {
            continue;
        }
        let factor = tab[i][e];
        if factor == 0.0 {
            continue;
        }
        for j in 0..=n {
            if j == e {
                continue;
            }
            tab[i][j] -= factor * tab[l][j];
        }
        tab[i][e] = -factor * inv;
    }
    let factor = zrow[e];
    if factor != 0.0 {
        for j in 0..=n {
            if j == e {
                continue;
            }
            zrow[j] -= factor * tab[l][j];
        }
        zrow[e] = -factor * inv;
    }
}
