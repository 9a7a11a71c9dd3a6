//! Metrics on finitely supported probability measures and Lipschitz
//! function extension.

pub mod simplex;

use crate::error::{RaredynError, Result};
use crate::measure::DiscreteMeasure;

/// Cap on the union support of the dual-Lipschitz program: the constraint
/// count grows quadratically in the atom count.
pub const DUAL_LIPSCHITZ_MAX_ATOMS: usize = 64;

/// Outcome of the dual-Lipschitz linear program.
///
/// `witness` holds the optimal test function on `support` (the collapsed
/// union of both supports); it satisfies `||f||_inf + Lip(f) <= 1` and
/// attains `distance = <f, mu> - <f, nu>`.
#[derive(Debug, Clone)]
pub struct DualLipschitzResult<P> {
    pub distance: f64,
    pub support: Vec<P>,
    pub witness: Vec<f64>,
}

/// Dual-Lipschitz distance `sup { <f, mu-nu> : ||f||_inf + Lip(f) <= 1 }`.
///
/// The split of the unit budget between the sup-norm share `s` and the
/// Lipschitz share `1 - s` is jointly linear after substituting
/// `g_i = f_i + s >= 0`, so the whole problem is one LP:
/// maximize `sum w_i g_i` subject to `g_i <= 2s`,
/// `g_i - g_j + d_ij s <= d_ij` and `s <= 1`.
pub fn dual_lipschitz<P: Clone + PartialEq>(
    mu: &DiscreteMeasure<P>,
    nu: &DiscreteMeasure<P>,
    metric: impl Fn(&P, &P) -> f64,
) -> Result<DualLipschitzResult<P>> {
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if !m.is_probability() {
            return Err(RaredynError::InvalidMeasure {
                reason: format!("{name} has mass {}", m.mass()),
            });
        }
    }
    // Collapse the union support: atoms at metric distance 0 merge.
    let mut support: Vec<P> = Vec::new();
    let mut w_mu: Vec<f64> = Vec::new();
    let mut w_nu: Vec<f64> = Vec::new();
    let absorb = |m: &DiscreteMeasure<P>, into_mu: bool, support: &mut Vec<P>, w_mu: &mut Vec<f64>, w_nu: &mut Vec<f64>| -> Result<()> {
        for (p, &w) in m.support.iter().zip(&m.weights) {
            let mut slot = None;
            for (i, q) in support.iter().enumerate() {
                let d = metric(p, q);
                if !d.is_finite() || d < 0.0 {
                    return Err(RaredynError::MetricDegenerate { a: i, b: support.len() });
                }
                if d == 0.0 {
                    slot = Some(i);
                    break;
                }
            }
            let i = match slot {
                Some(i) => i,
                None => {
                    support.push(p.clone());
                    w_mu.push(0.0);
                    w_nu.push(0.0);
                    support.len() - 1
                }
            };
            if into_mu {
                w_mu[i] += w;
            } else {
                w_nu[i] += w;
            }
        }
        Ok(())
    };
    absorb(mu, true, &mut support, &mut w_mu, &mut w_nu)?;
    absorb(nu, false, &mut support, &mut w_mu, &mut w_nu)?;

    let k = support.len();
    if k > DUAL_LIPSCHITZ_MAX_ATOMS {
        return Err(RaredynError::TooLarge {
            what: format!("dual-Lipschitz union support has {k} atoms (cap {DUAL_LIPSCHITZ_MAX_ATOMS})"),
        });
    }
    let w: Vec<f64> = w_mu.iter().zip(&w_nu).map(|(a, b)| a - b).collect();
    if k <= 1 {
        return Ok(DualLipschitzResult { distance: 0.0, support, witness: vec![0.0; k] });
    }

    // Variables: g_0..g_{k-1}, s.
    let n = k + 1;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k * k + 1);
    let mut rhs: Vec<f64> = Vec::with_capacity(k * k + 1);
    for i in 0..k {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        row[k] = -2.0;
        rows.push(row);
        rhs.push(0.0);
    }
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = metric(&support[i], &support[j]);
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row[j] = -1.0;
            row[k] = d;
            rows.push(row);
            rhs.push(d);
        }
    }
    let mut row = vec![0.0; n];
    row[k] = 1.0;
    rows.push(row);
    rhs.push(1.0);

    let mut c = w.clone();
    c.push(0.0);
    let sol = simplex::maximize(&c, &rows, &rhs)?;
    let s = sol.x[k];
    let witness: Vec<f64> = (0..k).map(|i| sol.x[i] - s).collect();
    Ok(DualLipschitzResult { distance: sol.objective.max(0.0), support, witness })
}

/// Total variation distance `1/2 sum |mu(x) - nu(x)|` over the union support.
pub fn total_variation<P: Clone + PartialEq>(
    mu: &DiscreteMeasure<P>,
    nu: &DiscreteMeasure<P>,
) -> f64 {
    let mut acc = 0.0;
    for (p, &w) in mu.support.iter().zip(&mu.weights) {
        acc += (w - nu.weight_of(p)).abs();
    }
    for (p, &w) in nu.support.iter().zip(&nu.weights) {
        if !mu.support.iter().any(|q| q == p) {
            acc += w.abs();
        }
    }
    0.5 * acc
}

/// McShane extension of `f` from the subset `subset` (indices into a finite
/// point set of size `n`) to all of `0..n`:
/// `F(x) = clamp( min_y f(y) + Lip(f;Y) d(x,y), [min_Y f, max_Y f] )`.
///
/// The extension restricts to `f` on the subset and preserves the Lipschitz
/// constant, which is re-verified by exhaustion.
pub fn mcshane_extend(
    subset: &[usize],
    f: &[f64],
    n: usize,
    metric: impl Fn(usize, usize) -> f64,
) -> Result<Vec<f64>> {
    if subset.is_empty() {
        return Err(RaredynError::EmptySubset);
    }
    assert_eq!(subset.len(), f.len());
    let mut lip: f64 = 0.0;
    for (a, &ya) in subset.iter().enumerate() {
        for (b, &yb) in subset.iter().enumerate().skip(a + 1) {
            let d = metric(ya, yb);
            if d > 0.0 {
                lip = lip.max((f[a] - f[b]).abs() / d);
            }
        }
    }
    let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; n];
    for (x, slot) in out.iter_mut().enumerate() {
        let mut val = f64::INFINITY;
        for (a, &ya) in subset.iter().enumerate() {
            val = val.min(f[a] + lip * metric(x, ya));
        }
        *slot = val.clamp(lo, hi);
    }
    // Exhaustive check that the extension kept the Lipschitz constant.
    let mut lip_out: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric(i, j);
            if d > 0.0 {
                lip_out = lip_out.max((out[i] - out[j]).abs() / d);
            }
        }
    }
    if lip_out > lip + 1e-9 * (1.0 + lip) {
        return Err(RaredynError::SolveFailed {
            what: format!("McShane extension increased Lip from {lip} to {lip_out}"),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::KickStream;

    /// Analytic optimum of the two-Dirac program: max over the budget split
    /// of min(L d, 2(1-L)) is 2d/(d+2).
    fn two_dirac_oracle(d: f64) -> f64 {
        2.0 * d / (d + 2.0)
    }

    fn line_metric(a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let m = DiscreteMeasure::new(vec![0.0f64, 1.0], vec![0.4, 0.6]).unwrap();
        let r = dual_lipschitz(&m, &m, line_metric).unwrap();
        assert!(r.distance.abs() < 1e-12);
    }

    #[test]
    fn two_diracs_match_analytic_value() {
        let mu = DiscreteMeasure::dirac(0.0f64);
        let nu = DiscreteMeasure::dirac(2.0f64);
        let r = dual_lipschitz(&mu, &nu, line_metric).unwrap();
        assert!((r.distance - 1.0).abs() < 1e-9, "got {}", r.distance);
    }

    #[test]
    fn mixture_against_dirac() {
        let mu = DiscreteMeasure::new(vec![0.0f64, 1.0], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::dirac(0.0f64);
        let r = dual_lipschitz(&mu, &nu, line_metric).unwrap();
        assert!((r.distance - 1.0 / 3.0).abs() < 1e-9, "got {}", r.distance);
    }

    #[test]
    fn dirac_pairs_hit_analytic_optimum_for_random_distances() {
        let stream = KickStream::new(99, 0);
        for k in 0..50 {
            let d = 10.0 * stream.uniform(k, 0).max(1e-3);
            let mu = DiscreteMeasure::dirac(0.0f64);
            let nu = DiscreteMeasure::dirac(d);
            let r = dual_lipschitz(&mu, &nu, line_metric).unwrap();
            assert!(
                (r.distance - two_dirac_oracle(d)).abs() < 1e-9,
                "d={d}: {} vs {}",
                r.distance,
                two_dirac_oracle(d)
            );
        }
    }

    #[test]
    fn witness_is_feasible_and_attains_distance() {
        let stream = KickStream::new(7, 0);
        for case in 0..200 {
            let k = 2 + (stream.bits(case, 0) % 5) as usize;
            let pts: Vec<f64> = (0..k).map(|i| stream.uniform(case, 10 + i as u64) * 5.0).collect();
            let mut wa: Vec<f64> = (0..k).map(|i| stream.uniform(case, 20 + i as u64)).collect();
            let mut wb: Vec<f64> = (0..k).map(|i| stream.uniform(case, 40 + i as u64)).collect();
            let sa: f64 = wa.iter().sum();
            let sb: f64 = wb.iter().sum();
            wa.iter_mut().for_each(|w| *w /= sa);
            wb.iter_mut().for_each(|w| *w /= sb);
            let mu = DiscreteMeasure { support: pts.clone(), weights: wa };
            let nu = DiscreteMeasure { support: pts.clone(), weights: wb };
            let r = match dual_lipschitz(&mu, &nu, line_metric) {
                Ok(r) => r,
                Err(_) => continue, // coincident random points collapse is fine
            };
            let f = &r.witness;
            let sup = f.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            let mut lip: f64 = 0.0;
            for i in 0..r.support.len() {
                for j in (i + 1)..r.support.len() {
                    let d = line_metric(&r.support[i], &r.support[j]);
                    if d > 0.0 {
                        lip = lip.max((f[i] - f[j]).abs() / d);
                    }
                }
            }
            assert!(sup + lip <= 1.0 + 1e-9, "budget violated: {} + {}", sup, lip);
            let attained: f64 = (0..r.support.len())
                .map(|i| f[i] * (mu.weight_of(&r.support[i]) - nu.weight_of(&r.support[i])))
                .sum();
            assert!((attained - r.distance).abs() < 1e-9);
        }
    }

    /// dual-Lipschitz <= 2 TV and <= diam * 2 TV on random pairs.
    #[test]
    fn dominated_by_total_variation_bounds() {
        let stream = KickStream::new(31337, 0);
        for case in 0..1000 {
            let k = 2 + (stream.bits(case, 0) % 5) as usize;
            let pts: Vec<f64> = (0..k)
                .map(|i| 10.0 * stream.uniform(case, 100 + i as u64) + i as f64 * 1e-6)
                .collect();
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect::<Vec<_>>()
            };
            let wa = norm((0..k).map(|i| stream.uniform(case, 200 + i as u64) + 1e-9).collect());
            let wb = norm((0..k).map(|i| stream.uniform(case, 300 + i as u64) + 1e-9).collect());
            let mu = DiscreteMeasure { support: pts.clone(), weights: wa };
            let nu = DiscreteMeasure { support: pts.clone(), weights: wb };
            let r = dual_lipschitz(&mu, &nu, line_metric).unwrap();
            let tv = total_variation(&mu, &nu);
            let diam = pts
                .iter()
                .flat_map(|a| pts.iter().map(move |b| (a - b).abs()))
                .fold(0.0f64, f64::max);
            assert!(r.distance <= 2.0 * tv + 1e-9);
            assert!(r.distance <= diam.max(1.0) * 2.0 * tv + 1e-9);
        }
    }

    #[test]
    fn total_variation_examples() {
        let mu = DiscreteMeasure::new(vec![0usize, 1], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![0usize, 1], vec![0.8, 0.2]).unwrap();
        assert!((total_variation(&mu, &nu) - 0.3).abs() < 1e-15);
        assert_eq!(total_variation(&mu, &mu), 0.0);
        let dx = DiscreteMeasure::dirac(0usize);
        let dy = DiscreteMeasure::dirac(1usize);
        assert_eq!(total_variation(&dx, &dy), 1.0);
    }

    #[test]
    fn mcshane_single_point_is_constant() {
        let metric = |i: usize, j: usize| (i as f64 - j as f64).abs();
        let out = mcshane_extend(&[1], &[3.5], 4, metric).unwrap();
        assert_eq!(out, vec![3.5; 4]);
    }

    #[test]
    fn mcshane_full_subset_is_identity() {
        let metric = |i: usize, j: usize| (i as f64 - j as f64).abs();
        let f = vec![0.0, 2.0, 1.0];
        let out = mcshane_extend(&[0, 1, 2], &f, 3, metric).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn mcshane_interpolates_line_example() {
        let metric = |i: usize, j: usize| (i as f64 - j as f64).abs();
        let out = mcshane_extend(&[0, 2], &[0.0, 2.0], 3, metric).unwrap();
        assert!((out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mcshane_range_stays_inside_subset_range() {
        let stream = KickStream::new(5150, 0);
        let metric = |i: usize, j: usize| (i as f64 - j as f64).abs();
        for case in 0..200 {
            let n = 3 + (stream.bits(case, 0) % 6) as usize;
            let ysize = 1 + (stream.bits(case, 1) % n as u64) as usize;
            let subset: Vec<usize> = (0..ysize).collect();
            let f: Vec<f64> = (0..ysize).map(|i| 4.0 * stream.symmetric(case, 2 + i as u64)).collect();
            let out = mcshane_extend(&subset, &f, n, metric).unwrap();
            let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in out {
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn empty_subset_is_an_error() {
        let metric = |i: usize, j: usize| (i as f64 - j as f64).abs();
        assert!(matches!(mcshane_extend(&[], &[], 3, metric), Err(RaredynError::EmptySubset)));
    }
}
