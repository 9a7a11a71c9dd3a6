//! Executable coupling constructions: total-variation-optimal coupling of
//! discrete laws, squeezing verification, and the dissipative contraction
//! toy model.

use serde::Serialize;

use crate::error::{RaredynError, Result};
use crate::measure::DiscreteMeasure;
use crate::metrics::total_variation;
use crate::rds::RdsModel;
use crate::rng::KickStream;

/// Parameters of a squeezing hypothesis check: contraction factor `q` and
/// the failure bound `g(r) = slope * r` (every use of the bound here is
/// linear, so only the linear family is configurable).
#[derive(Debug, Clone, Serialize)]
pub struct CouplingSpec {
    pub q: f64,
    pub g_slope: f64,
}

impl CouplingSpec {
    pub fn new(q: f64, g_slope: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) || g_slope < 0.0 {
            return Err(RaredynError::Config("need q in [0,1) and g slope >= 0".into()));
        }
        Ok(CouplingSpec { q, g_slope })
    }

    pub fn g(&self, r: f64) -> f64 {
        self.g_slope * r
    }

    /// Decay order of the failure bound along the squeezing ray:
    /// `-limsup (1/k) log g(q^k)`, computed as the negated least-squares
    /// slope of `k -> log g(q^k)`. For the linear family the data is affine
    /// in `k`, so the fit is exact: the slope is `log q` and the decay order
    /// is `log(1/q)`.
    pub fn delta1(&self) -> Option<f64> {
        if self.g_slope == 0.0 || self.q == 0.0 {
            return None; // g(q^k) identically 0: infinite decay order
        }
        let ks: Vec<f64> = (0..=20).map(|k| k as f64).collect();
        let logs: Vec<f64> = ks.iter().map(|&k| self.g(self.q.powf(k)).ln()).collect();
        let m = ks.len() as f64;
        let sx: f64 = ks.iter().sum();
        let sxx: f64 = ks.iter().map(|k| k * k).sum();
        let sy: f64 = logs.iter().sum();
        let sxy: f64 = ks.iter().zip(&logs).map(|(k, l)| k * l).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        Some(-slope)
    }
}

/// A sampler of pairs `(X, X')` with marginals `mu`, `nu` and
/// `P(X != X') = total_variation(mu, nu)` exactly: draw from the overlap
/// `min(mu, nu)` with probability `1 - TV`, else from the normalized
/// residuals independently.
pub struct MaximalCoupling {
    support_mu: Vec<usize>,
    support_nu: Vec<usize>,
    overlap_cdf: Vec<f64>,
    residual_mu_cdf: Vec<f64>,
    residual_nu_cdf: Vec<f64>,
    pub tv: f64,
    stream: KickStream,
}

/// Build the maximal coupling of two laws over a common finite support of
/// state indices.
pub fn maximal_coupling(
    mu: &DiscreteMeasure<usize>,
    nu: &DiscreteMeasure<usize>,
    seed: u64,
) -> Result<MaximalCoupling> {
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if !m.is_probability() {
            return Err(RaredynError::InvalidMeasure { reason: format!("{name} not normalized") });
        }
    }
    let states: Vec<usize> = {
        let mut s: Vec<usize> = mu.support.iter().chain(nu.support.iter()).cloned().collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let wm: Vec<f64> = states.iter().map(|s| mu.weight_of(s)).collect();
    let wn: Vec<f64> = states.iter().map(|s| nu.weight_of(s)).collect();
    let overlap: Vec<f64> = wm.iter().zip(&wn).map(|(a, b)| a.min(*b)).collect();
    let tv = total_variation(mu, nu);

    let cdf = |w: &[f64]| -> Vec<f64> {
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        w.iter()
            .map(|v| {
                acc += if total > 0.0 { v / total } else { 0.0 };
                acc
            })
            .collect()
    };
    let res_mu: Vec<f64> = wm.iter().zip(&overlap).map(|(a, o)| a - o).collect();
    let res_nu: Vec<f64> = wn.iter().zip(&overlap).map(|(a, o)| a - o).collect();
    Ok(MaximalCoupling {
        support_mu: states.clone(),
        support_nu: states,
        overlap_cdf: cdf(&overlap),
        residual_mu_cdf: cdf(&res_mu),
        residual_nu_cdf: cdf(&res_nu),
        tv,
        stream: KickStream::new(seed, 0),
    })
}

impl MaximalCoupling {
    /// The `i`-th coupled pair of the stream.
    pub fn draw(&self, i: u64) -> (usize, usize) {
        let u = self.stream.uniform(i, 0);
        if u < 1.0 - self.tv || self.tv == 0.0 {
            let v = self.stream.uniform(i, 1);
            let x = pick(&self.overlap_cdf, v);
            (self.support_mu[x], self.support_nu[x])
        } else {
            let x = pick(&self.residual_mu_cdf, self.stream.uniform(i, 2));
            let y = pick(&self.residual_nu_cdf, self.stream.uniform(i, 3));
            (self.support_mu[x], self.support_nu[y])
        }
    }
}

fn pick(cdf: &[f64], u: f64) -> usize {
    for (i, &c) in cdf.iter().enumerate() {
        if u < c {
            return i;
        }
    }
    cdf.len() - 1
}

/// One row of a squeezing report: the estimated probability that a coupled
/// one-step pair expands beyond `q * d(x, x')`, against the bound `g(d)`.
#[derive(Debug, Clone, Serialize)]
pub struct SqueezingRow {
    pub dx: f64,
    pub q_dx: f64,
    pub p_hat: f64,
    pub se: f64,
    pub g_dx: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SqueezingReport {
    pub rows: Vec<SqueezingRow>,
    pub all_pass: bool,
    /// Largest `p_hat - (g_dx + 3 se)` over the grid; negative means the
    /// bound holds with margin everywhere.
    pub worst_margin: f64,
}

/// Verify the squeezing bound `P(d(step pair) > q d(x,x')) <= g(d(x,x'))`
/// on a grid of start pairs, using the identical-kick coupling.
pub fn squeezing_verify<M: RdsModel>(
    model: &M,
    spec: &CouplingSpec,
    pair_grid: &[(M::State, M::State)],
    samples: usize,
    seed: u64,
) -> Result<SqueezingReport> {
    let mut rows = Vec::with_capacity(pair_grid.len());
    let mut worst = f64::NEG_INFINITY;
    for (idx, (x, y)) in pair_grid.iter().enumerate() {
        let dx = model.distance(x, y);
        let mut hits = 0usize;
        for s in 0..samples {
            let stream = KickStream::new(seed, (idx * samples + s) as u64);
            let kick = model.sample_kick(&stream, 0);
            let x1 = model.step(x, &kick)?;
            let y1 = model.step(y, &kick)?;
            // Relative epsilon so rounding in the coupled steps cannot turn
            // an exact contraction into a spurious expansion event.
            if model.distance(&x1, &y1) > spec.q * dx * (1.0 + 1e-12) {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / samples as f64;
        let se = (p_hat * (1.0 - p_hat) / samples as f64).sqrt();
        let g_dx = spec.g(dx);
        let pass = p_hat <= g_dx + 3.0 * se;
        worst = worst.max(p_hat - (g_dx + 3.0 * se));
        rows.push(SqueezingRow { dx, q_dx: spec.q * dx, p_hat, se, g_dx, pass });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(SqueezingReport { rows, all_pass, worst_margin: worst })
}

/// The dissipative contraction toy standing in for the fluid application:
/// `S(u, kick) = contraction * u + gain * kick` on R^dim with kicks uniform
/// in a sup-norm ball. The attainable set from the origin is the ball of
/// radius `gain * kick_bound / (1 - contraction)`, which is exposed as the
/// attracting compactum.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionToy {
    pub contraction: f64,
    pub gain: f64,
    pub kick_bound: f64,
    pub dim: usize,
}

/// Build the toy model; the realized dissipation constant equals the
/// contraction factor because the step map is linear.
pub fn contraction_toy(contraction: f64, gain: f64, kick_bound: f64, dim: usize) -> Result<ContractionToy> {
    if !(0.0..1.0).contains(&contraction) || gain < 0.0 || kick_bound < 0.0 || dim == 0 {
        return Err(RaredynError::Config(
            "need contraction in (0,1), nonnegative gain and kick bound, dim >= 1".into(),
        ));
    }
    Ok(ContractionToy { contraction, gain, kick_bound, dim })
}

impl ContractionToy {
    /// Radius of the attainable ball from the origin.
    pub fn attainable_radius(&self) -> f64 {
        self.gain * self.kick_bound / (1.0 - self.contraction)
    }

    pub fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl RdsModel for ContractionToy {
    type State = Vec<f64>;
    type Kick = Vec<f64>;

    fn sample_kick(&self, stream: &KickStream, step: u64) -> Vec<f64> {
        // Uniform in the L2 ball of radius kick_bound via per-coordinate
        // uniforms scaled to keep the norm within the bound.
        let scale = self.kick_bound / (self.dim as f64).sqrt();
        (0..self.dim).map(|lane| scale * stream.symmetric(step, lane as u64)).collect()
    }

    fn step(&self, x: &Vec<f64>, kick: &Vec<f64>) -> crate::error::Result<Vec<f64>> {
        let next: Vec<f64> = x
            .iter()
            .zip(kick)
            .map(|(xi, ki)| self.contraction * xi + self.gain * ki)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(RaredynError::NumericalBlowup { step: 0 });
        }
        Ok(next)
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn dist_to_attractor(&self, x: &Vec<f64>) -> Option<f64> {
        Some((Self::norm(x) - self.attainable_radius()).max(0.0))
    }

    fn anchor(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::simulate_trajectory;

    #[test]
    fn identical_laws_never_mismatch() {
        let m = DiscreteMeasure::new(vec![0usize, 1], vec![0.5, 0.5]).unwrap();
        let c = maximal_coupling(&m, &m, 1).unwrap();
        for i in 0..2000 {
            let (x, y) = c.draw(i);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn disjoint_supports_always_mismatch() {
        let mu = DiscreteMeasure::dirac(0usize);
        let nu = DiscreteMeasure::dirac(1usize);
        let c = maximal_coupling(&mu, &nu, 2).unwrap();
        for i in 0..2000 {
            let (x, y) = c.draw(i);
            assert_ne!(x, y);
        }
    }

    /// Empirical mismatch frequency within 3 SE of TV = 0.3 over 1e5 draws,
    /// and empirical marginals within 3 SE of mu and nu.
    #[test]
    fn mismatch_frequency_matches_total_variation() {
        let mu = DiscreteMeasure::new(vec![0usize, 1], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![0usize, 1], vec![0.8, 0.2]).unwrap();
        let c = maximal_coupling(&mu, &nu, 3).unwrap();
        let n = 100_000u64;
        let mut mismatch = 0u64;
        let mut mu_zero = 0u64;
        let mut nu_zero = 0u64;
        for i in 0..n {
            let (x, y) = c.draw(i);
            if x != y {
                mismatch += 1;
            }
            if x == 0 {
                mu_zero += 1;
            }
            if y == 0 {
                nu_zero += 1;
            }
        }
        let freq = mismatch as f64 / n as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.3).abs() < 3.0 * se, "freq {freq}");
        let se_mu = (0.5f64 * 0.5 / n as f64).sqrt();
        assert!((mu_zero as f64 / n as f64 - 0.5).abs() < 3.0 * se_mu);
        let se_nu = (0.8f64 * 0.2 / n as f64).sqrt();
        assert!((nu_zero as f64 / n as f64 - 0.8).abs() < 3.0 * se_nu);
    }

    /// No feasible coupling can mismatch less than the total variation:
    /// for any transport plan gamma, P(X != X') = 1 - trace(gamma)
    /// >= 1 - sum min(mu, nu) = TV.
    #[test]
    fn no_random_coupling_beats_the_maximal_one() {
        let stream = KickStream::new(77, 0);
        for case in 0..1000 {
            let k = 2 + (stream.bits(case, 0) % 4) as usize;
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect::<Vec<_>>()
            };
            let mu = norm((0..k).map(|i| stream.uniform(case, 1 + i as u64) + 1e-6).collect());
            let nu = norm((0..k).map(|i| stream.uniform(case, 30 + i as u64) + 1e-6).collect());
            // Random feasible plan: mixture of independent coupling and the
            // overlap-diagonal plan, with a random mixing weight.
            let t = stream.uniform(case, 99);
            let overlap: Vec<f64> = mu.iter().zip(&nu).map(|(a, b)| a.min(*b)).collect();
            let tv: f64 = 1.0 - overlap.iter().sum::<f64>();
            let mut trace = 0.0;
            for i in 0..k {
                let independent = mu[i] * nu[i];
                let diag = overlap[i];
                trace += (1.0 - t) * independent + t * diag;
            }
            let mismatch = 1.0 - trace;
            assert!(mismatch >= tv - 1e-12, "case {case}: {mismatch} < {tv}");
        }
    }

    #[test]
    fn delta1_of_linear_bound_is_log_inverse_q() {
        let spec = CouplingSpec::new(0.5, 2.0 * 3.7).unwrap();
        let d1 = spec.delta1().unwrap();
        assert!((d1 - 2.0f64.ln()).abs() < 1e-12, "{d1}");
        let spec2 = CouplingSpec::new(0.25, 0.01).unwrap();
        assert!((spec2.delta1().unwrap() - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn contraction_toy_decays_without_kicks() {
        let toy = contraction_toy(0.5, 0.0, 0.0, 3).unwrap();
        let x0 = vec![1.0, 0.0, 0.0];
        let traj = simulate_trajectory(&toy, x0, 10, 5).unwrap();
        let last = ContractionToy::norm(traj.states.last().unwrap());
        assert!((last - 2.0f64.powi(-10)).abs() < 1e-18);
    }

    /// Fixed point of r -> contraction r + gain * bound: trajectories enter
    /// the attainable ball and never leave.
    #[test]
    fn trajectories_are_absorbed_into_the_ball() {
        let toy = contraction_toy(0.5, 1.0, 1.0, 2).unwrap();
        assert_eq!(toy.attainable_radius(), 2.0);
        let x0 = vec![10.0, 0.0];
        let traj = simulate_trajectory(&toy, x0, 60, 11).unwrap();
        let mut inside = false;
        for s in &traj.states {
            let n = ContractionToy::norm(s);
            if inside {
                assert!(n <= 2.0 + 1e-12, "left the ball: {n}");
            } else if n <= 2.0 {
                inside = true;
            }
        }
        assert!(inside, "never entered the attainable ball");
    }

    /// Attainable sets grow with the horizon: a point reached at step j is
    /// reachable at any later step by prepending zero kicks at the fixed
    /// point, so the sampled hull radius is the cumulative running maximum,
    /// and it climbs towards (without crossing) the attainable radius.
    #[test]
    fn attainable_radius_grows_with_horizon() {
        let toy = contraction_toy(0.5, 1.0, 1.0, 1).unwrap();
        let steps = 8usize;
        let mut hull = vec![0.0f64; steps];
        for id in 0..4000 {
            let traj = simulate_trajectory(&toy, vec![0.0], steps, 1000 + id).unwrap();
            let mut running = 0.0f64;
            for (k, s) in traj.states.iter().enumerate() {
                running = running.max(ContractionToy::norm(s));
                hull[k] = hull[k].max(running);
            }
        }
        for w in hull.windows(2) {
            assert!(w[1] >= w[0], "attainable hull shrank: {w:?}");
        }
        assert!(hull[steps - 1] > hull[0] + 0.1, "hull never grew: {hull:?}");
        let radius = toy.attainable_radius();
        assert!(hull[steps - 1] <= radius + 1e-12);
        assert!(hull[steps - 1] > 0.8 * radius, "sampled hull too small: {}", hull[steps - 1]);
    }

    /// Pathwise contraction: with identical kicks the squeezing event never
    /// fails at q = contraction, g = 0.
    #[test]
    fn identical_kick_squeezing_holds_with_zero_bound() {
        let toy = contraction_toy(0.5, 1.0, 1.0, 2).unwrap();
        let spec = CouplingSpec::new(0.5, 0.0).unwrap();
        let grid: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0, 0.0], vec![0.0, 0.0]),
            (vec![2.0, 1.0], vec![-1.0, 0.5]),
            (vec![0.1, -0.2], vec![0.1, 0.3]),
        ];
        let report = squeezing_verify(&toy, &spec, &grid, 2000, 17).unwrap();
        assert!(report.all_pass);
        for row in &report.rows {
            assert_eq!(row.p_hat, 0.0);
        }
    }

    /// With q below the true contraction factor the expansion event is
    /// deterministic, so violations are reported.
    #[test]
    fn undershooting_q_reports_violations() {
        let toy = contraction_toy(0.5, 1.0, 1.0, 2).unwrap();
        let spec = CouplingSpec::new(0.4, 0.0).unwrap();
        let grid = vec![(vec![1.0, 0.0], vec![0.0, 0.0])];
        let report = squeezing_verify(&toy, &spec, &grid, 500, 23).unwrap();
        assert!(!report.all_pass);
        assert_eq!(report.rows[0].p_hat, 1.0);
    }
}
