//! Seeded, reproducibly parallel Monte Carlo: rare-event estimation (naive
//! and tilted), mixing-decay estimation, CLT checks, and diagnostics for the
//! attraction, irreducibility and tightness hypotheses.
//!
//! Every driver keys its randomness by `(master seed, trajectory id, step)`
//! and reduces per-trajectory results in trajectory-id order, so estimates
//! are bitwise identical no matter how many workers run them.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::perron::perron_triple;
use crate::engine::tilted::TiltedKernel;
use crate::error::{RaredynError, Result};
use crate::measure::{DiscreteMeasure, Potential};
use crate::metrics::{dual_lipschitz, DUAL_LIPSCHITZ_MAX_ATOMS};
use crate::oracle::OccupationEvent;
use crate::rds::{simulate_stream, ChainRds, RdsModel};
use crate::rng::KickStream;
use crate::FiniteMarkovKernel;

#[derive(Debug, Clone, Serialize)]
pub struct WeightsSummary {
    pub min: f64,
    pub max: f64,
    /// Effective number of hits: `(sum w)^2 / sum w^2` over the weights of
    /// the samples that satisfy the event. This is the count comparable to
    /// a naive estimator's raw hit count.
    pub effective_sample_size: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RareEventEstimate {
    pub point_estimate: f64,
    pub standard_error: f64,
    pub sample_count: usize,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_summary: Option<WeightsSummary>,
}

/// Fraction of trajectories whose occupation counts satisfy the event,
/// with the binomial standard error.
pub fn rare_event_naive(
    model: &ChainRds,
    x0: usize,
    n: usize,
    event: &OccupationEvent,
    samples: usize,
    seed: u64,
) -> Result<RareEventEstimate> {
    let n_states = model.kernel.len();
    let hits: Vec<bool> = (0..samples)
        .into_par_iter()
        .map(|id| {
            let traj = simulate_stream(model, x0, n, seed, id as u64).expect("finite chain step");
            let mut counts = vec![0u64; n_states];
            for &s in &traj.states {
                counts[s] += 1;
            }
            event.matches(&counts, n as u64)
        })
        .collect();
    let hit_count = hits.iter().filter(|&&h| h).count();
    let p = hit_count as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    Ok(RareEventEstimate {
        point_estimate: p,
        standard_error: se,
        sample_count: samples,
        method: "naive",
        weights_summary: None,
    })
}

/// The target-sampling kernel of a tilt: `pi_V(x,y) = pi(x,y) e^{V(y)} h(y)
/// / (lambda h(x))`, a proper Markov kernel by the eigenvector identity.
pub fn h_transform_kernel(
    kernel: &FiniteMarkovKernel,
    v: &Potential,
) -> Result<(FiniteMarkovKernel, crate::engine::PerronTriple)> {
    let tk = TiltedKernel::new(kernel, v)?;
    let triple = perron_triple(&tk)?;
    let n = kernel.len();
    let mut rows = Vec::with_capacity(n);
    for x in 0..n {
        let mut row: Vec<f64> = (0..n)
            .map(|y| tk.matrix[x][y] * triple.h[y] / (triple.lambda * triple.h[x]))
            .collect();
        let s: f64 = row.iter().sum();
        // The eigenvector identity makes s = 1 up to solver tolerance;
        // normalize away the residual so the kernel invariant holds exactly.
        row.iter_mut().for_each(|p| *p /= s);
        rows.push(row);
    }
    let transformed = FiniteMarkovKernel::new(kernel.states.clone(), rows)?;
    Ok((transformed, triple))
}

/// Importance-sampled rare-event probability under the tilted dynamics.
///
/// Trajectories are drawn from the transformed kernel; each carries the
/// exact weight `lambda^n h(x0)/h(x_n) e^{-sum V(x_k)}`, making the weighted
/// indicator mean an unbiased estimator of the naive probability.
pub fn rare_event_tilted(
    kernel: &FiniteMarkovKernel,
    v: &Potential,
    x0: usize,
    n: usize,
    event: &OccupationEvent,
    samples: usize,
    seed: u64,
) -> Result<RareEventEstimate> {
    let (transformed, triple) = h_transform_kernel(kernel, v)?;
    let model = ChainRds::new(transformed);
    let n_states = kernel.len();
    let log_lambda = triple.lambda.ln();
    let log_h: Vec<f64> = triple.h.iter().map(|h| h.ln()).collect();

    let contributions: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|id| {
            let traj = simulate_stream(&model, x0, n, seed, id as u64).expect("finite chain step");
            let mut counts = vec![0u64; n_states];
            let mut v_sum = 0.0;
            for &s in &traj.states {
                counts[s] += 1;
                v_sum += v.values[s];
            }
            let last = *traj.states.last().unwrap_or(&x0);
            let log_w = n as f64 * log_lambda + log_h[x0] - log_h[last] - v_sum;
            let w = log_w.exp();
            let hit = if event.matches(&counts, n as u64) { w } else { 0.0 };
            (hit, w)
        })
        .collect();

    let m = samples as f64;
    let mean: f64 = contributions.iter().map(|(h, _)| h).sum::<f64>() / m;
    let var: f64 =
        contributions.iter().map(|(h, _)| (h - mean) * (h - mean)).sum::<f64>() / (m * (m - 1.0));
    let w_min = contributions.iter().map(|(_, w)| *w).fold(f64::INFINITY, f64::min);
    let w_max = contributions.iter().map(|(_, w)| *w).fold(0.0f64, f64::max);
    let hit_sum: f64 = contributions.iter().map(|(h, _)| h).sum();
    let hit_sq: f64 = contributions.iter().map(|(h, _)| h * h).sum();
    let ess = if hit_sq > 0.0 { hit_sum * hit_sum / hit_sq } else { 0.0 };
    Ok(RareEventEstimate {
        point_estimate: mean,
        standard_error: var.max(0.0).sqrt(),
        sample_count: samples,
        method: "tilted",
        weights_summary: Some(WeightsSummary { min: w_min, max: w_max, effective_sample_size: ess }),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingCurvePoint {
    pub step: usize,
    pub dual_lipschitz: f64,
    /// Upper bound on the clustering bias of the compressed supports.
    pub compression_bias: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingEstimate {
    pub curve: Vec<MixingCurvePoint>,
    /// Fitted exponential decay rate of the distance curve.
    pub gamma_hat: Option<f64>,
}

/// Identical-kick coupled decay of the laws of two copies started at `x0`
/// and `x1`. At each recorded step the sample clouds are compressed to at
/// most 64 atoms by greedy farthest-point clustering before the
/// dual-Lipschitz program runs.
pub fn mixing_estimate<M: RdsModel>(
    model: &M,
    x0: &M::State,
    x1: &M::State,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<MixingEstimate> {
    // Coupled simulation: both copies read the same kick stream.
    let pairs: Vec<(Vec<M::State>, Vec<M::State>)> = (0..samples)
        .into_par_iter()
        .map(|id| {
            let stream = KickStream::new(seed, id as u64);
            let mut a = x0.clone();
            let mut b = x1.clone();
            let mut ta = Vec::with_capacity(n);
            let mut tb = Vec::with_capacity(n);
            for k in 0..n {
                let kick = model.sample_kick(&stream, k as u64);
                a = model.step(&a, &kick).expect("coupled step");
                b = model.step(&b, &kick).expect("coupled step");
                ta.push(a.clone());
                tb.push(b.clone());
            }
            (ta, tb)
        })
        .collect();

    let mut curve = Vec::with_capacity(n);
    for k in 0..n {
        let cloud_a: Vec<&M::State> = pairs.iter().map(|(a, _)| &a[k]).collect();
        let cloud_b: Vec<&M::State> = pairs.iter().map(|(_, b)| &b[k]).collect();
        let (measure_a, measure_b, centers, radius) =
            compress_clouds(model, &cloud_a, &cloud_b, DUAL_LIPSCHITZ_MAX_ATOMS);
        let metric = |i: &usize, j: &usize| model.distance(centers[*i], centers[*j]);
        let d = dual_lipschitz(&measure_a, &measure_b, metric)?;
        curve.push(MixingCurvePoint {
            step: k + 1,
            dual_lipschitz: d.distance,
            compression_bias: radius,
        });
    }

    // Log-linear fit over the latter half of the strictly positive points:
    // early steps can sit in the saturated regime of the dual-Lipschitz
    // distance, which is linear only for small separations.
    let positive: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.dual_lipschitz > 1e-14)
        .map(|p| (p.step as f64, p.dual_lipschitz.ln()))
        .collect();
    let pts: Vec<(f64, f64)> = positive.iter().skip(positive.len() / 2).cloned().collect();
    let gamma_hat = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|(x, _)| x).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        let sy: f64 = pts.iter().map(|(_, y)| y).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
        Some(-((m * sxy - sx * sy) / (m * sxx - sx * sx)))
    } else {
        None
    };
    Ok(MixingEstimate { curve, gamma_hat })
}

/// Greedy farthest-point compression of two clouds onto shared centers.
fn compress_clouds<'a, M: RdsModel>(
    model: &M,
    cloud_a: &[&'a M::State],
    cloud_b: &[&'a M::State],
    max_atoms: usize,
) -> (DiscreteMeasure<usize>, DiscreteMeasure<usize>, Vec<&'a M::State>, f64) {
    let all: Vec<&M::State> = cloud_a.iter().chain(cloud_b.iter()).cloned().collect();
    let mut centers: Vec<&M::State> = vec![all[0]];
    let mut dist_to_center: Vec<f64> = all.iter().map(|p| model.distance(p, all[0])).collect();
    while centers.len() < max_atoms {
        let (far_idx, far_d) = dist_to_center
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if far_d <= 1e-14 {
            break;
        }
        centers.push(all[far_idx]);
        for (i, p) in all.iter().enumerate() {
            dist_to_center[i] = dist_to_center[i].min(model.distance(p, centers.last().unwrap()));
        }
    }
    let radius = dist_to_center.iter().cloned().fold(0.0f64, f64::max);
    let assign = |cloud: &[&M::State]| -> DiscreteMeasure<usize> {
        let mut weights = vec![0.0; centers.len()];
        for p in cloud {
            let (best, _) = centers
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, c)| {
                    let d = model.distance(p, c);
                    if d < acc.1 { (i, d) } else { acc }
                });
            weights[best] += 1.0 / cloud.len() as f64;
        }
        DiscreteMeasure::from_dense(&weights)
    };
    (assign(cloud_a), assign(cloud_b), centers, radius)
}

#[derive(Debug, Clone, Serialize)]
pub struct CltCheck {
    pub empirical_variance: f64,
    pub theoretical_variance: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub degenerate: bool,
}

/// Sampled normalized sums against the asymptotic normal law.
///
/// Initial states are drawn exactly from the invariant measure; the
/// comparison variance comes from the Poisson-equation solve.
pub fn clt_check(
    kernel: &FiniteMarkovKernel,
    f: &Potential,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<CltCheck> {
    let mix = crate::engine::invariant_and_mixing(kernel)?;
    let sigma2 = crate::engine::clt_variance(kernel, f)?;
    let mu = mix.mu_star.to_dense(kernel.len());
    let mean: f64 = f.values.iter().zip(&mu).map(|(v, w)| v * w).sum();
    let mu_cdf: Vec<f64> = mu
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let model = ChainRds::new(kernel.clone());

    let mut sums: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|id| {
            let stream = KickStream::new(seed, id as u64);
            // Lane 1 draws the stationary initial state; lane 0 drives steps.
            let u0 = stream.uniform(u64::MAX, 1);
            let mut x = mu_cdf.iter().position(|&c| u0 < c).unwrap_or(kernel.len() - 1);
            let mut acc = 0.0;
            for k in 0..n {
                let kick = stream.uniform(k as u64, 0);
                x = model.sample_row(x, kick);
                acc += f.values[x] - mean;
            }
            acc / (n as f64).sqrt()
        })
        .collect();

    let m = samples as f64;
    let s_mean: f64 = sums.iter().sum::<f64>() / m;
    let empirical_variance: f64 =
        sums.iter().map(|s| (s - s_mean) * (s - s_mean)).sum::<f64>() / (m - 1.0);
    if sigma2 < 1e-14 {
        return Ok(CltCheck {
            empirical_variance,
            theoretical_variance: sigma2,
            ks_statistic: 0.0,
            ks_p_value: 1.0,
            degenerate: true,
        });
    }
    sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sd = sigma2.sqrt();
    let normal = statrs::distribution::Normal::new(0.0, sd).expect("valid normal");
    use statrs::distribution::ContinuousCDF;
    let mut d: f64 = 0.0;
    for (i, &s) in sums.iter().enumerate() {
        let cdf = normal.cdf(s);
        let hi = (i + 1) as f64 / m;
        let lo = i as f64 / m;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    let ks_p_value = kolmogorov_p(d, samples);
    Ok(CltCheck {
        empirical_variance,
        theoretical_variance: sigma2,
        ks_statistic: d,
        ks_p_value,
        degenerate: false,
    })
}

/// Asymptotic Kolmogorov distribution with the Stephens small-sample
/// correction: `p = 2 sum (-1)^{k-1} exp(-2 k^2 t^2)`.
pub fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let t = d * (sqrt_n + 0.12 + 0.11 / sqrt_n);
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct AcDiagnostic {
    /// Worst-case distance to the compactum per step over the ensemble.
    pub distances: Vec<f64>,
    pub kappa_hat: Option<f64>,
    /// Prefactor such that `dist <= ac_bound e^{-kappa_hat k}` over the run.
    pub ac_bound: Option<f64>,
    /// Max absolute log-residual of the fit.
    pub fit_residual: Option<f64>,
}

/// Records distances to the attracting compactum along trajectories (worst
/// case over a kick ensemble) and fits the exponential decay.
pub fn ac_diagnostic<M: RdsModel>(
    model: &M,
    x0: &M::State,
    n: usize,
    ensemble: usize,
    seed: u64,
) -> Result<AcDiagnostic> {
    if model.dist_to_attractor(x0).is_none() {
        return Err(RaredynError::Unsupported {
            what: "model exposes no distance to an attracting compactum".into(),
        });
    }
    let mut distances = vec![0.0f64; n + 1];
    distances[0] = model.dist_to_attractor(x0).unwrap();
    for id in 0..ensemble {
        let traj = simulate_stream(model, x0.clone(), n, seed, id as u64)?;
        for (k, s) in traj.states.iter().enumerate() {
            distances[k + 1] = distances[k + 1].max(model.dist_to_attractor(s).unwrap());
        }
    }
    // Log-linear fit over the strictly positive entries.
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 1e-300)
        .map(|(k, &d)| (k as f64, d.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(AcDiagnostic { distances, kappa_hat: None, ac_bound: None, fit_residual: None });
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    let residual = pts
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0f64, f64::max);
    Ok(AcDiagnostic {
        distances,
        kappa_hat: Some(-slope),
        ac_bound: Some((intercept + residual).exp()),
        fit_residual: Some(residual),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AetRow {
    pub n: usize,
    /// Fraction of samples with `(1/n) sum dist(x_k, Y) >= r`.
    pub exceed_fraction: f64,
}

/// Tightness diagnostic: the averaged attractor distance
/// `(1/n) sum_k dist(x_k, Y)` upper-bounds how far the occupation measure
/// can sit from the laws carried by the compactum, and its exceedance
/// fraction should vanish for large `n`.
pub fn aet_diagnostic<M: RdsModel>(
    model: &M,
    x0: &M::State,
    n_grid: &[usize],
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<AetRow>> {
    if model.dist_to_attractor(x0).is_none() {
        return Err(RaredynError::Unsupported {
            what: "model exposes no distance to an attracting compactum".into(),
        });
    }
    let n_max = n_grid.iter().cloned().max().unwrap_or(0);
    let prefix_means: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|id| {
            let traj = simulate_stream(model, x0.clone(), n_max, seed, id as u64)
                .expect("diagnostic trajectory");
            let mut acc = 0.0;
            traj.states
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    acc += model.dist_to_attractor(s).unwrap();
                    acc / (k + 1) as f64
                })
                .collect()
        })
        .collect();
    Ok(n_grid
        .iter()
        .map(|&n| {
            let exceed = prefix_means.iter().filter(|pm| pm[n - 1] >= radius).count();
            AetRow { n, exceed_fraction: exceed as f64 / samples as f64 }
        })
        .collect())
}
