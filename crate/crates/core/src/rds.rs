//! The abstract kicked system and trajectory simulation.
//!
//! A model is a deterministic step map together with a seeded kick sampler.
//! Simulation is a pure function of `(model, x0, n, seed, trajectory id)`:
//! the kick at step `k` is read from a counter-based stream, so regenerating
//! a trajectory reproduces it bitwise, serially or in parallel.

use crate::error::{RaredynError, Result};
use crate::measure::DiscreteMeasure;
use crate::rng::KickStream;
use crate::FiniteMarkovKernel;

/// An abstract kicked dynamical system `x_{n} = S(x_{n-1}, xi_{n-1})`.
pub trait RdsModel: Sync {
    type State: Clone + Send + Sync;
    type Kick: Clone;

    /// Draw the kick for `step` from the trajectory stream.
    fn sample_kick(&self, stream: &KickStream, step: u64) -> Self::Kick;

    /// One deterministic step of the system.
    fn step(&self, x: &Self::State, kick: &Self::Kick) -> Result<Self::State>;

    /// Metric on the state space.
    fn distance(&self, a: &Self::State, b: &Self::State) -> f64;

    /// Distance to the attracting compactum, when the model exposes one.
    fn dist_to_attractor(&self, _x: &Self::State) -> Option<f64> {
        None
    }

    /// The designated point that trajectories can be steered towards.
    fn anchor(&self) -> Option<Self::State> {
        None
    }
}

/// States visited by one simulated trajectory (`x0` excluded from `states`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub x0: S,
    /// `x_1, ..., x_n`.
    pub states: Vec<S>,
    pub master_seed: u64,
    pub trajectory_id: u64,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Simulate `n` steps from `x0` on the stream `(seed, trajectory 0)`.
pub fn simulate_trajectory<M: RdsModel>(
    model: &M,
    x0: M::State,
    n: usize,
    seed: u64,
) -> Result<Trajectory<M::State>> {
    simulate_stream(model, x0, n, seed, 0)
}

/// Simulate on an explicit `(seed, trajectory id)` stream; used by the Monte
/// Carlo drivers to run many reproducible trajectories in parallel.
pub fn simulate_stream<M: RdsModel>(
    model: &M,
    x0: M::State,
    n: usize,
    seed: u64,
    trajectory_id: u64,
) -> Result<Trajectory<M::State>> {
    let stream = KickStream::new(seed, trajectory_id);
    let mut states = Vec::with_capacity(n);
    let mut x = x0.clone();
    for k in 0..n {
        let kick = model.sample_kick(&stream, k as u64);
        x = model.step(&x, &kick).map_err(|e| match e {
            RaredynError::NumericalBlowup { .. } => RaredynError::NumericalBlowup { step: k },
            other => other,
        })?;
        states.push(x.clone());
    }
    Ok(Trajectory { x0, states, master_seed: seed, trajectory_id })
}

/// Regenerate the kick record of a trajectory (equivalent to having stored it).
pub fn kick_record<M: RdsModel>(model: &M, n: usize, seed: u64, trajectory_id: u64) -> Vec<M::Kick> {
    let stream = KickStream::new(seed, trajectory_id);
    (0..n).map(|k| model.sample_kick(&stream, k as u64)).collect()
}

/// Occupation counts of `x_1, ..., x_n`: uniform weights `1/n` once divided.
///
/// The initial state `x_0` is excluded, matching the time average that starts
/// at `k = 1`. Counts are kept as integers so the total mass is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<P> {
    pub support: Vec<P>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl<P: Clone + PartialEq> EmpiricalMeasure<P> {
    pub fn from_states(states: &[P]) -> Result<Self> {
        if states.is_empty() {
            return Err(RaredynError::EmptyTrajectory);
        }
        let mut support: Vec<P> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for s in states {
            match support.iter().position(|q| q == s) {
                Some(i) => counts[i] += 1,
                None => {
                    support.push(s.clone());
                    counts.push(1);
                }
            }
        }
        Ok(EmpiricalMeasure { support, counts, total: states.len() as u64 })
    }

    /// Exact total mass as a rational check: sum of counts equals `total`.
    pub fn mass_is_exact(&self) -> bool {
        self.counts.iter().sum::<u64>() == self.total
    }

    pub fn measure(&self) -> DiscreteMeasure<P> {
        let weights = self.counts.iter().map(|&c| c as f64 / self.total as f64).collect();
        DiscreteMeasure { support: self.support.clone(), weights }
    }

    pub fn weight_of(&self, point: &P) -> f64 {
        self.support
            .iter()
            .position(|q| q == point)
            .map_or(0.0, |i| self.counts[i] as f64 / self.total as f64)
    }
}

/// The occupation measure of a trajectory.
pub fn empirical_measure<S: Clone + PartialEq>(traj: &Trajectory<S>) -> Result<EmpiricalMeasure<S>> {
    EmpiricalMeasure::from_states(&traj.states)
}

/// A finite kernel viewed as a kicked system: the kick is a uniform variate
/// and the step map is inverse-CDF sampling of the current row.
///
/// Ties in the cumulative sums break toward the lower state index, so the
/// map is a deterministic function of `(state, kick)`.
pub struct ChainRds {
    pub kernel: FiniteMarkovKernel,
    cumulative: Vec<Vec<f64>>,
}

impl ChainRds {
    pub fn new(kernel: FiniteMarkovKernel) -> Self {
        let cumulative = kernel
            .matrix
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        ChainRds { kernel, cumulative }
    }

    /// Smallest index whose cumulative probability exceeds `u`.
    pub fn sample_row(&self, state: usize, u: f64) -> usize {
        let cum = &self.cumulative[state];
        for (j, &c) in cum.iter().enumerate() {
            if u < c {
                return j;
            }
        }
        cum.len() - 1
    }
}

impl RdsModel for ChainRds {
    type State = usize;
    type Kick = f64;

    fn sample_kick(&self, stream: &KickStream, step: u64) -> f64 {
        stream.uniform(step, 0)
    }

    fn step(&self, x: &usize, kick: &f64) -> Result<usize> {
        Ok(self.sample_row(*x, *kick))
    }

    fn distance(&self, a: &usize, b: &usize) -> f64 {
        self.kernel.distance(*a, *b)
    }
}
