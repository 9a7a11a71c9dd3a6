//! Python bindings for the finite-chain engine, the measure metrics, the
//! contraction toy and the wave surrogate.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use raredyn_core::config::parse_event;
use raredyn_core::coupling::{contraction_toy, ContractionToy as ToyModel, CouplingSpec};
use raredyn_core::coupling::squeezing_verify;
use raredyn_core::engine::{
    clt_variance, equilibrium_states, invariant_and_mixing, level1_rate, membership_test,
    perron_triple, pressure, rate_dv, rate_legendre, TiltedKernel,
};
use raredyn_core::error::RaredynError;
use raredyn_core::measure::{DiscreteMeasure, Potential};
use raredyn_core::oracle::{ldp_bound_report, occupation_dp};
use raredyn_core::rng::KickStream;
use raredyn_core::wave::{decay_experiment, WaveConfig, WaveDualState, WaveModel, WaveState};
use raredyn_core::{simulate_stream, ChainRds, FiniteMarkovKernel, RdsModel};

fn err(e: RaredynError) -> PyErr {
    match e {
        RaredynError::Config(_)
        | RaredynError::ConfigParse { .. }
        | RaredynError::InvalidMeasure { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn potential(kernel: &FiniteMarkovKernel, values: Vec<f64>) -> PyResult<Potential> {
    if values.len() != kernel.len() {
        return Err(PyValueError::new_err(format!(
            "potential has {} values for a {}-state kernel",
            values.len(),
            kernel.len()
        )));
    }
    Potential::new(values).map_err(err)
}

/// A finite Markov kernel with a line embedding of its states.
#[pyclass(name = "Kernel")]
struct PyKernel {
    inner: FiniteMarkovKernel,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (matrix, coords=None))]
    fn new(matrix: Vec<Vec<f64>>, coords: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let inner = match coords {
            None => FiniteMarkovKernel::with_line_embedding(matrix).map_err(err)?,
            Some(coords) => {
                let states = coords
                    .into_iter()
                    .enumerate()
                    .map(|(i, coord)| raredyn_core::ChainState { label: i.to_string(), coord })
                    .collect();
                FiniteMarkovKernel::new(states, matrix).map_err(err)?
            }
        };
        Ok(PyKernel { inner })
    }

    /// The absorbing/lazy/transient three-state chain.
    #[staticmethod]
    fn toy() -> Self {
        PyKernel { inner: FiniteMarkovKernel::toy_chain() }
    }

    /// Kernel whose every row is `law`.
    #[staticmethod]
    fn iid(law: Vec<f64>) -> PyResult<Self> {
        Ok(PyKernel { inner: FiniteMarkovKernel::iid(&law).map_err(err)? })
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        self.inner.matrix.clone()
    }

    /// Growth data of the tilted semigroup:
    /// `(lambda, per_state_rates, net_converges)`.
    fn pressure(&self, v: Vec<f64>) -> PyResult<(f64, Vec<f64>, bool)> {
        let v = potential(&self.inner, v)?;
        let p = pressure(&self.inner, &v).map_err(err)?;
        Ok((p.lambda, p.per_state_rates, p.net_converges))
    }

    /// Occupation rate of a measure; `None` when infinite.
    fn rate(&self, sigma: Vec<f64>) -> PyResult<Option<f64>> {
        let m = DiscreteMeasure::from_dense(&sigma);
        Ok(rate_dv(&self.inner, &m).map_err(err)?.value.finite())
    }

    /// Legendre lower bound over `grid_size` random potentials plus the
    /// variational optimizer.
    #[pyo3(signature = (sigma, grid_size=64, seed=0))]
    fn rate_lower_bound(&self, sigma: Vec<f64>, grid_size: usize, seed: u64) -> PyResult<f64> {
        let m = DiscreteMeasure::from_dense(&sigma);
        let stream = KickStream::new(seed, 0);
        let grid: Vec<Potential> = (0..grid_size)
            .map(|i| raredyn_core::instances::random_potential(&stream, i as u64, self.inner.len(), 2.0))
            .collect();
        rate_legendre(&self.inner, &m, &grid).map_err(err)
    }

    /// Principal eigendata `(lambda, h, mu)` of the tilted kernel.
    fn perron(&self, v: Vec<f64>) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
        let v = potential(&self.inner, v)?;
        let tk = TiltedKernel::new(&self.inner, &v).map_err(err)?;
        let t = perron_triple(&tk).map_err(err)?;
        Ok((t.lambda, t.h, t.mu))
    }

    /// Extremal equilibrium measures and the uniqueness flag.
    fn equilibrium(&self, v: Vec<f64>) -> PyResult<(Vec<Vec<f64>>, bool)> {
        let v = potential(&self.inner, v)?;
        let eq = equilibrium_states(&self.inner, &v).map_err(err)?;
        let dense = eq.states.iter().map(|s| s.to_dense(self.inner.len())).collect();
        Ok((dense, eq.unique))
    }

    /// Admissibility verdict `(in_v, reasons)`.
    fn membership(&self, v: Vec<f64>) -> PyResult<(bool, Vec<String>)> {
        let v = potential(&self.inner, v)?;
        let m = membership_test(&self.inner, &v).map_err(err)?;
        Ok((m.in_v, m.reasons))
    }

    /// Rate of a scalar observable at level `p`; `None` when infinite.
    fn level1(&self, f: Vec<f64>, p: f64) -> PyResult<Option<f64>> {
        let f = potential(&self.inner, f)?;
        Ok(level1_rate(&self.inner, &f, p).map_err(err)?.finite())
    }

    /// Invariant measure and spectral mixing rate `(mu_star, gamma)`.
    fn invariant(&self) -> PyResult<(Vec<f64>, Option<f64>)> {
        let r = invariant_and_mixing(&self.inner).map_err(err)?;
        Ok((r.mu_star.to_dense(self.inner.len()), r.gamma))
    }

    /// Asymptotic variance of an observable along the chain.
    fn clt_variance(&self, f: Vec<f64>) -> PyResult<f64> {
        let f = potential(&self.inner, f)?;
        clt_variance(&self.inner, &f).map_err(err)
    }

    /// Exact probability that the occupation counts satisfy the event
    /// clauses (e.g. `["c1>=0.9"]`).
    fn occupation_probability(&self, x0: usize, n: usize, clauses: Vec<String>) -> PyResult<f64> {
        let ev = parse_event(&clauses, self.inner.len()).map_err(err)?;
        occupation_dp(&self.inner, x0, n, &ev).map_err(err)
    }

    /// Exact finite-horizon decay versus the rate prediction.
    fn ldp_report<'py>(
        &self,
        py: Python<'py>,
        x0: usize,
        clauses: Vec<String>,
        grid: Vec<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let ev = parse_event(&clauses, self.inner.len()).map_err(err)?;
        let r = ldp_bound_report(&self.inner, x0, &ev, &grid).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("fitted_a", r.fitted_a)?;
        out.set_item("fitted_b", r.fitted_b)?;
        out.set_item("inf_rate", r.inf_rate.finite())?;
        out.set_item("gap", r.gap)?;
        out.set_item(
            "rows",
            r.rows
                .iter()
                .map(|row| (row.n, row.probability, row.log_p_over_n))
                .collect::<Vec<_>>(),
        )?;
        Ok(out)
    }

    /// Simulate a trajectory of state indices.
    #[pyo3(signature = (x0, n, seed, trajectory_id=0))]
    fn simulate(&self, x0: usize, n: usize, seed: u64, trajectory_id: u64) -> PyResult<Vec<usize>> {
        let model = ChainRds::new(self.inner.clone());
        let traj = simulate_stream(&model, x0, n, seed, trajectory_id).map_err(err)?;
        Ok(traj.states)
    }

    /// Naive rare-event estimate `(p_hat, se)`.
    #[pyo3(signature = (x0, n, clauses, samples, seed=0))]
    fn rare_event_naive(
        &self,
        x0: usize,
        n: usize,
        clauses: Vec<String>,
        samples: usize,
        seed: u64,
    ) -> PyResult<(f64, f64)> {
        let ev = parse_event(&clauses, self.inner.len()).map_err(err)?;
        let model = ChainRds::new(self.inner.clone());
        let est = raredyn_core::mc::rare_event_naive(&model, x0, n, &ev, samples, seed).map_err(err)?;
        Ok((est.point_estimate, est.standard_error))
    }

    /// Importance-sampled rare-event estimate `(p_hat, se, ess)` under the
    /// tilt `v`.
    #[pyo3(signature = (v, x0, n, clauses, samples, seed=0))]
    fn rare_event_tilted(
        &self,
        v: Vec<f64>,
        x0: usize,
        n: usize,
        clauses: Vec<String>,
        samples: usize,
        seed: u64,
    ) -> PyResult<(f64, f64, f64)> {
        let v = potential(&self.inner, v)?;
        let ev = parse_event(&clauses, self.inner.len()).map_err(err)?;
        let est = raredyn_core::mc::rare_event_tilted(&self.inner, &v, x0, n, &ev, samples, seed)
            .map_err(err)?;
        let ess = est.weights_summary.map(|w| w.effective_sample_size).unwrap_or(0.0);
        Ok((est.point_estimate, est.standard_error, ess))
    }

    /// Sampled CLT check `(empirical_variance, theoretical_variance, ks_p)`.
    #[pyo3(signature = (f, n=2000, samples=10_000, seed=0))]
    fn clt_check(
        &self,
        f: Vec<f64>,
        n: usize,
        samples: usize,
        seed: u64,
    ) -> PyResult<(f64, f64, f64)> {
        let f = potential(&self.inner, f)?;
        let r = raredyn_core::mc::clt_check(&self.inner, &f, n, samples, seed).map_err(err)?;
        Ok((r.empirical_variance, r.theoretical_variance, r.ks_p_value))
    }
}

/// Dual-Lipschitz distance between two weight vectors over shared points in
/// R^d; returns `(distance, witness)`.
#[pyfunction]
fn dual_lipschitz(
    points: Vec<Vec<f64>>,
    weights_a: Vec<f64>,
    weights_b: Vec<f64>,
) -> PyResult<(f64, Vec<f64>)> {
    let mu = DiscreteMeasure::new(points.clone(), weights_a).map_err(err)?;
    let nu = DiscreteMeasure::new(points, weights_b).map_err(err)?;
    let metric = |a: &Vec<f64>, b: &Vec<f64>| raredyn_core::chain::euclidean(a, b);
    let r = raredyn_core::metrics::dual_lipschitz(&mu, &nu, metric).map_err(err)?;
    Ok((r.distance, r.witness))
}

/// Total variation distance between two weight vectors over a shared
/// indexed support.
#[pyfunction]
fn total_variation(weights_a: Vec<f64>, weights_b: Vec<f64>) -> PyResult<f64> {
    let n = weights_a.len().max(weights_b.len());
    let support: Vec<usize> = (0..n).collect();
    let pad = |w: &[f64]| {
        let mut v = w.to_vec();
        v.resize(n, 0.0);
        v
    };
    let mu = DiscreteMeasure { support: support.clone(), weights: pad(&weights_a) };
    let nu = DiscreteMeasure { support, weights: pad(&weights_b) };
    Ok(raredyn_core::metrics::total_variation(&mu, &nu))
}

/// McShane extension of values on a subset of points in R^d to all points,
/// preserving the Lipschitz constant and the value range.
#[pyfunction]
fn mcshane_extend(
    points: Vec<Vec<f64>>,
    subset: Vec<usize>,
    values: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let metric = |i: usize, j: usize| raredyn_core::chain::euclidean(&points[i], &points[j]);
    raredyn_core::metrics::mcshane_extend(&subset, &values, points.len(), metric).map_err(err)
}

/// The dissipative contraction toy model.
#[pyclass(name = "ContractionToy")]
struct PyContractionToy {
    inner: ToyModel,
}

#[pymethods]
impl PyContractionToy {
    #[new]
    #[pyo3(signature = (contraction=0.5, gain=1.0, kick_bound=1.0, dim=1))]
    fn new(contraction: f64, gain: f64, kick_bound: f64, dim: usize) -> PyResult<Self> {
        Ok(PyContractionToy {
            inner: contraction_toy(contraction, gain, kick_bound, dim).map_err(err)?,
        })
    }

    #[getter]
    fn attainable_radius(&self) -> f64 {
        self.inner.attainable_radius()
    }

    fn simulate(&self, x0: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let traj = simulate_stream(&self.inner, x0, n, seed, 0).map_err(err)?;
        Ok(traj.states)
    }

    /// Attraction diagnostic `(kappa_hat, ac_bound, distances)`.
    #[pyo3(signature = (x0, n=20, ensemble=64, seed=0))]
    fn ac_diagnostic(
        &self,
        x0: Vec<f64>,
        n: usize,
        ensemble: usize,
        seed: u64,
    ) -> PyResult<(Option<f64>, Option<f64>, Vec<f64>)> {
        let d = raredyn_core::mc::ac_diagnostic(&self.inner, &x0, n, ensemble, seed).map_err(err)?;
        Ok((d.kappa_hat, d.ac_bound, d.distances))
    }

    /// Squeezing verification over an axis-aligned pair grid; returns rows
    /// `(dx, p_hat, bound, pass)`.
    #[pyo3(signature = (q, g_slope=0.0, pairs=6, samples=2000, seed=0))]
    fn squeezing(
        &self,
        q: f64,
        g_slope: f64,
        pairs: usize,
        samples: usize,
        seed: u64,
    ) -> PyResult<Vec<(f64, f64, f64, bool)>> {
        let spec = CouplingSpec::new(q, g_slope).map_err(err)?;
        let radius = self.inner.attainable_radius().max(1.0);
        let grid: Vec<(Vec<f64>, Vec<f64>)> = (1..=pairs)
            .map(|i| {
                let d = radius * i as f64 / pairs as f64;
                let mut a = vec![0.0; self.inner.dim];
                let mut b = vec![0.0; self.inner.dim];
                a[0] = 0.5 * d;
                b[0] = -0.5 * d;
                (a, b)
            })
            .collect();
        let report = squeezing_verify(&self.inner, &spec, &grid, samples, seed).map_err(err)?;
        Ok(report.rows.iter().map(|r| (r.dx, r.p_hat, r.g_dx, r.pass)).collect())
    }
}

/// The 1D damped cubic wave surrogate.
#[pyclass(name = "Wave")]
struct PyWave {
    model: WaveModel,
}

#[pymethods]
impl PyWave {
    #[new]
    #[pyo3(signature = (modes=64, noise_modes=8, period=4.0, dt_divisions=4096, a0=1.0, cubic=true))]
    fn new(
        modes: usize,
        noise_modes: usize,
        period: f64,
        dt_divisions: usize,
        a0: f64,
        cubic: bool,
    ) -> PyResult<Self> {
        let config = WaveConfig {
            modes,
            noise_modes,
            period,
            dt_divisions,
            a0,
            cubic_enabled: cubic,
            j_cut: 2 * noise_modes,
            ..WaveConfig::default()
        };
        Ok(PyWave { model: WaveModel::new(config).map_err(err)? })
    }

    /// Energy of a state given as `(u, v)` coefficient lists.
    fn energy(&self, u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
        if u.len() != self.model.modes() || v.len() != self.model.modes() {
            return Err(PyValueError::new_err("coefficient lengths must match the mode count"));
        }
        Ok(self.model.energy(&WaveState { u, v }))
    }

    /// Simulate `periods` kicks from a state of the given energy; returns
    /// rows `(energy, tail_fraction)` per period.
    #[pyo3(signature = (energy, periods, seed=0))]
    fn simulate(&self, energy: f64, periods: usize, seed: u64) -> PyResult<Vec<(f64, f64)>> {
        let stream = KickStream::new(seed, 0);
        let mut dual = WaveDualState::from_initial(self.model.state_with_energy(energy));
        let mut rows = Vec::with_capacity(periods);
        for k in 0..periods {
            let kick = self.model.sample_kick(&stream, k as u64);
            dual = self.model.kick_map_dual(&dual, &kick).map_err(err)?;
            let tail =
                self.model.tail_fraction(&dual.forced, self.model.config.j_cut).map_err(err)?;
            rows.push((self.model.energy(&dual.full), tail));
        }
        Ok(rows)
    }

    /// Decay experiment; returns a dict mirroring the CLI report.
    #[pyo3(signature = (energies, kicks_on, horizon, seed=0))]
    fn decay<'py>(
        &self,
        py: Python<'py>,
        energies: Vec<f64>,
        kicks_on: bool,
        horizon: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let report =
            decay_experiment(&self.model, &energies, kicks_on, horizon, seed).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("kicks_on", report.kicks_on)?;
        out.set_item(
            "unforced",
            report
                .unforced
                .iter()
                .map(|r| (r.initial_energy, r.rate, r.r_squared))
                .collect::<Vec<_>>(),
        )?;
        out.set_item(
            "forced",
            report
                .forced
                .iter()
                .map(|r| (r.initial_energy, r.entry_time, r.max_energy_after_entry))
                .collect::<Vec<_>>(),
        )?;
        out.set_item("ball_radius", report.ball_radius)?;
        out.set_item("energies", report.energies)?;
        Ok(out)
    }
}

#[pymodule]
fn raredyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyContractionToy>()?;
    m.add_class::<PyWave>()?;
    m.add_function(wrap_pyfunction!(dual_lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(total_variation, m)?)?;
    m.add_function(wrap_pyfunction!(mcshane_extend, m)?)?;
    Ok(())
}
