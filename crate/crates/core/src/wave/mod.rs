//! A 1D spectral surrogate of a locally damped cubic wave equation driven
//! by periodic bounded kicks.
//!
//! The equation `u_tt - u_xx + a(x) u_t + u^3 = eta(t, x)` on `(0, pi)` with
//! Dirichlet boundary is integrated in the orthonormal sine basis
//! `e_j = sqrt(2/pi) sin(jx)` by Strang splitting: a half step of
//! (damping + cubic + forcing) on the velocity with the position frozen,
//! an exact rotation of the undamped linear wave, and another half step.
//! The cubic term is evaluated pseudospectrally on a `4J`-point sine grid,
//! which represents triple products of `J`-band functions without aliasing.

pub mod dst;

use serde::Serialize;

use crate::error::{RaredynError, Result};
use crate::rds::RdsModel;
use crate::rng::KickStream;
use dst::SpectralGrid;

/// Static description of the surrogate; `WaveModel::new` validates it and
/// precomputes the discretization.
#[derive(Debug, Clone, Serialize)]
pub struct WaveConfig {
    /// Number of resolved position/velocity modes `J`.
    pub modes: usize,
    /// Noise band `N`: kicks excite modes `j, k <= N`.
    pub noise_modes: usize,
    /// Kick period `T`. There is no formula for the minimal admissible
    /// period; the default 4 covers two domain traversals and can be
    /// overridden in configs.
    pub period: f64,
    /// Integrator steps per period (`dt = period / dt_divisions`).
    pub dt_divisions: usize,
    /// Damping plateau height.
    pub a0: f64,
    /// Plateau start as a fraction of pi; the profile ramps up smoothly over
    /// `ramp_width` and holds `a0` up to the right endpoint.
    pub damp_from: f64,
    pub ramp_width: f64,
    /// Noise cutoff plateau height (same localized shape as the damping).
    pub chi0: f64,
    /// Spectral decay exponent `s` of the kick amplitudes `b_jk ~ j^-s k^-s`.
    pub decay_exponent: f64,
    /// Noise budget `B0` of the amplitude constraint.
    pub noise_budget: f64,
    /// Fraction of the admissible budget the amplitudes are scaled to.
    pub budget_fraction: f64,
    /// Optional direct amplitude scale; overrides the budget-derived scale
    /// and is still checked against the constraint.
    pub amplitude_override: Option<f64>,
    /// Energy guard; exceeding it aborts the integration.
    pub blowup_guard: f64,
    /// Disable to run the linear-regime oracle comparisons.
    pub cubic_enabled: bool,
    /// Replace the localized profile by constant damping (linear oracle).
    pub constant_damping: Option<f64>,
    /// Mode cutoff of the tail diagnostic; defaults to `2 * noise_modes`.
    pub j_cut: usize,
}

impl Default for WaveConfig {
    fn default() -> Self {
        WaveConfig {
            modes: 64,
            noise_modes: 8,
            period: 4.0,
            dt_divisions: 4096,
            a0: 1.0,
            damp_from: 0.7,
            ramp_width: 0.1,
            chi0: 1.0,
            decay_exponent: 2.0,
            noise_budget: 1.0,
            budget_fraction: 0.9,
            amplitude_override: None,
            blowup_guard: 1e6,
            cubic_enabled: true,
            constant_damping: None,
            j_cut: 16,
        }
    }
}

/// Position and velocity coefficients in the sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl WaveState {
    pub fn zero(modes: usize) -> Self {
        WaveState { u: vec![0.0; modes], v: vec![0.0; modes] }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

/// The full solution together with the forced component `w` (zero initial
/// data, driven by the forcing and the full solution's cubic term). The
/// difference `u - w` solves the unforced linear damped wave and decays, so
/// the high-mode tail of `w` measures the compactness defect.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveDualState {
    pub full: WaveState,
    pub forced: WaveState,
}

impl WaveDualState {
    pub fn from_initial(state: WaveState) -> Self {
        let modes = state.u.len();
        WaveDualState { full: state, forced: WaveState::zero(modes) }
    }
}

/// One period's worth of kick randomness: the matrix `theta[j][k]` in
/// `[-1, 1]^{N x N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KickNoise {
    pub theta: Vec<f64>,
}

pub struct WaveModel {
    pub config: WaveConfig,
    grid: SpectralGrid,
    /// Damping profile on the collocation grid (empty if constant damping).
    damping_grid: Vec<f64>,
    /// Projection of `chi(x) e_j` onto `e_l`: row `l`, column `j <= N`.
    chi_mat: Vec<Vec<f64>>,
    /// Kick amplitudes `b[j][k]`, zero-indexed.
    amplitudes: Vec<Vec<f64>>,
    /// Rotation tables `cos(j dt)`, `sin(j dt)`.
    rot_cos: Vec<f64>,
    rot_sin: Vec<f64>,
    /// Inverse-CDF table of the kick density on a uniform grid in `r`.
    icdf_r: Vec<f64>,
    icdf_f: Vec<f64>,
    pub dt: f64,
}

/// Kick density `rho(r) = (15/16)(1 - r^2)^2` on `[-1, 1]`.
pub fn kick_density(r: f64) -> f64 {
    if (-1.0..=1.0).contains(&r) {
        15.0 / 16.0 * (1.0 - r * r) * (1.0 - r * r)
    } else {
        0.0
    }
}

/// Analytic CDF of the kick density.
pub fn kick_cdf(r: f64) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    0.5 + 15.0 / 16.0 * (r - 2.0 * r.powi(3) / 3.0 + r.powi(5) / 5.0)
}

fn smooth_plateau(x: f64, from: f64, ramp: f64) -> f64 {
    let start = from - ramp;
    if x <= start {
        0.0
    } else if x >= from {
        1.0
    } else {
        let s = (x - start) / ramp;
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

impl WaveModel {
    pub fn new(config: WaveConfig) -> Result<Self> {
        let j = config.modes;
        let n = config.noise_modes;
        if j == 0 || n == 0 || n > j {
            return Err(RaredynError::Config("need 1 <= noise_modes <= modes".into()));
        }
        if config.j_cut >= j {
            return Err(RaredynError::Config(format!(
                "j_cut {} must be below the mode count {j}",
                config.j_cut
            )));
        }
        if config.dt_divisions == 0 || config.period <= 0.0 {
            return Err(RaredynError::Config("need a positive period and step count".into()));
        }
        let grid = SpectralGrid::new(j, 4 * j);
        let pi = std::f64::consts::PI;
        let points = grid.transform.points();

        let damping_grid: Vec<f64> = match config.constant_damping {
            Some(_) => Vec::new(),
            None => points
                .iter()
                .map(|&x| config.a0 * smooth_plateau(x, config.damp_from * pi, config.ramp_width * pi))
                .collect(),
        };

        // chi(x) e_j projected onto the resolved basis by grid quadrature.
        let chi_grid: Vec<f64> = points
            .iter()
            .map(|&x| config.chi0 * smooth_plateau(x, config.damp_from * pi, config.ramp_width * pi))
            .collect();
        let mut chi_mat = vec![vec![0.0; n]; j];
        for col in 0..n {
            let mut unit = vec![0.0; j];
            unit[col] = 1.0;
            let ej_grid = grid.to_grid(&unit);
            let weighted: Vec<f64> = ej_grid.iter().zip(&chi_grid).map(|(e, c)| e * c).collect();
            let coeffs = grid.to_coeffs(&weighted);
            for (row, chi_row) in chi_mat.iter_mut().enumerate() {
                chi_row[col] = coeffs[row];
            }
        }

        // Amplitudes b_jk = B j^-s k^-s with the budget constraint
        // sum b_jk lambda_j^{2/7} |alpha_k|_inf <= B0 sqrt(T).
        let s = config.decay_exponent;
        let alpha_inf = |k: usize| if k == 1 { 1.0 } else { 2.0f64.sqrt() };
        let sum_j: f64 = (1..=n).map(|jj| (jj as f64).powf(-s) * (jj as f64).powf(4.0 / 7.0)).sum();
        let sum_k: f64 = (1..=n).map(|kk| (kk as f64).powf(-s) * alpha_inf(kk)).sum();
        let budget = config.noise_budget * config.period.sqrt();
        let scale = config
            .amplitude_override
            .unwrap_or(config.budget_fraction * budget / (sum_j * sum_k));
        let spent = scale * sum_j * sum_k;
        if spent > budget * (1.0 + 1e-12) {
            return Err(RaredynError::Config(format!(
                "kick amplitudes spend {spent:.6e} of the admissible budget {budget:.6e}"
            )));
        }
        let amplitudes: Vec<Vec<f64>> = (1..=n)
            .map(|jj| (1..=n).map(|kk| scale * (jj as f64).powf(-s) * (kk as f64).powf(-s)).collect())
            .collect();

        let dt = config.period / config.dt_divisions as f64;
        let rot_cos: Vec<f64> = (1..=j).map(|m| (m as f64 * dt).cos()).collect();
        let rot_sin: Vec<f64> = (1..=j).map(|m| (m as f64 * dt).sin()).collect();

        // Inverse-CDF table on a uniform r-grid, refined by Newton at draw
        // time; the analytic CDF is a polynomial, so this is exact up to
        // solver tolerance.
        let table = 2048usize;
        let icdf_r: Vec<f64> = (0..=table).map(|i| -1.0 + 2.0 * i as f64 / table as f64).collect();
        let icdf_f: Vec<f64> = icdf_r.iter().map(|&r| kick_cdf(r)).collect();

        Ok(WaveModel {
            config,
            grid,
            damping_grid,
            chi_mat,
            amplitudes,
            rot_cos,
            rot_sin,
            icdf_r,
            icdf_f,
            dt,
        })
    }

    pub fn modes(&self) -> usize {
        self.config.modes
    }

    /// Quadratic part of the energy (no quartic term).
    pub fn quadratic_energy(&self, state: &WaveState) -> f64 {
        state
            .u
            .iter()
            .enumerate()
            .map(|(i, &uj)| ((i + 1) as f64).powi(2) * uj * uj)
            .sum::<f64>()
            * 0.5
            + state.v.iter().map(|&vj| vj * vj).sum::<f64>() * 0.5
    }

    /// Full energy `1/2 |u_x|^2 + 1/2 |u_t|^2 + 1/4 int u^4`, the quartic by
    /// collocation quadrature on the dealiased grid.
    pub fn energy(&self, state: &WaveState) -> f64 {
        let quad = self.quadratic_energy(state);
        if !self.config.cubic_enabled {
            return quad;
        }
        let g = self.grid.to_grid(&state.u);
        let quartic: f64 =
            self.grid.transform.quadrature_weight() * g.iter().map(|x| x.powi(4)).sum::<f64>();
        quad + 0.25 * quartic
    }

    /// Inverse-CDF draw of one kick coefficient.
    fn draw_theta(&self, u: f64) -> f64 {
        let idx = match self.icdf_f.binary_search_by(|f| f.partial_cmp(&u).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(self.icdf_r.len() - 2);
        let (f0, f1) = (self.icdf_f[idx], self.icdf_f[idx + 1]);
        let (r0, r1) = (self.icdf_r[idx], self.icdf_r[idx + 1]);
        let mut r = if f1 > f0 { r0 + (u - f0) * (r1 - r0) / (f1 - f0) } else { r0 };
        for _ in 0..4 {
            let density = kick_density(r).max(1e-12);
            r -= (kick_cdf(r) - u) / density;
            r = r.clamp(-1.0, 1.0);
        }
        debug_assert!((-1.0..=1.0).contains(&r));
        r
    }

    /// The time-basis factor `alpha_k^T(t) = alpha_k(t/T)/sqrt(T)` with
    /// `alpha_1 = 1`, `alpha_2m = sqrt2 cos(2 pi m s)`,
    /// `alpha_2m+1 = sqrt2 sin(2 pi m s)`.
    fn alpha_t(&self, k: usize, t: f64) -> f64 {
        let s = t / self.config.period;
        let v = if k == 1 {
            1.0
        } else if k % 2 == 0 {
            let m = (k / 2) as f64;
            2.0f64.sqrt() * (2.0 * std::f64::consts::PI * m * s).cos()
        } else {
            let m = (k / 2) as f64;
            2.0f64.sqrt() * (2.0 * std::f64::consts::PI * m * s).sin()
        };
        v / self.config.period.sqrt()
    }

    /// Forcing modes `eta_l(t)` for a fixed kick matrix.
    fn forcing(&self, kick: &KickNoise, t: f64) -> Vec<f64> {
        let n = self.config.noise_modes;
        let alphas: Vec<f64> = (1..=n).map(|k| self.alpha_t(k, t)).collect();
        let mut g = vec![0.0; n];
        for jj in 0..n {
            let mut acc = 0.0;
            for kk in 0..n {
                acc += self.amplitudes[jj][kk] * kick.theta[jj * n + kk] * alphas[kk];
            }
            g[jj] = acc;
        }
        self.chi_mat.iter().map(|row| row.iter().zip(&g).map(|(c, gv)| c * gv).sum()).collect()
    }

    /// `[a(x) v]` in mode space.
    fn damp(&self, v: &[f64]) -> Vec<f64> {
        match self.config.constant_damping {
            Some(a) => v.iter().map(|x| a * x).collect(),
            None => {
                let g = self.grid.to_grid(v);
                let damped: Vec<f64> = g.iter().zip(&self.damping_grid).map(|(x, a)| x * a).collect();
                self.grid.to_coeffs(&damped)
            }
        }
    }

    /// `[u^3]` in mode space (zero when the cubic term is disabled).
    fn cubic(&self, u: &[f64]) -> Vec<f64> {
        if !self.config.cubic_enabled {
            return vec![0.0; u.len()];
        }
        let g = self.grid.to_grid(u);
        let cubed: Vec<f64> = g.iter().map(|x| x * x * x).collect();
        self.grid.to_coeffs(&cubed)
    }

    /// Velocity half-step of duration `h` starting at time `t`: explicit
    /// midpoint on `v' = -[a v] - [u^3] + eta(t)` with `u` frozen.
    fn velocity_half_step(
        &self,
        u: &[f64],
        v: &mut Vec<f64>,
        kick: Option<&KickNoise>,
        t: f64,
        h: f64,
        forced_override: Option<&[f64]>,
    ) {
        let cube = match forced_override {
            Some(c) => c.to_vec(),
            None => self.cubic(u),
        };
        let eta_0 = kick.map(|k| self.forcing(k, t));
        let eta_mid = kick.map(|k| self.forcing(k, t + 0.5 * h));
        let rhs = |vv: &[f64], eta: Option<&Vec<f64>>| -> Vec<f64> {
            let damped = self.damp(vv);
            (0..vv.len())
                .map(|i| -damped[i] - cube[i] + eta.map_or(0.0, |e| e[i]))
                .collect()
        };
        let g0 = rhs(v, eta_0.as_ref());
        let v_mid: Vec<f64> = v.iter().zip(&g0).map(|(x, g)| x + 0.5 * h * g).collect();
        let g1 = rhs(&v_mid, eta_mid.as_ref());
        for (x, g) in v.iter_mut().zip(&g1) {
            *x += h * g;
        }
    }

    /// Exact rotation of the undamped linear wave over one `dt`.
    fn rotate(&self, u: &mut [f64], v: &mut [f64]) {
        for i in 0..u.len() {
            let omega = (i + 1) as f64;
            let (c, s) = (self.rot_cos[i], self.rot_sin[i]);
            let (uu, vv) = (u[i], v[i]);
            u[i] = uu * c + vv * s / omega;
            v[i] = -uu * omega * s + vv * c;
        }
    }

    /// Integrate one kick period; `kick = None` runs the unforced system.
    /// When a dual state is given, the forced component is co-evolved with
    /// the full solution's cubic term feeding both equations.
    fn advance_period(
        &self,
        full: &mut WaveState,
        forced: Option<&mut WaveState>,
        kick: Option<&KickNoise>,
    ) -> Result<()> {
        let dt = self.dt;
        let h = 0.5 * dt;
        let mut forced = forced;
        for step in 0..self.config.dt_divisions {
            let t = step as f64 * dt;
            let cube = self.cubic(&full.u);

            self.velocity_half_step(&full.u, &mut full.v, kick, t, h, Some(&cube));
            if let Some(w) = forced.as_deref_mut() {
                self.velocity_half_step(&full.u, &mut w.v, kick, t, h, Some(&cube));
            }

            self.rotate(&mut full.u, &mut full.v);
            if let Some(w) = forced.as_deref_mut() {
                self.rotate(&mut w.u, &mut w.v);
            }

            let cube = self.cubic(&full.u);
            self.velocity_half_step(&full.u, &mut full.v, kick, t + h, h, Some(&cube));
            if let Some(w) = forced.as_deref_mut() {
                self.velocity_half_step(&full.u, &mut w.v, kick, t + h, h, Some(&cube));
            }

            let quad = self.quadratic_energy(full);
            if !quad.is_finite() || quad > self.config.blowup_guard {
                return Err(RaredynError::WaveBlowup {
                    time: t + dt,
                    what: format!("quadratic energy {quad:.3e} exceeded the guard"),
                });
            }
        }
        Ok(())
    }

    /// The period map `S(state, kick)`.
    pub fn kick_map(&self, state: &WaveState, kick: &KickNoise) -> Result<WaveState> {
        let mut s = state.clone();
        self.advance_period(&mut s, None, Some(kick))?;
        Ok(s)
    }

    /// The unforced period map `S(state, 0)`.
    pub fn free_map(&self, state: &WaveState) -> Result<WaveState> {
        let mut s = state.clone();
        self.advance_period(&mut s, None, None)?;
        Ok(s)
    }

    /// The period map co-evolving the forced component.
    pub fn kick_map_dual(&self, state: &WaveDualState, kick: &KickNoise) -> Result<WaveDualState> {
        let mut s = state.clone();
        let WaveDualState { full, forced } = &mut s;
        self.advance_period(full, Some(forced), Some(kick))?;
        Ok(s)
    }

    /// Energy fraction of a state's quadratic energy above mode `j_cut`.
    pub fn tail_fraction(&self, state: &WaveState, j_cut: usize) -> Result<f64> {
        if j_cut >= self.config.modes {
            return Err(RaredynError::Config(format!(
                "j_cut {j_cut} out of range for {} modes",
                self.config.modes
            )));
        }
        let total = self.quadratic_energy(state);
        if total == 0.0 {
            return Ok(0.0);
        }
        let tail: f64 = (j_cut..self.config.modes)
            .map(|i| {
                let omega2 = ((i + 1) as f64).powi(2);
                0.5 * (omega2 * state.u[i] * state.u[i] + state.v[i] * state.v[i])
            })
            .sum();
        Ok(tail / total)
    }

    /// A state of exact energy `e` (velocity in the first mode only).
    pub fn state_with_energy(&self, e: f64) -> WaveState {
        let mut s = WaveState::zero(self.config.modes);
        s.v[0] = (2.0 * e).sqrt();
        s
    }
}

impl RdsModel for WaveModel {
    type State = WaveDualState;
    type Kick = KickNoise;

    fn sample_kick(&self, stream: &KickStream, step: u64) -> KickNoise {
        let n = self.config.noise_modes;
        let theta: Vec<f64> =
            (0..n * n).map(|lane| self.draw_theta(stream.uniform(step, lane as u64))).collect();
        KickNoise { theta }
    }

    fn step(&self, x: &WaveDualState, kick: &KickNoise) -> Result<WaveDualState> {
        self.kick_map_dual(x, kick)
    }

    /// Energy-space metric on the full component.
    fn distance(&self, a: &WaveDualState, b: &WaveDualState) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.config.modes {
            let omega2 = ((i + 1) as f64).powi(2);
            let du = a.full.u[i] - b.full.u[i];
            let dv = a.full.v[i] - b.full.v[i];
            acc += omega2 * du * du + dv * dv;
        }
        acc.sqrt()
    }

    /// The compactness-defect proxy: the high-mode tail fraction of the
    /// forced component.
    fn dist_to_attractor(&self, x: &WaveDualState) -> Option<f64> {
        self.tail_fraction(&x.forced, self.config.j_cut).ok()
    }

    fn anchor(&self) -> Option<WaveDualState> {
        Some(WaveDualState::from_initial(WaveState::zero(self.config.modes)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnforcedDecayRow {
    pub initial_energy: f64,
    /// Fitted decay rate of `log E` per kick period.
    pub rate: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForcedRunRow {
    pub initial_energy: f64,
    /// First period index after which the energy stays inside the ball.
    pub entry_time: usize,
    pub max_energy_after_entry: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub kicks_on: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unforced: Vec<UnforcedDecayRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub forced: Vec<ForcedRunRow>,
    /// Radius of the common absorbing ball candidate (forced mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ball_radius: Option<f64>,
    /// Energy traces per run, one row per period.
    pub energies: Vec<Vec<f64>>,
}

/// Run the kicked (or unforced) period chain from each initial energy.
///
/// Unforced mode fits the exponential decay of the energy; forced mode
/// reports the entry time into a candidate absorbing ball (the post-burn-in
/// energy envelope across all runs) and the maximal energy after entry.
pub fn decay_experiment(
    model: &WaveModel,
    initial_energies: &[f64],
    kicks_on: bool,
    horizon: usize,
    seed: u64,
) -> Result<DecayReport> {
    let mut energies: Vec<Vec<f64>> = Vec::new();
    for (run, &e0) in initial_energies.iter().enumerate() {
        let mut state = model.state_with_energy(e0);
        let stream = KickStream::new(seed, run as u64);
        let mut trace = vec![model.energy(&state)];
        for k in 0..horizon {
            state = if kicks_on {
                let kick = model.sample_kick(&stream, k as u64);
                model.kick_map(&state, &kick)?
            } else {
                model.free_map(&state)?
            };
            trace.push(model.energy(&state));
        }
        energies.push(trace);
    }

    if !kicks_on {
        let mut rows = Vec::new();
        for (trace, &e0) in energies.iter().zip(initial_energies) {
            let pts: Vec<(f64, f64)> = trace
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 1e-280)
                .map(|(k, &e)| (k as f64, e.ln()))
                .collect();
            let m = pts.len() as f64;
            let sx: f64 = pts.iter().map(|(x, _)| x).sum();
            let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
            let sy: f64 = pts.iter().map(|(_, y)| y).sum();
            let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
            let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            let intercept = (sy - slope * sx) / m;
            let mean_y = sy / m;
            let ss_tot: f64 = pts.iter().map(|(_, y)| (y - mean_y) * (y - mean_y)).sum();
            let ss_res: f64 =
                pts.iter().map(|(x, y)| (y - intercept - slope * x) * (y - intercept - slope * x)).sum();
            let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
            rows.push(UnforcedDecayRow { initial_energy: e0, rate: -slope, r_squared: r2 });
        }
        return Ok(DecayReport {
            kicks_on,
            unforced: rows,
            forced: Vec::new(),
            ball_radius: None,
            energies,
        });
    }

    // Candidate ball: the late-time energy envelope over all runs, padded.
    let burn = horizon / 2;
    let envelope = energies
        .iter()
        .flat_map(|t| t.iter().skip(burn))
        .cloned()
        .fold(0.0f64, f64::max);
    let radius = 1.05 * envelope;
    let mut rows = Vec::new();
    for (trace, &e0) in energies.iter().zip(initial_energies) {
        let mut entry = trace.len() - 1;
        for k in (0..trace.len()).rev() {
            if trace[k] <= radius {
                entry = k;
            } else {
                break;
            }
        }
        let max_after = trace[entry..].iter().cloned().fold(0.0f64, f64::max);
        rows.push(ForcedRunRow {
            initial_energy: e0,
            entry_time: entry,
            max_energy_after_entry: max_after,
        });
    }
    Ok(DecayReport {
        kicks_on,
        unforced: Vec::new(),
        forced: rows,
        ball_radius: Some(radius),
        energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> WaveConfig {
        WaveConfig {
            modes: 16,
            noise_modes: 4,
            dt_divisions: 1024,
            j_cut: 8,
            ..WaveConfig::default()
        }
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let model = WaveModel::new(small_config()).unwrap();
        let zero = WaveState::zero(16);
        let out = model.free_map(&zero).unwrap();
        assert_eq!(out, zero);
        assert_eq!(model.energy(&zero), 0.0);
    }

    #[test]
    fn energy_of_pure_position_mode() {
        // u = e_1, v = 0: E = 1/2 + (1/4) * 3/(2 pi).
        let model = WaveModel::new(small_config()).unwrap();
        let mut s = WaveState::zero(16);
        s.u[0] = 1.0;
        let expected = 0.5 + 3.0 / (8.0 * std::f64::consts::PI);
        assert!((model.energy(&s) - expected).abs() < 1e-12);
        assert!((expected - 0.61937).abs() < 1e-5);
    }

    #[test]
    fn energy_of_pure_velocity_mode() {
        let model = WaveModel::new(small_config()).unwrap();
        let mut s = WaveState::zero(16);
        s.v[0] = 3.0;
        assert_eq!(model.energy(&s), 4.5);
        let made = model.state_with_energy(4.5);
        assert_eq!(model.energy(&made), 4.5);
    }

    #[test]
    fn unforced_energy_decreases() {
        let model = WaveModel::new(small_config()).unwrap();
        let mut state = model.state_with_energy(1.0);
        let mut prev = model.energy(&state);
        for _ in 0..5 {
            state = model.free_map(&state).unwrap();
            let e = model.energy(&state);
            assert!(e < prev, "energy did not strictly decrease: {e} vs {prev}");
            prev = e;
        }
    }

    /// Per-step energy increase stays below the integrator tolerance along
    /// an unforced run.
    #[test]
    fn unforced_stepwise_energy_monotonicity() {
        let mut config = small_config();
        config.dt_divisions = 4096;
        let model = WaveModel::new(config).unwrap();
        let mut full = model.state_with_energy(1.0);
        let mut worst: f64 = 0.0;
        let mut prev = model.energy(&full);
        // Walk step by step through one period via single-division models.
        let mut single = small_config();
        single.dt_divisions = 1;
        single.period = model.dt;
        let stepper = WaveModel::new(single).unwrap();
        for _ in 0..4096 {
            full = stepper.free_map(&full).unwrap();
            let e = stepper.energy(&full);
            worst = worst.max(e - prev);
            prev = e;
        }
        assert!(worst <= 1e-9, "worst per-step energy increase {worst:.3e}");
    }

    /// Exact damped-oscillator solution per mode when the cubic term is off
    /// and the damping is constant.
    #[test]
    fn linear_regime_matches_exact_solution() {
        let config = WaveConfig {
            modes: 16,
            noise_modes: 4,
            period: 1.0,
            dt_divisions: 1000,
            cubic_enabled: false,
            constant_damping: Some(0.35),
            j_cut: 8,
            ..WaveConfig::default()
        };
        let model = WaveModel::new(config).unwrap();
        let mut s = WaveState::zero(16);
        for i in 0..16 {
            s.u[i] = ((i * 13 + 5) % 7) as f64 / 7.0 - 0.4;
            s.v[i] = ((i * 29 + 3) % 11) as f64 / 11.0 - 0.6;
        }
        let out = model.free_map(&s).unwrap();
        let a = 0.35f64;
        let t = 1.0f64;
        for i in 0..16 {
            let omega0 = (i + 1) as f64;
            let gamma = a / 2.0;
            let omega = (omega0 * omega0 - gamma * gamma).sqrt();
            let amp_c = s.u[i];
            let amp_s = (s.v[i] + gamma * s.u[i]) / omega;
            let decay = (-gamma * t).exp();
            let u_exact = decay * (amp_c * (omega * t).cos() + amp_s * (omega * t).sin());
            let v_exact = decay
                * ((-gamma * amp_c + omega * amp_s) * (omega * t).cos()
                    + (-gamma * amp_s - omega * amp_c) * (omega * t).sin());
            let scale = s.u[i].abs().max(s.v[i].abs()).max(1e-3);
            assert!(
                (out.u[i] - u_exact).abs() < 1e-6 * scale,
                "mode {i}: u {} vs {u_exact}",
                out.u[i]
            );
            assert!(
                (out.v[i] - v_exact).abs() < 1e-6 * scale,
                "mode {i}: v {} vs {v_exact}",
                out.v[i]
            );
        }
    }

    /// Second-order splitting: halving dt shrinks the defect by about 4.
    #[test]
    fn strang_richardson_ratio() {
        let make = |div: usize| {
            WaveModel::new(WaveConfig {
                modes: 16,
                noise_modes: 4,
                period: 1.0,
                dt_divisions: div,
                j_cut: 8,
                ..WaveConfig::default()
            })
            .unwrap()
        };
        let coarse = make(256);
        let mid = make(512);
        let fine = make(1024);
        let mut s = WaveState::zero(16);
        for i in 0..16 {
            s.u[i] = ((i * 7 + 2) % 5) as f64 / 5.0 - 0.3;
            s.v[i] = ((i * 3 + 1) % 9) as f64 / 9.0 - 0.5;
        }
        let stream = KickStream::new(2024, 0);
        let kick = coarse.sample_kick(&stream, 0);
        let h_norm = |a: &WaveState, b: &WaveState| {
            let mut acc = 0.0;
            for i in 0..16 {
                let om2 = ((i + 1) as f64).powi(2);
                let du = a.u[i] - b.u[i];
                let dv = a.v[i] - b.v[i];
                acc += om2 * du * du + dv * dv;
            }
            acc.sqrt()
        };
        let x1 = coarse.kick_map(&s, &kick).unwrap();
        let x2 = mid.kick_map(&s, &kick).unwrap();
        let x4 = fine.kick_map(&s, &kick).unwrap();
        let ratio = h_norm(&x1, &x2) / h_norm(&x2, &x4);
        assert!((3.5..=4.5).contains(&ratio), "Richardson ratio {ratio}");
    }

    #[test]
    fn kick_samples_live_in_the_unit_interval() {
        let model = WaveModel::new(small_config()).unwrap();
        let stream = KickStream::new(5, 0);
        let mut sum = 0.0;
        let mut count = 0usize;
        for step in 0..2000 {
            let kick = model.sample_kick(&stream, step);
            for &t in &kick.theta {
                assert!((-1.0..=1.0).contains(&t));
                sum += t;
                count += 1;
            }
        }
        // Symmetric density: mean within 3 SE of 0 (variance 1/7).
        let se = (1.0f64 / 7.0 / count as f64).sqrt();
        assert!((sum / count as f64).abs() < 3.0 * se);
    }

    /// Chi-squared test of the sampled density against the analytic one.
    #[test]
    fn kick_density_histogram_matches_analytic() {
        let model = WaveModel::new(small_config()).unwrap();
        let stream = KickStream::new(6, 0);
        let bins = 40usize;
        let mut counts = vec![0u64; bins];
        let draws = 200_000usize;
        for i in 0..draws {
            let r = model.draw_theta(stream.uniform(i as u64, 0));
            let b = (((r + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
            counts[b] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let lo = -1.0 + 2.0 * b as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (b + 1) as f64 / bins as f64;
            let expected = (kick_cdf(hi) - kick_cdf(lo)) * draws as f64;
            if expected > 5.0 {
                chi2 += (c as f64 - expected) * (c as f64 - expected) / expected;
            }
        }
        use statrs::distribution::ContinuousCDF;
        let dist = statrs::distribution::ChiSquared::new((bins - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} p {p}");
    }

    #[test]
    fn inverse_cdf_round_trips_the_analytic_cdf() {
        let model = WaveModel::new(small_config()).unwrap();
        for i in 0..1000 {
            let u = (i as f64 + 0.5) / 1000.0;
            let r = model.draw_theta(u);
            assert!((kick_cdf(r) - u).abs() < 1e-10, "u={u}: r={r}");
        }
    }

    #[test]
    fn forced_component_tracks_the_full_solution() {
        // With zero initial data the full solution and the forced component
        // coincide (their difference solves the homogeneous equation with
        // zero data).
        let model = WaveModel::new(small_config()).unwrap();
        let stream = KickStream::new(7, 0);
        let mut dual = WaveDualState::from_initial(WaveState::zero(16));
        for k in 0..3 {
            let kick = model.sample_kick(&stream, k);
            dual = model.kick_map_dual(&dual, &kick).unwrap();
        }
        for i in 0..16 {
            assert!((dual.full.u[i] - dual.forced.u[i]).abs() < 1e-12);
            assert!((dual.full.v[i] - dual.forced.v[i]).abs() < 1e-12);
        }
        assert_eq!(model.tail_fraction(&WaveState::zero(16), 8).unwrap(), 0.0);
    }

    #[test]
    fn tail_fraction_is_nonincreasing_in_the_cutoff() {
        let model = WaveModel::new(small_config()).unwrap();
        let stream = KickStream::new(8, 0);
        let mut dual = WaveDualState::from_initial(model.state_with_energy(1.0));
        for k in 0..4 {
            let kick = model.sample_kick(&stream, k);
            dual = model.kick_map_dual(&dual, &kick).unwrap();
        }
        let mut prev = f64::INFINITY;
        for cut in 1..16 {
            let f = model.tail_fraction(&dual.forced, cut).unwrap();
            assert!(f <= prev + 1e-15, "tail grew at cut {cut}");
            prev = f;
        }
    }

    #[test]
    fn budget_violation_fails_loudly() {
        let mut config = small_config();
        config.amplitude_override = Some(1e3);
        assert!(matches!(WaveModel::new(config), Err(RaredynError::Config(_))));
    }

    #[test]
    fn blowup_guard_triggers() {
        let mut config = small_config();
        config.blowup_guard = 1e-6;
        let model = WaveModel::new(config).unwrap();
        let state = model.state_with_energy(1.0);
        assert!(matches!(model.free_map(&state), Err(RaredynError::WaveBlowup { .. })));
    }

    #[test]
    fn trajectories_are_bitwise_reproducible() {
        let model = WaveModel::new(small_config()).unwrap();
        let stream = KickStream::new(99, 3);
        let s0 = model.state_with_energy(2.0);
        let k0 = model.sample_kick(&stream, 0);
        let a = model.kick_map(&s0, &k0).unwrap();
        let b = model.kick_map(&s0, &k0).unwrap();
        assert_eq!(a, b);
    }
}
