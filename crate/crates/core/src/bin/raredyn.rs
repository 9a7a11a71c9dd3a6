//! Experiment runner: config parsing, subcommand dispatch, CSV/JSON
//! emission with run manifests.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 assertion failure in verify modes.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use raredyn::config::{load_model_file, parse_event, ModelFile};
use raredyn::coupling::{squeezing_verify, ContractionToy, CouplingSpec};
use raredyn::engine::{
    clt_variance, equilibrium_states, invariant_and_mixing, level1_rate, membership_test,
    perron_triple, pressure, rate_dv, rate_legendre, ChainDocument, TiltedKernel,
};
use raredyn::error::RaredynError;
use raredyn::instances::{random_positive_kernel, random_potential, random_probability};
use raredyn::measure::{DiscreteMeasure, Potential};
use raredyn::oracle::ldp_bound_report;
use raredyn::report::{fmt_f64, CsvWriter, RunManifest};
use raredyn::rng::KickStream;
use raredyn::wave::{decay_experiment, WaveDualState, WaveModel};
use raredyn::{FiniteMarkovKernel, RdsModel};

#[derive(Parser)]
#[command(name = "raredyn", version, about = "Large-deviation experiments for kicked systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Model definition file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; the RAREDYN_SEED environment variable wins over this.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker pool size; affects throughput only, never results.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact computations on a finite chain.
    Chain {
        #[command(subcommand)]
        op: ChainOp,
    },
    /// Oracle-backed verification suites (exit 4 when an assertion fails).
    Verify {
        #[command(subcommand)]
        op: VerifyOp,
    },
    /// Monte Carlo drivers.
    Mc {
        #[command(subcommand)]
        op: McOp,
    },
    /// Coupling checks.
    Couple {
        #[command(subcommand)]
        op: CoupleOp,
    },
    /// Wave surrogate experiments.
    Wave {
        #[command(subcommand)]
        op: WaveOp,
    },
    /// Inspect a model definition.
    Model {
        #[command(subcommand)]
        op: ModelOp,
    },
}

#[derive(Subcommand)]
enum ChainOp {
    /// Growth rate of the tilted semigroup.
    Pressure {
        /// Potential values, comma separated.
        #[arg(long = "V")]
        potential: String,
    },
    /// Occupation rate of a measure (variational value plus lower bound).
    Rate {
        /// Measure weights, comma separated.
        #[arg(long)]
        sigma: String,
        /// Number of random potentials in the lower-bound family.
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Equilibrium states of a potential.
    Equilibrium {
        #[arg(long = "V")]
        potential: String,
    },
    /// Admissibility of a potential (pressure limit + uniqueness).
    Membership {
        #[arg(long = "V")]
        potential: String,
    },
    /// Rate of a scalar observable at a level.
    Level1 {
        /// Observable values, comma separated.
        #[arg(long)]
        f: String,
        #[arg(long)]
        p: f64,
    },
    /// Invariant measure and spectral mixing rate.
    Mixing,
    /// Asymptotic variance of an observable.
    Clt {
        #[arg(long)]
        f: String,
    },
}

#[derive(Subcommand)]
enum VerifyOp {
    /// Exact finite-horizon decay versus the rate-function prediction.
    Ldp {
        #[arg(long)]
        x0: usize,
        /// Event clauses like `c1>=0.9`; repeated flags conjoin.
        #[arg(long)]
        event: Vec<String>,
        /// Horizon grid `start:end:step`.
        #[arg(long, default_value = "5:60:5")]
        ngrid: String,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },
    /// Pressure/rate duality on random irreducible kernels.
    Duality {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 6)]
        states: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Long-horizon convergence of the normalized tilted semigroup.
    Fk {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 500)]
        horizon: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum McOp {
    /// Rare-event probability (naive, or importance-sampled with a tilt).
    Rare {
        #[arg(long)]
        x0: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        event: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Tilting potential (comma separated) for the h-transform sampler.
        #[arg(long = "tilt-V")]
        tilt: Option<String>,
    },
    /// Coupled decay of the laws from two starts.
    Mixing {
        #[arg(long)]
        x0: String,
        #[arg(long)]
        x1: String,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Normalized sums against the asymptotic normal law.
    Clt {
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Attraction diagnostic: distance-to-compactum decay.
    Ac {
        /// Start state: coordinates for the contraction toy, an initial
        /// energy for the wave surrogate.
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        ensemble: usize,
    },
    /// Tightness diagnostic: exceedance of the averaged distance.
    Aet {
        #[arg(long)]
        x0: String,
        #[arg(long, default_value = "10:60:10")]
        ngrid: String,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
    },
}

#[derive(Subcommand)]
enum CoupleOp {
    /// Verify the squeezing bound on a grid of start pairs.
    Verify {
        #[arg(long)]
        q: f64,
        /// Slope of the linear failure bound g(r) = slope * r.
        #[arg(long = "g-slope", default_value_t = 0.0)]
        g_slope: f64,
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum WaveOp {
    /// Integrate the kicked chain and dump per-period observables.
    Simulate {
        #[arg(long, default_value_t = 1.0)]
        energy: f64,
        #[arg(long, default_value_t = 20)]
        periods: usize,
    },
    /// Energy decay / absorbing-ball experiment.
    Decay {
        #[arg(long, default_value = "1,10,100")]
        energies: String,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        kicks: bool,
        #[arg(long, default_value_t = 40)]
        horizon: usize,
    },
}

#[derive(Subcommand)]
enum ModelOp {
    /// Print the parsed model definition.
    Show,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RaredynError::Config(_) | RaredynError::ConfigParse { .. } | RaredynError::Io(_) => 2,
                _ => 3,
            }
        }
    };
    std::process::exit(code);
}

fn effective_seed(cli_seed: u64) -> u64 {
    match std::env::var("RAREDYN_SEED") {
        Ok(v) => v.parse().unwrap_or(cli_seed),
        Err(_) => cli_seed,
    }
}

fn parse_float_list(s: &str) -> Result<Vec<f64>, RaredynError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| RaredynError::Config(format!("bad number '{t}': {e}")))
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<usize>, RaredynError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(RaredynError::Config(format!("grid '{s}' is not start:end:step")));
    }
    let parse = |t: &str| {
        t.parse::<usize>().map_err(|_| RaredynError::Config(format!("bad grid element '{t}'")))
    };
    let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if step == 0 || end < start {
        return Err(RaredynError::Config(format!("degenerate grid '{s}'")));
    }
    Ok((start..=end).step_by(step).collect())
}

struct Ctx {
    model: ModelFile,
    seed: u64,
    out: PathBuf,
    started: Instant,
}

impl Ctx {
    fn kernel(&self) -> Result<&FiniteMarkovKernel, RaredynError> {
        self.model
            .kernel
            .as_ref()
            .ok_or_else(|| RaredynError::Config("this subcommand needs a [chain] or [builtin] kernel".into()))
    }

    fn potential(&self, csv: &str) -> Result<Potential, RaredynError> {
        let values = parse_float_list(csv)?;
        if values.len() != self.kernel()?.len() {
            return Err(RaredynError::Config(format!(
                "potential has {} values for a {}-state kernel",
                values.len(),
                self.kernel()?.len()
            )));
        }
        Potential::new(values)
    }

    fn finish(
        &self,
        subcommand: &str,
        params: Vec<(&str, String)>,
        outputs: Vec<PathBuf>,
    ) -> Result<(), RaredynError> {
        let mut manifest = RunManifest::new(&self.model.raw, self.seed, subcommand);
        for (k, v) in params {
            manifest = manifest.param(k, v);
        }
        manifest.wall_seconds = self.started.elapsed().as_secs_f64();
        manifest.outputs =
            outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        manifest.write(&self.out)?;
        Ok(())
    }
}

fn run(cli: Cli) -> Result<i32, RaredynError> {
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| RaredynError::Config(format!("worker pool: {e}")))?;
    }
    let model = match &cli.common.config {
        Some(path) => load_model_file(path)?,
        None => ModelFile::default(),
    };
    let ctx = Ctx {
        model,
        seed: effective_seed(cli.common.seed),
        out: cli.common.out.clone(),
        started: Instant::now(),
    };
    match cli.command {
        Command::Chain { op } => run_chain(&ctx, op),
        Command::Verify { op } => run_verify(&ctx, op),
        Command::Mc { op } => run_mc(&ctx, op),
        Command::Couple { op } => run_couple(&ctx, op),
        Command::Wave { op } => run_wave(&ctx, op),
        Command::Model { op } => run_model(&ctx, op),
    }
}

fn run_chain(ctx: &Ctx, op: ChainOp) -> Result<i32, RaredynError> {
    let kernel = ctx.kernel()?;
    match op {
        ChainOp::Pressure { potential } => {
            let v = ctx.potential(&potential)?;
            let p = pressure(kernel, &v)?;
            let mut doc = ChainDocument::default().with_pressure(&p);
            doc.in_v = None;
            let path = raredyn::report::write_json(&ctx.out, "chain_pressure.json", &doc)?;
            println!("lambda = {}", fmt_f64(p.lambda));
            ctx.finish("chain pressure", vec![("V", potential)], vec![path])?;
        }
        ChainOp::Rate { sigma, grid } => {
            let weights = parse_float_list(&sigma)?;
            let m = DiscreteMeasure::from_dense(&weights);
            let r = rate_dv(kernel, &m)?;
            let stream = KickStream::new(ctx.seed, 0);
            let family: Vec<Potential> = (0..grid)
                .map(|i| random_potential(&stream, i as u64, kernel.len(), 2.0))
                .collect();
            let lower = rate_legendre(kernel, &m, &family)?;
            let mut doc = ChainDocument { rate: Some(r.value), ..Default::default() };
            doc.lambda = None;
            let path = raredyn::report::write_json(&ctx.out, "chain_rate.json", &doc)?;
            match r.value.finite() {
                Some(v) => println!("rate = {} (lower bound {})", fmt_f64(v), fmt_f64(lower)),
                None => println!("rate = infinite"),
            }
            ctx.finish("chain rate", vec![("sigma", sigma), ("grid", grid.to_string())], vec![path])?;
        }
        ChainOp::Equilibrium { potential } => {
            let v = ctx.potential(&potential)?;
            let eq = equilibrium_states(kernel, &v)?;
            let doc = ChainDocument {
                lambda: Some(eq.pressure.lambda),
                equilibrium: Some(eq.states.iter().map(|s| s.to_dense(kernel.len())).collect()),
                ..Default::default()
            };
            let path = raredyn::report::write_json(&ctx.out, "chain_equilibrium.json", &doc)?;
            println!("{} equilibrium state(s), unique = {}", eq.states.len(), eq.unique);
            ctx.finish("chain equilibrium", vec![("V", potential)], vec![path])?;
        }
        ChainOp::Membership { potential } => {
            let v = ctx.potential(&potential)?;
            let m = membership_test(kernel, &v)?;
            let doc = ChainDocument {
                in_v: Some(m.in_v),
                reasons: Some(m.reasons.clone()),
                ..Default::default()
            };
            let path = raredyn::report::write_json(&ctx.out, "chain_membership.json", &doc)?;
            println!("inV = {}{}", m.in_v, if m.in_v { String::new() } else { format!(" ({})", m.reasons.join("; ")) });
            ctx.finish("chain membership", vec![("V", potential)], vec![path])?;
        }
        ChainOp::Level1 { f, p } => {
            let obs = ctx.potential(&f)?;
            let r = level1_rate(kernel, &obs, p)?;
            let doc = ChainDocument { rate: Some(r), ..Default::default() };
            let path = raredyn::report::write_json(&ctx.out, "chain_level1.json", &doc)?;
            match r.finite() {
                Some(v) => println!("level-1 rate at p={p}: {}", fmt_f64(v)),
                None => println!("level-1 rate at p={p}: infinite"),
            }
            ctx.finish("chain level1", vec![("f", f), ("p", p.to_string())], vec![path])?;
        }
        ChainOp::Mixing => {
            let r = invariant_and_mixing(kernel)?;
            #[derive(serde::Serialize)]
            #[serde(rename_all = "camelCase")]
            struct MixDoc {
                mu_star: Vec<f64>,
                gamma: Option<f64>,
                lambda2: f64,
            }
            let doc = MixDoc {
                mu_star: r.mu_star.to_dense(kernel.len()),
                gamma: r.gamma,
                lambda2: r.lambda2,
            };
            let path = raredyn::report::write_json(&ctx.out, "chain_mixing.json", &doc)?;
            println!("muStar = {:?}, gamma = {:?}", doc.mu_star, doc.gamma);
            ctx.finish("chain mixing", vec![], vec![path])?;
        }
        ChainOp::Clt { f } => {
            let obs = ctx.potential(&f)?;
            let sigma2 = clt_variance(kernel, &obs)?;
            #[derive(serde::Serialize)]
            #[serde(rename_all = "camelCase")]
            struct CltDoc {
                sigma_squared: f64,
            }
            let path = raredyn::report::write_json(&ctx.out, "chain_clt.json", &CltDoc { sigma_squared: sigma2 })?;
            println!("sigma_f^2 = {}", fmt_f64(sigma2));
            ctx.finish("chain clt", vec![("f", f)], vec![path])?;
        }
    }
    Ok(0)
}

fn run_verify(ctx: &Ctx, op: VerifyOp) -> Result<i32, RaredynError> {
    match op {
        VerifyOp::Ldp { x0, event, ngrid, tol } => {
            let kernel = ctx.kernel()?;
            let ev = parse_event(&event, kernel.len())?;
            let grid = parse_grid(&ngrid)?;
            let report = ldp_bound_report(kernel, x0, &ev, &grid)?;
            let mut csv = CsvWriter::new(
                ctx.out.join("verify_ldp.csv"),
                &["n", "logP_over_n", "fitted_a", "fitted_b", "infI", "gap"],
            );
            let inf_str = report
                .inf_rate
                .finite()
                .map(fmt_f64)
                .unwrap_or_else(|| "inf".into());
            for row in &report.rows {
                csv.row(&[
                    row.n.to_string(),
                    fmt_f64(row.log_p_over_n),
                    fmt_f64(report.fitted_a),
                    fmt_f64(report.fitted_b),
                    inf_str.clone(),
                    report.gap.map(fmt_f64).unwrap_or_else(|| "inf".into()),
                ]);
            }
            let csv_path = csv.finish()?;
            let json_path = raredyn::report::write_json(&ctx.out, "verify_ldp.json", &report)?;
            let gap = report.gap.map(f64::abs).unwrap_or(f64::INFINITY);
            println!(
                "fitted decay {} vs inf I {}: |gap| = {}",
                fmt_f64(report.fitted_a),
                inf_str,
                fmt_f64(gap)
            );
            ctx.finish(
                "verify ldp",
                vec![("x0", x0.to_string()), ("event", event.join(" && ")), ("ngrid", ngrid)],
                vec![csv_path, json_path],
            )?;
            if gap > tol {
                eprintln!("assertion failed: |gap| {gap} > tol {tol}");
                return Ok(4);
            }
        }
        VerifyOp::Duality { instances, states, tol } => {
            let stream = KickStream::new(ctx.seed, 1);
            let mut worst_low: f64 = 0.0;
            let mut worst_high: f64 = 0.0;
            for case in 0..instances {
                let n = 2 + (stream.bits(case as u64, 0) as usize) % (states.max(2) - 1);
                let kernel = raredyn::instances::random_irreducible_kernel(&stream, case as u64, n);
                let v = random_potential(&stream, case as u64, n, 1.0);
                let gap = duality_gap(&kernel, &v, &stream, case as u64)?;
                worst_low = worst_low.min(gap);
                worst_high = worst_high.max(gap);
            }
            println!("duality gap over {instances} instances: [{worst_low:.3e}, {worst_high:.3e}]");
            ctx.finish(
                "verify duality",
                vec![("instances", instances.to_string()), ("states", states.to_string())],
                vec![],
            )?;
            if worst_high > tol || worst_low < -1e-9 {
                eprintln!("assertion failed: gap range [{worst_low:.3e}, {worst_high:.3e}]");
                return Ok(4);
            }
        }
        VerifyOp::Fk { instances, horizon, tol } => {
            let stream = KickStream::new(ctx.seed, 2);
            let mut worst: f64 = 0.0;
            for case in 0..instances {
                let n = 2 + (stream.bits(case as u64, 0) as usize) % 5;
                let kernel = random_positive_kernel(&stream, case as u64, n);
                let v = random_potential(&stream, case as u64, n, 1.0);
                let f: Vec<f64> = (0..n).map(|i| stream.symmetric(case as u64, (900 + i) as u64)).collect();
                let residual = fk_residual(&kernel, &v, &f, horizon)?;
                worst = worst.max(residual);
            }
            println!("worst semigroup residual at n={horizon}: {worst:.3e}");
            ctx.finish(
                "verify fk",
                vec![("instances", instances.to_string()), ("horizon", horizon.to_string())],
                vec![],
            )?;
            if worst > tol {
                eprintln!("assertion failed: residual {worst:.3e} > tol {tol}");
                return Ok(4);
            }
        }
    }
    Ok(0)
}

/// Pressure minus the best dual value over a refined candidate family.
fn duality_gap(
    kernel: &FiniteMarkovKernel,
    v: &Potential,
    stream: &KickStream,
    case: u64,
) -> Result<f64, RaredynError> {
    let lambda = pressure(kernel, v)?.lambda;
    let n = kernel.len();
    let mut best = f64::NEG_INFINITY;
    for probe in 0..20 {
        let sigma = random_probability(stream, case.wrapping_add(1000 + probe), n);
        let m = DiscreteMeasure::from_dense(&sigma);
        if let Some(rate) = rate_dv(kernel, &m)?.value.finite() {
            let inner: f64 = v.values.iter().zip(&sigma).map(|(a, b)| a * b).sum();
            best = best.max(inner - rate);
        }
    }
    // Refinement towards the maximizing measure.
    let tilt_refined = {
        let eq = equilibrium_states(kernel, v)?;
        let sigma = eq.states[0].to_dense(n);
        // Nudge into the interior so the variational solve stays finite.
        let mixed: Vec<f64> = sigma.iter().map(|w| 0.999_999 * w + 1e-6 / n as f64).collect();
        let m = DiscreteMeasure::from_dense(&mixed);
        let rate = rate_dv(kernel, &m)?.value.finite();
        rate.map(|r| {
            let inner: f64 = v.values.iter().zip(&mixed).map(|(a, b)| a * b).sum();
            inner - r
        })
    };
    if let Some(val) = tilt_refined {
        best = best.max(val);
    }
    Ok(lambda - best)
}

/// Sup-norm residual of `lambda^{-n} Q_n f` against its limit.
fn fk_residual(
    kernel: &FiniteMarkovKernel,
    v: &Potential,
    f: &[f64],
    horizon: usize,
) -> Result<f64, RaredynError> {
    let tk = TiltedKernel::new(kernel, v)?;
    let triple = perron_triple(&tk)?;
    let fm: f64 = f.iter().zip(&triple.mu).map(|(a, b)| a * b).sum();
    let limit: Vec<f64> = triple.h.iter().map(|h| fm * h).collect();
    let mut cur = f.to_vec();
    for _ in 0..horizon {
        cur = tk.apply(&cur).iter().map(|x| x / triple.lambda).collect();
    }
    Ok(cur.iter().zip(&limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn run_mc(ctx: &Ctx, op: McOp) -> Result<i32, RaredynError> {
    match op {
        McOp::Rare { x0, n, event, samples, tilt } => {
            let kernel = ctx.kernel()?;
            let ev = parse_event(&event, kernel.len())?;
            let est = match &tilt {
                Some(csv) => {
                    let v = ctx.potential(csv)?;
                    raredyn::mc::rare_event_tilted(kernel, &v, x0, n, &ev, samples, ctx.seed)?
                }
                None => {
                    let model = raredyn::ChainRds::new(kernel.clone());
                    raredyn::mc::rare_event_naive(&model, x0, n, &ev, samples, ctx.seed)?
                }
            };
            let mut csv = CsvWriter::new(
                ctx.out.join("mc_rare.csv"),
                &["method", "point_estimate", "standard_error", "samples", "ess"],
            );
            csv.row(&[
                est.method.to_string(),
                fmt_f64(est.point_estimate),
                fmt_f64(est.standard_error),
                est.sample_count.to_string(),
                est.weights_summary
                    .as_ref()
                    .map(|w| fmt_f64(w.effective_sample_size))
                    .unwrap_or_else(|| String::from("")),
            ]);
            let csv_path = csv.finish()?;
            let path = raredyn::report::write_json(&ctx.out, "mc_rare.json", &est)?;
            println!(
                "{} estimate {} (se {})",
                est.method,
                fmt_f64(est.point_estimate),
                fmt_f64(est.standard_error)
            );
            ctx.finish(
                "mc rare",
                vec![
                    ("x0", x0.to_string()),
                    ("n", n.to_string()),
                    ("event", event.join(" && ")),
                    ("samples", samples.to_string()),
                    ("tilt", tilt.unwrap_or_else(|| "none".into())),
                ],
                vec![csv_path, path],
            )?;
        }
        McOp::Mixing { x0, x1, n, samples } => {
            let rows = if let Some(kernel) = &ctx.model.kernel {
                let model = raredyn::ChainRds::new(kernel.clone());
                let a: usize = x0.parse().map_err(|_| RaredynError::Config("x0 must be a state index".into()))?;
                let b: usize = x1.parse().map_err(|_| RaredynError::Config("x1 must be a state index".into()))?;
                raredyn::mc::mixing_estimate(&model, &a, &b, n, samples, ctx.seed)?
            } else if let Some(toy) = &ctx.model.contraction {
                let a = parse_float_list(&x0)?;
                let b = parse_float_list(&x1)?;
                raredyn::mc::mixing_estimate(toy, &a, &b, n, samples, ctx.seed)?
            } else {
                return Err(RaredynError::Config("mc mixing needs a kernel or contraction model".into()));
            };
            let mut csv = CsvWriter::new(
                ctx.out.join("mc_mixing.csv"),
                &["step", "dual_lipschitz", "compression_bias"],
            );
            for p in &rows.curve {
                csv.row(&[p.step.to_string(), fmt_f64(p.dual_lipschitz), fmt_f64(p.compression_bias)]);
            }
            let csv_path = csv.finish()?;
            let json_path = raredyn::report::write_json(&ctx.out, "mc_mixing.json", &rows)?;
            println!("fitted gamma = {:?}", rows.gamma_hat);
            ctx.finish(
                "mc mixing",
                vec![("x0", x0), ("x1", x1), ("n", n.to_string()), ("samples", samples.to_string())],
                vec![csv_path, json_path],
            )?;
        }
        McOp::Clt { f, n, samples } => {
            let kernel = ctx.kernel()?;
            let obs = ctx.potential(&f)?;
            let r = raredyn::mc::clt_check(kernel, &obs, n, samples, ctx.seed)?;
            let mut csv = CsvWriter::new(
                ctx.out.join("mc_clt.csv"),
                &["empirical_variance", "theoretical_variance", "ks_statistic", "ks_p", "degenerate"],
            );
            csv.row(&[
                fmt_f64(r.empirical_variance),
                fmt_f64(r.theoretical_variance),
                fmt_f64(r.ks_statistic),
                fmt_f64(r.ks_p_value),
                r.degenerate.to_string(),
            ]);
            let csv_path = csv.finish()?;
            let path = raredyn::report::write_json(&ctx.out, "mc_clt.json", &r)?;
            println!(
                "empirical variance {} vs {} (KS p = {})",
                fmt_f64(r.empirical_variance),
                fmt_f64(r.theoretical_variance),
                fmt_f64(r.ks_p_value)
            );
            ctx.finish(
                "mc clt",
                vec![("f", f), ("n", n.to_string()), ("samples", samples.to_string())],
                vec![csv_path, path],
            )?;
        }
        McOp::Ac { x0, n, ensemble } => {
            let (diag, label) = mc_ac_dispatch(ctx, &x0, n, ensemble)?;
            let mut csv = CsvWriter::new(ctx.out.join("mc_ac.csv"), &["step", "distance"]);
            for (k, d) in diag.distances.iter().enumerate() {
                csv.row(&[k.to_string(), fmt_f64(*d)]);
            }
            let csv_path = csv.finish()?;
            let json_path = raredyn::report::write_json(&ctx.out, "mc_ac.json", &diag)?;
            println!("kappa_hat = {:?} ({label})", diag.kappa_hat);
            ctx.finish(
                "mc ac",
                vec![("x0", x0), ("n", n.to_string()), ("ensemble", ensemble.to_string())],
                vec![csv_path, json_path],
            )?;
        }
        McOp::Aet { x0, ngrid, samples, radius } => {
            let grid = parse_grid(&ngrid)?;
            let rows = if let Some(toy) = &ctx.model.contraction {
                let a = parse_float_list(&x0)?;
                raredyn::mc::aet_diagnostic(toy, &a, &grid, samples, radius, ctx.seed)?
            } else if let Some(wave_cfg) = &ctx.model.wave {
                let model = WaveModel::new(wave_cfg.clone())?;
                let energy: f64 = x0.parse().map_err(|_| {
                    RaredynError::Config("x0 must be an initial energy for wave models".into())
                })?;
                let start = WaveDualState::from_initial(model.state_with_energy(energy));
                raredyn::mc::aet_diagnostic(&model, &start, &grid, samples, radius, ctx.seed)?
            } else {
                return Err(RaredynError::Config("mc aet needs a contraction or wave model".into()));
            };
            let mut csv = CsvWriter::new(ctx.out.join("mc_aet.csv"), &["n", "exceed_fraction"]);
            for r in &rows {
                csv.row(&[r.n.to_string(), fmt_f64(r.exceed_fraction)]);
            }
            let csv_path = csv.finish()?;
            let json_path = raredyn::report::write_json(&ctx.out, "mc_aet.json", &rows)?;
            ctx.finish(
                "mc aet",
                vec![
                    ("x0", x0),
                    ("ngrid", ngrid),
                    ("samples", samples.to_string()),
                    ("radius", radius.to_string()),
                ],
                vec![csv_path, json_path],
            )?;
        }
    }
    Ok(0)
}

fn mc_ac_dispatch(
    ctx: &Ctx,
    x0: &str,
    n: usize,
    ensemble: usize,
) -> Result<(raredyn::mc::AcDiagnostic, &'static str), RaredynError> {
    if let Some(toy) = &ctx.model.contraction {
        let a = parse_float_list(x0)?;
        Ok((raredyn::mc::ac_diagnostic(toy, &a, n, ensemble, ctx.seed)?, "contraction"))
    } else if let Some(wave_cfg) = &ctx.model.wave {
        let model = WaveModel::new(wave_cfg.clone())?;
        let energy: f64 = x0
            .parse()
            .map_err(|_| RaredynError::Config("x0 must be an initial energy for wave models".into()))?;
        let start = WaveDualState::from_initial(model.state_with_energy(energy));
        Ok((raredyn::mc::ac_diagnostic(&model, &start, n, ensemble, ctx.seed)?, "wave"))
    } else {
        Err(RaredynError::Config("mc ac needs a contraction or wave model".into()))
    }
}

fn run_couple(ctx: &Ctx, op: CoupleOp) -> Result<i32, RaredynError> {
    match op {
        CoupleOp::Verify { q, g_slope, pairs, samples } => {
            let toy: &ContractionToy = ctx
                .model
                .contraction
                .as_ref()
                .ok_or_else(|| RaredynError::Config("couple verify needs a contraction model".into()))?;
            let spec = CouplingSpec::new(q, g_slope)?;
            let radius = toy.attainable_radius().max(1.0);
            let grid: Vec<(Vec<f64>, Vec<f64>)> = (1..=pairs)
                .map(|i| {
                    let d = radius * i as f64 / pairs as f64;
                    let mut a = vec![0.0; toy.dim];
                    let mut b = vec![0.0; toy.dim];
                    a[0] = 0.5 * d;
                    b[0] = -0.5 * d;
                    (a, b)
                })
                .collect();
            let report = squeezing_verify(toy, &spec, &grid, samples, ctx.seed)?;
            let mut csv = CsvWriter::new(
                ctx.out.join("couple_verify.csv"),
                &["dx", "q_dx", "p_hat", "se", "g_dx", "pass"],
            );
            for r in &report.rows {
                csv.row(&[
                    fmt_f64(r.dx),
                    fmt_f64(r.q_dx),
                    fmt_f64(r.p_hat),
                    fmt_f64(r.se),
                    fmt_f64(r.g_dx),
                    r.pass.to_string(),
                ]);
            }
            let csv_path = csv.finish()?;
            let json_path = raredyn::report::write_json(&ctx.out, "couple_verify.json", &report)?;
            println!("squeezing: all_pass = {}, worst margin = {}", report.all_pass, fmt_f64(report.worst_margin));
            ctx.finish(
                "couple verify",
                vec![("q", q.to_string()), ("g_slope", g_slope.to_string())],
                vec![csv_path, json_path],
            )?;
            if !report.all_pass {
                return Ok(4);
            }
        }
    }
    Ok(0)
}

fn run_wave(ctx: &Ctx, op: WaveOp) -> Result<i32, RaredynError> {
    let wave_cfg = ctx
        .model
        .wave
        .as_ref()
        .ok_or_else(|| RaredynError::Config("this subcommand needs a [wave] section".into()))?;
    let model = WaveModel::new(wave_cfg.clone())?;
    match op {
        WaveOp::Simulate { energy, periods } => {
            let stream = KickStream::new(ctx.seed, 0);
            let mut dual = WaveDualState::from_initial(model.state_with_energy(energy));
            let mut csv = CsvWriter::new(
                ctx.out.join("wave_simulate.csv"),
                &["step", "energy", "tailFraction", "mode1", "mode2", "mode3", "mode4"],
            );
            let mut emit = |step: usize, dual: &WaveDualState| {
                let tail = model.tail_fraction(&dual.forced, model.config.j_cut).unwrap_or(0.0);
                csv.row(&[
                    step.to_string(),
                    fmt_f64(model.energy(&dual.full)),
                    fmt_f64(tail),
                    fmt_f64(dual.full.u[0]),
                    fmt_f64(dual.full.u[1]),
                    fmt_f64(dual.full.u[2]),
                    fmt_f64(dual.full.u[3]),
                ]);
            };
            emit(0, &dual);
            for k in 0..periods {
                let kick = model.sample_kick(&stream, k as u64);
                dual = model.kick_map_dual(&dual, &kick)?;
                emit(k + 1, &dual);
            }
            let csv_path = csv.finish()?;
            println!("simulated {periods} kick periods from energy {energy}");
            ctx.finish(
                "wave simulate",
                vec![("energy", energy.to_string()), ("periods", periods.to_string())],
                vec![csv_path],
            )?;
        }
        WaveOp::Decay { energies, kicks, horizon } => {
            let e0: Vec<f64> = parse_float_list(&energies)?;
            let report = decay_experiment(&model, &e0, kicks, horizon, ctx.seed)?;
            let mut csv = CsvWriter::new(ctx.out.join("wave_decay.csv"), &["run", "step", "energy"]);
            for (run, trace) in report.energies.iter().enumerate() {
                for (step, e) in trace.iter().enumerate() {
                    csv.row(&[run.to_string(), step.to_string(), fmt_f64(*e)]);
                }
            }
            let csv_path = csv.finish()?;
            let json_path = raredyn::report::write_json(&ctx.out, "wave_decay.json", &report)?;
            if kicks {
                println!("ball radius {:?}", report.ball_radius);
            } else {
                for row in &report.unforced {
                    println!(
                        "E0 {}: decay rate {} (R^2 {})",
                        row.initial_energy,
                        fmt_f64(row.rate),
                        fmt_f64(row.r_squared)
                    );
                }
            }
            ctx.finish(
                "wave decay",
                vec![("energies", energies), ("kicks", kicks.to_string()), ("horizon", horizon.to_string())],
                vec![csv_path, json_path],
            )?;
        }
    }
    Ok(0)
}

fn run_model(ctx: &Ctx, op: ModelOp) -> Result<i32, RaredynError> {
    match op {
        ModelOp::Show => {
            #[derive(serde::Serialize)]
            struct Show<'a> {
                kernel_states: Option<usize>,
                kernel_matrix: Option<&'a Vec<Vec<f64>>>,
                contraction: Option<&'a ContractionToy>,
                wave: Option<&'a raredyn::wave::WaveConfig>,
                config_digest: String,
            }
            let doc = Show {
                kernel_states: ctx.model.kernel.as_ref().map(|k| k.len()),
                kernel_matrix: ctx.model.kernel.as_ref().map(|k| &k.matrix),
                contraction: ctx.model.contraction.as_ref(),
                wave: ctx.model.wave.as_ref(),
                config_digest: raredyn::report::config_digest(&ctx.model.raw),
            };
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            let path = raredyn::report::write_json(&ctx.out, "model_show.json", &doc)?;
            ctx.finish("model show", vec![], vec![path])?;
        }
    }
    Ok(0)
}
