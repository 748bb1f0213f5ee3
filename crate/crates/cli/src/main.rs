use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bbk29_core::baselines::{
    coverage_averaging, coverage_filtering, kalman_gamma_recursion, kalman_steady_state,
    CoverageReport, CoverageSetup, KalmanParams,
};
use bbk29_core::geometry::{estimate, FiniteNormedSpace, ModulusKind, SearchBudget};
use bbk29_core::harness::{
    run_experiment, verify_geometry_suite, write_gamma_csv, write_outputs, ExperimentConfig,
    GeometrySuiteOptions,
};
use bbk29_core::signals::{gen_diffusion, gen_fbm, observe, BenchmarkRule, Diffusion, NoiseKind, NoiseSpec, Path as SignalPath};
use bbk29_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "bbk29", version, about = "Online regression competitive with Sobolev benchmark classes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for result files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Grid size for Sobolev computations.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep from a JSON config.
    Run { config: PathBuf },
    /// Check the geometry inequalities on the configured spaces.
    Geometry {
        /// Coarser searches, for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
    /// Kalman error-variance trace.
    Kalman {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long = "N", alias = "n", default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        gamma0: f64,
    },
    /// Generate a test signal, optionally observed in noise, as path CSV.
    Signal {
        #[arg(long, value_enum, default_value_t = SignalKind::Fbm)]
        kind: SignalKind,
        #[arg(long = "N", alias = "n", default_value_t = 256)]
        n: usize,
        /// Hurst index of fBm.
        #[arg(long, default_value_t = 0.5)]
        h: f64,
        /// Diffusion scale `b ≡ c`.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Observation bound; observations are added when given.
        #[arg(long)]
        y_bound: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value = "uniform")]
        noise_kind: String,
    },
    /// Estimate one modulus of convexity or smoothness.
    Modulus {
        #[arg(long, default_value = "delta")]
        kind: String,
        /// ε for δ moduli, τ for ρ moduli.
        #[arg(long)]
        arg: f64,
        /// ℓ^p exponent; 2 gives the Euclidean plane.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        quick: bool,
    },
    /// Monte-Carlo coverage of the averaging and filtering bounds.
    Coverage {
        #[arg(long, value_enum, default_value_t = Which::Both)]
        which: Which,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long = "N", alias = "n", default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalKind {
    Fbm,
    Diffusion,
    Sin,
    Vee,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Which {
    Averaging,
    Filtering,
    Both,
}

enum Failure {
    Error(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Error(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_VALIDATION })
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Run { config } => cmd_run(g, config),
        Command::Geometry { quick } => cmd_geometry(g, *quick),
        Command::Kalman { c, sigma2, n, gamma0 } => {
            let mut params = KalmanParams::new(*c, *sigma2, *n)?;
            params.gamma0 = *gamma0;
            cmd_kalman(g, &params)
        }
        Command::Signal {
            kind,
            n,
            h,
            c,
            y_bound,
            noise,
            noise_kind,
        } => cmd_signal(g, *kind, *n, *h, *c, *y_bound, *noise, noise_kind),
        Command::Modulus {
            kind,
            arg,
            p,
            dim,
            quick,
        } => cmd_modulus(g, kind, *arg, *p, *dim, *quick),
        Command::Coverage { which, runs, n, delta } => cmd_coverage(g, *which, *runs, *n, *delta),
    }
}

fn emit_json<T: serde::Serialize>(value: &T) -> Outcome {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn out_file(g: &Global, name: &str) -> Result<Option<PathBuf>, Failure> {
    match &g.out_dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            Ok(Some(d.join(name)))
        }
        None => Ok(None),
    }
}

fn cmd_run(g: &Global, path: &Path) -> Outcome {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(grid) = g.grid {
        if let bbk29_core::harness::KernelSpec::DualSobolev { grid: kg, .. } = &mut config.kernel {
            *kg = Some(grid);
        }
    }
    let result = run_experiment(&config)?;
    let dir = g.out_dir.clone().or_else(|| config.output.dir.clone().map(PathBuf::from));
    let written = match &dir {
        Some(d) => write_outputs(&result, d)?,
        None => Vec::new(),
    };
    if g.json {
        emit_json(&result)?;
    } else {
        println!("config {} ({}), kernel {}", result.config_hash, config.name, result.kernel);
        println!(
            "benchmark {} norm {:.6} [{}], c_F {:.6}",
            result.benchmark, result.norm_d, result.norm_source, result.c_f
        );
        println!("{:>8} {:>8} {:>14} {:>14} {:>10} {:>6}", "N", "seed", "regret_term", "bound", "ratio", "ok");
        for p in &result.points {
            match &p.error {
                Some(e) => println!("{:>8} {:>8} error: {e}", p.n, p.seed),
                None => println!(
                    "{:>8} {:>8} {:>14.6e} {:>14.6e} {:>10.4} {:>6}",
                    p.n, p.seed, p.regret_term, p.bound, p.bound_ratio, p.bound_satisfied
                ),
            }
        }
        if let Some(f) = result.bound_fit {
            println!("bound slope {:.6}", f.slope);
        }
        if let Some(f) = result.regret_fit {
            println!("empirical regret slope {:.6}", f.slope);
        }
        for w in &written {
            println!("wrote {}", w.display());
        }
    }
    if let Some(p) = result.points.iter().find(|p| p.error.is_some()) {
        return Err(Failure::Check(format!(
            "sweep point N={} seed={} failed: {}",
            p.n,
            p.seed,
            p.error.as_deref().unwrap_or_default()
        )));
    }
    if !result.all_satisfied() {
        return Err(Failure::Check("a bound was violated; see the sweep output".into()));
    }
    Ok(())
}

fn cmd_geometry(g: &Global, quick: bool) -> Outcome {
    let mut opts = GeometrySuiteOptions::default();
    opts.budget.seed = g.seed;
    opts.seed = g.seed;
    if quick {
        opts.budget = SearchBudget {
            seed: g.seed,
            ..SearchBudget::quick()
        };
        opts.slack = 2e-3;
    }
    if let Some(grid) = g.grid {
        opts.sobolev_grid = grid;
    }
    let report = verify_geometry_suite(&opts);
    if let Some(path) = out_file(g, "geometry.json")? {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if g.json {
        emit_json(&report)?;
    } else {
        for c in &report.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            match &c.error {
                Some(e) => println!("{status} {:<12} {} error: {e}", c.group, c.name),
                None => println!("{status} {:<12} {} ({:.6e} vs {:.6e})", c.group, c.name, c.lhs, c.rhs),
            }
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} geometry checks failed", report.failures().count())))
    }
}

fn cmd_kalman(g: &Global, params: &KalmanParams) -> Outcome {
    let gammas = kalman_gamma_recursion(params)?;
    let limit = kalman_steady_state(params.c, params.sigma2, params.n).ok();
    match out_file(g, "gamma.csv")? {
        Some(path) => write_gamma_csv(&gammas, fs::File::create(&path)?)?,
        None if !g.json => write_gamma_csv(&gammas, io::stdout().lock())?,
        None => {}
    }
    if g.json {
        emit_json(&serde_json::json!({
            "params": params,
            "gamma": gammas,
            "steady_state": limit,
        }))?;
    } else if g.out_dir.is_some() {
        println!("final gamma {:.6}", gammas.last().copied().unwrap_or(0.0));
        if let Some(l) = limit {
            println!("steady state {l:.6}");
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_signal(
    g: &Global,
    kind: SignalKind,
    n: usize,
    h: f64,
    c: f64,
    y_bound: Option<f64>,
    noise: f64,
    noise_kind: &str,
) -> Outcome {
    let mut path = match kind {
        SignalKind::Fbm => gen_fbm(h, n, g.seed)?,
        SignalKind::Diffusion => gen_diffusion(&Diffusion::scaled_brownian(c), 0.0, n, g.seed)?,
        SignalKind::Sin | SignalKind::Vee => {
            let rule = if matches!(kind, SignalKind::Sin) { BenchmarkRule::Sin } else { BenchmarkRule::Vee };
            let theta = (1..=n).map(|i| rule.eval(i as f64 / n as f64)).collect();
            SignalPath::new(theta, None)?
        }
    };
    if let Some(y) = y_bound {
        let spec = NoiseSpec::new(noise_kind.parse::<NoiseKind>()?, noise)?;
        path = observe(&path, &spec, y, g.seed.wrapping_add(1))?;
    }
    match out_file(g, "path.csv")? {
        Some(file) => path.write_csv(fs::File::create(&file)?)?,
        None if !g.json => path.write_csv(io::stdout().lock())?,
        None => {}
    }
    if g.json {
        emit_json(&path)?;
    }
    if !path.flagged.is_empty() {
        eprintln!("note: {} signal values exceed the observation bound", path.flagged.len());
    }
    Ok(())
}

fn cmd_modulus(g: &Global, kind: &str, arg: f64, p: f64, dim: usize, quick: bool) -> Outcome {
    let kind: ModulusKind = kind.parse()?;
    let space = if p == 2.0 {
        FiniteNormedSpace::euclidean(dim)?
    } else {
        FiniteNormedSpace::ellp(p, dim)?
    };
    let mut budget = if quick { SearchBudget::quick() } else { SearchBudget::default() };
    budget.seed = g.seed;
    let est = estimate(&space, kind, arg, &budget)?;
    if let Some(path) = out_file(g, "modulus.json")? {
        fs::write(path, serde_json::to_string_pretty(&est)? + "\n")?;
    }
    if g.json {
        emit_json(&est)?;
    } else {
        println!(
            "{:?}({arg}) on {} = {:.9} (tolerance {:.1e}, {})",
            est.kind, est.space, est.value, est.tolerance, est.method
        );
    }
    Ok(())
}

fn cmd_coverage(g: &Global, which: Which, runs: usize, n: usize, delta: f64) -> Outcome {
    let mut setup = CoverageSetup {
        runs,
        n,
        delta,
        seed: g.seed,
        ..CoverageSetup::default()
    };
    if let Some(grid) = g.grid {
        setup.grid = grid;
    }
    let mut reports: Vec<CoverageReport> = Vec::new();
    if which != Which::Filtering {
        let bench = BenchmarkRule::custom("0.5 sin(2πx)", |x| 0.5 * (2.0 * std::f64::consts::PI * x).sin());
        reports.push(coverage_averaging(&setup, &bench)?);
    }
    if which != Which::Averaging {
        reports.push(coverage_filtering(&setup)?);
    }
    if let Some(path) = out_file(g, "coverage.json")? {
        fs::write(path, serde_json::to_string_pretty(&reports)? + "\n")?;
    }
    if g.json {
        emit_json(&reports)?;
    } else {
        for r in &reports {
            println!(
                "{}: {} of {} runs violated (rate {:.4}, allowed {:.4}) -> {}",
                r.experiment,
                r.violations,
                r.runs.len(),
                r.violation_rate,
                r.allowed_rate,
                if r.passed { "pass" } else { "FAIL" }
            );
        }
    }
    let _ = io::stdout().flush();
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Check("coverage exceeded the allowed violation rate".into()))
    }
}
