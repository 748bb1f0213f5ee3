//! Experiment orchestration: JSON configs, parallel sweeps over `N` and
//! seeds, rate fits and result files.
//!
//! Every emitted file carries the config hash (SHA-256 of the normalized
//! config JSON, first 16 hex digits) and the seed it was produced with.

mod suite;

pub use suite::{verify_geometry_suite, GeometrySuiteOptions, GeometrySuiteReport, SuiteCheck};

use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bbk29::{run_and_report, PredictorConfig, RegretReport, ScalarForm, TraceRow};
use crate::error::{domain, Error, Result};
use crate::kernel::{
    BanachKernel, DirectSumWeights, DualSobolevKernel, MappingKernel, RkhsKernel, SolverSettings,
};
use crate::signals::{fbm_grid_function, stream_rng, truncate, BenchmarkRule, NoiseKind, NoiseSpec};
use crate::spaces::{
    num, sobolev_norm, w1p_norm, GridDomain, GridFunction, SobolevParams, DEFAULT_GRID_1D,
};

/// Smallest `N` entering rate fits unless the config says otherwise.
pub const DEFAULT_FIT_MIN_N: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorBlock {
    pub y_bound: f64,
    /// Defaults to the kernel's exponent.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub a1: Option<f64>,
    #[serde(default)]
    pub a2: Option<f64>,
    #[serde(default)]
    pub root_tol: Option<f64>,
    #[serde(default)]
    pub scan_points: Option<usize>,
    #[serde(default)]
    pub scalar_form: Option<ScalarForm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    DualSobolev {
        s: f64,
        p: f64,
        #[serde(default)]
        grid: Option<usize>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
    RkhsW12,
    Gaussian {
        width: f64,
    },
    MappingAffine {
        r: f64,
    },
    MappingFourier {
        weights: Vec<f64>,
        r: f64,
    },
}

impl KernelSpec {
    /// Exponent `p` of the benchmark space matched to this kernel.
    pub fn p(&self) -> f64 {
        match self {
            Self::DualSobolev { p, .. } => *p,
            Self::RkhsW12 | Self::Gaussian { .. } => 2.0,
            Self::MappingAffine { r } | Self::MappingFourier { r, .. } => r / (r - 1.0),
        }
    }

    /// Interval the inputs are drawn from.
    pub fn interval(&self) -> (f64, f64) {
        match self {
            Self::MappingAffine { .. } => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    pub fn build(&self) -> Result<Box<dyn BanachKernel<f64>>> {
        Ok(match self {
            Self::DualSobolev {
                s,
                p,
                grid,
                tol,
                max_iter,
            } => {
                let defaults = SolverSettings::default();
                let settings = SolverSettings {
                    tol: tol.unwrap_or(defaults.tol),
                    max_iter: max_iter.unwrap_or(defaults.max_iter),
                };
                let g = Arc::new(GridDomain::unit_interval(grid.unwrap_or(DEFAULT_GRID_1D))?);
                Box::new(DualSobolevKernel::new(g, SobolevParams::new(*s, *p)?, settings)?)
            }
            Self::RkhsW12 => Box::new(RkhsKernel::sobolev_w12()),
            Self::Gaussian { width } => Box::new(RkhsKernel::gaussian(*width)?),
            Self::MappingAffine { r } => Box::new(MappingKernel::affine(*r)?),
            Self::MappingFourier { weights, r } => {
                Box::new(MappingKernel::fourier(weights.clone(), *r)?)
            }
        })
    }

    fn normalize(&mut self) {
        if let Self::DualSobolev {
            grid, tol, max_iter, ..
        } = self
        {
            let d = SolverSettings::default();
            grid.get_or_insert(DEFAULT_GRID_1D);
            tol.get_or_insert(d.tol);
            max_iter.get_or_insert(d.max_iter);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLaw {
    /// Uniform on the kernel's interval.
    #[default]
    Uniform,
    /// `xₙ = n/N`, mapped onto the kernel's interval.
    Times,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    #[serde(default)]
    pub x: InputLaw,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
}

fn default_noise() -> NoiseSpec {
    NoiseSpec {
        kind: NoiseKind::Uniform,
        scale: 0.2,
    }
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            x: InputLaw::default(),
            noise: default_noise(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Sin,
    Vee,
    /// fBm sampled on the norm grid and rescaled to `max |D| = amplitude`.
    Fbm,
    /// A GridFunction CSV file.
    Samples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub rule: BenchmarkKind,
    /// Hurst index, seed and amplitude of an fBm benchmark.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// File of a `samples` benchmark.
    #[serde(default)]
    pub path: Option<String>,
    /// Multiplies the benchmark; default 1.
    #[serde(default)]
    pub scale: Option<f64>,
    /// A declared norm replaces the computed one.
    #[serde(default)]
    pub norm: Option<f64>,
    /// Smoothness of the norm; defaults to the kernel's space.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    /// Also write per-round traces.
    #[serde(default)]
    pub trace: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub predictor: PredictorBlock,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub signal: SignalSpec,
    pub benchmark: BenchmarkSpec,
    pub sweep: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub fit_min_n: Option<usize>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return domain("sweep must list at least one N");
        }
        if self.sweep[0] == 0 || self.sweep.windows(2).any(|w| w[1] <= w[0]) {
            return domain("sweep values must be positive and strictly increasing");
        }
        if self.seeds.is_empty() {
            return domain("at least one seed is required");
        }
        if let Some(n) = self.benchmark.norm {
            if !(n >= 0.0 && n.is_finite()) {
                return domain(format!("declared norm must be nonnegative, got {n}"));
            }
        }
        let b = &self.benchmark;
        match b.rule {
            BenchmarkKind::Fbm => {
                let (h, a) = (b.h.unwrap_or(f64::NAN), b.amplitude.unwrap_or(f64::NAN));
                if !(h > 0.0 && h < 1.0 && a > 0.0 && b.seed.is_some()) {
                    return domain("fbm benchmark needs h in (0,1), amplitude > 0 and a seed");
                }
            }
            BenchmarkKind::Samples if b.path.is_none() => {
                return domain("samples benchmark needs a path");
            }
            _ => {}
        }
        self.predictor_config()?;
        NoiseSpec::new(self.signal.noise.kind, self.signal.noise.scale)?;
        Ok(())
    }

    /// The config with every default written out.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        let pc = self.predictor_config().ok();
        if let Some(pc) = pc {
            c.predictor.p = Some(pc.p);
            c.predictor.a1 = Some(pc.weights.a1);
            c.predictor.a2 = Some(pc.weights.a2);
            c.predictor.root_tol = Some(pc.root_tol);
            c.predictor.scan_points = Some(pc.scan_points);
            c.predictor.scalar_form = Some(pc.scalar_form);
        }
        c.kernel.normalize();
        c.benchmark.scale.get_or_insert(1.0);
        if c.benchmark.norm.is_none() {
            let (s, p) = self.norm_space();
            c.benchmark.s = Some(s);
            c.benchmark.p = Some(p);
            c.benchmark.grid.get_or_insert(self.norm_grid());
        }
        c.fit_min_n.get_or_insert(DEFAULT_FIT_MIN_N);
        c
    }

    /// First 16 hex digits of SHA-256 over the normalized config JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.normalized()).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn predictor_config(&self) -> Result<PredictorConfig> {
        let b = &self.predictor;
        let mut cfg = PredictorConfig::new(b.y_bound, b.p.unwrap_or_else(|| self.kernel.p()))?;
        let w = DirectSumWeights::new(b.a1.unwrap_or(cfg.weights.a1), b.a2.unwrap_or(cfg.weights.a2))?;
        cfg.weights = w;
        if let Some(t) = b.root_tol {
            cfg.root_tol = t;
        }
        if let Some(n) = b.scan_points {
            cfg.scan_points = n;
        }
        if let Some(f) = b.scalar_form {
            cfg.scalar_form = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn norm_space(&self) -> (f64, f64) {
        let (ks, kp) = match self.kernel {
            KernelSpec::DualSobolev { s, p, .. } => (s, p),
            KernelSpec::RkhsW12 => (1.0, 2.0),
            _ => (0.5, self.kernel.p()),
        };
        (self.benchmark.s.unwrap_or(ks), self.benchmark.p.unwrap_or(kp))
    }

    fn norm_grid(&self) -> usize {
        match (&self.kernel, self.benchmark.grid) {
            (_, Some(g)) => g,
            (KernelSpec::DualSobolev { grid, .. }, None) => grid.unwrap_or(DEFAULT_GRID_1D),
            _ => DEFAULT_GRID_1D,
        }
    }
}

/// A benchmark rule ready to evaluate, with its norm.
pub struct Benchmark {
    pub label: String,
    eval: Box<dyn Fn(f64) -> Result<f64> + Send + Sync>,
    pub norm: f64,
    pub norm_source: String,
}

impl Benchmark {
    pub fn eval(&self, x: f64) -> Result<f64> {
        (self.eval)(x)
    }
}

/// Resolves the benchmark block. With a dual Sobolev kernel whose space
/// matches the norm parameters, the benchmark is sampled on the kernel grid
/// and evaluated by the kernel's interpolation, so the computed norm is its
/// exact norm in the kernel's space.
pub fn build_benchmark(config: &ExperimentConfig) -> Result<Benchmark> {
    let b = &config.benchmark;
    let scale = b.scale.unwrap_or(1.0);
    let (s, p) = config.norm_space();
    let grid = Arc::new(GridDomain::unit_interval(config.norm_grid())?);
    let (label, gf, closed): (String, GridFunction, Option<BenchmarkRule>) = match b.rule {
        BenchmarkKind::Sin | BenchmarkKind::Vee => {
            let rule = if b.rule == BenchmarkKind::Sin {
                BenchmarkRule::Sin
            } else {
                BenchmarkRule::Vee
            };
            let gf = GridFunction::from_fn(grid.clone(), |x| scale * rule.eval(x[0]))?;
            (rule.name(), gf, Some(rule))
        }
        BenchmarkKind::Fbm => {
            let (h, seed) = (b.h.unwrap_or(0.5), b.seed.unwrap_or(0));
            let raw = fbm_grid_function(h, grid.clone(), seed)?;
            let m = raw.max_abs();
            let amplitude = b.amplitude.unwrap_or(1.0);
            let gf = if m > 0.0 { raw.scaled(scale * amplitude / m) } else { raw };
            (format!("fbm(h={h}, seed={seed})"), gf, None)
        }
        BenchmarkKind::Samples => {
            let path = b.path.clone().unwrap_or_default();
            let raw = GridFunction::read_csv(fs::File::open(&path)?)?;
            (format!("samples({path})"), raw.scaled(scale), None)
        }
    };
    let sampled_on_kernel_grid = match config.kernel {
        KernelSpec::DualSobolev {
            s: ks,
            p: kp,
            grid: kg,
            ..
        } => kg.unwrap_or(DEFAULT_GRID_1D) == config.norm_grid() && ks == s && kp == p,
        _ => false,
    };
    let (norm, norm_source) = match b.norm {
        Some(n) => (n, "declared".to_string()),
        None => {
            let n = if s >= 1.0 {
                w1p_norm(&gf, p)?
            } else {
                sobolev_norm(&gf, &SobolevParams::new(s, p)?)?
            };
            (n, format!("computed(s={s}, p={p}, grid={})", gf.domain().len()))
        }
    };
    let eval: Box<dyn Fn(f64) -> Result<f64> + Send + Sync> = match closed {
        Some(rule) if !sampled_on_kernel_grid => Box::new(move |x| Ok(scale * rule.eval(x))),
        _ => Box::new(move |x| gf.eval(&[x])),
    };
    Ok(Benchmark {
        label,
        eval,
        norm,
        norm_source,
    })
}

/// Examples for one sweep point, drawn from stream `N` of `seed`.
pub fn generate_examples(
    config: &ExperimentConfig,
    benchmark: &Benchmark,
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = config.kernel.interval();
    let y_bound = config.predictor.y_bound;
    let noise = config.signal.noise;
    let mut rng = stream_rng(seed, n as u64);
    (1..=n)
        .map(|i| {
            let x = match config.signal.x {
                InputLaw::Uniform => rng.random_range(lo..=hi),
                InputLaw::Times => lo + (hi - lo) * i as f64 / n as f64,
            };
            let y = truncate(benchmark.eval(x)? + noise.sample(&mut rng), y_bound);
            Ok((x, y))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub seed: u64,
    pub cum_loss: f64,
    pub cum_loss_d: f64,
    /// `max(0, cum − cum_D)/N`.
    pub regret_term: f64,
    /// Allowed average excess loss at `N`.
    pub bound: f64,
    pub bound_ratio: f64,
    /// Every prefix met every checked inequality.
    pub bound_satisfied: bool,
    pub defect_violations: usize,
    pub regret_violations: usize,
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl SweepPoint {
    fn from_report(n: usize, seed: u64, r: RegretReport) -> Self {
        let regret_term = r.empirical_regret();
        let bound = r.regret_term_bound;
        Self {
            n,
            seed,
            cum_loss: r.cum_loss,
            cum_loss_d: r.cum_loss_d,
            regret_term,
            bound,
            bound_ratio: if bound > 0.0 { regret_term / bound } else { f64::NAN },
            bound_satisfied: r.bound_satisfied,
            defect_violations: r.defect_violations,
            regret_violations: r.regret_violations,
            error: None,
            trace: r.trace,
        }
    }

    fn failed(n: usize, seed: u64, e: Error) -> Self {
        Self {
            n,
            seed,
            cum_loss: f64::NAN,
            cum_loss_d: f64::NAN,
            regret_term: f64::NAN,
            bound: f64::NAN,
            bound_ratio: f64::NAN,
            bound_satisfied: false,
            defect_violations: 0,
            regret_violations: 0,
            error: Some(e.to_string()),
            trace: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub kernel: String,
    pub c_f: f64,
    pub benchmark: String,
    pub norm_d: f64,
    pub norm_source: String,
    pub points: Vec<SweepPoint>,
    /// Fit of the seed-averaged empirical regret term, when it is positive.
    pub regret_fit: Option<RateFit>,
    pub bound_fit: Option<RateFit>,
    pub max_bound_ratio: f64,
}

impl SweepResult {
    pub fn all_satisfied(&self) -> bool {
        self.points.iter().all(|p| p.error.is_none() && p.bound_satisfied)
    }
}

/// Least-squares fit of `log value = intercept + slope·log N`.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<RateFit> {
    if series.len() < 3 {
        return domain(format!("rate fit needs at least 3 points, got {}", series.len()));
    }
    if let Some((n, v)) = series.iter().find(|(n, v)| !(*n > 0.0 && *v > 0.0)) {
        return domain(format!("rate fit needs positive N and values, got ({n}, {v})"));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|(n, v)| (n.ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return domain("rate fit needs at least two distinct N");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Runs every `(N, seed)` pair of the sweep in parallel; a failing pair is
/// recorded in its point and does not stop the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let kernel = config.kernel.build()?;
    let c_f = kernel
        .c_bound()
        .ok_or_else(|| Error::Search(format!("no c_F bound for {}", kernel.label())))?;
    let bench = build_benchmark(config)?;
    let pcfg = config.predictor_config()?;
    let jobs: Vec<(usize, u64)> = config
        .sweep
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let points: Vec<SweepPoint> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let run = || -> Result<RegretReport> {
                let ex = generate_examples(config, &bench, n, seed)?;
                run_and_report(kernel.as_ref(), &pcfg, &ex, &|x| bench.eval(*x), bench.norm, Some(c_f))
            };
            match run() {
                Ok(r) => SweepPoint::from_report(n, seed, r),
                Err(e) => SweepPoint::failed(n, seed, e),
            }
        })
        .collect();

    let fit_min = config.fit_min_n.unwrap_or(DEFAULT_FIT_MIN_N);
    let averaged = |f: &dyn Fn(&SweepPoint) -> f64| -> Vec<(f64, f64)> {
        config
            .sweep
            .iter()
            .filter(|&&n| n >= fit_min)
            .filter_map(|&n| {
                let vals: Vec<f64> = points
                    .iter()
                    .filter(|p| p.n == n && p.error.is_none())
                    .map(f)
                    .collect();
                (!vals.is_empty()).then(|| (n as f64, vals.iter().sum::<f64>() / vals.len() as f64))
            })
            .collect()
    };
    let regret_fit = fit_rate(&averaged(&|p| p.regret_term)).ok();
    let bound_fit = fit_rate(&averaged(&|p| p.bound)).ok();
    let max_bound_ratio = points
        .iter()
        .filter(|p| p.error.is_none())
        .map(|p| p.bound_ratio)
        .fold(0.0, f64::max);
    Ok(SweepResult {
        config: config.normalized(),
        config_hash: config.hash(),
        kernel: kernel.label(),
        c_f,
        benchmark: bench.label.clone(),
        norm_d: bench.norm,
        norm_source: bench.norm_source.clone(),
        points,
        regret_fit,
        bound_fit,
        max_bound_ratio,
    })
}

pub const SWEEP_CSV_HEADER: [&str; 11] = [
    "config_hash",
    "seed",
    "n",
    "cum_loss",
    "cum_loss_d",
    "regret_term",
    "bound",
    "bound_ratio",
    "bound_satisfied",
    "defect_violations",
    "regret_violations",
];

pub const TRACE_CSV_HEADER: [&str; 12] = [
    "n",
    "x",
    "y",
    "mu",
    "loss",
    "cum_loss",
    "defect",
    "defect_bound",
    "regret_bound_tight",
    "cum_loss_d",
    "config_hash",
    "seed",
];

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for p in &result.points {
        w.write_record([
            result.config_hash.clone(),
            p.seed.to_string(),
            p.n.to_string(),
            num(p.cum_loss),
            num(p.cum_loss_d),
            num(p.regret_term),
            num(p.bound),
            num(p.bound_ratio),
            p.bound_satisfied.to_string(),
            p.defect_violations.to_string(),
            p.regret_violations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], hash: &str, seed: u64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_CSV_HEADER)?;
    for r in trace {
        let x = r.x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";");
        w.write_record([
            r.n.to_string(),
            x,
            num(r.y),
            num(r.mu),
            num(r.loss),
            num(r.cum_loss),
            num(r.defect),
            num(r.defect_bound),
            num(r.regret_bound_tight),
            num(r.cum_loss_d),
            hash.to_string(),
            seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `n,gamma`.
pub fn write_gamma_csv<W: Write>(gammas: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "gamma"])?;
    for (i, g) in gammas.iter().enumerate() {
        w.write_record([(i + 1).to_string(), num(*g)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sweep.json`, `sweep.csv` and, when requested, one trace per
/// sweep point; returns the paths written.
pub fn write_outputs(result: &SweepResult, dir: impl AsRef<FsPath>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("sweep.json");
    fs::write(&json, serde_json::to_string_pretty(result)? + "\n")?;
    written.push(json);
    let csv_path = dir.join("sweep.csv");
    write_sweep_csv(result, fs::File::create(&csv_path)?)?;
    written.push(csv_path);
    if result.config.output.trace {
        for p in result.points.iter().filter(|p| p.error.is_none()) {
            let path = dir.join(format!("trace_n{}_seed{}.csv", p.n, p.seed));
            write_trace_csv(&p.trace, &result.config_hash, p.seed, fs::File::create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "predictor": {"y_bound": 1.0, "scan_points": 64},
                "kernel": {"kind": "dual_sobolev", "s": 0.6, "p": 2.0, "grid": 32},
                "benchmark": {"rule": "sin", "scale": 0.5},
                "sweep": [10, 20, 40],
                "seeds": [1, 2]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn fit_exact_power() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|n| (*n, 1.0 / n)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-10);
        let flat = fit_rate(&[(1.0, 2.0), (2.0, 2.0), (4.0, 2.0)]).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn config_rejects_bad_sweeps() {
        let mut c = small_config();
        c.sweep = vec![20, 10];
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"predictor": {"y_bound": 1}}"#).is_err());
    }

    #[test]
    fn normalized_hash_is_stable() {
        let c = small_config();
        assert_eq!(c.hash(), c.normalized().hash());
        assert_eq!(c.hash().len(), 16);
        let mut d = c.clone();
        d.seeds = vec![3];
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn sweep_runs_and_is_deterministic() {
        let c = small_config();
        let a = run_experiment(&c).unwrap();
        assert_eq!(a.points.len(), 6);
        assert!(a.all_satisfied());
        assert!(a.max_bound_ratio <= 1.0);
        let b = run_experiment(&c).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
