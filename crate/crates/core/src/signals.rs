//! Test signals observed at `tₙ = n/N`: fractional Brownian motion, Euler–
//! Maruyama paths of `dΘ = (a₀ + a₁Θ)dt + b dB`, deterministic benchmark
//! rules, and bounded observation noise.
//!
//! Randomness comes from [`ChaCha8Rng`]. A run seeded with `seed` that needs
//! independent streams (one per Monte-Carlo replication, say) uses
//! [`stream_rng`]`(seed, k)` for the `k`-th one: the same 256-bit key with the
//! ChaCha stream id set to `k`. [`derive_seed`] turns such a stream into a
//! plain `u64` seed that can be recorded and replayed.

use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::spaces::{num, parse_num, GridDomain, GridFunction};

/// Euler–Maruyama substeps per observation interval.
pub const DIFFUSION_REFINEMENT: usize = 16;

const CHOLESKY_JITTER: f64 = 1e-12;

/// Stream `k` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// First output of [`stream_rng`]`(seed, k)`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    stream_rng(seed, k).random()
}

/// A signal sampled at `tₙ = n/N`, optionally with observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub seed: Option<u64>,
    /// Indices with `|θₙ| > Y` at observation time.
    pub flagged: Vec<usize>,
}

impl Path {
    pub fn new(theta: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if theta.is_empty() {
            return domain("a path needs at least one point");
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite signal value at index {i}"));
        }
        Ok(Self {
            times: observation_times(theta.len()),
            theta,
            y: None,
            seed,
            flagged: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Scales the signal so that `max |θₙ| = bound`; a zero signal is left alone.
    pub fn rescaled_to(&self, bound: f64) -> Self {
        let m = self.theta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut out = self.clone();
        if m > 0.0 {
            out.theta.iter_mut().for_each(|v| *v *= bound / m);
        }
        out
    }

    /// Rows `n,t,theta,y`; `y` is left blank when unobserved.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "t", "theta", "y"])?;
        for i in 0..self.len() {
            let y = self.y.as_ref().map(|y| num(y[i])).unwrap_or_default();
            w.write_record([(i + 1).to_string(), num(self.times[i]), num(self.theta[i]), y])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["n", "t", "theta", "y"] {
            return Err(Error::Parse(format!("unexpected path header {header:?}")));
        }
        let mut times = Vec::new();
        let mut theta = Vec::new();
        let mut ys = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Parse(format!("expected 4 fields, got {}", rec.len())));
            }
            let n: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad row index {:?}", &rec[0])))?;
            if n != i + 1 {
                return Err(Error::Parse(format!("row {} has index {n}", i + 1)));
            }
            times.push(parse_num(&rec[1])?);
            theta.push(parse_num(&rec[2])?);
            ys.push(match rec[3].trim() {
                "" => None,
                s => Some(parse_num(s)?),
            });
        }
        if theta.is_empty() {
            return Err(Error::Parse("empty path".into()));
        }
        let n = theta.len() as f64;
        for (i, t) in times.iter().enumerate() {
            let want = (i + 1) as f64 / n;
            if !((t - want).abs() <= 1e-9) {
                return Err(Error::Parse(format!("row {}: t = {t}, expected {want}", i + 1)));
            }
        }
        let y = if ys.iter().all(Option::is_some) {
            Some(ys.into_iter().flatten().collect())
        } else if ys.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::Parse("observations must be all present or all blank".into()));
        };
        let mut path = Path::new(theta, None).map_err(|e| Error::Parse(e.to_string()))?;
        path.y = y;
        Ok(path)
    }
}

/// `tₙ = n/N` for `n = 1..N`.
pub fn observation_times(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// `½(t^{2h} + u^{2h} − |t−u|^{2h})`.
pub fn fbm_covariance(h: f64, t: f64, u: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (t.abs().powf(e) + u.abs().powf(e) - (t - u).abs().powf(e))
}

/// Exact fBm sampler at fixed times via a Cholesky factor of the covariance.
#[derive(Clone, Debug)]
pub struct FbmSampler {
    h: f64,
    times: Vec<f64>,
    factor: DMatrix<f64>,
}

impl FbmSampler {
    pub fn new(h: f64, times: &[f64]) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return domain(format!("Hurst index must lie in (0,1), got {h}"));
        }
        if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return domain("fBm times must be positive and finite");
        }
        let n = times.len();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(h, times[i], times[j]));
        let factor = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let jittered = cov + DMatrix::identity(n, n) * CHOLESKY_JITTER;
                match jittered.cholesky() {
                    Some(c) => c.l(),
                    None => {
                        return Err(Error::Factorization(format!(
                            "fBm covariance (h={h}, {n} points) is not positive definite"
                        )))
                    }
                }
            }
        };
        Ok(Self {
            h,
            times: times.to_vec(),
            factor,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.times.len();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        (&self.factor * z).as_slice().to_vec()
    }
}

/// fBm with Hurst index `h` at `tₙ = n/N`.
pub fn gen_fbm(h: f64, n: usize, seed: u64) -> Result<Path> {
    if n < 2 {
        return domain(format!("need N >= 2, got {n}"));
    }
    let sampler = FbmSampler::new(h, &observation_times(n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Path::new(sampler.sample(&mut rng), Some(seed))
}

/// fBm sampled at the nodes of a 1-D grid, as a function on that grid.
pub fn fbm_grid_function(h: f64, grid: Arc<GridDomain>, seed: u64) -> Result<GridFunction> {
    if grid.dim() != 1 {
        return domain("fBm benchmarks live on an interval");
    }
    let times: Vec<f64> = (0..grid.len()).map(|i| grid.point(i)[0]).collect();
    let sampler = FbmSampler::new(h, &times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridFunction::new(grid, sampler.sample(&mut rng))
}

type CoefFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Coefficients of `dΘ = (a₀(t) + a₁(t)Θ)dt + b(t)dB`.
pub struct Diffusion {
    pub a0: Box<CoefFn>,
    pub a1: Box<CoefFn>,
    pub b: Box<CoefFn>,
}

impl Diffusion {
    pub fn new<A, B, C>(a0: A, a1: B, b: C) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            a0: Box::new(a0),
            a1: Box::new(a1),
            b: Box::new(b),
        }
    }

    /// Constant coefficients.
    pub fn constant(a0: f64, a1: f64, b: f64) -> Self {
        Self::new(move |_| a0, move |_| a1, move |_| b)
    }

    /// `cB_t`.
    pub fn scaled_brownian(c: f64) -> Self {
        Self::constant(0.0, 0.0, c)
    }
}

/// Euler–Maruyama from `Θ₀ = theta0` with `DIFFUSION_REFINEMENT` substeps per
/// interval, recorded at `tₙ = n/N`.
pub fn gen_diffusion(sde: &Diffusion, theta0: f64, n: usize, seed: u64) -> Result<Path> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = diffusion_values(sde, theta0, n, &mut rng)?;
    Path::new(theta, Some(seed))
}

pub(crate) fn diffusion_values<R: Rng + ?Sized>(
    sde: &Diffusion,
    theta0: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return domain("need N >= 1");
    }
    if !theta0.is_finite() {
        return domain("initial value must be finite");
    }
    let steps = n * DIFFUSION_REFINEMENT;
    let dt = 1.0 / steps as f64;
    let sq = dt.sqrt();
    let mut x = theta0;
    let mut out = Vec::with_capacity(n);
    for k in 0..steps {
        let t = k as f64 * dt;
        let dw: f64 = StandardNormal.sample(rng);
        x += ((sde.a0)(t) + (sde.a1)(t) * x) * dt + (sde.b)(t) * sq * dw;
        if (k + 1) % DIFFUSION_REFINEMENT == 0 {
            out.push(x);
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return domain("diffusion coefficients produced a non-finite path");
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Uniform on `[−σ, σ]`.
    Uniform,
    /// `N(0, σ²)` conditioned on `|ξ| ≤ 3σ`.
    TruncatedGaussian,
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "truncated-gaussian" => Ok(Self::TruncatedGaussian),
            _ => domain(format!("unknown noise kind {s:?}")),
        }
    }
}

/// Symmetric noise, so every draw has mean zero given the past.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return domain(format!("noise scale must be nonnegative, got {scale}"));
        }
        Ok(Self { kind, scale })
    }

    pub fn uniform(scale: f64) -> Result<Self> {
        Self::new(NoiseKind::Uniform, scale)
    }

    /// Largest possible `|ξ|`.
    pub fn bound(&self) -> f64 {
        match self.kind {
            NoiseKind::Uniform => self.scale,
            NoiseKind::TruncatedGaussian => 3.0 * self.scale,
        }
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.kind {
            NoiseKind::Uniform => s2 / 3.0,
            NoiseKind::TruncatedGaussian => {
                // 1 − 2·3φ(3)/(2Φ(3) − 1)
                let phi3 = (-4.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mass = 0.997_300_203_936_739_8;
                s2 * (1.0 - 6.0 * phi3 / mass)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::Uniform => rng.random_range(-self.scale..=self.scale),
            NoiseKind::TruncatedGaussian => loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= 3.0 {
                    return self.scale * z;
                }
            },
        }
    }
}

/// `y` truncated to `Y sign y` when it leaves `[−Y, Y]`.
pub fn truncate(y: f64, bound: f64) -> f64 {
    y.clamp(-bound, bound)
}

/// Fills `yₙ = truncate(θₙ + ξₙ)` and flags every `|θₙ| > Y`.
pub fn observe(path: &Path, noise: &NoiseSpec, y_bound: f64, seed: u64) -> Result<Path> {
    if !(y_bound > 0.0 && y_bound.is_finite()) {
        return domain(format!("Y must be positive, got {y_bound}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = path.clone();
    out.flagged = path
        .theta
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > y_bound)
        .map(|(i, _)| i)
        .collect();
    out.y = Some(
        path.theta
            .iter()
            .map(|th| truncate(th + noise.sample(&mut rng), y_bound))
            .collect(),
    );
    Ok(out)
}

type RuleFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A benchmark prediction rule on `[0, 1]`.
#[derive(Clone)]
pub enum BenchmarkRule {
    Sin,
    /// `x ↦ |x − 1/2|`.
    Vee,
    Custom { name: String, f: Arc<RuleFn> },
}

impl std::fmt::Debug for BenchmarkRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl BenchmarkRule {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: impl Into<String>, f: F) -> Self {
        Self::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Sin => "sin".into(),
            Self::Vee => "vee".into(),
            Self::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Sin => x.sin(),
            Self::Vee => (x - 0.5).abs(),
            Self::Custom { f, .. } => f(x),
        }
    }
}

impl FromStr for BenchmarkRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(Self::Sin),
            "vee" => Ok(Self::Vee),
            "custom" => domain("a custom rule needs a function; build it with BenchmarkRule::custom"),
            _ => domain(format!("unknown benchmark rule {s:?}")),
        }
    }
}

/// The rule sampled on the `n`-point midpoint grid of `[0, 1]`.
pub fn deterministic_rule(rule: &BenchmarkRule, n: usize) -> Result<GridFunction> {
    let grid = Arc::new(GridDomain::unit_interval(n)?);
    GridFunction::from_fn(grid, |x| rule.eval(x[0]))
}
