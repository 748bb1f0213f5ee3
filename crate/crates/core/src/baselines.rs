//! Reference procedures: the scalar Kalman filter for `cB_t` observed in
//! noise, the averaging rule, and Monte-Carlo coverage checks of the
//! high-probability bounds for averaged predictors and for filtering.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbk29::{regret_coefficient, Predictor, PredictorConfig};
use crate::error::{domain, Result};
use crate::kernel::{DualSobolevKernel, SolverSettings};
use crate::signals::{stream_rng, BenchmarkRule, FbmSampler, NoiseSpec};
use crate::spaces::{sobolev_norm, GridDomain, GridFunction, SobolevParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    pub c: f64,
    pub sigma2: f64,
    pub n: usize,
    #[serde(default)]
    pub gamma0: f64,
}

impl KalmanParams {
    pub fn new(c: f64, sigma2: f64, n: usize) -> Result<Self> {
        let k = Self {
            c,
            sigma2,
            n,
            gamma0: 0.0,
        };
        k.validate()?;
        Ok(k)
    }

    /// `c = 0` is allowed: it gives the noise-free random walk.
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return domain(format!("c must be nonnegative, got {}", self.c));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return domain(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if self.n == 0 {
            return domain("N must be at least 1");
        }
        if !(self.gamma0 >= 0.0 && self.gamma0.is_finite()) {
            return domain(format!("gamma0 must be nonnegative, got {}", self.gamma0));
        }
        Ok(())
    }

    /// `γ ↦ γ + c²/N − γ²/(σ² + γ)`.
    pub fn step(&self, gamma: f64) -> f64 {
        gamma + self.c * self.c / self.n as f64 - gamma * gamma / (self.sigma2 + gamma)
    }
}

/// `γ₁ = gamma0, …, γ_N`.
pub fn kalman_gamma_recursion(params: &KalmanParams) -> Result<Vec<f64>> {
    params.validate()?;
    let mut out = Vec::with_capacity(params.n);
    let mut g = params.gamma0;
    for _ in 0..params.n {
        out.push(g);
        g = params.step(g);
    }
    Ok(out)
}

/// `(c² + √(c⁴ + 4c²σ²N)) / (2N)`.
pub fn kalman_steady_state(c: f64, sigma2: f64, n: usize) -> Result<f64> {
    if !(c > 0.0 && sigma2 > 0.0 && n > 0) {
        return domain("steady state needs c > 0, sigma2 > 0, N > 0");
    }
    let n = n as f64;
    let c2 = c * c;
    Ok((c2 + (c2 * c2 + 4.0 * c2 * sigma2 * n).sqrt()) / (2.0 * n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanTrack {
    /// One-step-ahead estimate of `θₙ` from `y₁..y_{n−1}`.
    pub estimates: Vec<f64>,
    /// Its variance `γₙ`.
    pub gammas: Vec<f64>,
}

/// Scalar predict/update filter for `θ_{n+1} = θₙ + (c/√N)ζₙ`,
/// `yₙ = θₙ + σξₙ`, started from estimate 0 with variance `gamma0`.
pub fn kalman_filter(y: &[f64], params: &KalmanParams) -> Result<KalmanTrack> {
    params.validate()?;
    let mut m = 0.0;
    let mut g = params.gamma0;
    let mut estimates = Vec::with_capacity(y.len());
    let mut gammas = Vec::with_capacity(y.len());
    for &obs in y {
        estimates.push(m);
        gammas.push(g);
        let gain = g / (params.sigma2 + g);
        m += gain * (obs - m);
        g = params.step(g);
    }
    Ok(KalmanTrack { estimates, gammas })
}

/// `H̄_N(x) = (1/N) Σ Hₙ(x)`.
pub fn averaging_rule(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return domain("averaging needs at least one rule");
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        domain(format!("delta must lie in (0,1), got {delta}"))
    }
}

/// `ε = 2Y²√(2 ln(2/δ)) N^{−1/2}`.
pub fn hoeffding_epsilon(y: f64, delta: f64, n: usize) -> Result<f64> {
    check_delta(delta)?;
    if !(y > 0.0 && n > 0) {
        return domain("need Y > 0 and N > 0");
    }
    Ok(2.0 * y * y * (2.0 * (2.0 / delta).ln()).sqrt() / (n as f64).sqrt())
}

/// `δ = 2 exp(−ε²N / (8Y⁴))`.
pub fn hoeffding_delta(y: f64, epsilon: f64, n: usize) -> f64 {
    2.0 * (-epsilon * epsilon * n as f64 / (8.0 * y.powi(4))).exp()
}

/// Right side of the risk bound for averaged predictors, minus `risk(D)`:
/// `Y·C·(‖D‖ + Y)·N^{−1/p} + 2ε`.
pub fn averaging_bound(y: f64, c_sp: f64, norm_d: f64, p: f64, delta: f64, n: usize) -> Result<f64> {
    let eps = hoeffding_epsilon(y, delta, n)?;
    Ok(y * c_sp * (norm_d + y) * (n as f64).powf(-1.0 / p) + 2.0 * eps)
}

/// `Y·C·(‖Θ‖ + Y)·N^{−1/p} + 8Y²√(2 ln(1/δ)) N^{−1/2}`.
pub fn filtering_bound(
    y: f64,
    c_sp: f64,
    norm_theta: f64,
    p: f64,
    delta: f64,
    n: usize,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return domain(format!("delta must lie in (0,1], got {delta}"));
    }
    if !(y > 0.0 && n > 0 && c_sp >= 0.0 && norm_theta >= 0.0) {
        return domain("filtering bound needs Y > 0, N > 0, C >= 0, norm >= 0");
    }
    let n = n as f64;
    Ok(y * c_sp * (norm_theta + y) * n.powf(-1.0 / p)
        + 8.0 * y * y * (2.0 * (1.0 / delta).ln()).sqrt() / n.sqrt())
}

/// `C_{s,p} = 4·8.68^{1/q}·√(c² + 1)` for embedding constant `c`.
pub fn regret_constant(c_f: f64, p: f64) -> Result<f64> {
    Ok(regret_coefficient(p, true)? * (c_f * c_f + 1.0).sqrt())
}

/// Shared settings of the two coverage experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSetup {
    pub y_bound: f64,
    pub delta: f64,
    pub n: usize,
    pub runs: usize,
    pub s: f64,
    pub p: f64,
    /// Uniform noise half-width.
    pub noise: f64,
    /// Grid of the averaging experiment; `x` is uniform over its nodes.
    pub grid: usize,
    /// Hurst index of the filtered signal.
    pub hurst: f64,
    pub scan_points: usize,
    pub seed: u64,
}

impl Default for CoverageSetup {
    fn default() -> Self {
        Self {
            y_bound: 1.0,
            delta: 0.05,
            n: 100,
            runs: 500,
            s: 0.6,
            p: 2.0,
            noise: 0.3,
            grid: 32,
            hurst: 0.75,
            scan_points: 128,
            seed: 0,
        }
    }
}

impl CoverageSetup {
    fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if self.runs == 0 || self.n == 0 {
            return domain("coverage needs at least one run and one round");
        }
        if !(self.noise >= 0.0 && self.noise < self.y_bound) {
            return domain("noise half-width must lie in [0, Y)");
        }
        Ok(())
    }

    fn predictor_config(&self) -> Result<PredictorConfig> {
        let mut cfg = PredictorConfig::new(self.y_bound, self.p)?;
        cfg.scan_points = self.scan_points;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRun {
    pub seed_stream: u64,
    /// The bounded quantity: `risk(H̄_N) − risk(D)` or the mean squared
    /// filtering error.
    pub lhs: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub experiment: String,
    pub setup: CoverageSetup,
    pub c_sp: f64,
    pub runs: Vec<CoverageRun>,
    pub violations: usize,
    pub violation_rate: f64,
    /// `δ + 3√(δ(1−δ)/R)`.
    pub allowed_rate: f64,
    pub passed: bool,
}

fn report(experiment: &str, setup: &CoverageSetup, c_sp: f64, runs: Vec<CoverageRun>) -> CoverageReport {
    let r = runs.len() as f64;
    let violations = runs.iter().filter(|x| x.violated).count();
    let d = setup.delta;
    let allowed_rate = d + 3.0 * (d * (1.0 - d) / r).sqrt();
    let violation_rate = violations as f64 / r;
    CoverageReport {
        experiment: experiment.into(),
        setup: setup.clone(),
        c_sp,
        runs,
        violations,
        violation_rate,
        allowed_rate,
        passed: violation_rate <= allowed_rate,
    }
}

/// I.i.d. examples `x` uniform on the grid nodes, `y = D(x) + ξ` with
/// uniform `ξ`. With a finite `x` marginal both risks are exact sums, so
/// each run compares `risk(H̄_N) − risk(D)` with the bound directly.
pub fn coverage_averaging(setup: &CoverageSetup, benchmark: &BenchmarkRule) -> Result<CoverageReport> {
    setup.validate()?;
    let grid = Arc::new(GridDomain::unit_interval(setup.grid)?);
    let params = SobolevParams::new(setup.s, setup.p)?;
    let d = GridFunction::from_fn(grid.clone(), |x| benchmark.eval(x[0]))?;
    if d.max_abs() + setup.noise > setup.y_bound {
        return domain("benchmark plus noise must stay within [-Y, Y]");
    }
    let norm_d = sobolev_norm(&d, &params)?;
    let kernel = DualSobolevKernel::<f64>::new(grid.clone(), params, SolverSettings::default())?;
    let c_sp = regret_constant(kernel.embedding_constant()?, setup.p)?;
    let bound = averaging_bound(setup.y_bound, c_sp, norm_d, setup.p, setup.delta, setup.n)?;
    let cfg = setup.predictor_config()?;
    let noise = NoiseSpec::uniform(setup.noise)?;
    let nodes: Vec<f64> = (0..grid.len()).map(|i| grid.point(i)[0]).collect();

    let runs = (0..setup.runs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(setup.seed, k);
            let mut pred = Predictor::new(&kernel, cfg.clone())?;
            let mut sums = vec![0.0; nodes.len()];
            for _ in 0..setup.n {
                for (s, x) in sums.iter_mut().zip(&nodes) {
                    *s += pred.peek(x)?;
                }
                let i = rand::Rng::random_range(&mut rng, 0..nodes.len());
                pred.predict(&nodes[i])?;
                pred.update(d.values()[i] + noise.sample(&mut rng))?;
            }
            let excess = sums
                .iter()
                .zip(d.values())
                .map(|(s, dv)| (s / setup.n as f64 - dv).powi(2))
                .sum::<f64>()
                / nodes.len() as f64;
            Ok(CoverageRun {
                seed_stream: k,
                lhs: excess,
                bound,
                violated: excess > bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report("averaging", setup, c_sp, runs))
}

/// Filtering of fBm paths rescaled to `max |θₙ| = Y − σ` and observed with
/// uniform noise at `tₙ = n/N`; each run checks the mean squared error of
/// the predictions against the bound with that path's own norm.
pub fn coverage_filtering(setup: &CoverageSetup) -> Result<CoverageReport> {
    setup.validate()?;
    let n = setup.n;
    let h = 0.5 / n as f64;
    // Midpoints of this grid are exactly tₙ = n/N.
    let grid = Arc::new(GridDomain::interval(h, 1.0 + h, n)?);
    let params = SobolevParams::new(setup.s, setup.p)?;
    let kernel = DualSobolevKernel::<f64>::new(grid.clone(), params, SolverSettings::default())?;
    let c_sp = regret_constant(kernel.embedding_constant()?, setup.p)?;
    let times: Vec<f64> = (0..n).map(|i| grid.point(i)[0]).collect();
    let sampler = FbmSampler::new(setup.hurst, &times)?;
    let cfg = setup.predictor_config()?;
    let noise = NoiseSpec::uniform(setup.noise)?;
    let amplitude = setup.y_bound - setup.noise;

    let runs = (0..setup.runs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(setup.seed, k);
            let raw = sampler.sample(&mut rng);
            let peak = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let theta: Vec<f64> = raw.iter().map(|v| v * amplitude / peak).collect();
            let signal = GridFunction::new(grid.clone(), theta.clone())?;
            let norm = sobolev_norm(&signal, &params)?;
            let bound = filtering_bound(setup.y_bound, c_sp, norm, setup.p, setup.delta, n)?;
            let mut pred = Predictor::new(&kernel, cfg.clone())?;
            let mut err = 0.0;
            for (t, th) in times.iter().zip(&theta) {
                let mu = pred.predict(t)?;
                err += (mu - th).powi(2);
                pred.update(th + noise.sample(&mut rng))?;
            }
            let lhs = err / n as f64;
            Ok(CoverageRun {
                seed_stream: k,
                lhs,
                bound,
                violated: lhs > bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report("filtering", setup, c_sp, runs))
}
