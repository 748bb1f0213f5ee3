//! The BBK29 online predictor and its performance guarantees.
//!
//! The predictor works in `U = ℝ ⊕ F*` with feature map `Φ(μ, x) = (μ, k_x)`
//! and keeps `G = Σ (yᵢ − μᵢ)Φ(μᵢ, xᵢ)`. Each round it outputs a root of
//! `g(μ) = f(−Y, μ) − f(Y, μ)`, where `f(y, μ) = ‖G + (y − μ)Φ(μ, x)‖_U − ‖G‖_U`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::SmoothnessConstants;
use crate::kernel::{BanachKernel, Combination, DirectSumWeights, KernelPoint, Ray};
use crate::optim::brent;

/// How the scalar component enters the direct-sum norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarForm {
    /// `√(a₁s² + a₂ψ²)`.
    #[default]
    Squared,
    /// `√(a₁s + a₂ψ²)` with the radicand clamped at zero.
    AsPrinted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub y_bound: f64,
    pub weights: DirectSumWeights,
    pub p: f64,
    pub root_tol: f64,
    pub scan_points: usize,
    #[serde(default)]
    pub scalar_form: ScalarForm,
}

impl PredictorConfig {
    /// Defaults: `a₁ = Y⁻²`, `a₂ = 1`, root tolerance `1e-9`, 1024 scan points.
    pub fn new(y_bound: f64, p: f64) -> Result<Self> {
        if !(y_bound > 0.0 && y_bound.is_finite()) {
            return domain(format!("label bound must be positive, got {y_bound}"));
        }
        let cfg = Self {
            y_bound,
            weights: DirectSumWeights::for_label_bound(y_bound)?,
            p,
            root_tol: 1e-9,
            scan_points: 1024,
            scalar_form: ScalarForm::Squared,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y_bound > 0.0 && self.y_bound.is_finite()) {
            return domain(format!("label bound must be positive, got {}", self.y_bound));
        }
        DirectSumWeights::new(self.weights.a1, self.weights.a2)?;
        SmoothnessConstants::new(self.p)?;
        if !(self.root_tol > 0.0) {
            return domain(format!("root tolerance must be positive, got {}", self.root_tol));
        }
        if self.scan_points < 2 {
            return domain("scan needs at least 2 points");
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `c_Φ = √(a₁Y² + a₂c_F²)`.
    pub fn c_phi(&self, c_f: f64) -> f64 {
        let y = self.y_bound;
        (self.weights.a1 * y * y + self.weights.a2 * c_f * c_f).sqrt()
    }

    fn combine(&self, s: f64, psi: f64) -> f64 {
        let w = self.weights;
        match self.scalar_form {
            ScalarForm::Squared => (w.a1 * s * s + w.a2 * psi * psi).sqrt(),
            ScalarForm::AsPrinted => (w.a1 * s + w.a2 * psi * psi).max(0.0).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round<P> {
    pub x: P,
    pub y: f64,
    pub mu: f64,
}

/// Round state of one predictor; `predict` and `update` alternate.
pub struct Predictor<'k, P: KernelPoint> {
    kernel: &'k dyn BanachKernel<P>,
    config: PredictorConfig,
    comb: Box<dyn Combination<P> + 'k>,
    history: Vec<Round<P>>,
    /// `Σ (yᵢ − μᵢ)μᵢ`.
    scalar: f64,
    pending: Option<(P, f64)>,
}

impl<'k, P: KernelPoint> Predictor<'k, P> {
    pub fn new(kernel: &'k dyn BanachKernel<P>, config: PredictorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            comb: kernel.combination(),
            kernel,
            config,
            history: Vec::new(),
            scalar: 0.0,
            pending: None,
        })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn history(&self) -> &[Round<P>] {
        &self.history
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn scalar_sum(&self) -> f64 {
        self.scalar
    }

    /// Kernel seminorm of the residual combination `Σ (yᵢ − μᵢ) k_{xᵢ}`.
    pub fn kernel_part(&mut self) -> Result<f64> {
        self.comb.norm()
    }

    /// `‖G‖_U`.
    pub fn defect(&mut self) -> Result<f64> {
        let psi = self.comb.norm()?;
        Ok(self.config.combine(self.scalar, psi))
    }

    /// `‖G‖_U` rebuilt from the history with a fresh combination.
    pub fn defect_from_scratch(&self) -> Result<f64> {
        let mut comb = self.kernel.combination();
        let mut scalar = 0.0;
        for r in &self.history {
            comb.push(&r.x, r.y - r.mu)?;
            scalar += (r.y - r.mu) * r.mu;
        }
        let psi = comb.norm()?;
        Ok(self.config.combine(scalar, psi))
    }

    fn check_label(&self, y: f64, what: &str) -> Result<()> {
        let yb = self.config.y_bound;
        if y.is_finite() && y.abs() <= yb {
            Ok(())
        } else {
            Err(Error::Protocol {
                round: self.history.len() + 1,
                reason: format!("{what} {y} outside [-{yb}, {yb}]"),
            })
        }
    }

    /// `f(y, μ)` at the point `x` of the current round.
    pub fn f_n_eval(&mut self, x: &P, y: f64, mu: f64) -> Result<f64> {
        self.check_label(y, "label")?;
        self.check_label(mu, "prediction")?;
        let base = self.defect()?;
        let cfg = self.config.clone();
        let scalar = self.scalar;
        let mut ray = self.comb.ray(x)?;
        let psi = ray.eval(y - mu)?;
        Ok(cfg.combine(scalar + (y - mu) * mu, psi) - base)
    }

    /// Outputs the round's prediction for `x`.
    pub fn predict(&mut self, x: &P) -> Result<f64> {
        if self.pending.is_some() {
            return Err(Error::Protocol {
                round: self.history.len() + 1,
                reason: "predict called twice without update".into(),
            });
        }
        let mu = self.peek(x)?;
        self.pending = Some((x.clone(), mu));
        Ok(mu)
    }

    /// The prediction `predict(x)` would output, without starting a round.
    pub fn peek(&mut self, x: &P) -> Result<f64> {
        let cfg = self.config.clone();
        let scalar = self.scalar;
        let mut ray = self.comb.ray(x)?;
        choose_root(&cfg, scalar, ray.as_mut())
    }

    /// Reads the round's label.
    pub fn update(&mut self, y: f64) -> Result<()> {
        self.check_label(y, "label")?;
        let (x, mu) = self.pending.take().ok_or_else(|| Error::Protocol {
            round: self.history.len() + 1,
            reason: "update called before predict".into(),
        })?;
        self.comb.push(&x, y - mu)?;
        self.scalar += (y - mu) * mu;
        self.history.push(Round { x, y, mu });
        Ok(())
    }
}

/// `g(μ) = F(−Y, μ) − F(Y, μ)` where `F(y, μ) = ‖G + (y − μ)Φ(μ, x)‖_U`.
fn balance(cfg: &PredictorConfig, scalar: f64, ray: &mut dyn Ray, mu: f64) -> Result<f64> {
    let y = cfg.y_bound;
    let lo = cfg.combine(scalar + (-y - mu) * mu, ray.eval(-y - mu)?);
    let hi = cfg.combine(scalar + (y - mu) * mu, ray.eval(y - mu)?);
    let g = lo - hi;
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::RootFinding(format!("balance function is not finite at mu = {mu}")))
    }
}

/// Scan for sign changes, refine the bracket nearest zero with Brent's
/// method; fall back to an endpoint when `g` keeps one sign.
fn choose_root(cfg: &PredictorConfig, scalar: f64, ray: &mut dyn Ray) -> Result<f64> {
    let y = cfg.y_bound;
    let mut n = cfg.scan_points;
    for attempt in 0..2 {
        let mus: Vec<f64> = (0..n)
            .map(|k| -y + 2.0 * y * k as f64 / (n - 1) as f64)
            .collect();
        let mut gs = Vec::with_capacity(n);
        for &m in &mus {
            gs.push(balance(cfg, scalar, ray, m)?);
        }
        // Exact zeros and sign changes, as (distance to 0, lo, hi).
        let mut brackets: Vec<(f64, f64, f64)> = Vec::new();
        for k in 0..n {
            if gs[k] == 0.0 {
                brackets.push((mus[k].abs(), mus[k], mus[k]));
            }
            if k + 1 < n && gs[k] * gs[k + 1] < 0.0 {
                let (a, b) = (mus[k], mus[k + 1]);
                let dist = if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
                brackets.push((dist, a, b));
            }
        }
        if !brackets.is_empty() {
            brackets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mut best: Option<f64> = None;
            for &(dist, a, b) in &brackets {
                if best.is_some_and(|r| dist > r.abs()) {
                    break;
                }
                let root = if a == b {
                    a
                } else {
                    brent(|m| balance(cfg, scalar, ray, m), a, b, cfg.root_tol)?
                };
                if best.map_or(true, |r| root.abs() < r.abs() || (root.abs() == r.abs() && root < r)) {
                    best = Some(root);
                }
            }
            return Ok(best.expect("at least one bracket").clamp(-y, y));
        }
        let scale = gs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let touch = gs.iter().any(|v| v.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        if attempt == 0 && touch {
            n = 2 * n - 1;
            continue;
        }
        return Ok(if gs[0] > 0.0 { -y } else { y });
    }
    unreachable!("second scan always returns")
}

fn check_n_q(n: usize, q: f64) -> Result<()> {
    if n < 1 {
        return domain("N must be at least 1");
    }
    if !(q > 1.0 && q <= 2.0) {
        return domain(format!("q must lie in (1, 2], got {q}"));
    }
    Ok(())
}

/// `2Y·c_Φ·(2aqN)^{1/q}` with `2aq = 8.68`.
pub fn theorem2_bound(n: usize, y: f64, c_phi: f64, q: f64) -> Result<f64> {
    check_n_q(n, q)?;
    if !(y > 0.0 && c_phi >= 0.0) {
        return domain(format!("need Y > 0 and c_phi >= 0, got {y}, {c_phi}"));
    }
    let c = SmoothnessConstants::new(q / (q - 1.0))?;
    Ok(2.0 * y * c_phi * (c.two_a_q() * n as f64).powf(1.0 / q))
}

/// Coefficient of the regret term: 40, or `4·8.68^{1/q}` when `tight`.
pub fn regret_coefficient(p: f64, tight: bool) -> Result<f64> {
    let c = SmoothnessConstants::new(p)?;
    Ok(if tight {
        4.0 * c.two_a_q().powf(1.0 / c.q)
    } else {
        40.0
    })
}

/// `coef·Y·√(c_F² + 1)·(‖D‖ + Y)·N^{−1/p}`.
pub fn regret_bound(n: usize, y: f64, c_f: f64, p: f64, norm_d: f64, tight: bool) -> Result<f64> {
    if n < 1 {
        return domain("N must be at least 1");
    }
    if !(norm_d >= 0.0 && c_f >= 0.0 && y > 0.0) {
        return domain("regret bound needs Y > 0, c_F >= 0 and ||D|| >= 0");
    }
    let coef = regret_coefficient(p, tight)?;
    Ok(coef * y * (c_f * c_f + 1.0).sqrt() * (norm_d + y) * (n as f64).powf(-1.0 / p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub mu: f64,
    pub loss: f64,
    pub cum_loss: f64,
    pub cum_loss_d: f64,
    pub defect: f64,
    pub defect_bound: f64,
    /// Allowed average excess loss at this prefix.
    pub regret_bound_tight: f64,
    pub scalar_sum: f64,
    pub d_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub n: usize,
    pub cum_loss: f64,
    pub cum_loss_d: f64,
    pub norm_d: f64,
    pub c_f: f64,
    pub regret_term_bound: f64,
    pub defect_violations: usize,
    pub regret_violations: usize,
    pub scalar_violations: usize,
    pub pairing_violations: usize,
    pub bound_satisfied: bool,
    pub trace: Vec<TraceRow>,
}

impl RegretReport {
    /// `max(0, cum − cum_D)/N`.
    pub fn empirical_regret(&self) -> f64 {
        (self.cum_loss - self.cum_loss_d).max(0.0) / self.n.max(1) as f64
    }
}

const CHECK_SLACK: f64 = 1e-9;

/// Plays the protocol on `examples` and checks every prefix against the
/// defect bound, the regret bound for `benchmark` (whose norm is `norm_d`),
/// and the two residual-sum inequalities behind it.
///
/// `c_f` must dominate `‖k_x‖` over the domain; the kernel's own bound is
/// used when it is `None`.
pub fn run_and_report<P: KernelPoint>(
    kernel: &dyn BanachKernel<P>,
    config: &PredictorConfig,
    examples: &[(P, f64)],
    benchmark: &dyn Fn(&P) -> Result<f64>,
    norm_d: f64,
    c_f: Option<f64>,
) -> Result<RegretReport> {
    let c_f = match c_f.or_else(|| kernel.c_bound()) {
        Some(c) => c,
        None => return domain(format!("kernel {} has no c_F bound", kernel.label())),
    };
    if !(norm_d >= 0.0 && norm_d.is_finite()) {
        return domain(format!("benchmark norm must be nonnegative, got {norm_d}"));
    }
    let mut pred = Predictor::new(kernel, config.clone())?;
    let c_phi = config.c_phi(c_f);
    let q = config.q();
    let (sa1, sa2) = (config.weights.a1.sqrt(), config.weights.a2.sqrt());
    let mut trace = Vec::with_capacity(examples.len());
    let (mut cum, mut cum_d, mut d_sum) = (0.0, 0.0, 0.0);
    let mut viol = [0usize; 4];
    for (i, (x, y)) in examples.iter().enumerate() {
        let n = i + 1;
        let mu = pred.predict(x)?;
        pred.update(*y)?;
        let dx = benchmark(x)?;
        cum += (y - mu) * (y - mu);
        cum_d += (y - dx) * (y - dx);
        d_sum += (y - mu) * dx;
        let defect = pred.defect()?;
        let bound = theorem2_bound(n, config.y_bound, c_phi, q)?;
        let allowed = 2.0 * bound * (1.0 / sa1 + norm_d / sa2);
        let slack = |v: f64| v.abs() * CHECK_SLACK + CHECK_SLACK;
        debug_assert!(
            config.scalar_form != ScalarForm::Squared || defect <= bound + slack(bound),
            "defect {defect} exceeds bound {bound} at round {n}"
        );
        if defect > bound + slack(bound) {
            viol[0] += 1;
        }
        if cum > cum_d + allowed + slack(allowed) {
            viol[1] += 1;
        }
        let psi = pred.kernel_part()?;
        if pred.scalar_sum().abs() > defect / sa1 + slack(defect / sa1) {
            viol[2] += 1;
        }
        if d_sum.abs() > psi * norm_d + slack(psi * norm_d) {
            viol[3] += 1;
        }
        trace.push(TraceRow {
            n,
            x: x.coords().to_vec(),
            y: *y,
            mu,
            loss: (y - mu) * (y - mu),
            cum_loss: cum,
            cum_loss_d: cum_d,
            defect,
            defect_bound: bound,
            regret_bound_tight: allowed / n as f64,
            scalar_sum: pred.scalar_sum(),
            d_sum,
        });
    }
    let n = examples.len();
    Ok(RegretReport {
        n,
        cum_loss: cum,
        cum_loss_d: cum_d,
        norm_d,
        c_f,
        regret_term_bound: trace.last().map_or(0.0, |r| r.regret_bound_tight),
        defect_violations: viol[0],
        regret_violations: viol[1],
        scalar_violations: viol[2],
        pairing_violations: viol[3],
        bound_satisfied: viol.iter().all(|v| *v == 0),
        trace,
    })
}
