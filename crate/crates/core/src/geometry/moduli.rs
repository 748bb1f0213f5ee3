//! Numerical estimation of moduli of convexity and smoothness.
//!
//! Every estimate is attained by an explicit witness pair, so an infimum
//! estimate (`delta`, `delta_dagger`) is an upper bound on the true value
//! and a supremum estimate (`rho`, `rho_dagger`, `rho_ddagger`) is a lower
//! bound.
//!
//! Pairs constrained to `‖u − v‖ = ε` are produced by a feasibility map
//! rather than a penalty: from a unit vector `u` and a second direction `e`
//! the curve `θ ↦ normalize(cos θ·u + sin θ·e⊥)` runs over the unit sphere
//! from `u` to `−u`, so `‖u − p(θ)‖` sweeps `[0, 2]` and bisection lands on
//! the constraint to machine precision. Every feasible pair lies on such a
//! curve, so searching over `(u, e)` loses nothing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::space::FiniteNormedSpace;
use crate::error::{domain, Error, Result};
use crate::optim::{bisect, golden_max, golden_min, nelder_mead};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusKind {
    Delta,
    DeltaDagger,
    Rho,
    RhoDagger,
    RhoDdagger,
}

impl ModulusKind {
    fn maximizes(self) -> bool {
        matches!(self, Self::Rho | Self::RhoDagger | Self::RhoDdagger)
    }

    fn uses_segment(self) -> bool {
        matches!(self, Self::DeltaDagger | Self::RhoDdagger)
    }
}

impl std::str::FromStr for ModulusKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "delta" => Self::Delta,
            "delta_dagger" => Self::DeltaDagger,
            "rho" => Self::Rho,
            "rho_dagger" => Self::RhoDagger,
            "rho_ddagger" => Self::RhoDdagger,
            other => return domain(format!("unknown modulus kind {other:?}")),
        })
    }
}

/// Search effort for a modulus estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Angular resolution of the exhaustive grid in two dimensions.
    pub angular_step: f64,
    /// Number of random starts for the simplex search.
    pub starts: usize,
    /// Iteration cap per simplex run.
    pub max_iter: usize,
    /// Tolerance of the inner scalar searches on norm values.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            angular_step: 1e-4,
            starts: 16,
            max_iter: 3000,
            tol: 1e-6,
            seed: 0x5eed,
        }
    }
}

impl SearchBudget {
    /// A budget for quick checks: coarser angular grid, fewer starts.
    pub fn quick() -> Self {
        Self {
            angular_step: 2e-3,
            starts: 6,
            max_iter: 1500,
            ..Self::default()
        }
    }
}

/// The pair (and segment parameter, where relevant) attaining an estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub kind: ModulusKind,
    pub argument: f64,
    pub value: f64,
    pub space: String,
    pub method: String,
    pub budget: SearchBudget,
    /// Worst constraint violation of the witness plus inner-search tolerance.
    pub tolerance: f64,
    pub witness: Witness,
}

struct Candidate {
    value: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    t: Option<f64>,
}

impl Candidate {
    fn better_than(&self, other: &Candidate, maximize: bool) -> bool {
        if maximize {
            self.value > other.value
        } else {
            self.value < other.value
        }
    }
}

/// Minimum over `t ∈ [0,1]` of `‖t·u + (1−t)·v‖`; convex in `t`.
fn segment_min(space: &FiniteNormedSpace, u: &[f64], v: &[f64], tol: f64) -> (f64, f64) {
    let mut buf = vec![0.0; u.len()];
    golden_min(
        |t| {
            for ((b, x), y) in buf.iter_mut().zip(u).zip(v) {
                *b = t * x + (1.0 - t) * y;
            }
            space.norm(&buf)
        },
        0.0,
        1.0,
        tol.min(1e-9),
    )
}

fn midpoint_norm(space: &FiniteNormedSpace, u: &[f64], v: &[f64]) -> f64 {
    let mid: Vec<f64> = u.iter().zip(v).map(|(x, y)| 0.5 * (x + y)).collect();
    space.norm(&mid)
}

/// Objective of a constrained kind at a feasible pair.
fn constrained_value(
    space: &FiniteNormedSpace,
    kind: ModulusKind,
    u: &[f64],
    v: &[f64],
    tol: f64,
) -> (f64, Option<f64>) {
    if kind.uses_segment() {
        let (t, m) = segment_min(space, u, v, tol);
        (1.0 - m, Some(t))
    } else {
        (1.0 - midpoint_norm(space, u, v), None)
    }
}

/// Builds the feasible partner of unit `u` along direction `e` at distance `eps`.
fn partner(space: &FiniteNormedSpace, u: &[f64], e: &[f64], eps: f64) -> Option<Vec<f64>> {
    // Euclidean Gram–Schmidt only to guarantee independence from u.
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let ue: f64 = u.iter().zip(e).map(|(x, y)| x * y).sum();
    let perp: Vec<f64> = e.iter().zip(u).map(|(y, x)| y - ue / uu * x).collect();
    let pn = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(pn > 1e-9 * uu.sqrt()) {
        return None;
    }
    let mut buf = vec![0.0; u.len()];
    let mut curve = |theta: f64| -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        for ((b, x), y) in buf.iter_mut().zip(u).zip(&perp) {
            *b = c * x + s * y / pn;
        }
        space.normalize(&buf).expect("curve avoids the origin")
    };
    let theta = if eps >= 2.0 {
        std::f64::consts::PI
    } else {
        let mut diff = vec![0.0; u.len()];
        bisect(
            |th| {
                let p = curve(th);
                for ((d, x), y) in diff.iter_mut().zip(u).zip(&p) {
                    *d = x - y;
                }
                space.norm(&diff) - eps
            },
            0.0,
            std::f64::consts::PI,
            1e-15,
        )
    };
    Some(curve(theta))
}

fn unit_from_angle(space: &FiniteNormedSpace, alpha: f64) -> Vec<f64> {
    let (s, c) = alpha.sin_cos();
    space.normalize(&[c, s]).expect("nonzero")
}

fn constrained_at_angle(
    space: &FiniteNormedSpace,
    kind: ModulusKind,
    eps: f64,
    alpha: f64,
    tol: f64,
) -> Option<Candidate> {
    let u = unit_from_angle(space, alpha);
    let e = [-alpha.sin(), alpha.cos()];
    let v = partner(space, &u, &e, eps)?;
    let (value, t) = constrained_value(space, kind, &u, &v, tol);
    Some(Candidate { value, u, v, t })
}

fn rho_value(space: &FiniteNormedSpace, tau: f64, u: &[f64], v: &[f64]) -> f64 {
    let plus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + tau * b).collect();
    let minus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - tau * b).collect();
    0.5 * (space.norm(&plus) + space.norm(&minus)) - 1.0
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Exhaustive angular grid over `u` (two-dimensional spaces only) with a
/// golden-section polish around the best grid angle.
fn angular_search_constrained(
    space: &FiniteNormedSpace,
    kind: ModulusKind,
    eps: f64,
    budget: &SearchBudget,
) -> Option<Candidate> {
    let maximize = kind.maximizes();
    let step = budget.angular_step;
    let n = (std::f64::consts::TAU / step).ceil() as usize;
    let mut best: Option<(f64, Candidate)> = None;
    for k in 0..n {
        let alpha = k as f64 * step;
        if let Some(c) = constrained_at_angle(space, kind, eps, alpha, budget.tol) {
            if best.as_ref().map_or(true, |(_, b)| c.better_than(b, maximize)) {
                best = Some((alpha, c));
            }
        }
    }
    let (alpha0, mut best) = best?;
    let sign = if maximize { 1.0 } else { -1.0 };
    let (alpha, _) = golden_max(
        |a| {
            constrained_at_angle(space, kind, eps, a, budget.tol)
                .map_or(f64::NEG_INFINITY, |c| sign * c.value)
        },
        alpha0 - step,
        alpha0 + step,
        1e-13,
    );
    if let Some(c) = constrained_at_angle(space, kind, eps, alpha, budget.tol) {
        if c.better_than(&best, maximize) {
            best = c;
        }
    }
    Some(best)
}

/// Multi-start simplex search over `(u, e)` in ℝ^{2·dim}.
fn simplex_search_constrained(
    space: &FiniteNormedSpace,
    kind: ModulusKind,
    eps: f64,
    budget: &SearchBudget,
) -> Option<Candidate> {
    let d = space.dim();
    let maximize = kind.maximizes();
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let eval = |x: &[f64]| -> Option<Candidate> {
        let u = space.normalize(&x[..d])?;
        let v = partner(space, &u, &x[d..], eps)?;
        let (value, t) = constrained_value(space, kind, &u, &v, budget.tol);
        Some(Candidate { value, u, v, t })
    };
    let mut best: Option<Candidate> = None;
    for _ in 0..budget.starts.max(1) {
        let x0 = random_vec(&mut rng, 2 * d);
        let (x, _) = nelder_mead(
            |x| eval(x).map_or(f64::INFINITY, |c| sign * c.value),
            &x0,
            0.5,
            budget.max_iter,
            1e-15,
        );
        if let Some(c) = eval(&x) {
            if best.as_ref().map_or(true, |b| c.better_than(b, maximize)) {
                best = Some(c);
            }
        }
    }
    best
}

fn rho_search(space: &FiniteNormedSpace, tau: f64, budget: &SearchBudget) -> Option<Candidate> {
    let d = space.dim();
    let eval = |x: &[f64]| -> Option<Candidate> {
        let u = space.normalize(&x[..d])?;
        let v = space.normalize(&x[d..])?;
        let value = rho_value(space, tau, &u, &v);
        Some(Candidate { value, u, v, t: None })
    };
    let polish = |x0: &[f64]| -> Option<Candidate> {
        let (x, _) = nelder_mead(
            |x| eval(x).map_or(f64::INFINITY, |c| -c.value),
            x0,
            0.05,
            budget.max_iter,
            1e-16,
        );
        eval(&x)
    };
    let mut best: Option<Candidate> = None;
    let mut consider = |c: Option<Candidate>| {
        if let Some(c) = c {
            if best.as_ref().map_or(true, |b| c.value > b.value) {
                best = Some(c);
            }
        }
    };

    if d == 2 {
        // Symmetries (u,v) → (−u,v) and v → −v leave the objective unchanged,
        // so both angles range over a half turn.
        let n = ((std::f64::consts::PI / budget.angular_step).sqrt() * 8.0).ceil() as usize;
        let n = n.clamp(64, 2048);
        let h = std::f64::consts::PI / n as f64;
        let units: Vec<Vec<f64>> = (0..n).map(|k| unit_from_angle(space, k as f64 * h)).collect();
        let mut scored: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for (i, u) in units.iter().enumerate() {
            for (j, v) in units.iter().enumerate() {
                scored.push((rho_value(space, tau, u, v), i, j));
            }
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        for &(_, i, j) in scored.iter().take(4) {
            let (ai, aj) = (i as f64 * h, j as f64 * h);
            let x0 = [ai.cos(), ai.sin(), aj.cos(), aj.sin()];
            consider(polish(&x0));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    for _ in 0..budget.starts.max(1) {
        let x0 = random_vec(&mut rng, 2 * d);
        let (x, _) = nelder_mead(
            |x| eval(x).map_or(f64::INFINITY, |c| -c.value),
            &x0,
            0.5,
            budget.max_iter,
            1e-16,
        );
        consider(eval(&x));
    }
    best
}

fn finish(
    space: &FiniteNormedSpace,
    kind: ModulusKind,
    argument: f64,
    budget: &SearchBudget,
    method: &str,
    c: Candidate,
) -> ModulusEstimate {
    let feasibility = match kind {
        ModulusKind::Rho => (space.norm(&c.u) - 1.0).abs().max((space.norm(&c.v) - 1.0).abs()),
        _ => {
            let diff: Vec<f64> = c.u.iter().zip(&c.v).map(|(a, b)| a - b).collect();
            (space.norm(&diff) - argument).abs()
        }
    };
    ModulusEstimate {
        kind,
        argument,
        value: c.value.max(0.0),
        space: space.label().to_string(),
        method: method.to_string(),
        budget: budget.clone(),
        tolerance: feasibility + if kind.uses_segment() { 1e-9 } else { 0.0 },
        witness: Witness {
            u: c.u,
            v: c.v,
            t: c.t,
        },
    }
}

fn estimate_constrained(
    space: &FiniteNormedSpace,
    kind: ModulusKind,
    eps: f64,
    budget: &SearchBudget,
) -> Result<ModulusEstimate> {
    let maximize = kind.maximizes();
    let mut best: Option<Candidate> = None;
    let mut method = String::from("simplex-multistart");
    if space.dim() == 2 {
        best = angular_search_constrained(space, kind, eps, budget);
        method = "angular-grid+simplex-multistart".into();
    }
    if let Some(c) = simplex_search_constrained(space, kind, eps, budget) {
        if best.as_ref().map_or(true, |b| c.better_than(b, maximize)) {
            best = Some(c);
        }
    }
    let best = best.ok_or_else(|| {
        Error::Search(format!(
            "no feasible pair at argument {eps} in {}",
            space.label()
        ))
    })?;
    Ok(finish(space, kind, eps, budget, &method, best))
}

/// Clarkson's modulus of convexity `δ(ε)`.
pub fn estimate_delta(
    space: &FiniteNormedSpace,
    eps: f64,
    budget: &SearchBudget,
) -> Result<ModulusEstimate> {
    check_open_closed(eps, 2.0, "eps")?;
    estimate_constrained(space, ModulusKind::Delta, eps, budget)
}

/// Gurary's modulus `δ†(ε)`: the midpoint replaced by the closest point of the segment.
pub fn estimate_delta_dagger(
    space: &FiniteNormedSpace,
    eps: f64,
    budget: &SearchBudget,
) -> Result<ModulusEstimate> {
    check_open_closed(eps, 2.0, "eps")?;
    estimate_constrained(space, ModulusKind::DeltaDagger, eps, budget)
}

/// Lindenstrauss' modulus of smoothness `ρ(τ)`.
pub fn estimate_rho(
    space: &FiniteNormedSpace,
    tau: f64,
    budget: &SearchBudget,
) -> Result<ModulusEstimate> {
    if !(tau > 0.0 && tau.is_finite()) {
        return domain(format!("tau must be positive, got {tau}"));
    }
    let c = rho_search(space, tau, budget)
        .ok_or_else(|| Error::Search(format!("rho search failed in {}", space.label())))?;
    let method = if space.dim() == 2 {
        "angular-grid+simplex-multistart"
    } else {
        "simplex-multistart"
    };
    Ok(finish(space, ModulusKind::Rho, tau, budget, method, c))
}

/// Banaś' modulus `ρ†(τ)`, `τ ∈ (0, 2)`.
pub fn estimate_rho_dagger(
    space: &FiniteNormedSpace,
    tau: f64,
    budget: &SearchBudget,
) -> Result<ModulusEstimate> {
    check_open_open(tau, 2.0, "tau")?;
    estimate_constrained(space, ModulusKind::RhoDagger, tau, budget)
}

/// `ρ‡(τ)`: `ρ†` with the midpoint replaced by the deepest point of the segment.
pub fn estimate_rho_ddagger(
    space: &FiniteNormedSpace,
    tau: f64,
    budget: &SearchBudget,
) -> Result<ModulusEstimate> {
    check_open_open(tau, 2.0, "tau")?;
    estimate_constrained(space, ModulusKind::RhoDdagger, tau, budget)
}

pub fn estimate(
    space: &FiniteNormedSpace,
    kind: ModulusKind,
    argument: f64,
    budget: &SearchBudget,
) -> Result<ModulusEstimate> {
    match kind {
        ModulusKind::Delta => estimate_delta(space, argument, budget),
        ModulusKind::DeltaDagger => estimate_delta_dagger(space, argument, budget),
        ModulusKind::Rho => estimate_rho(space, argument, budget),
        ModulusKind::RhoDagger => estimate_rho_dagger(space, argument, budget),
        ModulusKind::RhoDdagger => estimate_rho_ddagger(space, argument, budget),
    }
}

fn check_open_closed(x: f64, hi: f64, name: &str) -> Result<()> {
    if x > 0.0 && x <= hi {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, {hi}], got {x}"))
    }
}

fn check_open_open(x: f64, hi: f64, name: &str) -> Result<()> {
    if x > 0.0 && x < hi {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, {hi}), got {x}"))
    }
}
