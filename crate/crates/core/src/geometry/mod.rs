//! Moduli of convexity and smoothness of finite-dimensional normed spaces.

mod moduli;
mod space;

pub use moduli::{
    estimate, estimate_delta, estimate_delta_dagger, estimate_rho, estimate_rho_dagger,
    estimate_rho_ddagger, ModulusEstimate, ModulusKind, SearchBudget, Witness,
};
pub use space::{lp_norm, FiniteNormedSpace};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::optim::golden_max;

/// Smoothness constant of a weighted direct sum relative to its summands.
pub const LEMMA3_FACTOR: f64 = 4.34;
/// Upper bound for Figiel's constant `L`.
pub const FIGIEL_L: f64 = 3.18;

/// Power-type smoothness constants for a space whose dual is `p`-uniformly convex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub p: f64,
    pub q: f64,
    /// `ρ(τ) ≤ a·τ^q` for the direct sum `ℝ ⊕ F*`.
    pub a: f64,
    pub l_bound: f64,
    pub lemma3_factor: f64,
}

impl SmoothnessConstants {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return domain(format!("p must be a finite real >= 2, got {p}"));
        }
        let q = p / (p - 1.0);
        Ok(Self {
            p,
            q,
            a: LEMMA3_FACTOR / q,
            l_bound: FIGIEL_L,
            lemma3_factor: LEMMA3_FACTOR,
        })
    }

    /// `2aq`, which is 8.68 for every `p`.
    pub fn two_a_q(&self) -> f64 {
        2.0 * self.a * self.q
    }

    /// `ρ(τ) ≤ a·τ^q`.
    pub fn rho_bound(&self, tau: f64) -> f64 {
        self.a * tau.powf(self.q)
    }
}

/// Clarkson's lower bound `1 − (1 − (ε/2)^p)^{1/p}` on the convexity modulus of `L^p`.
pub fn clarkson_delta_bound(p: f64, eps: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return domain(format!("p must be >= 2, got {p}"));
    }
    if !(eps > 0.0 && eps <= 2.0) {
        return domain(format!("eps must lie in (0, 2], got {eps}"));
    }
    Ok(1.0 - (1.0 - (eps / 2.0).powf(p)).powf(1.0 / p))
}

/// `(ε/2)^p / p`, the weaker power-type form of Clarkson's bound.
pub fn power_delta_bound(p: f64, eps: f64) -> f64 {
    (eps / 2.0).powf(p) / p
}

/// Convexity modulus of any Hilbert space, `1 − √(1 − (ε/2)²)`.
pub fn hilbert_delta(eps: f64) -> f64 {
    1.0 - (1.0 - 0.25 * eps * eps).max(0.0).sqrt()
}

/// Smoothness modulus of any Hilbert space, `√(1 + τ²) − 1`.
pub fn hilbert_rho(tau: f64) -> f64 {
    (1.0 + tau * tau).sqrt() - 1.0
}

const CONJUGATE_GRID: usize = 10_000;

/// `sup_{ε ∈ (0,2]} (ετ/2 − δ(ε))` by a dense grid and golden-section polish.
///
/// `delta` is treated as an arbitrary function; the three best grid cells
/// are each refined.
pub fn conjugate_rho_from_delta<F: Fn(f64) -> f64>(delta: F, tau: f64) -> f64 {
    let obj = |e: f64| e * tau / 2.0 - delta(e);
    let h = 2.0 / CONJUGATE_GRID as f64;
    let mut scored: Vec<(f64, usize)> = (1..=CONJUGATE_GRID)
        .map(|k| (obj(k as f64 * h), k))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].0;
    for &(_, k) in scored.iter().take(3) {
        let lo = ((k as f64 - 1.0) * h).max(f64::MIN_POSITIVE);
        let hi = ((k as f64 + 1.0) * h).min(2.0);
        let (_, v) = golden_max(obj, lo, hi, 1e-14);
        best = best.max(v);
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectSumPoint {
    pub tau: f64,
    pub f: f64,
    pub rho_u1: f64,
    pub rho_u2: f64,
    pub rho_sum: f64,
    pub bound: f64,
    pub premise_holds: bool,
    pub conclusion_holds: bool,
    pub witness: Witness,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectSumReport {
    pub label: String,
    pub slack: f64,
    pub points: Vec<DirectSumPoint>,
}

impl DirectSumReport {
    /// True when the conclusion holds at every point where the premise holds.
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| !p.premise_holds || p.conclusion_holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &DirectSumPoint> {
        self.points
            .iter()
            .filter(|p| p.premise_holds && !p.conclusion_holds)
    }
}

/// Checks `ρ_{U1⊕U2}(τ) ≤ 4.34·f(τ)` on `tau_grid` wherever both summands
/// satisfy `ρ(τ) ≤ f(τ)` numerically.
///
/// The summand estimates are lower bounds, so the premise is checked with
/// additive `slack`; the conclusion is checked with the same slack.
pub fn check_direct_sum_smoothness<F: Fn(f64) -> f64>(
    u1: &FiniteNormedSpace,
    u2: &FiniteNormedSpace,
    a1: f64,
    a2: f64,
    f: F,
    tau_grid: &[f64],
    budget: &SearchBudget,
    slack: f64,
) -> Result<DirectSumReport> {
    let sum = FiniteNormedSpace::direct_sum(u1, u2, a1, a2)?;
    let mut points = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        if !(tau > 0.0 && tau <= 1.0) {
            return domain(format!("tau grid entries must lie in (0, 1], got {tau}"));
        }
        let fv = f(tau);
        let r1 = estimate_rho(u1, tau, budget)?.value;
        let r2 = estimate_rho(u2, tau, budget)?.value;
        let rs = estimate_rho(&sum, tau, budget)?;
        let bound = LEMMA3_FACTOR * fv;
        points.push(DirectSumPoint {
            tau,
            f: fv,
            rho_u1: r1,
            rho_u2: r2,
            rho_sum: rs.value,
            bound,
            premise_holds: r1 <= fv + slack && r2 <= fv + slack,
            conclusion_holds: rs.value <= bound + slack,
            witness: rs.witness,
        });
    }
    Ok(DirectSumReport {
        label: sum.label().to_string(),
        slack,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_consistent() {
        for p in [2.0, 3.0, 4.0, 7.5] {
            let c = SmoothnessConstants::new(p).unwrap();
            assert!((c.two_a_q() - 8.68).abs() < 1e-12);
            assert!(c.q > 1.0 && c.q <= 2.0);
        }
        assert!(1.0 + (FIGIEL_L * FIGIEL_L + 1.0).sqrt() < LEMMA3_FACTOR);
        assert!(SmoothnessConstants::new(1.5).is_err());
    }

    #[test]
    fn clarkson_values() {
        assert_eq!(clarkson_delta_bound(2.0, 2.0).unwrap(), 1.0);
        let v = clarkson_delta_bound(2.0, 2f64.sqrt()).unwrap();
        assert!((v - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!(clarkson_delta_bound(2.0, 1.0).unwrap() >= 0.125);
        assert!(clarkson_delta_bound(1.5, 1.0).is_err());
        assert!(clarkson_delta_bound(2.0, 0.0).is_err());
    }

    #[test]
    fn conjugate_of_zero() {
        assert!((conjugate_rho_from_delta(|_| 0.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conjugate_power_type() {
        let v = conjugate_rho_from_delta(|e| power_delta_bound(2.0, e), 0.5);
        assert!((v - 0.125).abs() < 1e-10);
    }
}
