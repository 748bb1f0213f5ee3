use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_points, BanachKernel, KernelPoint, MappingKernel};
use crate::error::Result;
use crate::geometry::lp_norm;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub sample: usize,
    pub axiom: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomReport {
    pub kernel: String,
    pub tol: f64,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks permutation invariance, zero extension, absolute homogeneity and
/// the triangle inequality on each sample.
///
/// `spare` must not occur in any sample; it is appended with coefficient 0.
/// Comparisons are relative: `|lhs − rhs| ≤ tol·(1 + max(lhs, rhs))`.
pub fn verify_kernel_axioms<P: KernelPoint, K: BanachKernel<P> + ?Sized>(
    k: &K,
    samples: &[(Vec<P>, Vec<f64>)],
    spare: &P,
    tol: f64,
) -> Result<AxiomReport> {
    let mut checks = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()));
    for (s, (points, coeffs)) in samples.iter().enumerate() {
        check_points(points, coeffs)?;
        let base = k.seminorm(points, coeffs)?;
        let mut push = |axiom: &str, lhs: f64, rhs: f64, passed: bool| {
            checks.push(AxiomCheck {
                sample: s,
                axiom: axiom.to_string(),
                lhs,
                rhs,
                passed,
            })
        };

        let n = points.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let perm = if is_permutation(&perm) { perm } else { (0..n).rev().collect() };
        let pp: Vec<P> = perm.iter().map(|&i| points[i].clone()).collect();
        let pc: Vec<f64> = perm.iter().map(|&i| coeffs[i]).collect();
        let v = k.seminorm(&pp, &pc)?;
        push("permutation", v, base, close(v, base));

        let mut ep = points.clone();
        ep.push(spare.clone());
        let mut ec = coeffs.clone();
        ec.push(0.0);
        let v = k.seminorm(&ep, &ec)?;
        push("zero_extension", v, base, close(v, base));

        let lam = -2.5;
        let sc: Vec<f64> = coeffs.iter().map(|t| lam * t).collect();
        let v = k.seminorm(points, &sc)?;
        push("homogeneity", v, lam.abs() * base, close(v, lam.abs() * base));

        let other: Vec<f64> = coeffs.iter().rev().copied().collect();
        let sum: Vec<f64> = coeffs.iter().zip(&other).map(|(a, b)| a + b).collect();
        let lhs = k.seminorm(points, &sum)?;
        let rhs = base + k.seminorm(points, &other)?;
        push("triangle", lhs, rhs, lhs <= rhs + tol * (1.0 + rhs));
    }
    Ok(AxiomReport {
        kernel: k.label(),
        tol,
        checks,
    })
}

fn is_permutation(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    for &i in v {
        if i >= v.len() || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// The kernel value of a finite combination computed two ways.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityCheck {
    /// `‖Σ tᵢΦ(zᵢ)‖_r`.
    pub direct: f64,
    /// `Σ tᵢ D(zᵢ)` for `D = φ∘Φ` with `φ` the norming functional.
    pub attained: f64,
    /// Largest `Σ tᵢ D(zᵢ)` over random `φ` in the dual unit ball.
    pub max_random: f64,
}

/// Evaluates `sup{Σ tᵢ (φ∘Φ)(zᵢ) : ‖φ‖_{r'} ≤ 1}` against the direct
/// feature-space norm: the norming functional must attain it and random
/// dual-ball functionals must not exceed it.
pub fn check_mapping_duality<P: KernelPoint>(
    k: &MappingKernel<P>,
    points: &[P],
    coeffs: &[f64],
    trials: usize,
    seed: u64,
) -> Result<DualityCheck> {
    check_points(points, coeffs)?;
    let feats: Vec<Vec<f64>> = points.iter().map(|z| k.features(z)).collect::<Result<_>>()?;
    let d = k.dim();
    let r = k.r();
    let rp = r / (r - 1.0);
    let mut sum = vec![0.0; d];
    for (phi, t) in feats.iter().zip(coeffs) {
        for (s, x) in sum.iter_mut().zip(phi) {
            *s += t * x;
        }
    }
    let direct = lp_norm(&sum, r);
    let functional_value = |phi: &[f64]| -> f64 {
        feats
            .iter()
            .zip(coeffs)
            .map(|(f, t)| t * f.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let attained = if direct > 0.0 {
        let norming: Vec<f64> = sum
            .iter()
            .map(|s| s.signum() * (s.abs() / direct).powf(r - 1.0))
            .collect();
        functional_value(&norming)
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_random = f64::NEG_INFINITY;
    for _ in 0..trials {
        let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = lp_norm(&raw, rp);
        if n == 0.0 {
            continue;
        }
        let phi: Vec<f64> = raw.iter().map(|x| x / n).collect();
        max_random = max_random.max(functional_value(&phi));
    }
    Ok(DualityCheck {
        direct,
        attained,
        max_random,
    })
}
