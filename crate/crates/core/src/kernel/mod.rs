//! Banach kernels: consistent families of seminorms on coefficient vectors
//! indexed by finite point sequences.
//!
//! A kernel hands out [`Combination`]s, mutable accumulators of
//! `Σ tᵢ k_{zᵢ}` that support cheap evaluation of `a ↦ ‖C + a·k_z‖` along a
//! [`Ray`]. The online predictor builds one combination per run and extends
//! it by one point per round, so whatever a kernel caches (Gram sums,
//! factorizations, warm starts) lives in the combination.

mod axioms;
mod mapping;
mod rkhs;
mod sobolev;

pub use axioms::{check_mapping_duality, verify_kernel_axioms, AxiomCheck, AxiomReport};
pub use mapping::MappingKernel;
pub use rkhs::RkhsKernel;
pub use sobolev::{DualSobolevKernel, SolverSettings};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Element of a kernel's domain.
pub trait KernelPoint: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    fn coords(&self) -> &[f64];
}

impl KernelPoint for f64 {
    fn coords(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
}

impl KernelPoint for [f64; 2] {
    fn coords(&self) -> &[f64] {
        self
    }
}

pub trait BanachKernel<P: KernelPoint>: Send + Sync {
    fn label(&self) -> String;

    /// `sup_z ‖k_z‖`, when known.
    fn c_bound(&self) -> Option<f64>;

    /// An empty combination.
    fn combination(&self) -> Box<dyn Combination<P> + '_>;

    /// `‖t₁k_{z₁} + … + tₙk_{zₙ}‖` for distinct points.
    fn seminorm(&self, points: &[P], coeffs: &[f64]) -> Result<f64> {
        check_points(points, coeffs)?;
        let mut c = self.combination();
        for (z, t) in points.iter().zip(coeffs) {
            c.push(z, *t)?;
        }
        c.norm()
    }
}

/// A finite combination `C = Σ tᵢ k_{zᵢ}` under construction.
pub trait Combination<P: KernelPoint>: Send {
    /// `C ← C + t·k_z`; a repeated point accumulates its coefficient.
    fn push(&mut self, z: &P, t: f64) -> Result<()>;

    fn norm(&mut self) -> Result<f64>;

    /// The function `a ↦ ‖C + a·k_z‖`.
    fn ray<'s>(&'s mut self, z: &P) -> Result<Box<dyn Ray + 's>>;
}

pub trait Ray {
    fn eval(&mut self, a: f64) -> Result<f64>;
}

/// Rejects length mismatches and repeated points.
pub fn check_points<P: PartialEq>(points: &[P], coeffs: &[f64]) -> Result<()> {
    if points.len() != coeffs.len() {
        return Err(Error::LengthMismatch {
            points: points.len(),
            coeffs: coeffs.len(),
        });
    }
    for (i, z) in points.iter().enumerate() {
        if points[..i].contains(z) {
            return Err(Error::DuplicatePoint { index: i });
        }
    }
    if let Some(i) = coeffs.iter().position(|t| !t.is_finite()) {
        return domain(format!("non-finite coefficient at index {i}"));
    }
    Ok(())
}

/// Weights of the direct-sum norm `√(a₁n₁² + a₂n₂²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectSumWeights {
    pub a1: f64,
    pub a2: f64,
}

impl DirectSumWeights {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
            return domain(format!("direct-sum weights must be positive, got {a1}, {a2}"));
        }
        Ok(Self { a1, a2 })
    }

    /// `a₁ = Y⁻²`, `a₂ = 1`.
    pub fn for_label_bound(y: f64) -> Result<Self> {
        Self::new(1.0 / (y * y), 1.0)
    }
}

pub fn direct_sum_norm(n1: f64, n2: f64, w: DirectSumWeights) -> Result<f64> {
    if !(n1 >= 0.0 && n2 >= 0.0) {
        return domain(format!("component norms must be nonnegative, got {n1}, {n2}"));
    }
    Ok((w.a1 * n1 * n1 + w.a2 * n2 * n2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_sum_values() {
        let one = DirectSumWeights::new(1.0, 1.0).unwrap();
        assert_eq!(direct_sum_norm(0.0, 0.0, one).unwrap(), 0.0);
        assert_eq!(direct_sum_norm(3.0, 4.0, one).unwrap(), 5.0);
        let w = DirectSumWeights::for_label_bound(2.0).unwrap();
        assert!((direct_sum_norm(2.0, 1.0, w).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(direct_sum_norm(-1.0, 0.0, one).is_err());
        assert!(DirectSumWeights::new(0.0, 1.0).is_err());
    }

    #[test]
    fn duplicate_points_rejected() {
        assert!(matches!(
            check_points(&[0.1, 0.2, 0.1], &[1.0, 1.0, 1.0]),
            Err(Error::DuplicatePoint { index: 2 })
        ));
        assert!(matches!(
            check_points(&[0.1], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
