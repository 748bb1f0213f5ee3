use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Result};

type NormFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A finite-dimensional real normed space, `dim >= 2`.
#[derive(Clone)]
pub struct FiniteNormedSpace {
    dim: usize,
    norm: Arc<NormFn>,
    label: String,
}

impl fmt::Debug for FiniteNormedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteNormedSpace")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

impl FiniteNormedSpace {
    /// Wraps an arbitrary norm. The caller is responsible for the norm axioms;
    /// `tests/geometry_props.rs` checks the built-in ones.
    pub fn custom<F>(label: impl Into<String>, dim: usize, norm: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim < 2 {
            return domain(format!("normed space needs dim >= 2, got {dim}"));
        }
        Ok(Self {
            dim,
            norm: Arc::new(norm),
            label: label.into(),
        })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::custom(format!("euclidean(dim={dim})"), dim, |v| {
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
    }

    /// ℓ^p on ℝ^dim for `p >= 1`; `p = inf` gives the max norm.
    pub fn ellp(p: f64, dim: usize) -> Result<Self> {
        if !(p >= 1.0) {
            return domain(format!("ell^p needs p >= 1, got {p}"));
        }
        let label = format!("ellp(p={p}, dim={dim})");
        if p.is_infinite() {
            return Self::custom(label, dim, |v| v.iter().fold(0.0, |m, x| m.max(x.abs())));
        }
        Self::custom(label, dim, move |v| lp_norm(v, p))
    }

    /// Weighted direct sum `√(a1‖u1‖² + a2‖u2‖²)` on the concatenated coordinates.
    pub fn direct_sum(u1: &Self, u2: &Self, a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0) {
            return domain(format!("direct-sum weights must be positive, got {a1}, {a2}"));
        }
        let (n1, n2) = (u1.norm.clone(), u2.norm.clone());
        let d1 = u1.dim;
        Self::custom(
            format!("directsum({}, {}; a1={a1}, a2={a2})", u1.label, u2.label),
            u1.dim + u2.dim,
            move |v| {
                let x = n1(&v[..d1]);
                let y = n2(&v[d1..]);
                (a1 * x * x + a2 * y * y).sqrt()
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn norm(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        (self.norm)(v)
    }

    /// `v / ‖v‖`, or `None` for the zero vector.
    pub fn normalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        let n = self.norm(v);
        if n > 0.0 && n.is_finite() {
            Some(v.iter().map(|x| x / n).collect())
        } else {
            None
        }
    }
}

/// Plain (unweighted) ℓ^p norm, scaled by the largest entry to avoid overflow.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    let m = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt();
    }
    m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}
