use std::sync::Arc;

use super::{BanachKernel, Combination, KernelPoint, Ray};
use crate::error::{domain, Result};
use crate::geometry::lp_norm;

type FeatureFn<P> = dyn Fn(&P) -> Option<Vec<f64>> + Send + Sync;

/// The kernel `‖Σ tᵢΦ(zᵢ)‖_r` of a feature map `Φ` into `ℓ^r`.
#[derive(Clone)]
pub struct MappingKernel<P> {
    map: Arc<FeatureFn<P>>,
    dim: usize,
    r: f64,
    c_bound: Option<f64>,
    label: String,
}

impl<P: KernelPoint> MappingKernel<P> {
    /// `map` returns `None` outside its domain.
    pub fn new<F>(
        label: impl Into<String>,
        dim: usize,
        r: f64,
        c_bound: Option<f64>,
        map: F,
    ) -> Result<Self>
    where
        F: Fn(&P) -> Option<Vec<f64>> + Send + Sync + 'static,
    {
        if dim < 2 {
            return domain(format!("feature dimension must be >= 2, got {dim}"));
        }
        if !(r >= 1.0 && r.is_finite()) {
            return domain(format!("feature norm exponent must be finite and >= 1, got {r}"));
        }
        Ok(Self {
            map: Arc::new(map),
            dim,
            r,
            c_bound,
            label: label.into(),
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, z: &P) -> Result<Vec<f64>> {
        match (self.map)(z) {
            Some(v) if v.len() == self.dim && v.iter().all(|x| x.is_finite()) => Ok(v),
            Some(v) if v.len() != self.dim => domain(format!(
                "feature map returned {} entries, expected {}",
                v.len(),
                self.dim
            )),
            _ => domain(format!("point {z:?} is outside the feature map's domain")),
        }
    }
}

impl MappingKernel<f64> {
    /// `Φ(z) = (z, 1)` on `[−1, 1]`.
    pub fn affine(r: f64) -> Result<Self> {
        Self::new(
            format!("mapping(affine, r={r})"),
            2,
            r,
            Some(2f64.powf(1.0 / r)),
            |z: &f64| (z.abs() <= 1.0).then(|| vec![*z, 1.0]),
        )
    }

    /// `Φ(z) = (w₀, w₁cos 2πz, w₁sin 2πz, …, w_K cos 2πKz, w_K sin 2πKz)` on `[0, 1]`.
    pub fn fourier(weights: Vec<f64>, r: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return domain("fourier weights must be a nonempty list of nonnegative reals");
        }
        // |cos|^r + |sin|^r ≤ max(1, 2^{1−r/2}).
        let pair = 1f64.max(2f64.powf(1.0 - r / 2.0));
        let c = (weights[0].powf(r) + pair * weights[1..].iter().map(|w| w.powf(r)).sum::<f64>())
            .powf(1.0 / r);
        let dim = 2 * weights.len() - 1;
        let label = format!("mapping(fourier, K={}, r={r})", weights.len() - 1);
        Self::new(label, dim.max(2), r, Some(c), move |z: &f64| {
            if !(0.0..=1.0).contains(z) {
                return None;
            }
            let mut v = Vec::with_capacity(dim.max(2));
            v.push(weights[0]);
            for (k, w) in weights.iter().enumerate().skip(1) {
                let (s, c) = (std::f64::consts::TAU * k as f64 * z).sin_cos();
                v.push(w * c);
                v.push(w * s);
            }
            if v.len() < 2 {
                v.push(0.0);
            }
            Some(v)
        })
    }
}

impl<P: KernelPoint> BanachKernel<P> for MappingKernel<P> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn c_bound(&self) -> Option<f64> {
        self.c_bound
    }

    fn combination(&self) -> Box<dyn Combination<P> + '_> {
        Box::new(MappingCombination {
            kernel: self,
            sum: vec![0.0; self.dim],
        })
    }
}

struct MappingCombination<'k, P> {
    kernel: &'k MappingKernel<P>,
    sum: Vec<f64>,
}

impl<P: KernelPoint> Combination<P> for MappingCombination<'_, P> {
    fn push(&mut self, z: &P, t: f64) -> Result<()> {
        let phi = self.kernel.features(z)?;
        for (s, x) in self.sum.iter_mut().zip(&phi) {
            *s += t * x;
        }
        Ok(())
    }

    fn norm(&mut self) -> Result<f64> {
        Ok(lp_norm(&self.sum, self.kernel.r))
    }

    fn ray<'s>(&'s mut self, z: &P) -> Result<Box<dyn Ray + 's>> {
        let phi = self.kernel.features(z)?;
        Ok(Box::new(MappingRay {
            base: &self.sum,
            phi,
            buf: vec![0.0; self.sum.len()],
            r: self.kernel.r,
        }))
    }
}

struct MappingRay<'s> {
    base: &'s [f64],
    phi: Vec<f64>,
    buf: Vec<f64>,
    r: f64,
}

impl Ray for MappingRay<'_> {
    fn eval(&mut self, a: f64) -> Result<f64> {
        for ((b, s), x) in self.buf.iter_mut().zip(self.base).zip(&self.phi) {
            *b = s + a * x;
        }
        Ok(lp_norm(&self.buf, self.r))
    }
}
