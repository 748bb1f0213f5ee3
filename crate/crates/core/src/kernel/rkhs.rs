use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_points, BanachKernel, Combination, KernelPoint, Ray};
use crate::error::{domain, Error, Result};

type KernelFn<P> = dyn Fn(&P, &P) -> f64 + Send + Sync;

/// Quadratic forms below `-NEG_TOL·(1 + scale)` signal an invalid kernel.
const NEG_TOL: f64 = 1e-9;

/// Kernel of a reproducing-kernel Hilbert space, `√(tᵀ G t)`.
#[derive(Clone)]
pub struct RkhsKernel<P> {
    k: Arc<KernelFn<P>>,
    c_bound: Option<f64>,
    label: String,
}

impl<P: KernelPoint> RkhsKernel<P> {
    /// `k` should return NaN outside its domain.
    pub fn new<F>(label: impl Into<String>, c_bound: Option<f64>, k: F) -> Self
    where
        F: Fn(&P, &P) -> f64 + Send + Sync + 'static,
    {
        Self {
            k: Arc::new(k),
            c_bound,
            label: label.into(),
        }
    }

    pub fn eval(&self, x: &P, y: &P) -> Result<f64> {
        let v = (self.k)(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            domain(format!("kernel undefined at ({x:?}, {y:?})"))
        }
    }

    pub fn gram(&self, points: &[P]) -> Result<DMatrix<f64>> {
        let n = points.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(&points[i], &points[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// `√(tᵀ G t)` from an explicit Gram matrix.
    pub fn rkhs_dual_norm(&self, points: &[P], t: &[f64]) -> Result<f64> {
        check_points(points, t)?;
        let g = self.gram(points)?;
        let tv = nalgebra::DVector::from_column_slice(t);
        checked_sqrt(tv.dot(&(&g * &tv)), g.amax() * tv.norm_squared())
    }
}

impl RkhsKernel<f64> {
    /// Reproducing kernel of `W^{1,2}([0,1])`, `cosh(min)·cosh(1−max)/sinh 1`.
    pub fn sobolev_w12() -> Self {
        let s1 = 1f64.sinh();
        Self::new(
            "rkhs(w12)",
            Some((1f64.cosh() / s1).sqrt()),
            move |x: &f64, y: &f64| {
                if !((0.0..=1.0).contains(x) && (0.0..=1.0).contains(y)) {
                    return f64::NAN;
                }
                let (lo, hi) = if x <= y { (*x, *y) } else { (*y, *x) };
                lo.cosh() * (1.0 - hi).cosh() / s1
            },
        )
    }

    pub fn gaussian(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return domain(format!("gaussian width must be positive, got {width}"));
        }
        Ok(Self::new(
            format!("rkhs(gaussian, width={width})"),
            Some(1.0),
            move |x: &f64, y: &f64| (-(x - y) * (x - y) / (2.0 * width * width)).exp(),
        ))
    }
}

fn checked_sqrt(q: f64, scale: f64) -> Result<f64> {
    if q >= 0.0 {
        Ok(q.sqrt())
    } else if q >= -NEG_TOL * (1.0 + scale) {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!(
            "negative quadratic form {q:e}: kernel is not positive semidefinite"
        )))
    }
}

impl<P: KernelPoint> BanachKernel<P> for RkhsKernel<P> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn c_bound(&self) -> Option<f64> {
        self.c_bound
    }

    fn combination(&self) -> Box<dyn Combination<P> + '_> {
        Box::new(RkhsCombination {
            kernel: self,
            points: Vec::new(),
            coeffs: Vec::new(),
            q: 0.0,
            scale: 0.0,
        })
    }
}

/// Keeps `q = tᵀGt` current as points are pushed.
struct RkhsCombination<'k, P> {
    kernel: &'k RkhsKernel<P>,
    points: Vec<P>,
    coeffs: Vec<f64>,
    q: f64,
    scale: f64,
}

impl<P: KernelPoint> RkhsCombination<'_, P> {
    /// `(Σ tᵢK(zᵢ,z), K(z,z))`.
    fn cross(&self, z: &P) -> Result<(f64, f64)> {
        let mut b = 0.0;
        for (zi, ti) in self.points.iter().zip(&self.coeffs) {
            b += ti * self.kernel.eval(zi, z)?;
        }
        Ok((b, self.kernel.eval(z, z)?))
    }
}

impl<P: KernelPoint> Combination<P> for RkhsCombination<'_, P> {
    fn push(&mut self, z: &P, t: f64) -> Result<()> {
        let (b, kzz) = self.cross(z)?;
        self.q += 2.0 * t * b + t * t * kzz;
        self.scale += t.abs() * (b.abs() + t.abs() * kzz.abs());
        match self.points.iter().position(|p| p == z) {
            Some(i) => self.coeffs[i] += t,
            None => {
                self.points.push(z.clone());
                self.coeffs.push(t);
            }
        }
        Ok(())
    }

    fn norm(&mut self) -> Result<f64> {
        checked_sqrt(self.q, self.scale)
    }

    fn ray<'s>(&'s mut self, z: &P) -> Result<Box<dyn Ray + 's>> {
        let (b, kzz) = self.cross(z)?;
        Ok(Box::new(RkhsRay {
            q: self.q,
            b,
            kzz,
            scale: self.scale,
        }))
    }
}

struct RkhsRay {
    q: f64,
    b: f64,
    kzz: f64,
    scale: f64,
}

impl Ray for RkhsRay {
    fn eval(&mut self, a: f64) -> Result<f64> {
        let v = self.q + 2.0 * a * self.b + a * a * self.kzz;
        checked_sqrt(v, self.scale + a.abs() * (self.b.abs() + a.abs() * self.kzz))
    }
}
