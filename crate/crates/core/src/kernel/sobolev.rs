//! Dual norms of point-evaluation combinations in a discretized Sobolev space.
//!
//! The discretized norm is `‖f‖ = (Σ_r w_r |(Mf)_r|^p)^{1/p}` (see
//! [`NormOperator`]), and a combination `Σ tᵢ k_{zᵢ}` acts on grid values as
//! `f ↦ cᵀf`, with `c` spreading each `tᵢ` over the interpolation nodes of
//! `zᵢ`. Its dual norm is `sup{cᵀf : ‖f‖ ≤ 1}`.
//!
//! For `p = 2` this is `√(cᵀA⁻¹c)` with `A = MᵀWM`. For `p > 2` it is
//! computed by minimizing the smooth convex `F(f) = ‖f‖^p/p − cᵀf`, whose
//! minimizer `f*` gives `‖c‖_* = ‖f*‖^{p−1}`. Every iterate certifies a
//! bracket: `cᵀf/‖f‖` from below, and from above the dual objective of a
//! multiplier vector `λ` with `Mᵀλ = c` exactly, built from the iterate's
//! gradient with the residual absorbed by the identity rows.

use std::marker::PhantomData;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{BanachKernel, Combination, KernelPoint, Ray};
use crate::error::{domain, Error, Result};
use crate::spaces::{norm_operator, GridDomain, NormOperator, SobolevParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative width of the certified bracket at which a solve stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

pub struct DualSobolevKernel<P> {
    domain: Arc<GridDomain>,
    params: SobolevParams,
    op: Arc<NormOperator>,
    settings: SolverSettings,
    quadratic: OnceLock<std::result::Result<Arc<DMatrix<f64>>, String>>,
    c_bound: OnceLock<std::result::Result<f64, String>>,
    _point: PhantomData<fn() -> P>,
}

impl<P: KernelPoint> DualSobolevKernel<P> {
    pub fn new(domain: Arc<GridDomain>, params: SobolevParams, settings: SolverSettings) -> Result<Self> {
        let op = Arc::new(norm_operator(&domain, &params)?);
        if !(settings.tol > 0.0 && settings.max_iter > 0) {
            return crate::error::domain("solver settings need tol > 0 and max_iter > 0");
        }
        Ok(Self {
            domain,
            params,
            op,
            settings,
            quadratic: OnceLock::new(),
            c_bound: OnceLock::new(),
            _point: PhantomData,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn params(&self) -> &SobolevParams {
        &self.params
    }

    pub fn operator(&self) -> &NormOperator {
        &self.op
    }

    fn is_quadratic(&self) -> bool {
        self.params.p == 2.0
    }

    /// Interpolation weights of `z` over grid nodes.
    pub fn evaluation(&self, z: &P) -> Result<Vec<(usize, f64)>> {
        let x = z.coords();
        if x.len() != self.domain.dim() {
            return domain(format!(
                "point {z:?} has dimension {}, domain has {}",
                x.len(),
                self.domain.dim()
            ));
        }
        self.domain.interpolation(x)
    }

    /// `A⁻¹` for `p = 2`.
    fn inverse(&self) -> Result<Arc<DMatrix<f64>>> {
        self.quadratic
            .get_or_init(|| {
                let a = assemble_hessian(&self.op, |r| self.op.weights()[r], 0.0);
                let chol = Cholesky::new(a)
                    .ok_or_else(|| "Sobolev Gram operator is not positive definite".to_string())?;
                Ok(Arc::new(chol.inverse()))
            })
            .clone()
            .map_err(Error::Factorization)
    }

    /// Dual norm of a grid functional.
    pub fn dual_norm_of(&self, c: &[f64]) -> Result<f64> {
        if c.len() != self.domain.len() {
            return Err(Error::LengthMismatch {
                points: self.domain.len(),
                coeffs: c.len(),
            });
        }
        if self.is_quadratic() {
            let inv = self.inverse()?;
            let cv = DVector::from_column_slice(c);
            Ok(cv.dot(&(&*inv * &cv)).max(0.0).sqrt())
        } else {
            DualSolver::new(&self.op, self.settings).solve(c)
        }
    }

    /// `max_i ‖k_{xᵢ}‖` over grid nodes; interpolated functionals are convex
    /// combinations of these, so this is the supremum over the whole domain.
    pub fn embedding_constant(&self) -> Result<f64> {
        self.c_bound
            .get_or_init(|| self.compute_embedding_constant().map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::Search)
    }

    fn compute_embedding_constant(&self) -> Result<f64> {
        let n = self.domain.len();
        if self.is_quadratic() {
            let inv = self.inverse()?;
            return Ok((0..n).map(|i| inv[(i, i)]).fold(0.0, f64::max).sqrt());
        }
        let mut solver = DualSolver::new(&self.op, self.settings);
        let mut best = 0.0f64;
        let mut c = vec![0.0; n];
        for i in 0..n {
            c[i] = 1.0;
            best = best.max(solver.solve(&c)?);
            c[i] = 0.0;
        }
        Ok(best)
    }
}

impl<P: KernelPoint> BanachKernel<P> for DualSobolevKernel<P> {
    fn label(&self) -> String {
        format!(
            "dual_sobolev(s={}, p={}, grid={:?})",
            self.params.s,
            self.params.p,
            self.domain.shape()
        )
    }

    fn c_bound(&self) -> Option<f64> {
        self.embedding_constant().ok()
    }

    fn combination(&self) -> Box<dyn Combination<P> + '_> {
        let n = self.domain.len();
        if self.is_quadratic() {
            Box::new(QuadraticCombination {
                kernel: self,
                inv: None,
                g: vec![0.0; n],
                u: vec![0.0; n],
            })
        } else {
            Box::new(SolverCombination {
                kernel: self,
                g: vec![0.0; n],
                solvers: std::array::from_fn(|_| DualSolver::new(&self.op, self.settings)),
            })
        }
    }
}

struct QuadraticCombination<'k, P> {
    kernel: &'k DualSobolevKernel<P>,
    inv: Option<Arc<DMatrix<f64>>>,
    g: Vec<f64>,
    /// `A⁻¹ g`.
    u: Vec<f64>,
}

impl<P: KernelPoint> QuadraticCombination<'_, P> {
    fn inv(&mut self) -> Result<Arc<DMatrix<f64>>> {
        if self.inv.is_none() {
            self.inv = Some(self.kernel.inverse()?);
        }
        Ok(self.inv.clone().expect("set above"))
    }
}

impl<P: KernelPoint> Combination<P> for QuadraticCombination<'_, P> {
    fn push(&mut self, z: &P, t: f64) -> Result<()> {
        let e = self.kernel.evaluation(z)?;
        let inv = self.inv()?;
        for &(i, w) in &e {
            self.g[i] += t * w;
            let col = inv.column(i);
            for (u, a) in self.u.iter_mut().zip(col.iter()) {
                *u += t * w * a;
            }
        }
        Ok(())
    }

    fn norm(&mut self) -> Result<f64> {
        let q: f64 = self.g.iter().zip(&self.u).map(|(a, b)| a * b).sum();
        Ok(q.max(0.0).sqrt())
    }

    fn ray<'s>(&'s mut self, z: &P) -> Result<Box<dyn Ray + 's>> {
        let e = self.kernel.evaluation(z)?;
        let inv = self.inv()?;
        let q: f64 = self.g.iter().zip(&self.u).map(|(a, b)| a * b).sum();
        let b: f64 = e.iter().map(|&(i, w)| w * self.u[i]).sum();
        let mut kzz = 0.0;
        for &(i, wi) in &e {
            for &(j, wj) in &e {
                kzz += wi * wj * inv[(i, j)];
            }
        }
        Ok(Box::new(QuadraticRay { q, b, kzz }))
    }
}

struct QuadraticRay {
    q: f64,
    b: f64,
    kzz: f64,
}

impl Ray for QuadraticRay {
    fn eval(&mut self, a: f64) -> Result<f64> {
        Ok((self.q + 2.0 * a * self.b + a * a * self.kzz).max(0.0).sqrt())
    }
}

/// Keeps separate warm starts for the combination itself and for each
/// sign of the ray coefficient, since the root finder alternates between
/// the two sides.
struct SolverCombination<'k, P> {
    kernel: &'k DualSobolevKernel<P>,
    g: Vec<f64>,
    solvers: [DualSolver<'k>; 3],
}

impl<P: KernelPoint> Combination<P> for SolverCombination<'_, P> {
    fn push(&mut self, z: &P, t: f64) -> Result<()> {
        for (i, w) in self.kernel.evaluation(z)? {
            self.g[i] += t * w;
        }
        Ok(())
    }

    fn norm(&mut self) -> Result<f64> {
        self.solvers[0].solve(&self.g)
    }

    fn ray<'s>(&'s mut self, z: &P) -> Result<Box<dyn Ray + 's>> {
        let e = self.kernel.evaluation(z)?;
        Ok(Box::new(SolverRay {
            base: &self.g,
            e,
            buf: vec![0.0; self.g.len()],
            solvers: &mut self.solvers,
        }))
    }
}

struct SolverRay<'s, 'k> {
    base: &'s [f64],
    e: Vec<(usize, f64)>,
    buf: Vec<f64>,
    solvers: &'s mut [DualSolver<'k>; 3],
}

impl Ray for SolverRay<'_, '_> {
    fn eval(&mut self, a: f64) -> Result<f64> {
        self.buf.copy_from_slice(self.base);
        for &(i, w) in &self.e {
            self.buf[i] += a * w;
        }
        let side = if a < 0.0 { 1 } else { 2 };
        self.solvers[side].solve(&self.buf)
    }
}

/// `|v|^e`, with the common integer exponents done by multiplication.
#[inline]
fn pow_abs(v: f64, e: f64) -> f64 {
    if e == 2.0 {
        v * v
    } else if e == 4.0 {
        let s = v * v;
        s * s
    } else if e == 1.0 {
        v.abs()
    } else if e == 0.0 {
        1.0
    } else {
        v.abs().powf(e)
    }
}

/// `Σ_r d_r m_r m_rᵀ + reg·I`, dense.
fn assemble_hessian<D: Fn(usize) -> f64>(op: &NormOperator, d: D, reg: f64) -> DMatrix<f64> {
    let n = op.cols();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for r in 0..op.rows() {
        let dr = d(r);
        if dr == 0.0 {
            continue;
        }
        for (i, ci) in op.row(r) {
            for (j, cj) in op.row(r) {
                h[(i, j)] += dr * ci * cj;
            }
        }
    }
    for i in 0..n {
        h[(i, i)] += reg;
    }
    h
}

/// Damped Newton for `min ‖f‖^p/p − cᵀf`, warm-started from its previous
/// solution. Newton systems are solved by conjugate gradients preconditioned
/// with the last Hessian factorization, refactoring when that stalls.
struct DualSolver<'k> {
    op: &'k NormOperator,
    settings: SolverSettings,
    p: f64,
    q: f64,
    warm: Option<Vec<f64>>,
    factor: Option<Cholesky<f64, Dyn>>,
}

/// Inexact-Newton forcing term and iteration cap of the inner CG.
const PCG_FORCING: f64 = 1e-2;
const PCG_ITERS: usize = 20;

struct Bracket {
    lower: f64,
    upper: f64,
}

impl<'k> DualSolver<'k> {
    fn new(op: &'k NormOperator, settings: SolverSettings) -> Self {
        let p = op.p();
        Self {
            op,
            settings,
            p,
            q: p / (p - 1.0),
            warm: None,
            factor: None,
        }
    }

    fn norm_p(&self, y: &[f64]) -> f64 {
        self.op
            .weights()
            .iter()
            .zip(y)
            .map(|(w, v)| w * pow_abs(*v, self.p))
            .sum()
    }

    /// Rescales `f` to the minimizer of `F` along its ray; `None` when `cᵀf ≤ 0`.
    fn rescale(&self, f: &mut [f64], c: &[f64]) -> Option<()> {
        let y = self.op.apply(f);
        let np = self.norm_p(&y);
        let cf: f64 = c.iter().zip(f.iter()).map(|(a, b)| a * b).sum();
        if !(cf > 0.0 && np > 0.0) {
            return None;
        }
        let t = (cf / np).powf(1.0 / (self.p - 1.0));
        f.iter_mut().for_each(|v| *v *= t);
        Some(())
    }

    fn objective(&self, f: &[f64], c: &[f64]) -> f64 {
        let y = self.op.apply(f);
        let cf: f64 = c.iter().zip(f).map(|(a, b)| a * b).sum();
        self.norm_p(&y) / self.p - cf
    }

    /// Certified bracket at `f` and the gradient of `F` there.
    fn bracket(&self, f: &[f64], c: &[f64], y: &[f64]) -> (Bracket, Vec<f64>) {
        let w = self.op.weights();
        let p = self.p;
        let mut lambda: Vec<f64> = y
            .iter()
            .zip(w)
            .map(|(v, wr)| wr * pow_abs(*v, p - 2.0) * v)
            .collect();
        let mt = self.op.apply_transpose(&lambda);
        lambda.truncate(self.op.cols());
        let grad: Vec<f64> = mt.iter().zip(c).map(|(a, b)| a - b).collect();
        // Identity rows come first, one per grid node.
        for (l, g) in lambda.iter_mut().zip(&grad) {
            *l -= g;
        }
        // Rows past the identity block keep λ_r = w_r|y_r|^{p−2}y_r, whose
        // dual term |λ_r|^q w_r^{1−q} is exactly w_r|y_r|^p.
        let q = self.q;
        let g = self.op.cols();
        let head: f64 = lambda[..g]
            .iter()
            .zip(&w[..g])
            .map(|(l, wr)| l.abs().powf(q) * wr.powf(1.0 - q))
            .sum();
        let tail: f64 = y[g..]
            .iter()
            .zip(&w[g..])
            .map(|(v, wr)| wr * pow_abs(*v, p))
            .sum();
        let upper = (head + tail).powf(1.0 / q);
        let norm = self.norm_p(y).powf(1.0 / p);
        let cf: f64 = c.iter().zip(f).map(|(a, b)| a * b).sum();
        let lower = if norm > 0.0 { (cf / norm).max(0.0) } else { 0.0 };
        (Bracket { lower, upper }, grad)
    }

    fn curvature(&self, y: &[f64]) -> Vec<f64> {
        let p = self.p;
        self.op
            .weights()
            .iter()
            .zip(y)
            .map(|(w, v)| (p - 1.0) * w * pow_abs(*v, p - 2.0))
            .collect()
    }

    fn regularization(&self, d: &[f64]) -> f64 {
        let trace: f64 = (0..self.op.rows())
            .map(|r| d[r] * self.op.row(r).map(|(_, c)| c * c).sum::<f64>())
            .sum();
        1e-12 * trace / self.op.cols() as f64 + f64::MIN_POSITIVE
    }

    fn hess_vec(&self, d: &[f64], reg: f64, v: &[f64], out: &mut [f64]) {
        self.op.gram_apply(d, v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o += reg * x;
        }
    }

    /// Solves `H x = b` approximately; refactors `H` if preconditioned CG stalls.
    fn newton_direction(&mut self, d: &[f64], reg: f64, b: &[f64]) -> Result<Vec<f64>> {
        if let Some(x) = self.pcg(d, reg, b) {
            return Ok(x);
        }
        let h = assemble_hessian(self.op, |r| d[r], reg);
        let chol = Cholesky::new(h)
            .ok_or_else(|| Error::Factorization("Newton Hessian is not positive definite".into()))?;
        let x = chol.solve(&DVector::from_column_slice(b));
        self.factor = Some(chol);
        Ok(x.as_slice().to_vec())
    }

    fn pcg(&self, d: &[f64], reg: f64, b: &[f64]) -> Option<Vec<f64>> {
        let chol = self.factor.as_ref()?;
        let n = b.len();
        let precond = |r: &[f64], z: &mut DVector<f64>| {
            z.as_mut_slice().copy_from_slice(r);
            chol.solve_mut(z);
        };
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            return Some(vec![0.0; n]);
        }
        let mut z = DVector::zeros(n);
        precond(b, &mut z);
        let mut x = z.as_slice().to_vec();
        let mut hd = vec![0.0; n];
        self.hess_vec(d, reg, &x, &mut hd);
        let mut r: Vec<f64> = b.iter().zip(&hd).map(|(a, c)| a - c).collect();
        precond(&r, &mut z);
        let mut dir = z.as_slice().to_vec();
        let mut rz = dot(&r, z.as_slice());
        for _ in 0..PCG_ITERS {
            if dot(&r, &r).sqrt() <= PCG_FORCING * bnorm {
                return Some(x);
            }
            self.hess_vec(d, reg, &dir, &mut hd);
            let dhd = dot(&dir, &hd);
            if !(dhd > 0.0) {
                return None;
            }
            let alpha = rz / dhd;
            for i in 0..n {
                x[i] += alpha * dir[i];
                r[i] -= alpha * hd[i];
            }
            precond(&r, &mut z);
            let rz_new = dot(&r, z.as_slice());
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                dir[i] = z[i] + beta * dir[i];
            }
        }
        (dot(&r, &r).sqrt() <= PCG_FORCING * bnorm).then_some(x)
    }

    fn solve(&mut self, c: &[f64]) -> Result<f64> {
        if c.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let mut f = match &self.warm {
            Some(w) => w.clone(),
            None => c.to_vec(),
        };
        if self.rescale(&mut f, c).is_none() {
            f = c.to_vec();
            self.rescale(&mut f, c).ok_or_else(|| {
                Error::Search("dual-norm solver: functional vanishes on its own direction".into())
            })?;
        }
        let mut best = Bracket {
            lower: 0.0,
            upper: f64::INFINITY,
        };
        for _ in 0..self.settings.max_iter {
            let y = self.op.apply(&f);
            let (b, grad) = self.bracket(&f, c, &y);
            best.lower = best.lower.max(b.lower);
            best.upper = best.upper.min(b.upper);
            if best.upper - best.lower <= self.settings.tol * best.upper {
                self.warm = Some(f);
                return Ok(best.upper);
            }
            let d = self.curvature(&y);
            let reg = self.regularization(&d);
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let step = self.newton_direction(&d, reg, &neg)?;
            let slope: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
            let f0 = self.objective(&f, c);
            let mut alpha = 1.0;
            let mut trial = vec![0.0; f.len()];
            loop {
                for i in 0..f.len() {
                    trial[i] = f[i] + alpha * step[i];
                }
                if self.objective(&trial, c) <= f0 + 1e-4 * alpha * slope.min(0.0) || alpha < 1e-10 {
                    break;
                }
                alpha *= 0.5;
            }
            if alpha < 1e-10 {
                // The line search stalled; drop the stale preconditioner and retry once.
                if self.factor.take().is_some() {
                    continue;
                }
                break;
            }
            if self.rescale(&mut trial, c).is_some() {
                f = trial;
            } else {
                break;
            }
        }
        Err(Error::NoConvergence {
            iterations: self.settings.max_iter,
            lower: best.lower,
            upper: best.upper,
        })
    }
}
