use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    check_direct_sum_smoothness, clarkson_delta_bound, conjugate_rho_from_delta, estimate_delta,
    estimate_delta_dagger, estimate_rho, estimate_rho_dagger, estimate_rho_ddagger, hilbert_delta,
    hilbert_rho, power_delta_bound, FiniteNormedSpace, SearchBudget,
};
use crate::error::Result;
use crate::kernel::{DualSobolevKernel, SolverSettings};
use crate::signals::stream_rng;
use crate::spaces::{sobolev_norm, GridDomain, GridFunction, SobolevParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySuiteOptions {
    pub budget: SearchBudget,
    pub eps_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    /// Exponents of the two-dimensional ℓ^p spaces under test.
    pub ellp: Vec<f64>,
    pub slack: f64,
    /// Grid of the Sobolev checks; 0 skips them.
    pub sobolev_grid: usize,
    pub seed: u64,
}

impl Default for GeometrySuiteOptions {
    fn default() -> Self {
        Self {
            budget: SearchBudget::default(),
            eps_grid: vec![0.25, 0.5, 1.0, 1.5, 2.0],
            tau_grid: vec![0.1, 0.25, 0.5, 1.0],
            ellp: vec![2.0, 3.0, 4.0],
            slack: 1e-4,
            sobolev_grid: 512,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub group: String,
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySuiteReport {
    pub options: GeometrySuiteOptions,
    pub checks: Vec<SuiteCheck>,
}

impl GeometrySuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn group_passed(&self, group: &str) -> bool {
        self.checks.iter().filter(|c| c.group == group).all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SuiteCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Collector {
    checks: Vec<SuiteCheck>,
}

impl Collector {
    /// Records `lhs ≤ rhs`.
    fn le(&mut self, group: &str, name: String, lhs: f64, rhs: f64) {
        self.checks.push(SuiteCheck {
            group: group.into(),
            name,
            lhs,
            rhs,
            passed: lhs <= rhs,
            error: None,
        });
    }

    /// Records `|lhs − rhs| ≤ tol`.
    fn close(&mut self, group: &str, name: String, lhs: f64, rhs: f64, tol: f64) {
        self.checks.push(SuiteCheck {
            group: group.into(),
            name,
            lhs,
            rhs,
            passed: (lhs - rhs).abs() <= tol,
            error: None,
        });
    }

    fn run(&mut self, group: &str, name: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.checks.push(SuiteCheck {
                group: group.into(),
                name: name.into(),
                lhs: f64::NAN,
                rhs: f64::NAN,
                passed: false,
                error: Some(e.to_string()),
            });
        }
    }
}

/// Runs the modulus, conjugacy and Sobolev-space checks; failures and
/// errors are collected in the report, never raised.
pub fn verify_geometry_suite(opts: &GeometrySuiteOptions) -> GeometrySuiteReport {
    let mut c = Collector { checks: Vec::new() };
    let b = &opts.budget;
    let sl = opts.slack;

    c.run("hilbert", "closed forms", |c| {
        let e2 = FiniteNormedSpace::euclidean(2)?;
        for &eps in &opts.eps_grid {
            let v = estimate_delta(&e2, eps, b)?.value;
            c.close("hilbert", format!("delta({eps})"), v, hilbert_delta(eps), sl);
        }
        for &tau in &opts.tau_grid {
            let v = estimate_rho(&e2, tau, b)?.value;
            c.close("hilbert", format!("rho({tau})"), v, hilbert_rho(tau), sl);
        }
        Ok(())
    });

    c.run("clarkson", "ell^p bound", |c| {
        for &p in &opts.ellp {
            let sp = FiniteNormedSpace::ellp(p, 2)?;
            for &eps in &opts.eps_grid {
                let v = estimate_delta(&sp, eps, b)?.value;
                let lb = clarkson_delta_bound(p, eps)?;
                c.le("clarkson", format!("p={p} eps={eps} lower"), lb - 1e-6, v);
                c.le("clarkson", format!("p={p} eps={eps} sharp"), v, lb + sl);
            }
        }
        Ok(())
    });

    let mut spaces = Vec::new();
    for &p in &opts.ellp {
        if let Ok(sp) = FiniteNormedSpace::ellp(p, 2) {
            spaces.push(sp);
        }
    }
    if let Ok(sp) = FiniteNormedSpace::ellp(1.5, 2) {
        spaces.push(sp);
    }

    for sp in &spaces {
        let label = sp.label().to_string();
        c.run("ordering", &label, |c| {
            for &eps in &opts.eps_grid {
                let d = estimate_delta(sp, eps, b)?.value;
                let dd = estimate_delta_dagger(sp, eps, b)?.value;
                c.le("ordering", format!("{label} delta<=delta_dagger eps={eps}"), d, dd + sl);
                c.le("ordering", format!("{label} delta_dagger<=2delta eps={eps}"), dd, 2.0 * d + sl);
                c.le("nordlander", format!("{label} delta eps={eps}"), d, hilbert_delta(eps) + sl);
            }
            let mut prev = 0.0;
            for &tau in &opts.tau_grid {
                let r = estimate_rho(sp, tau, b)?.value;
                let rd = estimate_rho_dagger(sp, tau, b)?.value;
                let rdd = estimate_rho_ddagger(sp, tau, b)?.value;
                c.le("nordlander", format!("{label} rho tau={tau}"), hilbert_rho(tau) - sl, r);
                c.le("ordering", format!("{label} rho_dagger<=rho tau={tau}"), rd, r + sl);
                c.le("ordering", format!("{label} rho_ddagger<=2rho_dagger tau={tau}"), rdd, 2.0 * rd + sl);
                c.le("monotone", format!("{label} rho nondecreasing at tau={tau}"), prev, r + sl);
                prev = r;
                let arg = tau / (2.0 * (1.0 - rd));
                let rhs = estimate_rho(sp, arg, b)?.value;
                c.le("lemma1", format!("{label} tau={tau}"), rd / (1.0 - rd), rhs + sl);
            }
            Ok(())
        });
    }

    c.run("lemma3", "direct sum", |c| {
        let q = 4.0 / 3.0;
        let u1 = FiniteNormedSpace::ellp(q, 2)?;
        let u2 = FiniteNormedSpace::euclidean(2)?;
        let taus: Vec<f64> = opts.tau_grid.iter().copied().filter(|t| *t <= 1.0).collect();
        let rep = check_direct_sum_smoothness(&u1, &u2, 1.0, 1.0, |t| t.powf(q) / q, &taus, b, sl)?;
        for pt in &rep.points {
            c.le("lemma3", format!("tau={} premise", pt.tau), pt.rho_u1.max(pt.rho_u2), pt.f + sl);
            c.le("lemma3", format!("tau={}", pt.tau), pt.rho_sum, pt.bound + sl);
        }
        Ok(())
    });

    c.run("conjugacy", "power type", |c| {
        for p in [2.0, 3.0, 4.0] {
            let q = p / (p - 1.0);
            for tau in [0.1, 0.5, 1.0] {
                let v = conjugate_rho_from_delta(|e| power_delta_bound(p, e), tau);
                c.close("conjugacy", format!("p={p} tau={tau}"), v, tau.powf(q) / q, 1e-8);
            }
        }
        c.close("conjugacy", "power bound p=2 eps=1".into(), power_delta_bound(2.0, 1.0), 0.125, 1e-15);
        Ok(())
    });

    if opts.sobolev_grid >= 2 {
        let g = opts.sobolev_grid;
        c.run("sobolev", "quadrature", |c| {
            let grid = Arc::new(GridDomain::unit_interval(g)?);
            let f = GridFunction::from_fn(grid, |x| x[0])?;
            let v = sobolev_norm(&f, &SobolevParams::new(0.5, 2.0)?)?;
            c.close("sobolev", format!("x, s=1/2, p=2, grid {g}"), v, (4.0f64 / 3.0).sqrt(), 1e-3);
            Ok(())
        });
        c.run("sobolev", "embedding", |c| {
            let grid = Arc::new(GridDomain::unit_interval(g)?);
            let k = DualSobolevKernel::<f64>::new(grid, SobolevParams::new(1.0, 2.0)?, SolverSettings::default())?;
            let e = k.embedding_constant()?;
            let coth = 1f64.cosh() / 1f64.sinh();
            c.close("sobolev", format!("c^2 s=1 p=2 grid {g}"), e * e, coth, 1e-2);
            Ok(())
        });
        c.run("sobolev", "uniform convexity", |c| {
            let grid = Arc::new(GridDomain::unit_interval(64)?);
            let mut rng = stream_rng(opts.seed, 0);
            for p in [2.0, 4.0] {
                let params = SobolevParams::new(0.6, p)?;
                for k in 0..5 {
                    let mut draw = || -> Result<GridFunction> {
                        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                        let f = GridFunction::new(grid.clone(), vals)?;
                        let n = sobolev_norm(&f, &params)?;
                        Ok(f.scaled(1.0 / n))
                    };
                    let f = draw()?;
                    let g = draw()?;
                    let diff: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| a - b).collect();
                    let mid: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| (a + b) / 2.0).collect();
                    let eps = sobolev_norm(&GridFunction::new(grid.clone(), diff)?, &params)?;
                    let m = sobolev_norm(&GridFunction::new(grid.clone(), mid)?, &params)?;
                    let eps = eps.min(2.0);
                    c.le("sobolev", format!("convexity p={p} pair {k}"), power_delta_bound(p, eps) - 1e-9, 1.0 - m);
                }
            }
            Ok(())
        });
    }

    GeometrySuiteReport {
        options: opts.clone(),
        checks: c.checks,
    }
}
