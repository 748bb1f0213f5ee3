//! The fourteen acceptance criteria, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::fs;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use bbk29_core::baselines::{
    coverage_averaging, coverage_filtering, kalman_gamma_recursion, kalman_steady_state, CoverageSetup,
    KalmanParams,
};
use bbk29_core::bbk29::{run_and_report, Predictor, PredictorConfig};
use bbk29_core::harness::{
    fit_rate, run_experiment, verify_geometry_suite, ExperimentConfig, GeometrySuiteOptions, GeometrySuiteReport,
};
use bbk29_core::kernel::{BanachKernel, DualSobolevKernel, MappingKernel, RkhsKernel, SolverSettings};
use bbk29_core::signals::{observation_times, stream_rng, truncate, BenchmarkRule, FbmSampler};
use bbk29_core::spaces::{
    embedding_constant_estimate, norm_operator, sobolev_norm, GridDomain, GridFunction, SobolevParams,
};
use bbk29_core::Result;

type Verdict = Result<(bool, String)>;

/// Labels `0.7 sin 3x` plus uniform noise of width 0.3, clamped to `[−1, 1]`.
fn labelled(seed: u64, stream: u64, n: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, stream);
    (0..n)
        .map(|_| {
            let x = rng.random_range(lo..=hi);
            let y = 0.7 * (3.0 * x).sin() + rng.random_range(-0.3..=0.3);
            (x, truncate(y, 1.0))
        })
        .collect()
}

fn defect_runs(
    kernel: &dyn BanachKernel<f64>,
    p: f64,
    scan: usize,
    interval: (f64, f64),
    n: usize,
    streams: std::ops::Range<u64>,
) -> Result<(usize, usize)> {
    let mut cfg = PredictorConfig::new(1.0, p)?;
    cfg.scan_points = scan;
    let res: Vec<Result<usize>> = streams
        .into_par_iter()
        .map(|k| {
            let ex = labelled(101, k, n, interval.0, interval.1);
            let r = run_and_report(kernel, &cfg, &ex, &|_| Ok(0.0), 0.0, None)?;
            Ok(r.defect_violations)
        })
        .collect();
    let mut runs = 0;
    let mut viol = 0;
    for r in res {
        viol += r?;
        runs += 1;
    }
    Ok((runs, viol))
}

fn ac1() -> Verdict {
    let mut runs = 0;
    let mut viol = 0;
    let mut parts = Vec::new();
    let affine = MappingKernel::affine(2.0)?;
    let (r, v) = defect_runs(&affine, 2.0, 1024, (-1.0, 1.0), 1000, 0..45)?;
    parts.push(format!("mapping r=2: {r} runs"));
    runs += r;
    viol += v;
    let fourier = MappingKernel::fourier(vec![1.0, 0.5, 0.25], 4.0 / 3.0)?;
    let (r, v) = defect_runs(&fourier, 4.0, 1024, (0.0, 1.0), 1000, 100..145)?;
    parts.push(format!("mapping r=4/3: {r}"));
    runs += r;
    viol += v;
    let grid = Arc::new(GridDomain::unit_interval(256)?);
    let k2 = DualSobolevKernel::<f64>::new(grid.clone(), SobolevParams::new(0.6, 2.0)?, SolverSettings::default())?;
    let (r, v) = defect_runs(&k2, 2.0, 1024, (0.0, 1.0), 200, 200..208)?;
    parts.push(format!("dual Sobolev p=2: {r}"));
    runs += r;
    viol += v;
    let k4 = DualSobolevKernel::<f64>::new(grid, SobolevParams::new(0.6, 4.0)?, SolverSettings::default())?;
    let (r, v) = defect_runs(&k4, 4.0, 16, (0.0, 1.0), 200, 300..302)?;
    parts.push(format!("dual Sobolev p=4: {r}"));
    runs += r;
    viol += v;
    Ok((runs >= 100 && viol == 0, format!("{runs} runs ({}), {viol} prefix violations", parts.join(", "))))
}

fn sweep_config(kernel: &str, benchmark: &str, sweep: &str, seeds: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&format!(
        r#"{{"predictor":{{"y_bound":1.0}},"kernel":{kernel},"benchmark":{benchmark},"sweep":{sweep},"seeds":{seeds}}}"#
    ))
}

fn ac2() -> Verdict {
    let kernel = r#"{"kind":"dual_sobolev","s":0.6,"p":2.0,"grid":128}"#;
    let benches = [
        r#"{"rule":"sin","scale":0.6}"#,
        r#"{"rule":"vee"}"#,
        r#"{"rule":"fbm","h":0.6,"seed":11,"amplitude":0.8}"#,
    ];
    let mut points = 0;
    let mut bad = 0;
    let mut ratio: f64 = 0.0;
    for b in benches {
        let res = run_experiment(&sweep_config(kernel, b, "[50, 100, 200]", "[0, 1, 2]")?)?;
        for p in &res.points {
            points += 1;
            if p.error.is_some() || p.regret_violations > 0 || !p.bound_satisfied {
                bad += 1;
            }
        }
        ratio = ratio.max(res.max_bound_ratio);
    }
    Ok((bad == 0, format!("{points} sweep points over sin, vee, fbm; {bad} with violations; max ratio {ratio:.4}")))
}

fn ac3() -> Verdict {
    let grid = Arc::new(GridDomain::unit_interval(64)?);
    let kernels: Vec<(Box<dyn BanachKernel<f64>>, f64, (f64, f64))> = vec![
        (Box::new(MappingKernel::affine(2.0)?), 2.0, (-1.0, 1.0)),
        (Box::new(MappingKernel::fourier(vec![1.0, 0.5], 4.0 / 3.0)?), 4.0, (0.0, 1.0)),
        (Box::new(RkhsKernel::sobolev_w12()), 2.0, (0.0, 1.0)),
        (Box::new(RkhsKernel::gaussian(0.2)?), 2.0, (0.0, 1.0)),
        (
            Box::new(DualSobolevKernel::new(grid, SobolevParams::new(0.6, 2.0)?, SolverSettings::default())?),
            2.0,
            (0.0, 1.0),
        ),
    ];
    let mut rng = stream_rng(3, 0);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (k, p, (lo, hi)) in &kernels {
        for _ in 0..10 {
            let x = rng.random_range(*lo..=*hi);
            if k.seminorm(&[x], &[1.0])? <= 0.0 {
                continue;
            }
            let mut pred = Predictor::new(k.as_ref(), PredictorConfig::new(1.0, *p)?)?;
            worst = worst.max(pred.predict(&x)?.abs());
            cases += 1;
        }
    }
    Ok((worst <= 1e-9, format!("{cases} first rounds, max |mu_1| = {worst:.2e}")))
}

fn ac4() -> Verdict {
    let params = KalmanParams::new(1.0, 1.0, 100)?;
    let g = kalman_gamma_recursion(&params)?;
    let last = *g.last().unwrap_or(&f64::NAN);
    let star = kalman_steady_state(1.0, 1.0, 100)?;
    let fixed = (params.step(star) - star).abs();
    let ok = (last - 0.1).abs() <= 0.01 && fixed <= 1e-10;
    Ok((ok, format!("gamma_100 = {last:.6}, steady state {star:.6}, fixed-point residual {fixed:.1e}")))
}

fn ac5() -> Verdict {
    let grid = Arc::new(GridDomain::unit_interval(512)?);
    let f = GridFunction::from_fn(grid, |x| x[0])?;
    let v = sobolev_norm(&f, &SobolevParams::new(0.5, 2.0)?)?;
    let want = (4.0f64 / 3.0).sqrt();
    Ok(((v - want).abs() <= 1e-3, format!("norm {v:.6} vs sqrt(4/3) = {want:.6}")))
}

fn ac6() -> Verdict {
    let grid = Arc::new(GridDomain::unit_interval(512)?);
    let c = embedding_constant_estimate(&SobolevParams::new(1.0, 2.0)?, grid)?;
    let coth = 1f64.cosh() / 1f64.sinh();
    Ok(((c * c - coth).abs() <= 1e-2, format!("c^2 = {:.6} vs coth 1 = {coth:.6}", c * c)))
}

fn suite_groups(rep: &GeometrySuiteReport, groups: &[&str], filter: impl Fn(&str) -> bool) -> (bool, String) {
    let sel: Vec<_> = rep
        .checks
        .iter()
        .filter(|c| groups.contains(&c.group.as_str()) && filter(&c.name))
        .collect();
    let failed: Vec<_> = sel.iter().filter(|c| !c.passed).collect();
    let mut msg = format!("{} checks, {} failed", sel.len(), failed.len());
    if let Some(f) = failed.first() {
        msg.push_str(&format!("; first: {} {} ({} vs {})", f.group, f.name, f.lhs, f.rhs));
    }
    (!sel.is_empty() && failed.is_empty(), msg)
}

fn ac11() -> Verdict {
    let mut rng = stream_rng(11, 0);
    let grid = Arc::new(GridDomain::unit_interval(48)?);
    let params = SobolevParams::new(0.7, 2.0)?;
    let kernel = DualSobolevKernel::<f64>::new(grid.clone(), params, SolverSettings::default())?;
    let op = norm_operator(&grid, &params)?;
    let g = grid.len();
    // Assemble the quadratic form of the squared norm and check it on a random function.
    let mut a = DMatrix::<f64>::zeros(g, g);
    let w = op.weights();
    for r in 0..op.rows() {
        let row: Vec<(usize, f64)> = op.row(r).collect();
        for &(i, vi) in &row {
            for &(j, vj) in &row {
                a[(i, j)] += w[r] * vi * vj;
            }
        }
    }
    let f: Vec<f64> = (0..g).map(|_| rng.random_range(-1.0..1.0)).collect();
    let quad = DVector::from_vec(f.clone()).dot(&(&a * DVector::from_vec(f.clone())));
    let direct = sobolev_norm(&GridFunction::new(grid.clone(), f)?, &params)?;
    if (quad.sqrt() - direct).abs() > 1e-9 * direct {
        return Ok((false, format!("quadratic form {} disagrees with quadrature {direct}", quad.sqrt())));
    }
    let ainv = a.lu().try_inverse().ok_or_else(|| bbk29_core::Error::Search("singular form".into()))?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(1..=6usize);
        let mut pts: Vec<f64> = Vec::new();
        while pts.len() < m {
            let x = rng.random_range(0.0..=1.0);
            if !pts.contains(&x) {
                pts.push(x);
            }
        }
        let t: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let reps: Vec<DVector<f64>> = pts
            .iter()
            .map(|x| {
                let mut e = DVector::zeros(g);
                for (i, wt) in grid.interpolation(&[*x])? {
                    e[i] += wt;
                }
                Ok(e)
            })
            .collect::<Result<_>>()?;
        let gram = DMatrix::from_fn(m, m, |i, j| reps[i].dot(&(&ainv * &reps[j])));
        let tv = DVector::from_vec(t.clone());
        let oracle = tv.dot(&(&gram * &tv)).max(0.0).sqrt();
        let got = kernel.seminorm(&pts, &t)?;
        worst = worst.max((got - oracle).abs() / oracle.max(1e-300));
    }
    Ok((worst <= 1e-4, format!("50 random sets, max relative gap {worst:.2e}")))
}

fn ac12() -> Verdict {
    let times = observation_times(16);
    let paths = 10_000;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (idx, h) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let sampler = FbmSampler::new(h, &times)?;
        let mut rng = stream_rng(12, idx as u64);
        let samples: Vec<Vec<f64>> = (0..paths).map(|_| sampler.sample(&mut rng)).collect();
        for lag in [1usize, 2, 4, 8] {
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for s in &samples {
                for i in 0..times.len() - lag {
                    acc += (s[i + lag] - s[i]).powi(2);
                    cnt += 1;
                }
            }
            let emp = acc / cnt as f64;
            let want = (times[lag] - times[0]).powf(2.0 * h);
            worst = worst.max((emp / want - 1.0).abs());
            checked += 1;
        }
        let emp0 = samples.iter().map(|s| s[15].powi(2)).sum::<f64>() / paths as f64;
        worst = worst.max((emp0 - 1.0).abs());
        checked += 1;
    }
    Ok((worst <= 0.05, format!("{checked} lag variances over 10^4 paths, max relative error {:.2}%", 100.0 * worst)))
}

fn ac13() -> Verdict {
    let setup = CoverageSetup::default();
    let bench = BenchmarkRule::custom("0.5 sin 2 pi x", |x| 0.5 * (2.0 * PI * x).sin());
    let avg = coverage_averaging(&setup, &bench)?;
    let filt = coverage_filtering(&setup)?;
    let ok = avg.runs.len() == 500 && filt.runs.len() == 500 && avg.passed && filt.passed;
    Ok((
        ok,
        format!(
            "R=500, delta=0.05: averaging {} violations, filtering {} violations (allowed rate {:.4})",
            avg.violations, filt.violations, avg.allowed_rate
        ),
    ))
}

fn ac14() -> Verdict {
    let sweep = "[128, 256, 512, 1024, 2048]";
    let sob = run_experiment(&sweep_config(
        r#"{"kind":"dual_sobolev","s":0.6,"p":2.0,"grid":64}"#,
        r#"{"rule":"sin","scale":0.5}"#,
        sweep,
        "[0]",
    )?)?;

    // An affine benchmark on [−1, 1]; its norm in the affine mapping space is ‖(a, b)‖_p.
    let (a, b, p) = (0.5, 0.25, 4.0);
    let dir = tempfile::tempdir()?;
    let csv = dir.path().join("affine.csv");
    let nodes = 65;
    let mut text = String::from("x,value\n");
    for i in 0..nodes {
        let x = -1.0 + 2.0 * i as f64 / (nodes - 1) as f64;
        text.push_str(&format!("{x},{}\n", a * x + b));
    }
    fs::write(&csv, text)?;
    let norm = (a.powf(p) + b.powf(p)).powf(1.0 / p);
    let bench = format!(
        r#"{{"rule":"samples","path":{},"norm":{norm}}}"#,
        serde_json::to_string(&csv.to_string_lossy())?
    );
    let map = run_experiment(&sweep_config(r#"{"kind":"mapping_affine","r":1.3333333333333333}"#, &bench, sweep, "[0]")?)?;

    let mut msgs = Vec::new();
    let mut ok = true;
    for (res, p) in [(&sob, 2.0), (&map, 4.0)] {
        let series: Vec<(f64, f64)> = res.points.iter().map(|pt| (pt.n as f64, pt.bound)).collect();
        let slope = fit_rate(&series)?.slope;
        let ratios_ok = res.points.iter().all(|pt| pt.error.is_none() && pt.bound_ratio <= 1.0);
        ok &= ratios_ok && (slope + 1.0 / p).abs() <= 1e-6;
        msgs.push(format!("p={p}: slope {slope:.9}, max ratio {:.4}", res.max_bound_ratio));
    }
    Ok((ok, msgs.join("; ")))
}

fn main() {
    let suite_opts = GeometrySuiteOptions::default();
    let mut suite: Option<GeometrySuiteReport> = None;
    let mut geometry = |groups: &'static [&'static str], filter: fn(&str) -> bool| -> Verdict {
        let rep = suite.get_or_insert_with(|| verify_geometry_suite(&suite_opts));
        Ok(suite_groups(rep, groups, filter))
    };

    let mut results: Vec<(usize, &str, Verdict, f64)> = Vec::new();
    let mut record = |id: usize, title: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        let line = match &v {
            Ok((true, d)) => format!("AC{id:02} PASS {title}: {d} [{secs:.1}s]"),
            Ok((false, d)) => format!("AC{id:02} FAIL {title}: {d} [{secs:.1}s]"),
            Err(e) => format!("AC{id:02} FAIL {title}: error {e} [{secs:.1}s]"),
        };
        println!("{line}");
        results.push((id, title, v, secs));
    };

    record(1, "defect bound", &mut ac1);
    record(2, "regret bound", &mut ac2);
    record(3, "first-round symmetry", &mut ac3);
    record(4, "Kalman variance trace", &mut ac4);
    record(5, "Sobolev quadrature", &mut ac5);
    record(6, "embedding constant", &mut ac6);
    record(7, "Hilbert moduli", &mut || geometry(&["hilbert"], |_| true));
    record(8, "Clarkson lower bound", &mut || geometry(&["clarkson"], |n| n.ends_with("lower")));
    record(9, "inequality suite", &mut || {
        geometry(&["ordering", "nordlander", "monotone", "lemma1", "lemma3"], |_| true)
    });
    record(10, "conjugacy", &mut || geometry(&["conjugacy"], |n| n.starts_with("p=")));
    record(11, "dual-norm cross-check", &mut ac11);
    record(12, "fBm increment variance", &mut ac12);
    record(13, "coverage", &mut ac13);
    record(14, "rate sanity", &mut ac14);

    let failed = results.iter().filter(|r| !matches!(r.2, Ok((true, _)))).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
