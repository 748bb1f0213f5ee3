use bbk29_core::baselines::{
    averaging_rule, hoeffding_delta, hoeffding_epsilon, kalman_filter, kalman_gamma_recursion, kalman_steady_state,
    KalmanParams,
};
use bbk29_core::bbk29::{Predictor, PredictorConfig};
use bbk29_core::harness::fit_rate;
use bbk29_core::kernel::RkhsKernel;
use bbk29_core::signals::{gen_diffusion, gen_fbm, observe, Diffusion, NoiseKind, NoiseSpec, Path};
use proptest::prelude::*;

fn noise_kind() -> impl Strategy<Value = NoiseKind> {
    prop_oneof![Just(NoiseKind::Uniform), Just(NoiseKind::TruncatedGaussian)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observations_respect_label_bound(theta in prop::collection::vec(-3.0..3.0f64, 1..50), kind in noise_kind(),
                                        scale in 0.0..1.0f64, y in 0.1..2.0f64, seed in any::<u64>()) {
        let path = Path::new(theta.clone(), None).unwrap();
        let obs = observe(&path, &NoiseSpec::new(kind, scale).unwrap(), y, seed).unwrap();
        let ys = obs.y.as_ref().unwrap();
        prop_assert_eq!(ys.len(), theta.len());
        prop_assert!(ys.iter().all(|v| v.abs() <= y));
        let flagged: Vec<usize> = theta.iter().enumerate().filter(|(_, t)| t.abs() > y).map(|(i, _)| i).collect();
        prop_assert_eq!(&obs.flagged, &flagged);
        prop_assert_eq!(&obs.theta, &theta);
    }

    #[test]
    fn noise_stays_within_its_bound(kind in noise_kind(), scale in 0.0..2.0f64, seed in any::<u64>()) {
        let spec = NoiseSpec::new(kind, scale).unwrap();
        let mut rng = bbk29_core::signals::stream_rng(seed, 0);
        for _ in 0..200 {
            prop_assert!(spec.sample(&mut rng).abs() <= spec.bound() + 1e-15);
        }
    }

    #[test]
    fn kalman_converges_monotonically(c in 0.05..5.0f64, sigma2 in 0.05..5.0f64, n in 2usize..2000) {
        let params = KalmanParams::new(c, sigma2, n).unwrap();
        let g = kalman_gamma_recursion(&params).unwrap();
        let star = kalman_steady_state(c, sigma2, n).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert!(g.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-14)));
        prop_assert!(g.iter().all(|v| *v <= star * (1.0 + 1e-12)));
        prop_assert!((params.step(star) - star).abs() <= 1e-10 * (1.0 + star));
    }

    #[test]
    fn kalman_filter_gammas_follow_recursion(ys in prop::collection::vec(-1.0..1.0f64, 2..60)) {
        let params = KalmanParams::new(1.0, 0.5, ys.len()).unwrap();
        let track = kalman_filter(&ys, &params).unwrap();
        let g = kalman_gamma_recursion(&params).unwrap();
        prop_assert_eq!(track.estimates.len(), ys.len());
        for (a, b) in track.gammas.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn averaged_rule_has_no_more_risk(h in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 8), 1..12),
                                       d in prop::collection::vec(-1.0..1.0f64, 8)) {
        let risk = |f: &[f64]| f.iter().zip(&d).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d.len() as f64;
        let avg: Vec<f64> = (0..8)
            .map(|j| averaging_rule(&h.iter().map(|row| row[j]).collect::<Vec<_>>()).unwrap())
            .collect();
        let mean_risk = h.iter().map(|row| risk(row)).sum::<f64>() / h.len() as f64;
        prop_assert!(risk(&avg) <= mean_risk + 1e-12);
    }

    #[test]
    fn hoeffding_inverts(y in 0.1..3.0f64, delta in 1e-6..0.99f64, n in 1usize..100_000) {
        let eps = hoeffding_epsilon(y, delta, n).unwrap();
        let back = hoeffding_delta(y, eps, n);
        prop_assert!((back - delta).abs() <= 1e-12 * (1.0 + delta));
    }

    #[test]
    fn path_csv_round_trip(theta in prop::collection::vec(-1e3..1e3f64, 1..40), seed in any::<u64>()) {
        let obs = observe(&Path::new(theta, Some(seed)).unwrap(), &NoiseSpec::uniform(0.1).unwrap(), 2e3, seed).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let back = Path::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), obs.len());
        for (a, b) in back.theta.iter().zip(&obs.theta) {
            prop_assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fbm_is_reproducible(h in 0.1..0.9f64, n in 2usize..80, seed in any::<u64>()) {
        let a = gen_fbm(h, n, seed).unwrap();
        let b = gen_fbm(h, n, seed).unwrap();
        prop_assert_eq!(a.theta, b.theta);
        let d1 = gen_diffusion(&Diffusion::scaled_brownian(0.7), 0.1, n, seed).unwrap();
        let d2 = gen_diffusion(&Diffusion::scaled_brownian(0.7), 0.1, n, seed).unwrap();
        prop_assert_eq!(d1.theta, d2.theta);
    }
}

/// Slope of log mean squared increment against log lag.
fn increment_exponent(h: f64) -> f64 {
    let n = 128;
    let paths: Vec<Path> = (0..200).map(|s| gen_fbm(h, n, 1000 + s).unwrap()).collect();
    let series: Vec<(f64, f64)> = [1usize, 2, 4, 8, 16]
        .iter()
        .map(|&lag| {
            let mut acc = 0.0;
            let mut cnt = 0;
            for p in &paths {
                for i in 0..n - lag {
                    acc += (p.theta[i + lag] - p.theta[i]).powi(2);
                    cnt += 1;
                }
            }
            (lag as f64 / n as f64, acc / cnt as f64)
        })
        .collect();
    fit_rate(&series).unwrap().slope / 2.0
}

#[test]
fn fbm_holder_exponent_tracks_hurst_index() {
    let mut prev = 0.0;
    for h in [0.25, 0.5, 0.75] {
        let est = increment_exponent(h);
        assert!((est - h).abs() < 0.05, "h={h}: estimated {est}");
        assert!(est > prev);
        prev = est;
    }
}

/// Mean squared tracking error of BBK29 on noisy Brownian paths.
fn bbk29_tracking_error(n: usize) -> f64 {
    let kernel = RkhsKernel::sobolev_w12();
    let mut cfg = PredictorConfig::new(1.0, 2.0).unwrap();
    cfg.scan_points = 128;
    let mut total = 0.0;
    for seed in 0..4 {
        let path = gen_fbm(0.5, n, seed).unwrap().rescaled_to(0.7);
        let obs = observe(&path, &NoiseSpec::uniform(0.3).unwrap(), 1.0, seed + 100).unwrap();
        let ys = obs.y.unwrap();
        let mut pred = Predictor::new(&kernel, cfg.clone()).unwrap();
        for i in 0..n {
            let mu = pred.predict(&obs.times[i]).unwrap();
            total += (mu - obs.theta[i]).powi(2);
            pred.update(ys[i]).unwrap();
        }
    }
    total / (4 * n) as f64
}

#[test]
fn kalman_and_bbk29_errors_both_shrink_with_n() {
    let k_small = kalman_steady_state(1.0, 1.0, 64).unwrap();
    let k_large = kalman_steady_state(1.0, 1.0, 1024).unwrap();
    assert!(k_large < k_small);
    let e_small = bbk29_tracking_error(64);
    let e_large = bbk29_tracking_error(1024);
    assert!(e_large < e_small, "BBK29 error {e_small} at N=64, {e_large} at N=1024");
}
