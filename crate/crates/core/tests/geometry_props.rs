use bbk29_core::geometry::{
    clarkson_delta_bound, conjugate_rho_from_delta, estimate_delta, estimate_delta_dagger, estimate_rho,
    estimate_rho_dagger, estimate_rho_ddagger, hilbert_delta, hilbert_rho, lp_norm, power_delta_bound,
    FiniteNormedSpace, SearchBudget,
};
use proptest::prelude::*;

const SLACK: f64 = 2e-3;

fn budget() -> SearchBudget {
    SearchBudget::quick()
}

fn vec2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ellp_norm_axioms(p in 1.0..8.0f64, u in vec2(), v in vec2(), c in -4.0..4.0f64) {
        let sp = FiniteNormedSpace::ellp(p, 2).unwrap();
        let nu = sp.norm(&u);
        let nv = sp.norm(&v);
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        prop_assert!(sp.norm(&sum) <= nu + nv + 1e-12 * (1.0 + nu + nv));
        let scaled: Vec<f64> = u.iter().map(|a| c * a).collect();
        prop_assert!((sp.norm(&scaled) - c.abs() * nu).abs() <= 1e-12 * (1.0 + nu));
        prop_assert!(nu >= 0.0);
        prop_assert_eq!(sp.norm(&[0.0, 0.0]), 0.0);
        prop_assert!((nu - lp_norm(&u, p)).abs() <= 1e-12 * (1.0 + nu));
    }

    #[test]
    fn direct_sum_norm_axioms(a1 in 0.1..4.0f64, a2 in 0.1..4.0f64, u in prop::collection::vec(-3.0..3.0f64, 4),
                              v in prop::collection::vec(-3.0..3.0f64, 4)) {
        let s = FiniteNormedSpace::direct_sum(
            &FiniteNormedSpace::ellp(4.0 / 3.0, 2).unwrap(),
            &FiniteNormedSpace::euclidean(2).unwrap(),
            a1,
            a2,
        ).unwrap();
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        prop_assert!(s.norm(&sum) <= s.norm(&u) + s.norm(&v) + 1e-12);
        let want = (a1 * lp_norm(&u[..2], 4.0 / 3.0).powi(2) + a2 * lp_norm(&u[2..], 2.0).powi(2)).sqrt();
        prop_assert!((s.norm(&u) - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn conjugate_of_power_type(p in 2.0..6.0f64, tau in 0.05..1.0f64) {
        let q = p / (p - 1.0);
        let v = conjugate_rho_from_delta(|e| power_delta_bound(p, e), tau);
        prop_assert!((v - tau.powf(q) / q).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn delta_orderings(p in 1.3..6.0f64, eps in 0.1..2.0f64) {
        let sp = FiniteNormedSpace::ellp(p, 2).unwrap();
        let d = estimate_delta(&sp, eps, &budget()).unwrap().value;
        let dd = estimate_delta_dagger(&sp, eps, &budget()).unwrap().value;
        prop_assert!(d <= dd + SLACK, "delta {} > delta_dagger {}", d, dd);
        prop_assert!(dd <= 2.0 * d + SLACK, "delta_dagger {} > 2 delta {}", dd, d);
        prop_assert!(d <= hilbert_delta(eps) + SLACK);
        if p >= 2.0 {
            prop_assert!(d >= clarkson_delta_bound(p, eps).unwrap() - 1e-6);
        }
    }

    #[test]
    fn rho_orderings(p in 1.3..6.0f64, tau in 0.05..1.0f64) {
        let sp = FiniteNormedSpace::ellp(p, 2).unwrap();
        let r = estimate_rho(&sp, tau, &budget()).unwrap().value;
        let rd = estimate_rho_dagger(&sp, tau, &budget()).unwrap().value;
        let rdd = estimate_rho_ddagger(&sp, tau, &budget()).unwrap().value;
        prop_assert!(r >= hilbert_rho(tau) - SLACK);
        prop_assert!(rd <= r + SLACK);
        prop_assert!(rd <= tau / 2.0 + SLACK);
        prop_assert!(rdd >= rd - SLACK);
        prop_assert!(rdd <= 2.0 * rd + SLACK);
        let rhs = estimate_rho(&sp, tau / (2.0 * (1.0 - rd)), &budget()).unwrap().value;
        prop_assert!(rd / (1.0 - rd) <= rhs + SLACK);
    }

    #[test]
    fn euclidean_matches_closed_forms(eps in 0.1..2.0f64, tau in 0.05..1.5f64) {
        let e2 = FiniteNormedSpace::euclidean(2).unwrap();
        let d = estimate_delta(&e2, eps, &budget()).unwrap().value;
        prop_assert!((d - hilbert_delta(eps)).abs() <= 1e-4);
        let r = estimate_rho(&e2, tau, &budget()).unwrap().value;
        prop_assert!((r - hilbert_rho(tau)).abs() <= 1e-4);
    }
}

#[test]
fn custom_norm_matches_builtin() {
    let custom = FiniteNormedSpace::custom("max", 2, |v| v[0].abs().max(v[1].abs())).unwrap();
    let d = estimate_delta(&custom, 1.0, &budget()).unwrap().value;
    assert!(d.abs() <= 1e-6, "the sup-norm ball has flat faces, got {d}");
    assert!(FiniteNormedSpace::custom("line", 1, |v| v[0].abs()).is_err());
}
