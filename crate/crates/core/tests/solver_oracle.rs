//! IRLS against a brute-force global minimizer, plus solver invariants.

mod common;

use lp_recovery::bounds::PExponent;
use lp_recovery::solver::*;
use proptest::prelude::*;

fn p(v: f64) -> PExponent {
    PExponent::new(v).unwrap()
}

#[test]
fn matches_brute_force_on_small_noiseless_instances() {
    let pv = p(0.5);
    let (mut matched, mut honest) = (0, 0);
    for seed in 0..200 {
        let inst = make_instance(6, 10, 2, 0.0, seed, Ensemble::Gaussian).unwrap();
        let out = irls_recover(&inst.problem, pv, &IrlsOptions::default(), Some(&inst.x_ref)).unwrap();
        let oracle = common::brute_force_noiseless(&inst.problem, pv);
        if common::max_abs_diff(&out.x_hat, oracle.as_slice()) < 1e-6 {
            matched += 1;
        }
        let x_hat = out.x_hat_vector();
        let feasible = inst.problem.residual_norm(&x_hat) <= 1e-8 * inst.problem.y.norm();
        let dominates = lp_norm_pth_power(&out.x_hat, pv)
            <= lp_norm_pth_power(inst.x_ref.as_slice(), pv) * (1.0 + DOMINANCE_RTOL);
        if out.feasible == feasible && out.objective_dominates_reference == Some(dominates) {
            honest += 1;
        }
    }
    assert!(matched >= 180, "matched {matched}/200");
    assert_eq!(honest, 200);
}

#[test]
fn noisy_budget_is_respected() {
    for seed in 0..40 {
        let eps = 0.02 + 0.01 * (seed % 5) as f64;
        let inst = make_instance(8, 16, 2, eps, seed, Ensemble::Gaussian).unwrap();
        let out = irls_recover(&inst.problem, p(0.4), &IrlsOptions::default(), Some(&inst.x_ref)).unwrap();
        assert!(out.feasible, "seed {seed}: residual {} > {eps}", out.residual);
        assert!(out.residual <= eps * (1.0 + FEASIBILITY_RTOL));
    }
}

#[test]
fn smoothed_objective_never_increases_within_a_level() {
    let opts = IrlsOptions {
        record_trace: true,
        polish: false,
        ..IrlsOptions::default()
    };
    for (seed, eps) in [(1, 0.0), (2, 0.05), (3, 0.0), (4, 0.1)] {
        let inst = make_instance(7, 14, 2, eps, seed, Ensemble::Bernoulli).unwrap();
        let out = irls_recover(&inst.problem, p(0.3), &opts, None).unwrap();
        assert!(out.trace.len() > 1);
        for w in out.trace.windows(2) {
            if w[0].sigma == w[1].sigma && w[0].lambda == w[1].lambda {
                assert!(w[1].objective <= w[0].objective * (1.0 + 1e-9), "{w:?}");
            }
        }
    }
}

#[test]
fn bernoulli_entries_are_normalized_signs() {
    let inst = make_instance(9, 12, 3, 0.0, 4, Ensemble::Bernoulli).unwrap();
    let scale = 1.0 / 3.0;
    assert!(inst
        .problem
        .a
        .matrix()
        .iter()
        .all(|v| (v.abs() - scale).abs() < 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_equivariant(seed in 0u64..5000, c in prop_oneof![-50.0f64..-0.02, 0.02f64..50.0], noisy in any::<bool>()) {
        let eps = if noisy { 0.05 } else { 0.0 };
        let inst = make_instance(6, 12, 2, eps, seed, Ensemble::Gaussian).unwrap();
        let base = irls_recover(&inst.problem, p(0.5), &IrlsOptions::default(), None).unwrap();
        let scaled_prob = SensingProblem::new(
            inst.problem.a.clone(),
            &inst.problem.y * c,
            eps * c.abs(),
            2,
        ).unwrap();
        let scaled = irls_recover(&scaled_prob, p(0.5), &IrlsOptions::default(), None).unwrap();
        let size = base.x_hat.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in base.x_hat.iter().zip(&scaled.x_hat) {
            prop_assert!((c * a - b).abs() <= 1e-6 * size * c.abs());
        }
    }

    #[test]
    fn noise_lies_on_sphere(seed in 0u64..10_000, eps in 1e-6f64..10.0, m in 1usize..20) {
        let inst = make_instance(m, m + 3, 1, eps, seed, Ensemble::Gaussian).unwrap();
        prop_assert!((inst.noise.norm() - eps).abs() <= 1e-12 * eps.max(1.0));
        let y = inst.problem.a.matrix() * &inst.x_ref + &inst.noise;
        prop_assert_eq!(&inst.problem.y, &y);
    }

    #[test]
    fn feasibility_flag_matches_definition(seed in 0u64..5000, eps in 0.0f64..0.3) {
        let inst = make_instance(5, 9, 2, eps, seed, Ensemble::Gaussian).unwrap();
        let out = irls_recover(&inst.problem, p(0.7), &IrlsOptions::default(), None).unwrap();
        prop_assert_eq!(out.feasible, out.residual <= inst.problem.feasibility_tolerance());
        prop_assert!((lp_norm_pth_power(&out.x_hat, p(0.7)) - out.objective_p).abs() <= 1e-12 * out.objective_p.max(1.0));
    }

    #[test]
    fn lp_norm_relations(v in proptest::collection::vec(-10.0f64..10.0, 1..20), pv in 0.05f64..=1.0) {
        let n = lp_norm(&v, p(pv));
        let s = lp_norm_pth_power(&v, p(pv));
        prop_assert!((n.powf(pv) - s).abs() <= 1e-9 * s.max(1e-300));
        // The quasi-norm dominates the l1 norm for p <= 1.
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        prop_assert!(l1 <= n * (1.0 + 1e-12) + 1e-300);
    }
}
