use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use congested_flow::battery::{run_battery, BatteryOptions};
use congested_flow::cone::SpacingCone;
use congested_flow::dynamics::evolve;
use congested_flow::eulerian::TestFunction;
use congested_flow::fields::{build_fields, field_distance, DeltaPadding, FieldTrace, Norm, PiecewiseField};
use congested_flow::initdata::quantile_sample;
use congested_flow::scenarios::{
    check_manifest, first_order_contraction_test, macroscopic_projection, named_scenario, random_admissible,
    rebound_solution, rigid_cluster_perturbation, sticky_solution, SCENARIO_NAMES,
};

fn trace_of(x: &[f64], u: &[f64], horizon: f64) -> FieldTrace {
    let cone = SpacingCone::canonical(x.len()).unwrap();
    let tl = evolve(x, u, &cone, horizon).unwrap();
    build_fields(&tl, DeltaPadding::default()).unwrap()
}

#[test]
fn named_scenarios_pass_battery_and_manifest() {
    for name in SCENARIO_NAMES {
        let s = named_scenario(name, None).unwrap();
        for n in [10, 48] {
            let (x, u) = quantile_sample(&s.datum, n).unwrap();
            let tr = trace_of(&x, &u, s.horizon);
            let report = run_battery(&tr, &BatteryOptions::uniform(s.horizon, 17)).unwrap();
            let failed: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
            assert!(failed.is_empty(), "{name} n={n}: {failed:?}");
            assert_eq!(report.get("cone_oracle").is_some(), n <= 12);
            for c in check_manifest(&s, tr.timeline()) {
                assert!(c.passed, "{name} n={n}: {c:?}");
            }
        }
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let mut a = ChaCha8Rng::seed_from_u64(17);
    let mut b = ChaCha8Rng::seed_from_u64(17);
    let (xa, ua) = random_admissible(300, &mut a);
    let (xb, ub) = random_admissible(300, &mut b);
    assert_eq!((&xa, &ua), (&xb, &ub));
    let ta = trace_of(&xa, &ua, 2.0);
    let tb = trace_of(&xb, &ub, 2.0);
    assert_eq!(ta.timeline().events(), tb.timeline().events());
    assert_eq!(ta.snapshot(1.3).unwrap(), tb.snapshot(1.3).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_runs_pass_battery(seed in any::<u64>(), n in 2usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, u) = random_admissible(n, &mut rng);
        let tr = trace_of(&x, &u, 2.0);
        let opts = BatteryOptions { seed, ..BatteryOptions::uniform(2.0, 9) };
        let report = run_battery(&tr, &opts).unwrap();
        let failed: Vec<_> = report.failures().map(|c| (c.name.clone(), c.value)).collect();
        prop_assert!(failed.is_empty(), "{:?}", failed);
    }

    #[test]
    fn velocity_is_the_cluster_mean_projection(seed in any::<u64>(), n in 2usize..120, t in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, u) = random_admissible(n, &mut rng);
        let tr = trace_of(&x, &u, 2.0);
        let snap = tr.snapshot(t).unwrap();
        let p = macroscopic_projection(&snap.x_tilde(), &PiecewiseField::constant_cells(&u)).unwrap();
        prop_assert!(field_distance(&p, &snap.u_step(), Norm::Linf) <= 1e-12);
    }

    #[test]
    fn perturbed_runs_contract(seed in any::<u64>(), n in 2usize..120, amp in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, u) = random_admissible(n, &mut rng);
        let cone = SpacingCone::canonical(n).unwrap();
        let y = rigid_cluster_perturbation(&x, &cone, amp, &mut rng).unwrap();
        let r = first_order_contraction_test(&x, &u, &y, &cone, 2.0, 41).unwrap();
        prop_assert!(r.passed, "increase {}", r.max_increase);
    }

    #[test]
    fn analytic_branches_are_weak_solutions(
        eta in 0.05f64..0.95,
        ct in 0.0f64..1.0,
        ht in 0.05f64..0.8,
        cx in -0.2f64..1.8,
        hx in 0.05f64..1.0,
        k in 0u32..2,
    ) {
        let phi = TestFunction::new(ct, ht, cx, hx, k);
        let horizon = ct + ht + 0.1;
        for sol in [sticky_solution(eta).unwrap(), rebound_solution(eta).unwrap()] {
            prop_assert!(sol.weak_residual_mass(&phi, horizon).abs() <= 1e-12);
            prop_assert!(sol.weak_residual_momentum(&phi, horizon).abs() <= 1e-12);
        }
    }
}
