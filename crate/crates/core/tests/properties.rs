use proptest::prelude::*;
use roughroad::{
    average_density, average_derivative, build_profile_family, classify, flux, solve_flux_level,
    CaseLabel, CaseLetter, GridFunction, Kernel, KernelShape, Model, ProfileProblem, RoadCondition,
    SolverParams, VelocityLaw, VelocityModel, DEFAULT_CLASSIFY_TOL,
};

fn velocity(c: f64) -> VelocityModel {
    VelocityModel::new(VelocityLaw::Concave { c }).unwrap()
}

/// A distinct pair of speed limits and a flux level inside both ranges.
fn road() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.5..3.0f64, 0.5..3.0f64, 0.05..0.95f64, 0.0..0.8f64)
        .prop_filter("distinct limits", |(a, b, _, _)| (a - b).abs() > 0.05)
}

fn fbar_for(cond: &RoadCondition, v: &VelocityModel, share: f64) -> f64 {
    let rho_hat = roughroad::stagnation_point(v).unwrap();
    let kmin = cond.kappa_minus.min(cond.kappa_plus);
    share * kmin * rho_hat * v.eval(rho_hat)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flux_levels_round_trip((km, kp, share, c) in road()) {
        let v = velocity(c);
        let cond = RoadCondition::new(km, kp).unwrap();
        let fbar = fbar_for(&cond, &v, share);
        let set = solve_flux_level(fbar, &cond, &v).unwrap();
        for (k, r) in [(km, set.minus.0), (km, set.minus.1), (kp, set.plus.0), (kp, set.plus.1)] {
            prop_assert!((flux(k, r, &v).unwrap() - fbar).abs() < 1e-12);
        }
        prop_assert!(set.rho1 < set.rho2 && set.rho2 < set.rho_hat);
        prop_assert!(set.rho_hat < set.rho3 && set.rho3 < set.rho4);
    }

    #[test]
    fn classification_is_scale_invariant((km, kp, share, c) in road(), scale in 0.1..10.0f64, index in 1u8..=4) {
        let v = velocity(c);
        let cond = RoadCondition::new(km, kp).unwrap();
        let fbar = fbar_for(&cond, &v, share);
        let (rm, rp) = solve_flux_level(fbar, &cond, &v).unwrap().far_field(index).unwrap();
        let scaled = RoadCondition::new(scale * km, scale * kp).unwrap();
        for model in [Model::M1, Model::M2] {
            let a = classify(&cond, rm, rp, &v, model, DEFAULT_CLASSIFY_TOL).unwrap();
            let b = classify(&scaled, rm, rp, &v, model, DEFAULT_CLASSIFY_TOL).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(a.label, CaseLabel::Regular { letter: CaseLetter::new(model, km > kp), index });
        }
    }

    #[test]
    fn swapping_limits_mirrors_the_letter((km, kp, share, c) in road(), index in 1u8..=4) {
        let v = velocity(c);
        let cond = RoadCondition::new(km, kp).unwrap();
        let fbar = fbar_for(&cond, &v, share);
        for (road, model) in [(cond, Model::M1), (cond.swapped(), Model::M1), (cond, Model::M2), (cond.swapped(), Model::M2)] {
            let (rm, rp) = solve_flux_level(fbar, &road, &v).unwrap().far_field(index).unwrap();
            let tag = classify(&road, rm, rp, &v, model, DEFAULT_CLASSIFY_TOL).unwrap();
            let letter = CaseLetter::new(model, road.kappa_minus > road.kappa_plus);
            prop_assert_eq!(tag.label, CaseLabel::Regular { letter, index });
        }
    }

    #[test]
    fn averaging_is_monotone(
        base in prop::collection::vec(0.0..0.5f64, 60),
        bump in prop::collection::vec(0.0..0.5f64, 60),
        i in 0usize..20,
        quadratic in any::<bool>(),
    ) {
        let shape = if quadratic { KernelShape::Quadratic } else { KernelShape::Linear };
        let m = Kernel::new(shape, 0.2).unwrap().cell_moments(0.01).unwrap();
        let lower = GridFunction::new(-0.3, 0.01, base.clone()).unwrap();
        let upper = GridFunction::new(-0.3, 0.01, base.iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
        let a = average_density(&lower, i, &m).unwrap();
        let b = average_density(&upper, i, &m).unwrap();
        prop_assert!(b >= a - 1e-15);
    }

    #[test]
    fn average_derivative_matches_differences(a in 0.05..0.3f64, k in 1.0..8.0f64, phase in 0.0..6.3f64) {
        let kernel = Kernel::linear(0.2).unwrap();
        let q = |dx: f64| {
            let n = (1.0 / dx).round() as usize + 1;
            let values = (0..n).map(|i| 0.5 + a * (k * (-0.5 + i as f64 * dx) + phase).sin()).collect();
            GridFunction::new(-0.5, dx, values).unwrap()
        };
        // Error of the centered difference at x = 0 shrinks like dx^2.
        let err = |dx: f64| {
            let g = q(dx);
            let m = kernel.cell_moments(dx).unwrap();
            let i = (0.5 / dx).round() as usize;
            let fd = (average_density(&g, i + 1, &m).unwrap() - average_density(&g, i - 1, &m).unwrap()) / (2.0 * dx);
            (fd - average_derivative(&g, i, &m).unwrap()).abs()
        };
        let (e1, e2) = (err(0.01), err(0.005));
        prop_assert!(e1 < 5.0 * a * k * k * k * 1e-4 + 1e-12, "{}", e1);
        prop_assert!(e2 < 0.3 * e1 + 1e-12, "{} {}", e1, e2);
    }
}

#[test]
fn family_members_never_cross() {
    let cond = RoadCondition::new(2.0, 1.0).unwrap();
    let problem = ProfileProblem::from_case(
        CaseLabel::Regular {
            letter: CaseLetter::A,
            index: 1,
        },
        cond,
        VelocityModel::lwr(),
        Kernel::linear(0.2).unwrap(),
        0.1875,
    )
    .unwrap();
    let family =
        build_profile_family(&problem, &[0.6, 0.3, 0.45, 0.7], &SolverParams::new(0.01)).unwrap();
    // Members come back sorted; shooting reaches each trace to ~1e-12.
    for (p, t) in family.iter().zip([0.3, 0.45, 0.6, 0.7]) {
        assert!((p.trace_plus - t).abs() < 1e-10);
    }
    for pair in family.windows(2) {
        let (lo, hi) = (&pair[0].grid, &pair[1].grid);
        for (i, (a, b)) in lo.values.iter().zip(&hi.values).enumerate() {
            // Far from the jump members agree to rounding.
            assert!(
                *a <= b + roughroad::profile::MONOTONE_SLACK,
                "crossing at x = {}",
                lo.x(i)
            );
            // Near the jump the members are well separated.
            if lo.x(i).abs() <= 0.5 {
                assert!(a < b);
            }
        }
    }
}
