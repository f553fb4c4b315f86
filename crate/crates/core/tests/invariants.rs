use epa_core::auxlin::{solve_aux, PhasePoint};
use epa_core::params::{admissibility_weak, extended_exponential, AlignmentBand, PhysParams};
use epa_core::rearrange::{crude_bounds, improved_bounds, rearrange_kernel, BoundsConfig};
use epa_core::regions::{build_sigma1, RegionOptions, Verdict};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn extended_exponential_is_decreasing(a in 0.01f64..20.0, b in 0.01f64..20.0) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(extended_exponential(lo).unwrap() > extended_exponential(hi).unwrap());
        prop_assert!(extended_exponential(hi).unwrap() > 1.0);
    }

    #[test]
    fn pq_grho_maps_are_inverse(g in -1e3f64..1e3, rho in 1e-3f64..1e3) {
        let (g2, rho2) = PhasePoint::from_grho(g, rho).to_grho();
        prop_assert!((g2 - g).abs() <= 1e-12 * g.abs().max(1.0));
        prop_assert!((rho2 - rho).abs() <= 1e-12 * rho);
    }

    #[test]
    fn aux_flow_is_a_group(
        k in 0.1f64..5.0,
        c in 0.5f64..2.0,
        beta_frac in 0.0f64..2.0,
        p in -2.0f64..2.0,
        q in 0.0f64..2.0,
        s in -3.0f64..0.0,
        t in -3.0f64..0.0,
    ) {
        let params = PhysParams::new(k, c).unwrap();
        let beta = beta_frac * params.critical_beta();
        let traj = solve_aux(beta, PhasePoint::new(p, q), &params).unwrap();
        let mid = traj.evaluate(s);
        let restarted = solve_aux(beta, mid, &params).unwrap().evaluate(t);
        let direct = traj.evaluate(s + t);
        let scale = 1f64.max(direct.p.abs()).max(direct.q.abs());
        prop_assert!(restarted.dist(direct) <= 1e-8 * scale);
    }

    #[test]
    fn aux_equilibrium_is_fixed(k in 0.1f64..5.0, c in 0.5f64..2.0, beta in 0.0f64..5.0, t in -10.0f64..10.0) {
        let params = PhysParams::new(k, c).unwrap();
        let eq = PhasePoint::new(beta / c, 1.0 / c);
        prop_assert!(solve_aux(beta, eq, &params).unwrap().evaluate(t).dist(eq) < 1e-10);
    }

    #[test]
    fn improved_bounds_nest_inside_crude(
        samples in prop::collection::vec(0.0f64..3.0, 8..64),
        rho_min in 0.0f64..0.95,
        rho_max in 1.05f64..4.0,
    ) {
        let k = rearrange_kernel(&samples).unwrap();
        let cfg = BoundsConfig::new(rho_min, rho_max, 1.0).unwrap();
        let b = improved_bounds(&k, &cfg);
        let crude = crude_bounds(k.l1_norm, &cfg);
        let tol = 1e-12 * k.l1_norm.max(1.0);
        prop_assert!(crude.lower <= b.lower + tol && b.upper <= crude.upper + tol);
        prop_assert!(b.lower <= k.l1_norm + tol && k.l1_norm <= b.upper + tol);
        prop_assert!(k.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(k.gamma >= 0.0 && k.gamma <= 0.5 * k.l1_norm + tol);
    }

    #[test]
    fn band_equilibria_lie_in_sigma1(beta_min in 0.0f64..0.6, width in 0.0f64..0.5, frac in 0.0f64..1.0) {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        let band = AlignmentBand::new(beta_min, beta_min + width).unwrap();
        prop_assume!(admissibility_weak(&params, &band).unwrap().holds);
        let region = build_sigma1(&params, &band, &RegionOptions::default()).unwrap();
        let beta = band.beta_min + frac * band.width();
        let eq = PhasePoint::new(beta / params.c, 1.0 / params.c);
        prop_assert_eq!(region.membership_pq(eq).label, Verdict::Inside);
    }
}
