use std::f64::consts::E;

use epa_core::params::*;
use epa_core::rearrange::BoundsConfig;

fn fig1a() -> (PhysParams, AlignmentBand) {
    (PhysParams::new(0.5, 1.0).unwrap(), AlignmentBand::new(0.25, 0.75).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn lambda_is_twice_sqrt_k_over_c() {
    let p = PhysParams::from_lambda(2f64.sqrt(), 1.0).unwrap();
    assert!(rel(p.k, 0.5) < 1e-15);
    assert!(rel(p.lambda(), 2.0 * (p.k / p.c).sqrt()) < 1e-15);
    assert!(PhysParams::new(-1.0, 1.0).is_err());
    assert!(PhysParams::new(1.0, 0.0).is_err());
}

#[test]
fn extended_exponential_reference_values() {
    assert!((extended_exponential(0.5).unwrap() - E).abs() < 1e-15);
    assert!(rel(extended_exponential(0.3).unwrap(), 3.948_222_038_857_477_6) < 1e-14);
    assert!(rel(extended_exponential(2.0).unwrap(), 1.405_419_881_607_395) < 1e-14);
    // β = 1.5 with kc = 1/2 gives y = 1/3 and E = 2^{3/2}
    assert!(rel(extended_exponential(0.5f64.sqrt() / 1.5).unwrap(), 8f64.sqrt()) < 1e-14);
    assert!((extended_exponential(1e8).unwrap() - 1.0).abs() < 1e-7);
    assert!(extended_exponential(0.0).is_err());
    assert!(extended_exponential(-1.0).is_err());
}

#[test]
fn extended_exponential_continuous_at_half() {
    for d in [1e-6, 1e-9, 1e-12] {
        assert!((extended_exponential(0.5 + d).unwrap() - E).abs() < 1e-4);
        assert!((extended_exponential(0.5 - d).unwrap() - E).abs() < 1e-4);
    }
}

#[test]
fn eigen_structure_by_regime() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    let node = AuxEigen::new(2.0, &p);
    assert_eq!(node.regime, Regime::Node);
    assert!(rel(node.gamma_plus * node.gamma_minus, p.k * p.c) < 1e-10);
    assert!(rel(node.gamma_plus + node.gamma_minus, 2.0) < 1e-10);
    let spiral = AuxEigen::new(0.5, &p);
    assert_eq!(spiral.regime, Regime::Spiral);
    assert!(rel(spiral.theta, 0.5 * (2.0f64 - 0.25).sqrt()) < 1e-15);
    assert_eq!(AuxEigen::new(p.critical_beta(), &p).regime, Regime::Degenerate);
}

#[test]
fn weak_admissibility_fig1a() {
    let (p, b) = fig1a();
    let a = admissibility_weak(&p, &b).unwrap();
    assert!(a.holds);
    assert!(rel(a.margin, 0.234_208_061_360_142_58) < 1e-12);
}

#[test]
fn weak_admissibility_constant_kernel_margin() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    let b = AlignmentBand::constant(0.5).unwrap();
    let a = admissibility_weak(&p, &b).unwrap();
    let pz = p.pi_over_z(0.5);
    assert!(a.holds);
    assert!(rel(a.margin, p.sqrt_kc() * (1.0 - (-2.0 * pz).exp())) < 1e-14);
}

#[test]
fn weak_admissibility_bisection_root() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    let margin = |bmax: f64| admissibility_weak(&p, &AlignmentBand::new(0.1, bmax).unwrap()).unwrap().margin;
    let (mut lo, mut hi) = (0.5, 1.4);
    assert!(margin(lo) > 0.0 && margin(hi) < 0.0);
    let mut prev = f64::INFINITY;
    for i in 0..=20 {
        let m = margin(0.5 + 0.9 * i as f64 / 20.0);
        assert!(m < prev);
        prev = m;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if margin(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 0.774_529_815_279_945_2).abs() < 1e-12);
}

#[test]
fn weak_admissibility_rejects_node_band() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    let b = AlignmentBand::new(0.25, 1.5).unwrap();
    assert!(matches!(admissibility_weak(&p, &b), Err(ParamsError::RegimeMismatch(_))));
}

#[test]
fn weak_implies_weaker_closure_condition() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    for i in 0..40 {
        let bmin = 0.02 * i as f64;
        for j in 0..40 {
            let bmax = bmin + 0.02 * j as f64;
            if bmax * bmax >= 4.0 * p.k * p.c {
                continue;
            }
            let b = AlignmentBand::new(bmin, bmax).unwrap();
            if admissibility_weak(&p, &b).unwrap().holds {
                assert!(admissibility_weak_p2(&p, &b).unwrap().holds, "band {bmin} {bmax}");
            }
        }
    }
}

#[test]
fn medium_admissibility_reference() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    let a = admissibility_medium(&p, &AlignmentBand::new(0.25, 1.5).unwrap()).unwrap();
    assert!(a.holds);
    assert!(rel(a.margin, 0.039_014_430_949_437_85) < 1e-12);
    let crit = p.critical_beta();
    let deg = admissibility_medium(&p, &AlignmentBand::constant(crit).unwrap()).unwrap();
    assert!(deg.holds && rel(deg.margin, p.sqrt_kc() * E) < 1e-12);
}

#[test]
fn medium_margin_decreases_with_gap() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..10 {
        let b = AlignmentBand::new(0.25, 1.5 + 0.1 * i as f64).unwrap();
        let m = admissibility_medium(&p, &b).unwrap().margin;
        assert!(m < prev);
        prev = m;
    }
}

#[test]
fn weakly_singular_admissibility_fig4() {
    let p = PhysParams::new(4.0, 1.0).unwrap();
    let cfg = BoundsConfig::new(0.0, 2.0, 1.0).unwrap();
    let a = admissibility_weakly_singular(&p, &AlignmentBand::new(1.9, 2.1).unwrap(), &cfg).unwrap();
    assert!(a.holds);
    assert!(rel(a.margin, 1.341_545_944_692_066) < 1e-12);
    // γ = 0.5: β_min = 2cγ = 1, β_max = 2c(‖ψ‖ − γ) = 3
    let wide = admissibility_weakly_singular(&p, &AlignmentBand::new(1.0, 3.0).unwrap(), &cfg).unwrap();
    assert!(!wide.holds);
    assert!(rel(wide.margin, -0.448_597_148_107_702_85) < 1e-12);
    let flat = admissibility_weakly_singular(&p, &AlignmentBand::constant(2.0).unwrap(), &cfg).unwrap();
    assert!(flat.holds && flat.margin > 0.0);
}

#[test]
fn weakly_singular_needs_rho_max_above_c() {
    let p = PhysParams::new(4.0, 1.0).unwrap();
    let cfg = BoundsConfig { rho_min: 0.0, rho_max: 1.0, c: 1.0 };
    assert!(matches!(
        admissibility_weakly_singular(&p, &AlignmentBand::new(1.9, 2.1).unwrap(), &cfg),
        Err(ParamsError::BadBoundsConfig { .. })
    ));
}

#[test]
fn band_from_kernel_bounds() {
    let p = PhysParams::new(0.5, 2.0).unwrap();
    let b = AlignmentBand::from_kernel_bounds(&p, 0.25, 0.75).unwrap();
    assert_eq!((b.beta_min, b.beta_max), (0.5, 1.5));
    assert!(AlignmentBand::new(1.0, 0.5).is_err());
}

#[test]
fn influence_model_validation() {
    assert!(InfluenceModel::WeaklySingular { l1_norm: 2.0, gamma: 0.95 }.validate().is_ok());
    assert!(InfluenceModel::WeaklySingular { l1_norm: 2.0, gamma: 1.1 }.validate().is_err());
    assert!(InfluenceModel::Tabulated { samples: vec![1.0, -0.1, 1.0] }.validate().is_err());
}
