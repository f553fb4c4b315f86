mod common;

use epa_core::kernel::KernelTable;
use epa_core::rearrange::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn constant_kernel_rearranges_to_itself() {
    let k = rearrange_kernel(&[1.3; 128]).unwrap();
    assert!(k.values.iter().all(|&v| v == 1.3));
    assert!((k.gamma - 0.65).abs() < 1e-13);
    for cfg in [BoundsConfig::symmetric(1.0), BoundsConfig::new(0.3, 4.0, 1.2).unwrap()] {
        let b = improved_bounds(&k, &cfg);
        assert!((b.lower - cfg.c * 1.3).abs() < 1e-12 && (b.upper - cfg.c * 1.3).abs() < 1e-12);
        for target in [Target::Min, Target::Max] {
            assert!((bound_oracle(&[1.3; 128], &cfg, target).unwrap().value - cfg.c * 1.3).abs() < 1e-12);
        }
    }
}

#[test]
fn inverse_square_root_gamma() {
    // |x|^{-1/2} on the torus rearranges to √2·y^{-1/2}, so γ = 2√2 − 2 and ‖ψ‖ = 2√2
    let n = 1024;
    let k = rearrange_kernel(&KernelTable::power_law(n, 0.5, 1.0, 0.0).unwrap().samples).unwrap();
    assert!((k.l1_norm - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert!((k.gamma - (2.0 * 2f64.sqrt() - 2.0)).abs() < 1.0 / n as f64);
}

#[test]
fn rearrangement_preserves_values_and_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<f64> = (0..257).map(|_| rng.gen_range(0.0..5.0)).collect();
    let k = rearrange_kernel(&samples).unwrap();
    assert!(k.values.windows(2).all(|w| w[0] >= w[1]));
    let mut a = samples.clone();
    let mut b = k.values.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
    assert!((k.l1_norm - samples.iter().sum::<f64>() / 257.0).abs() < 1e-12 * k.l1_norm);
    for d in [0.0, 0.1, 0.5, 0.93, 1.0] {
        assert!((k.gamma1(d) + k.integral_to(d) - k.l1_norm).abs() < 1e-12);
    }
}

#[test]
fn negative_sample_rejected() {
    assert!(matches!(rearrange_kernel(&[1.0, -0.5]), Err(RearrangeError::NegativeSample { index: 1, .. })));
}

#[test]
fn symmetric_config_gives_gamma_band() {
    let k = rearrange_kernel(&common::random_kernel(&mut ChaCha8Rng::seed_from_u64(5), 512)).unwrap();
    let cfg = BoundsConfig::symmetric(1.0);
    assert_eq!(k.gamma1(cfg.d()), k.gamma2(cfg.d_hat()));
    let b = improved_bounds(&k, &cfg);
    assert!((b.lower - 2.0 * k.gamma).abs() < 1e-12);
    assert!((b.upper - 2.0 * (k.l1_norm - k.gamma)).abs() < 1e-12);
    let sym = symmetric_bounds(k.l1_norm, k.gamma, &cfg).unwrap();
    assert!((sym.lower - b.lower).abs() < 1e-12 && (sym.upper - b.upper).abs() < 1e-12);
    assert!(symmetric_bounds(k.l1_norm, k.gamma, &BoundsConfig::new(0.5, 2.0, 1.0).unwrap()).is_err());
}

#[test]
fn calibrated_weakly_singular_kernel_band() {
    let kernel = KernelTable::calibrated_power_law(1024, 0.5, 2.0, 0.95).unwrap();
    let k = rearrange_kernel(&kernel.samples).unwrap();
    let cfg = BoundsConfig::symmetric(1.0);
    let b = improved_bounds(&k, &cfg);
    assert!((b.lower - 1.9).abs() < 1e-12 && (b.upper - 2.1).abs() < 1e-12);
    let lo = bound_oracle(&kernel.samples, &cfg, Target::Min).unwrap();
    let hi = bound_oracle(&kernel.samples, &cfg, Target::Max).unwrap();
    assert!((lo.value - 1.9).abs() < 1e-12 && (hi.value - 2.1).abs() < 1e-12);
}

#[test]
fn oracle_density_is_bang_bang() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples = common::random_kernel(&mut rng, 300);
    let cfg = BoundsConfig::new(0.2, 1.7, 1.0).unwrap();
    for target in [Target::Min, Target::Max] {
        let sol = bound_oracle(&samples, &cfg, target).unwrap();
        let mean = sol.density.iter().sum::<f64>() / 300.0;
        assert!((mean - 1.0).abs() < 1e-12);
        let interior = sol.density.iter().filter(|&&r| r > cfg.rho_min && r < cfg.rho_max).count();
        assert!(interior <= 1);
    }
}

#[test]
fn bounds_hold_for_random_densities_and_are_attained() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 256;
    for _ in 0..10 {
        let samples = common::random_kernel(&mut rng, n);
        let k = rearrange_kernel(&samples).unwrap();
        let rho_min = rng.gen_range(0.0..0.9);
        let cfg = BoundsConfig::new(rho_min, rng.gen_range(1.1..3.0), 1.0).unwrap();
        let b = improved_bounds(&k, &cfg);
        let crude = crude_bounds(k.l1_norm, &cfg);
        assert!(crude.lower < b.lower && b.upper < crude.upper);
        assert!(b.lower <= k.l1_norm * cfg.c && k.l1_norm * cfg.c <= b.upper);
        for _ in 0..100 {
            let rho = common::random_feasible_density(&mut rng, n, &cfg);
            let v = common::discrete_convolution_at(&samples, &rho, rng.gen_range(0..n));
            assert!(v >= b.lower - 1e-9 && v <= b.upper + 1e-9);
        }
        let lo = bound_oracle(&samples, &cfg, Target::Min).unwrap().value;
        let hi = bound_oracle(&samples, &cfg, Target::Max).unwrap().value;
        assert!((lo - b.lower).abs() < 1e-10 && (hi - b.upper).abs() < 1e-10);
    }
}

#[test]
fn report_fields() {
    let k = rearrange_kernel(&KernelTable::calibrated_power_law(64, 0.5, 2.0, 0.95).unwrap().samples).unwrap();
    let r = bounds_report(&k, &BoundsConfig::symmetric(1.0));
    let json = serde_json::to_value(&r).unwrap();
    for key in ["l1_norm", "gamma", "gamma1", "gamma2", "lower", "upper", "beta_min", "beta_max"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}
