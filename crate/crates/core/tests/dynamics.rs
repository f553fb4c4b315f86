use std::sync::Arc;

use epa_core::auxlin::{crossing_time_q, solve_aux, CrossingMode, PhasePoint};
use epa_core::dynamics::*;
use epa_core::kernel::KernelTable;
use epa_core::params::{AlignmentBand, PhysParams};
use epa_core::regions::*;
use epa_core::signal::AlignmentSignal;
use epa_core::spectral::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fig1a() -> (PhysParams, AlignmentBand) {
    (PhysParams::new(0.5, 1.0).unwrap(), AlignmentBand::new(0.25, 0.75).unwrap())
}

fn fig1b() -> (PhysParams, AlignmentBand) {
    (PhysParams::new(0.5, 1.0).unwrap(), AlignmentBand::new(1.5, 2.0).unwrap())
}

#[test]
fn forward_integration_retraces_c1() {
    let (p, b) = fig1a();
    let c1 = solve_aux(b.beta_max, PhasePoint::ORIGIN, &p).unwrap();
    let t1 = crossing_time_q(&c1, 1.0 / p.c, CrossingMode::FirstNegative).unwrap();
    let start = c1.evaluate(t1);
    let n = 4000;
    let tr = integrate_ws(start, &AlignmentSignal::constant(b.beta_max), &p, -t1 / n as f64, -t1);
    let end = tr.last();
    assert!(end[0].abs() < 1e-8 && end[1].abs() < 1e-8, "{end:?}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    let (p, _) = fig1a();
    let start = PhasePoint::new(-0.4, 0.3);
    let exact = solve_aux(0.5, start, &p).unwrap();
    let t_end = 10.0 / p.lambda();
    let err = |dt: f64| {
        let tr = integrate_ws(start, &AlignmentSignal::constant(0.5), &p, dt, t_end);
        tr.times
            .iter()
            .zip(&tr.states)
            .map(|(&t, s)| exact.evaluate(t).dist(PhasePoint::new(s[0], s[1])))
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.1), err(0.05));
    assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
}

#[test]
fn alternating_signal_stays_finite() {
    let (p, b) = fig1a();
    let theta_tilde = 0.5 * (4.0 * p.k * p.c - b.beta_min.powi(2)).sqrt();
    let t_end = 100.0 / p.lambda();
    let sig = AlignmentSignal::alternating(b, std::f64::consts::PI / (4.0 * theta_tilde), t_end).unwrap();
    let tr = integrate_ws(PhasePoint::new(-0.3, 0.8), &sig, &p, 0.01, t_end);
    assert!(tr.states.iter().all(|s| s[0].is_finite() && s[1].is_finite()));
    assert!((tr.times.last().unwrap() - t_end).abs() < 1e-12);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn steady_state_is_stationary_under_coupled_signal() {
    let (p, b) = fig1a();
    let l1 = 0.5;
    let sig = AlignmentSignal::coupled(Arc::new(move |_| l1), b);
    let tr = integrate_grho(p.c * l1, p.c, &sig, &p, 0.01, 20.0, &GrhoOptions::default());
    let end = tr.last();
    assert!((end[0] - p.c * l1).abs() < 1e-13 && (end[1] - p.c).abs() < 1e-13);
    assert!(tr.events.is_empty());
}

#[test]
fn grho_matches_ws_under_the_f_map() {
    let (p, b) = fig1a();
    let region = build_sigma1(&p, &b, &RegionOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let t_end = 10.0 / p.lambda();
    for _ in 0..20 {
        let start = region.sample_interior(&mut rng, 0.05).unwrap();
        let sig = AlignmentSignal::random(b, &p, t_end, &mut rng);
        let ws = integrate_ws(start, &sig, &p, 0.002, t_end);
        let (g0, rho0) = start.to_grho();
        let gr = integrate_grho(g0, rho0, &sig, &p, 0.002, t_end, &GrhoOptions::default());
        assert_eq!(ws.times.len(), gr.times.len());
        for ((t, a), (u, s)) in ws.times.iter().zip(&ws.states).zip(gr.times.iter().zip(&gr.states)) {
            assert!((t - u).abs() < 1e-12);
            let (g, rho) = PhasePoint::new(a[0], a[1]).to_grho();
            let dev = ((g - s[0]).abs() / g.abs().max(1.0)).max((rho - s[1]).abs() / rho);
            assert!(dev < 1e-6, "t={t} dev={dev:e}");
        }
    }
}

#[test]
fn delta1_start_blows_up() {
    let (p, b) = fig1a();
    let region = build_delta1(&p, &b, &RegionOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = PhasePoint::new(-2.0, 0.5);
    assert_eq!(region.membership_pq(x).label, Verdict::Inside);
    let (g0, rho0) = x.to_grho();
    let t_end = 50.0 / p.lambda();
    let sig = AlignmentSignal::random(b, &p, t_end, &mut rng);
    let tr = integrate_grho(g0, rho0, &sig, &p, 0.01, t_end, &GrhoOptions::default());
    assert!(tr.blowup_time().is_some());
    assert!(tr.last()[0] < 0.0);
}

#[test]
fn weak_riccati_blows_up_before_bound() {
    let (p, b) = fig1a();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let t_end = 50.0 / p.lambda();
    for _ in 0..200 {
        let g0 = rng.gen_range(-5.0..5.0) * p.sqrt_kc();
        let sig = AlignmentSignal::random(b, &p, t_end, &mut rng);
        let rep = riccati_rho0(g0, &sig, &p, 0.01, t_end, &GrhoOptions::default());
        let est = rep.estimate.expect("weak alignment always yields an estimate");
        let tb = rep.trajectory.blowup_time().expect("weak alignment always blows up");
        assert!(est.bound > est.t0);
        assert!(tb <= est.bound, "G0={g0}: blowup {tb} after bound {}", est.bound);
        assert!(rep.certificate.is_none());
    }
}

#[test]
fn strong_riccati_trapped_above_lower_root() {
    let (p, b) = fig1b();
    let lower = p.lower_root(b.beta_min).unwrap();
    let t_end = 50.0 / p.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for g0 in [lower + 1e-3, 0.0f64.max(lower + 0.2), 1.0, 10.0] {
        let sig = AlignmentSignal::random(b, &p, t_end, &mut rng);
        let rep = riccati_rho0(g0, &sig, &p, 0.01, t_end, &GrhoOptions::default());
        let cert = rep.certificate.expect("certified");
        assert!(rep.trajectory.blowup_time().is_none());
        assert!(rep.trajectory.states.iter().all(|s| s[0] >= cert.lower - 1e-9 && s[0] <= cert.upper + 1e-9));
    }
}

#[test]
fn strong_riccati_blows_up_below_threshold() {
    let (p, b) = fig1b();
    let threshold = p.lower_root(b.beta_max).unwrap();
    let t_end = 50.0 / p.lambda();
    let sig = AlignmentSignal::constant(b.beta_max);
    for g0 in [threshold - 1e-2, threshold - 1.0, -10.0] {
        let rep = riccati_rho0(g0, &sig, &p, 0.01, t_end, &GrhoOptions::default());
        assert!(rep.certificate.is_none());
        assert!(rep.trajectory.blowup_time().is_some(), "G0={g0}");
    }
}

#[test]
fn fuzz_degenerate_band_has_no_exits() {
    let p = PhysParams::new(0.5, 1.0).unwrap();
    let region = build_sigma1(&p, &AlignmentBand::constant(0.5).unwrap(), &RegionOptions::default()).unwrap();
    let cfg = FuzzConfig {
        n_trials: 100,
        base_seed: 1,
        dt: 0.01,
        t_end: 50.0 / p.lambda(),
        mode: FuzzMode::Invariance,
        min_start_distance: None,
        signal_band: None,
    };
    let rep = fuzz_invariance(&region, &cfg).unwrap();
    assert_eq!(rep.n_exits, 0);
    assert!(rep.violations.is_empty());
}

#[test]
fn fuzz_detects_out_of_band_signals() {
    let (p, b) = fig1a();
    let region = build_sigma1(&p, &b, &RegionOptions::default()).unwrap();
    let cfg = FuzzConfig {
        n_trials: 100,
        base_seed: 1,
        dt: 0.01,
        t_end: 50.0 / p.lambda(),
        mode: FuzzMode::Invariance,
        min_start_distance: None,
        signal_band: Some(AlignmentBand::new(0.0, 1.4).unwrap()),
    };
    let rep = fuzz_invariance(&region, &cfg).unwrap();
    assert!(rep.n_exits > 0);
    assert_eq!(rep.violations.len(), rep.n_exits);
    assert!(rep.violations.windows(2).all(|w| w[0].seed < w[1].seed));
    assert!(rep.violations.iter().all(|v| v.t_exit.is_some()));
}

#[test]
fn fuzz_reports_are_reproducible() {
    let (p, b) = fig1a();
    let region = build_delta1(&p, &b, &RegionOptions::default()).unwrap();
    let cfg = FuzzConfig {
        n_trials: 50,
        base_seed: 7,
        dt: 0.01,
        t_end: 50.0 / p.lambda(),
        mode: FuzzMode::ReachAxis,
        min_start_distance: None,
        signal_band: None,
    };
    let a = fuzz_invariance(&region, &cfg).unwrap();
    let b2 = fuzz_invariance(&region, &cfg).unwrap();
    assert_eq!((a.n_exits, &a.violations), (b2.n_exits, &b2.violations));
    assert_eq!(a.n_exits, 50);
    let bad = FuzzConfig { dt: 0.0, ..cfg };
    assert!(matches!(fuzz_invariance(&region, &bad), Err(FuzzError::BadTiming { .. })));
}

#[test]
fn trajectory_csv_has_event_trailer() {
    let (p, b) = fig1a();
    let sig = AlignmentSignal::constant(b.beta_max);
    let rep = riccati_rho0(-1.0, &sig, &p, 0.01, 20.0, &GrhoOptions::default());
    let mut buf = Vec::new();
    rep.trajectory.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,G,rho\n"));
    assert!(text.lines().last().unwrap().starts_with("# event {\"kind\":\"blowup_detected\""));
}

fn fig1a_classifier(n: usize) -> (PhysParams, KernelTable, Vec<Region>) {
    let (p, b) = fig1a();
    let opts = RegionOptions::default();
    let regions = vec![build_sigma1(&p, &b, &opts).unwrap(), build_delta1(&p, &b, &opts).unwrap()];
    (p, KernelTable::raised_cosine(n, 0.25, 0.75).unwrap(), regions)
}

#[test]
fn classify_steady_state() {
    let (p, kernel, regions) = fig1a_classifier(64);
    let rep = classify_field(&[1.0; 64], &[0.3; 64], &kernel, &p, &regions).unwrap();
    assert_eq!(rep.summary, FieldSummary::AllSubcritical { region: RegionKind::Sigma1 });
    assert!(rep.points.iter().all(|v| (v.g - 0.5).abs() < 1e-12));
}

#[test]
fn classify_large_shear_is_supercritical() {
    let (p, kernel, regions) = fig1a_classifier(128);
    let grid = Grid::new(128).unwrap();
    let verdict = |a: f64| {
        let u: Vec<f64> = grid.x.iter().map(|x| a * (std::f64::consts::TAU * x).sin()).collect();
        classify_field(&[1.0; 128], &u, &kernel, &p, &regions).unwrap().summary
    };
    assert!(matches!(verdict(0.01), FieldSummary::AllSubcritical { .. }));
    match verdict(2.0) {
        FieldSummary::SomeSupercritical { region, x, .. } => {
            assert_eq!(region, RegionKind::Delta1);
            assert!((x.abs() - 0.5).abs() < 0.05);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn classify_vacuum_witness() {
    let (p, kernel, regions) = fig1a_classifier(64);
    let grid = Grid::new(64).unwrap();
    let rho: Vec<f64> = grid.x.iter().map(|x| 1.0 - (std::f64::consts::TAU * x).cos()).collect();
    let rep = classify_field(&rho, &[0.0; 64], &kernel, &p, &regions).unwrap();
    match rep.summary {
        FieldSummary::SomeSupercritical { rho, x, .. } => assert!(rho.abs() < 1e-15 && x == 0.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn classify_rejects_bad_mean() {
    let (p, kernel, regions) = fig1a_classifier(16);
    assert!(matches!(
        classify_field(&[1.1; 16], &[0.0; 16], &kernel, &p, &regions),
        Err(ClassifyError::MeanMismatch { .. })
    ));
}
