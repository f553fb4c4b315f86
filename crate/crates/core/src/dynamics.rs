//! Characteristic ODEs under band-valued alignment signals: the linear (w, s)
//! system, the quadratic (G, ρ) system, the ρ = 0 Riccati branch, invariance
//! fuzzing and pointwise classification of initial data.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auxlin::PhasePoint;
use crate::kernel::KernelTable;
use crate::params::{AlignmentBand, PhysParams};
use crate::regions::{Plane, Region, RegionKind, Verdict};
use crate::signal::{AlignmentSignal, SignalKind};
use crate::spectral::{Convolver, Grid, GridError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryEvent {
    ExitedRegion { t: f64, point: [f64; 2] },
    HitAxis { t: f64, w: f64 },
    BlowupDetected { t: f64 },
    /// ρ fell below 1/q_cap; integration continued on the ρ = 0 branch.
    VacuumHandoff { t: f64, g: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub plane: Plane,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub events: Vec<TrajectoryEvent>,
}

impl Trajectory {
    fn new(plane: Plane, start: [f64; 2]) -> Self {
        Self { plane, times: vec![0.0], states: vec![start], events: Vec::new() }
    }

    pub fn last(&self) -> [f64; 2] {
        *self.states.last().expect("trajectory has a start")
    }

    pub fn blowup_time(&self) -> Option<f64> {
        self.events.iter().find_map(|e| match e {
            TrajectoryEvent::BlowupDetected { t } => Some(*t),
            _ => None,
        })
    }

    /// CSV rows `t,p,q` or `t,G,rho`, then one `# event` line per event.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        match self.plane {
            Plane::PQ => writeln!(out, "t,p,q")?,
            Plane::GRho => writeln!(out, "t,G,rho")?,
        }
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(out, "{t:.17e},{:.17e},{:.17e}", s[0], s[1])?;
        }
        for e in &self.events {
            writeln!(out, "# event {}", serde_json::to_string(e).map_err(std::io::Error::other)?)?;
        }
        Ok(())
    }
}

/// β at the three RK4 stage times; constant over a step that does not straddle a breakpoint.
fn stage_betas(signal: &AlignmentSignal, t: f64, h: f64) -> [f64; 3] {
    match signal.kind {
        SignalKind::Coupled(_) => [signal.value(t), signal.value(t + 0.5 * h), signal.value(t + h)],
        _ => {
            let b = signal.value(t);
            [b, b, b]
        }
    }
}

/// Step length from `t`, shortened to land on the end time or the next breakpoint.
fn next_step(signal: &AlignmentSignal, t: f64, dt: f64, t_end: f64) -> (f64, f64) {
    let mut t1 = (t + dt).min(t_end);
    if let Some(b) = signal.next_breakpoint(t) {
        if b < t1 {
            t1 = b;
        }
    }
    (t1 - t, t1)
}

fn ws_rhs(x: [f64; 2], beta: f64, params: &PhysParams) -> [f64; 2] {
    [params.k - params.k * params.c * x[1], x[0] - x[1] * beta]
}

fn rk4<F: Fn([f64; 2], usize) -> [f64; 2]>(x: [f64; 2], h: f64, f: F) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = f(x, 0);
    let k2 = f(add(x, k1, 0.5 * h), 1);
    let k3 = f(add(x, k2, 0.5 * h), 1);
    let k4 = f(add(x, k3, h), 2);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn ws_step(x: [f64; 2], t: f64, h: f64, signal: &AlignmentSignal, params: &PhysParams) -> [f64; 2] {
    let b = stage_betas(signal, t, h);
    rk4(x, h, |y, i| ws_rhs(y, b[i], params))
}

/// RK4 for w' = k − kcs, s' = w − s·β(t), splitting steps at signal breakpoints.
pub fn integrate_ws(start: PhasePoint, signal: &AlignmentSignal, params: &PhysParams, dt: f64, t_end: f64) -> Trajectory {
    let mut tr = Trajectory::new(Plane::PQ, [start.p, start.q]);
    let (mut t, mut x) = (0.0, [start.p, start.q]);
    while t < t_end {
        let (h, t1) = next_step(signal, t, dt, t_end);
        if h <= 0.0 {
            break;
        }
        x = ws_step(x, t, h, signal, params);
        t = t1;
        tr.times.push(t);
        tr.states.push(x);
    }
    tr
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrhoOptions {
    /// Blowup when |G| exceeds this multiple of √(kc).
    pub blowup_g_factor: f64,
    /// Blowup when ρ exceeds this multiple of c.
    pub rho_cap_factor: f64,
    /// Vacuum handoff when ρ < c / q_cap_factor.
    pub q_cap_factor: f64,
    /// Largest allowed dt·(local rate) before the step is halved.
    pub max_step_rate: f64,
}

impl Default for GrhoOptions {
    fn default() -> Self {
        Self { blowup_g_factor: 1e6, rho_cap_factor: 1e6, q_cap_factor: 1e3, max_step_rate: 0.05 }
    }
}

impl GrhoOptions {
    fn g_threshold(&self, params: &PhysParams) -> f64 {
        // k = 0 has no natural G scale; fall back to c
        self.blowup_g_factor * if params.k > 0.0 { params.sqrt_kc() } else { params.c }
    }
}

fn grho_rhs(x: [f64; 2], a: f64, params: &PhysParams) -> [f64; 2] {
    let (g, rho) = (x[0], x[1]);
    [-g * (g - a) + params.k * (rho - params.c), -rho * (g - a)]
}

fn riccati_rhs(g: f64, a: f64, params: &PhysParams) -> f64 {
    -(g * g - a * g + params.k * params.c)
}

fn halved(h: f64, rate: f64, max_rate: f64) -> f64 {
    let mut h = h;
    while h * rate > max_rate && h > 1e-14 {
        h *= 0.5;
    }
    h
}

/// RK4 for G' = −G(G − a) + k(ρ − c), ρ' = −ρ(G − a), with step halving on fast growth.
pub fn integrate_grho(
    g0: f64,
    rho0: f64,
    signal: &AlignmentSignal,
    params: &PhysParams,
    dt: f64,
    t_end: f64,
    opts: &GrhoOptions,
) -> Trajectory {
    let mut tr = Trajectory::new(Plane::GRho, [g0, rho0]);
    let g_thr = opts.g_threshold(params);
    let rho_cap = opts.rho_cap_factor * params.c;
    let rho_vac = params.c / opts.q_cap_factor;
    let (mut t, mut x) = (0.0, [g0, rho0]);
    let mut vacuum = rho0 < rho_vac;
    if vacuum {
        tr.events.push(TrajectoryEvent::VacuumHandoff { t: 0.0, g: g0 });
        x[1] = 0.0;
    }
    while t < t_end {
        let (h_max, _) = next_step(signal, t, dt, t_end);
        if h_max <= 0.0 {
            break;
        }
        let a = signal.value(t);
        let rate = (x[0] - a).abs() + x[0].abs() + (params.k * x[1].max(params.c)).sqrt();
        let h = halved(h_max, rate, opts.max_step_rate);
        let b = stage_betas(signal, t, h);
        x = if vacuum {
            let g = rk4([x[0], 0.0], h, |y, i| [riccati_rhs(y[0], b[i], params), 0.0]);
            [g[0], 0.0]
        } else {
            rk4(x, h, |y, i| grho_rhs(y, b[i], params))
        };
        t = if h == h_max { next_step(signal, t, dt, t_end).1 } else { t + h };
        tr.times.push(t);
        tr.states.push(x);
        if !(x[0].is_finite() && x[1].is_finite()) || x[0].abs() > g_thr || x[1] > rho_cap {
            tr.events.push(TrajectoryEvent::BlowupDetected { t });
            break;
        }
        if !vacuum && x[1] < rho_vac {
            vacuum = true;
            tr.events.push(TrajectoryEvent::VacuumHandoff { t, g: x[0] });
            x[1] = 0.0;
        }
    }
    tr
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t0: f64,
    pub bound: f64,
}

/// G stays in [lower, upper] for all time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappedBounded {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiReport {
    pub trajectory: Trajectory,
    pub estimate: Option<BlowupEstimate>,
    pub certificate: Option<TrappedBounded>,
}

/// G' = −(G² − aG + kc) along a vacuum characteristic.
pub fn riccati_rho0(
    g0: f64,
    signal: &AlignmentSignal,
    params: &PhysParams,
    dt: f64,
    t_end: f64,
    opts: &GrhoOptions,
) -> RiccatiReport {
    let band = signal.band;
    let certificate = trapped(g0, &band, params);
    let g_thr = opts.g_threshold(params);
    let trigger = band.beta_min.min(0.0);
    let mut tr = Trajectory::new(Plane::GRho, [g0, 0.0]);
    let mut estimate = None;
    let (mut t, mut g) = (0.0, g0);
    loop {
        if estimate.is_none() && g < trigger {
            estimate = Some(BlowupEstimate { t0: t, bound: t + 1.0 / (-g) });
        }
        if t >= t_end {
            break;
        }
        let (h_max, _) = next_step(signal, t, dt, t_end);
        if h_max <= 0.0 {
            break;
        }
        let a = signal.value(t);
        let rate = g.abs() + a + params.sqrt_kc();
        let h = halved(h_max, rate, opts.max_step_rate);
        let b = stage_betas(signal, t, h);
        g = rk4([g, 0.0], h, |y, i| [riccati_rhs(y[0], b[i], params), 0.0])[0];
        t = if h == h_max { next_step(signal, t, dt, t_end).1 } else { t + h };
        tr.times.push(t);
        tr.states.push([g, 0.0]);
        if !g.is_finite() || g.abs() > g_thr {
            tr.events.push(TrajectoryEvent::BlowupDetected { t });
            break;
        }
    }
    RiccatiReport { trajectory: tr, estimate, certificate }
}

fn trapped(g0: f64, band: &AlignmentBand, params: &PhysParams) -> Option<TrappedBounded> {
    let lower = params.lower_root(band.beta_min)?;
    let upper = params.upper_root(band.beta_max)?;
    (g0 > lower).then(|| TrappedBounded { lower, upper: g0.max(upper) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuzzMode {
    /// Count trials that leave the region beyond the Indeterminate band.
    Invariance,
    /// Count trials that reach s ≤ 0 with w < 0.
    ReachAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub n_trials: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub mode: FuzzMode,
    /// Interior starts keep at least this distance from the boundary (default 2ε).
    pub min_start_distance: Option<f64>,
    /// Band the random signals draw from; defaults to the region's own band.
    #[serde(default)]
    pub signal_band: Option<AlignmentBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub seed: u64,
    pub start: [f64; 2],
    pub t_exit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub region: RegionKind,
    pub mode: FuzzMode,
    pub n_trials: usize,
    /// Exits (Invariance) or trials reaching s ≤ 0 with w < 0 (ReachAxis).
    pub n_exits: usize,
    pub violations: Vec<Violation>,
    pub wall_time: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzError {
    #[error("could not sample an interior start for seed {0}")]
    NoInteriorStart(u64),
    #[error("dt and T must be positive (dt={dt}, T={t_end})")]
    BadTiming { dt: f64, t_end: f64 },
}

enum TrialOutcome {
    Stayed,
    Exited(f64),
    Reached { t: f64, w: f64 },
    Missed,
}

fn run_trial(region: &Region, cfg: &FuzzConfig, seed: u64) -> Result<(PhasePoint, TrialOutcome), FuzzError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_d = cfg.min_start_distance.unwrap_or(2.0 * region.epsilon_boundary);
    let start = region.sample_interior(&mut rng, min_d).ok_or(FuzzError::NoInteriorStart(seed))?;
    let params = region.params;
    let band = cfg.signal_band.unwrap_or_else(|| region.scaffold.band());
    let signal = AlignmentSignal::random(band, &params, cfg.t_end, &mut rng);
    let (mut t, mut x) = (0.0, [start.p, start.q]);
    while t < cfg.t_end {
        let (h, t1) = next_step(&signal, t, cfg.dt, cfg.t_end);
        if h <= 0.0 {
            break;
        }
        let beta = signal.value(t);
        let y = ws_step(x, t, h, &signal, &params);
        match cfg.mode {
            FuzzMode::Invariance => {
                let f0 = ws_rhs(x, beta, &params);
                let f1 = ws_rhs(y, beta, &params);
                let mid = PhasePoint::new(
                    0.5 * (x[0] + y[0]) + h * (f0[0] - f1[0]) / 8.0,
                    0.5 * (x[1] + y[1]) + h * (f0[1] - f1[1]) / 8.0,
                );
                if region.label_pq(mid) == Verdict::Outside {
                    return Ok((start, TrialOutcome::Exited(t + 0.5 * h)));
                }
                if region.label_pq(PhasePoint::new(y[0], y[1])) == Verdict::Outside {
                    return Ok((start, TrialOutcome::Exited(t1)));
                }
            }
            FuzzMode::ReachAxis => {
                if y[1] <= 0.0 {
                    let lam = if x[1] > y[1] { x[1] / (x[1] - y[1]) } else { 1.0 };
                    let w = x[0] + lam * (y[0] - x[0]);
                    return Ok((start, TrialOutcome::Reached { t: t + lam * h, w }));
                }
            }
        }
        x = y;
        t = t1;
    }
    Ok((start, if cfg.mode == FuzzMode::Invariance { TrialOutcome::Stayed } else { TrialOutcome::Missed }))
}

/// Independent seeded trials, run in parallel; results are ordered by seed.
pub fn fuzz_invariance(region: &Region, cfg: &FuzzConfig) -> Result<FuzzReport, FuzzError> {
    if !(cfg.dt > 0.0 && cfg.t_end > 0.0) {
        return Err(FuzzError::BadTiming { dt: cfg.dt, t_end: cfg.t_end });
    }
    let clock = Instant::now();
    let results: Vec<(u64, PhasePoint, TrialOutcome)> = (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.base_seed.wrapping_add(i);
            run_trial(region, cfg, seed).map(|(s, o)| (seed, s, o))
        })
        .collect::<Result<_, _>>()?;
    let mut n_exits = 0;
    let mut violations = Vec::new();
    for (seed, start, outcome) in results {
        let start = [start.p, start.q];
        match outcome {
            TrialOutcome::Stayed => {}
            TrialOutcome::Exited(t) => {
                n_exits += 1;
                violations.push(Violation { seed, start, t_exit: Some(t) });
            }
            TrialOutcome::Reached { w, .. } if w < 0.0 => n_exits += 1,
            TrialOutcome::Reached { t, .. } => violations.push(Violation { seed, start, t_exit: Some(t) }),
            TrialOutcome::Missed => violations.push(Violation { seed, start, t_exit: None }),
        }
    }
    Ok(FuzzReport {
        region: region.kind(),
        mode: cfg.mode,
        n_trials: cfg.n_trials,
        n_exits,
        violations,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("mean density {mean} differs from c = {c} by more than 1e-8")]
    MeanMismatch { mean: f64, c: f64 },
    #[error("density must be nonnegative (cell {index} has {value})")]
    NegativeDensity { index: usize, value: f64 },
    #[error("kernel has {kernel} cells but the grid has {grid}")]
    KernelSize { kernel: usize, grid: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Subcritical,
    Supercritical,
    /// Outside every supplied region.
    Gap,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointVerdict {
    pub index: usize,
    pub x: f64,
    pub g: f64,
    pub rho: f64,
    pub class: PointClass,
    pub region: Option<RegionKind>,
    pub distance_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSummary {
    AllSubcritical { region: RegionKind },
    SomeSupercritical { region: RegionKind, index: usize, x: f64, g: f64, rho: f64 },
    Mixed { n_subcritical: usize, n_gap: usize, n_indeterminate: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub summary: FieldSummary,
    pub points: Vec<PointVerdict>,
}

/// G₀ = ∂ₓu₀ + ψ∗ρ₀ on the grid, by spectral differentiation and FFT convolution.
pub fn initial_g(grid: &Grid, rho0: &[f64], u0: &[f64], kernel: &KernelTable) -> Result<Vec<f64>, ClassifyError> {
    grid.check(rho0)?;
    grid.check(u0)?;
    if kernel.n() != grid.n {
        return Err(ClassifyError::KernelSize { kernel: kernel.n(), grid: grid.n });
    }
    let ux = grid.derivative(u0, false);
    let conv = Convolver::new(grid, &kernel.samples)?.apply(rho0);
    Ok(ux.iter().zip(&conv).map(|(a, b)| a + b).collect())
}

pub fn classify_field(
    rho0: &[f64],
    u0: &[f64],
    kernel: &KernelTable,
    params: &PhysParams,
    regions: &[Region],
) -> Result<ClassifyReport, ClassifyError> {
    let grid = Grid::new(rho0.len())?;
    if let Some((index, &value)) = rho0.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
        return Err(ClassifyError::NegativeDensity { index, value });
    }
    let mean = grid.mean(rho0);
    if (mean - params.c).abs() > 1e-8 {
        return Err(ClassifyError::MeanMismatch { mean, c: params.c });
    }
    let g0 = initial_g(&grid, rho0, u0, kernel)?;
    let mut points = Vec::with_capacity(grid.n);
    for i in 0..grid.n {
        let (g, rho) = (g0[i], rho0[i]);
        let mut class = PointClass::Gap;
        let mut region = None;
        let mut dist = f64::NEG_INFINITY;
        for r in regions {
            let v = r.membership_grho(g, rho);
            match v.label {
                Verdict::Inside => {
                    class = if r.kind().is_subcritical() { PointClass::Subcritical } else { PointClass::Supercritical };
                    region = Some(r.kind());
                    dist = v.distance_estimate;
                    break;
                }
                Verdict::Indeterminate => {
                    class = PointClass::Indeterminate;
                    region = Some(r.kind());
                    dist = v.distance_estimate;
                }
                Verdict::Outside => {
                    if class == PointClass::Gap {
                        dist = dist.max(v.distance_estimate);
                    }
                }
            }
        }
        points.push(PointVerdict { index: i, x: grid.x[i], g, rho, class, region, distance_estimate: dist });
    }
    let witness = points
        .iter()
        .filter(|p| p.class == PointClass::Supercritical)
        .max_by(|a, b| a.distance_estimate.total_cmp(&b.distance_estimate));
    let summary = if let Some(w) = witness {
        FieldSummary::SomeSupercritical { region: w.region.expect("inside a region"), index: w.index, x: w.x, g: w.g, rho: w.rho }
    } else if let Some(kind) = points
        .first()
        .and_then(|p| p.region)
        .filter(|k| points.iter().all(|p| p.class == PointClass::Subcritical && p.region == Some(*k)))
    {
        FieldSummary::AllSubcritical { region: kind }
    } else {
        let count = |c: PointClass| points.iter().filter(|p| p.class == c).count();
        FieldSummary::Mixed {
            n_subcritical: count(PointClass::Subcritical),
            n_gap: count(PointClass::Gap),
            n_indeterminate: count(PointClass::Indeterminate),
        }
    };
    Ok(ClassifyReport { summary, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_stationary() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        let tr = integrate_ws(PhasePoint::new(0.6, 1.0), &AlignmentSignal::constant(0.6), &params, 0.01, 5.0);
        let end = tr.last();
        assert!((end[0] - 0.6).abs() < 1e-14 && (end[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn steps_land_on_breakpoints() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        let band = AlignmentBand::new(0.2, 0.8).unwrap();
        let s = AlignmentSignal::piecewise(vec![0.333], vec![0.2, 0.8], band).unwrap();
        let tr = integrate_ws(PhasePoint::ORIGIN, &s, &params, 0.1, 1.0);
        assert!(tr.times.contains(&0.333));
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn trapped_certificate_needs_strong_band() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        assert!(trapped(1.0, &AlignmentBand::new(0.2, 0.8).unwrap(), &params).is_none());
        let c = trapped(1.0, &AlignmentBand::new(1.5, 2.0).unwrap(), &params).unwrap();
        assert!((c.lower - 0.5).abs() < 1e-15 && c.upper >= 1.0);
    }
}
