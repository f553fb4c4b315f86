//! Invariant regions of the (w, s) phase plane, glued from auxiliary
//! trajectories, their images under F(p, q) = (p/q, 1/q), and membership.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auxlin::{crossing_time_q, sample_times, solve_aux, AuxError, AuxTrajectory, CrossingMode, PhasePoint};
use crate::geometry::{ray_distance, segment_distance, SegmentIndex};
use crate::params::{
    admissibility_floor_p1, admissibility_floor_p2, admissibility_medium, admissibility_weak,
    admissibility_weakly_singular, Admissibility, AlignmentBand, ParamsError, PhysParams, Regime,
};
use crate::rearrange::BoundsConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("admissibility condition fails for {kind} (margin {margin:e})")]
    AdmissibilityViolated { kind: RegionKind, margin: f64 },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Aux(#[from] AuxError),
    #[error("boundary construction failed: {0}")]
    Construction(String),
}

impl RegionError {
    pub fn is_regime_mismatch(&self) -> bool {
        matches!(self, RegionError::Params(ParamsError::RegimeMismatch(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Sigma1,
    Sigma2,
    Sigma3,
    Delta1,
    Delta2,
    SigmaL,
}

impl RegionKind {
    pub fn is_subcritical(self) -> bool {
        !matches!(self, RegionKind::Delta1 | RegionKind::Delta2)
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::Sigma1 => "sigma1",
            RegionKind::Sigma2 => "sigma2",
            RegionKind::Sigma3 => "sigma3",
            RegionKind::Delta1 => "delta1",
            RegionKind::Delta2 => "delta2",
            RegionKind::SigmaL => "sigma_l",
        }
    }
}

impl std::fmt::Display for RegionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Weak, medium or strong alignment relative to 2√(kc).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentCase {
    Weak,
    Medium,
    Strong,
}

impl AlignmentCase {
    pub fn of(params: &PhysParams, band: &AlignmentBand) -> Self {
        if params.regime(band.beta_max) == Regime::Spiral {
            AlignmentCase::Weak
        } else if params.regime(band.beta_min) == Regime::Spiral {
            AlignmentCase::Medium
        } else {
            AlignmentCase::Strong
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionOptions {
    pub samples_per_segment: usize,
    /// q_cap = q_cap_factor / c for unbounded regions.
    pub q_cap_factor: f64,
    /// ρ_cap = rho_cap_factor · c for (G, ρ) exports of axis-touching boundaries.
    pub rho_cap_factor: f64,
    /// Indeterminate band half-width relative to the boundary diameter.
    pub epsilon_rel: f64,
    pub literal_paper_boundary: bool,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            samples_per_segment: 512,
            q_cap_factor: 1e3,
            rho_cap_factor: 1e3,
            epsilon_rel: 1e-6,
            literal_paper_boundary: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoZeroRay {
    All,
    /// G > threshold.
    Above { threshold: f64 },
    /// G < threshold.
    Below { threshold: f64 },
}

impl RhoZeroRay {
    fn signed_distance(&self, g: f64) -> f64 {
        match *self {
            RhoZeroRay::All => f64::INFINITY,
            RhoZeroRay::Above { threshold } => g - threshold,
            RhoZeroRay::Below { threshold } => threshold - g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScaffold {
    pub kind: RegionKind,
    pub case: AlignmentCase,
    pub p1: f64,
    pub p2: Option<f64>,
    pub p3: Option<f64>,
    pub t1: f64,
    pub t2: Option<f64>,
    pub t3: Option<f64>,
    pub q_star: Option<f64>,
    pub beta_min: f64,
    pub beta_max: f64,
    pub admissibility: Option<Admissibility>,
    pub rho_zero_ray: Option<RhoZeroRay>,
    /// Lower edge q of the region (0, or 1/ρ_max for floored constructions).
    pub floor_q: f64,
    pub q_cap: Option<f64>,
}

impl RegionScaffold {
    pub fn band(&self) -> AlignmentBand {
        AlignmentBand { beta_min: self.beta_min, beta_max: self.beta_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    #[serde(rename = "pq")]
    PQ,
    #[serde(rename = "grho")]
    GRho,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Closure {
    Bounded,
    UnboundedWithCap { q_cap: f64 },
}

/// One labelled boundary piece; `times` is `None` for straight pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub beta: Option<f64>,
    pub times: Vec<Option<f64>>,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Inside,
    Outside,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub label: Verdict,
    /// Signed distance to the sampled boundary in the (w, s) plane, positive inside.
    pub distance_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Right,
    Left,
}

#[derive(Debug, Clone)]
enum Shape {
    /// Inside the closed polygon, or its complement within q > 0.
    Enclosed { complement: bool },
    /// One side of a q-monotone wall above a horizontal floor.
    Wall { side: Side, floor_q: f64, wall: Vec<PhasePoint> },
}

#[derive(Debug)]
struct Geometry {
    shape: Shape,
    index: SegmentIndex,
    epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct Region {
    pub scaffold: RegionScaffold,
    pub boundary: Vec<Segment>,
    pub closure: Closure,
    pub plane: Plane,
    pub rho_zero_ray: Option<RhoZeroRay>,
    pub epsilon_boundary: f64,
    pub params: PhysParams,
    pq_boundary: Vec<Segment>,
    geometry: Arc<Geometry>,
}

struct Builder<'a> {
    params: &'a PhysParams,
    opts: &'a RegionOptions,
    segments: Vec<Segment>,
}

impl<'a> Builder<'a> {
    fn new(params: &'a PhysParams, opts: &'a RegionOptions) -> Self {
        Self { params, opts, segments: Vec::new() }
    }

    fn aux(&self, beta: f64, start: PhasePoint) -> Result<AuxTrajectory, RegionError> {
        Ok(solve_aux(beta, start, self.params)?)
    }

    fn curve(&mut self, label: &str, traj: &AuxTrajectory, t_end: f64) -> Vec<PhasePoint> {
        let times = sample_times(0.0, t_end, self.opts.samples_per_segment);
        let pts: Vec<PhasePoint> = times.iter().map(|&t| traj.evaluate(t)).collect();
        self.segments.push(Segment {
            label: label.into(),
            beta: Some(traj.beta),
            times: times.into_iter().map(Some).collect(),
            points: pts.iter().map(|x| [x.p, x.q]).collect(),
        });
        pts
    }

    fn line(&mut self, label: &str, a: PhasePoint, b: PhasePoint) {
        self.segments.push(Segment {
            label: label.into(),
            beta: None,
            times: vec![None, None],
            points: vec![[a.p, a.q], [b.p, b.q]],
        });
    }

    fn q_cap(&self) -> f64 {
        self.opts.q_cap_factor / self.params.c
    }

    fn finish(self, scaffold: RegionScaffold, shape: Shape, closure: Closure, ray: Option<RhoZeroRay>) -> Result<Region, RegionError> {
        let c = self.params.c;
        let mut all: Vec<PhasePoint> = Vec::new();
        for s in &self.segments {
            all.extend(s.points.iter().map(|v| PhasePoint::new(v[0], v[1])));
        }
        if all.iter().any(|x| !(x.p.is_finite() && x.q.is_finite())) {
            return Err(RegionError::Construction(format!("{} boundary has non-finite samples", scaffold.kind)));
        }
        let index = match &shape {
            Shape::Enclosed { .. } => SegmentIndex::from_polyline(&all, true),
            Shape::Wall { wall, .. } => SegmentIndex::from_polyline(wall, false),
        };
        let (mut pmin, mut pmax, mut qmin, mut qmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for x in all.iter().filter(|x| x.q <= 10.0 / c) {
            pmin = pmin.min(x.p);
            pmax = pmax.max(x.p);
            qmin = qmin.min(x.q);
            qmax = qmax.max(x.q);
        }
        let diameter = (pmax - pmin).hypot(qmax - qmin);
        let epsilon = self.opts.epsilon_rel * diameter;
        Ok(Region {
            scaffold,
            boundary: self.segments.clone(),
            closure,
            plane: Plane::PQ,
            rho_zero_ray: ray,
            epsilon_boundary: epsilon,
            params: *self.params,
            pq_boundary: self.segments,
            geometry: Arc::new(Geometry { shape, index, epsilon }),
        })
    }
}

fn violated(kind: RegionKind, adm: Admissibility) -> Result<(), RegionError> {
    if adm.holds {
        Ok(())
    } else {
        Err(RegionError::AdmissibilityViolated { kind, margin: adm.margin })
    }
}

fn mismatch(msg: String) -> RegionError {
    RegionError::Params(ParamsError::RegimeMismatch(msg))
}

/// First negative time at which a spiral trajectory started on q = 1/c with
/// p > β/c turns around (q' = 0); brackets the descent to a floor.
fn turning_time(params: &PhysParams, beta: f64) -> f64 {
    let theta = 0.5 * (4.0 * params.k * params.c - beta * beta).sqrt();
    (-PI + (2.0 * theta).atan2(beta)) / theta
}

/// q* of the β_min arc started at (p1, 1/c).
pub fn apex_q(params: &PhysParams, beta_min: f64, p1: f64) -> Result<f64, ParamsError> {
    let c = params.c;
    let e = params.ext_exp(beta_min)?;
    Ok(1.0 / c + (params.pi_over_z(beta_min) - e.ln()).exp() * (beta_min / c - p1) / params.sqrt_kc())
}

/// p2 from the half-turn of the β arc started at (p1, 1/c).
pub fn half_turn_p2(params: &PhysParams, beta: f64, p1: f64) -> f64 {
    let x = params.pi_over_z(beta).exp();
    beta / params.c * (1.0 + x) - p1 * x
}

fn wall_points(parts: &[&[PhasePoint]]) -> Result<Vec<PhasePoint>, RegionError> {
    let mut wall: Vec<PhasePoint> = Vec::new();
    for part in parts {
        for &x in part.iter() {
            if let Some(last) = wall.last() {
                let tol = 1e-12 * last.q.abs().max(1.0);
                if x.q <= last.q && x.q >= last.q - tol {
                    continue;
                }
                if x.q < last.q {
                    return Err(RegionError::Construction(format!(
                        "wall is not monotone in q near ({}, {})",
                        x.p, x.q
                    )));
                }
            }
            wall.push(x);
        }
    }
    Ok(wall)
}

pub fn build_sigma1(params: &PhysParams, band: &AlignmentBand, opts: &RegionOptions) -> Result<Region, RegionError> {
    let kind = RegionKind::Sigma1;
    let adm = admissibility_weak(params, band)?;
    violated(kind, adm)?;
    let c = params.c;
    let (bmin, bmax) = (band.beta_min, band.beta_max);
    let mut b = Builder::new(params, opts);

    let c1 = b.aux(bmax, PhasePoint::ORIGIN)?;
    let t1 = crossing_time_q(&c1, 1.0 / c, CrossingMode::FirstNegative)?;
    let p1 = bmax / c - params.sqrt_k_over_c() * params.ext_exp(bmax)?;
    b.curve("C1", &c1, t1);

    let c2 = b.aux(bmin, PhasePoint::new(p1, 1.0 / c))?;
    let t2 = crossing_time_q(&c2, 1.0 / c, CrossingMode::FirstNegative)?;
    let p2 = half_turn_p2(params, bmin, p1);
    b.curve("C2", &c2, t2);

    let c3 = b.aux(bmax, PhasePoint::new(p2, 1.0 / c))?;
    let t3 = crossing_time_q(&c3, 0.0, CrossingMode::LargestNegativeInBracket(turning_time(params, bmax), 0.0))?;
    let p3 = c3.evaluate(t3).p;
    b.curve("C3", &c3, t3);
    b.line("axis", PhasePoint::new(p3, 0.0), PhasePoint::ORIGIN);

    let scaffold = RegionScaffold {
        kind,
        case: AlignmentCase::Weak,
        p1,
        p2: Some(p2),
        p3: Some(p3),
        t1,
        t2: Some(t2),
        t3: Some(t3),
        q_star: Some(apex_q(params, bmin, p1)?),
        beta_min: bmin,
        beta_max: bmax,
        admissibility: Some(adm),
        rho_zero_ray: None,
        floor_q: 0.0,
        q_cap: None,
    };
    b.finish(scaffold, Shape::Enclosed { complement: false }, Closure::Bounded, None)
}

pub fn build_sigma2(params: &PhysParams, band: &AlignmentBand, opts: &RegionOptions) -> Result<Region, RegionError> {
    let kind = RegionKind::Sigma2;
    params.require_force()?;
    if params.regime(band.beta_min) == Regime::Spiral {
        return Err(mismatch(format!("strong alignment needs beta_min^2 >= 4kc (beta_min={})", band.beta_min)));
    }
    let c = params.c;
    let (bmin, bmax) = (band.beta_min, band.beta_max);
    let mut b = Builder::new(params, opts);
    let q_cap = b.q_cap();

    let c1 = b.aux(bmax, PhasePoint::ORIGIN)?;
    let t1 = crossing_time_q(&c1, 1.0 / c, CrossingMode::FirstNegative)?;
    let p1 = bmax / c - params.sqrt_k_over_c() * params.ext_exp(bmax)?;
    let w1 = b.curve("C1", &c1, t1);

    let c2 = b.aux(bmin, PhasePoint::new(p1, 1.0 / c))?;
    let t_cap = crossing_time_q(&c2, q_cap, CrossingMode::UniqueNegative)?;
    let w2 = b.curve("C2", &c2, t_cap);

    let wall = wall_points(&[&w1, &w2])?;
    let ray = RhoZeroRay::Above { threshold: params.lower_root(bmin).unwrap_or(bmin / 2.0) };
    let scaffold = RegionScaffold {
        kind,
        case: AlignmentCase::Strong,
        p1,
        p2: None,
        p3: None,
        t1,
        t2: None,
        t3: None,
        q_star: None,
        beta_min: bmin,
        beta_max: bmax,
        admissibility: None,
        rho_zero_ray: Some(ray),
        floor_q: 0.0,
        q_cap: Some(q_cap),
    };
    b.finish(
        scaffold,
        Shape::Wall { side: Side::Right, floor_q: 0.0, wall },
        Closure::UnboundedWithCap { q_cap },
        Some(ray),
    )
}

pub fn build_sigma3(params: &PhysParams, band: &AlignmentBand, opts: &RegionOptions) -> Result<Region, RegionError> {
    let kind = RegionKind::Sigma3;
    params.require_force()?;
    if params.regime(band.beta_min) == Regime::Node || params.regime(band.beta_max) == Regime::Spiral {
        return Err(mismatch(format!(
            "medium alignment needs beta_min^2 < 4kc <= beta_max^2 (band [{}, {}])",
            band.beta_min, band.beta_max
        )));
    }
    let adm = admissibility_medium(params, band)?;
    violated(kind, adm)?;
    if params.regime(band.beta_min) == Regime::Degenerate {
        // t2 = −π/θ̃ → −∞: the closed curve opens into the strong-case wall
        let mut r = build_sigma2(params, band, opts)?;
        r.scaffold.kind = kind;
        r.scaffold.case = AlignmentCase::Medium;
        r.scaffold.admissibility = Some(adm);
        return Ok(r);
    }
    let c = params.c;
    let (bmin, bmax) = (band.beta_min, band.beta_max);
    let mut b = Builder::new(params, opts);

    let c1 = b.aux(bmax, PhasePoint::ORIGIN)?;
    let t1 = crossing_time_q(&c1, 1.0 / c, CrossingMode::FirstNegative)?;
    let p1 = bmax / c - params.sqrt_k_over_c() * params.ext_exp(bmax)?;
    b.curve("C1", &c1, t1);

    let c2 = b.aux(bmin, PhasePoint::new(p1, 1.0 / c))?;
    let t2 = crossing_time_q(&c2, 1.0 / c, CrossingMode::FirstNegative)?;
    let p2 = half_turn_p2(params, bmin, p1);
    if !p2.is_finite() {
        return Err(RegionError::Construction(format!("p2 overflows for beta_min={bmin} this close to 2*sqrt(kc)")));
    }
    b.curve("C2", &c2, t2);

    let c3 = b.aux(bmax, PhasePoint::new(p2, 1.0 / c))?;
    let t3 = crossing_time_q(&c3, 0.0, CrossingMode::UniqueNegative)?;
    let p3 = c3.evaluate(t3).p;
    b.curve("C3", &c3, t3);
    b.line("axis", PhasePoint::new(p3, 0.0), PhasePoint::ORIGIN);

    let scaffold = RegionScaffold {
        kind,
        case: AlignmentCase::Medium,
        p1,
        p2: Some(p2),
        p3: Some(p3),
        t1,
        t2: Some(t2),
        t3: Some(t3),
        q_star: Some(apex_q(params, bmin, p1)?),
        beta_min: bmin,
        beta_max: bmax,
        admissibility: Some(adm),
        rho_zero_ray: None,
        floor_q: 0.0,
        q_cap: None,
    };
    b.finish(scaffold, Shape::Enclosed { complement: false }, Closure::Bounded, None)
}

pub fn build_delta1(params: &PhysParams, band: &AlignmentBand, opts: &RegionOptions) -> Result<Region, RegionError> {
    let kind = RegionKind::Delta1;
    params.require_force()?;
    if params.regime(band.beta_max) != Regime::Spiral {
        return Err(mismatch(format!("weak alignment needs beta_max^2 < 4kc (beta_max={})", band.beta_max)));
    }
    let c = params.c;
    let (bmin, bmax) = (band.beta_min, band.beta_max);
    let mut b = Builder::new(params, opts);

    let b1 = b.aux(bmin, PhasePoint::ORIGIN)?;
    let t1 = crossing_time_q(&b1, 1.0 / c, CrossingMode::FirstNegative)?;
    let p1 = bmin / c - params.sqrt_k_over_c() * params.ext_exp(bmin)?;
    b.curve("B1", &b1, t1);

    let b2 = b.aux(bmax, PhasePoint::new(p1, 1.0 / c))?;
    let t2 = crossing_time_q(&b2, 1.0 / c, CrossingMode::FirstNegative)?;
    let p2 = half_turn_p2(params, bmax, p1);
    b.curve("B2", &b2, t2);

    let b3 = b.aux(bmin, PhasePoint::new(p2, 1.0 / c))?;
    let t3 = crossing_time_q(&b3, 0.0, CrossingMode::LargestNegativeInBracket(turning_time(params, bmin), 0.0))?;
    let p3 = b3.evaluate(t3).p;
    b.curve("B3", &b3, t3);
    b.line("axis", PhasePoint::new(p3, 0.0), PhasePoint::ORIGIN);

    let ray = RhoZeroRay::All;
    let scaffold = RegionScaffold {
        kind,
        case: AlignmentCase::Weak,
        p1,
        p2: Some(p2),
        p3: Some(p3),
        t1,
        t2: Some(t2),
        t3: Some(t3),
        q_star: Some(apex_q(params, bmax, p1)?),
        beta_min: bmin,
        beta_max: bmax,
        admissibility: None,
        rho_zero_ray: Some(ray),
        floor_q: 0.0,
        q_cap: None,
    };
    let q_cap = b.q_cap();
    b.finish(scaffold, Shape::Enclosed { complement: true }, Closure::UnboundedWithCap { q_cap }, Some(ray))
}

pub fn build_delta2(params: &PhysParams, band: &AlignmentBand, opts: &RegionOptions) -> Result<Region, RegionError> {
    let kind = RegionKind::Delta2;
    params.require_force()?;
    if params.regime(band.beta_max) == Regime::Spiral {
        return Err(mismatch(format!("needs beta_max^2 >= 4kc (beta_max={})", band.beta_max)));
    }
    let c = params.c;
    let (bmin, bmax) = (band.beta_min, band.beta_max);
    let mut b = Builder::new(params, opts);
    let q_cap = b.q_cap();

    let b1 = b.aux(bmin, PhasePoint::ORIGIN)?;
    let t1 = crossing_time_q(&b1, 1.0 / c, CrossingMode::FirstNegative)?;
    let p1 = bmin / c - params.sqrt_k_over_c() * params.ext_exp(bmin)?;
    let w1 = b.curve("B1", &b1, t1);

    let b2 = b.aux(bmax, PhasePoint::new(p1, 1.0 / c))?;
    let t_cap = crossing_time_q(&b2, q_cap, CrossingMode::UniqueNegative)?;
    let w2 = b.curve("B2", &b2, t_cap);

    let wall = wall_points(&[&w1, &w2])?;
    let ray = RhoZeroRay::Below { threshold: params.lower_root(bmax).unwrap_or(bmax / 2.0) };
    let case = AlignmentCase::of(params, band);
    let scaffold = RegionScaffold {
        kind,
        case,
        p1,
        p2: None,
        p3: None,
        t1,
        t2: None,
        t3: None,
        q_star: None,
        beta_min: bmin,
        beta_max: bmax,
        admissibility: None,
        rho_zero_ray: Some(ray),
        floor_q: 0.0,
        q_cap: Some(q_cap),
    };
    b.finish(
        scaffold,
        Shape::Wall { side: Side::Left, floor_q: 0.0, wall },
        Closure::UnboundedWithCap { q_cap },
        Some(ray),
    )
}

/// Subcritical region for weakly singular kernels, floored at q = 1/ρ_max.
pub fn build_sigma_l(
    params: &PhysParams,
    band: &AlignmentBand,
    cfg: &BoundsConfig,
    opts: &RegionOptions,
) -> Result<Region, RegionError> {
    let kind = RegionKind::SigmaL;
    params.require_force()?;
    if cfg.rho_max.is_nan() || cfg.rho_max <= params.c {
        return Err(ParamsError::BadBoundsConfig { rho_min: cfg.rho_min, rho_max: cfg.rho_max, c: params.c }.into());
    }
    let c = params.c;
    let (bmin, bmax) = (band.beta_min, band.beta_max);
    let floor_q = 1.0 / cfg.rho_max;
    let case = AlignmentCase::of(params, band);
    let adm = match case {
        AlignmentCase::Weak => admissibility_weakly_singular(params, band, cfg)?,
        AlignmentCase::Medium => admissibility_floor_p2(params, band, cfg)?,
        AlignmentCase::Strong => admissibility_floor_p1(params, band, cfg)?,
    };
    violated(kind, adm)?;
    let mut b = Builder::new(params, opts);
    let q_cap = b.q_cap();

    let start = PhasePoint::new(bmax * floor_q, floor_q);
    let literal_strong = case == AlignmentCase::Strong && opts.literal_paper_boundary;
    if literal_strong {
        b.line("C0", PhasePoint::new(start.p, 0.0), start);
    }
    let c1 = b.aux(bmax, start)?;
    let t1 = crossing_time_q(&c1, 1.0 / c, CrossingMode::FirstNegative)?;
    let p1 = bmax / c - params.sqrt_kc() * (1.0 / c - floor_q) * params.ext_exp(bmax)?;
    let w1 = b.curve("C1", &c1, t1);
    let c2 = b.aux(bmin, PhasePoint::new(p1, 1.0 / c))?;

    if case == AlignmentCase::Strong {
        let t_cap = crossing_time_q(&c2, q_cap, CrossingMode::UniqueNegative)?;
        let w2 = b.curve("C2", &c2, t_cap);
        let base = if literal_strong { vec![PhasePoint::new(start.p, 0.0)] } else { Vec::new() };
        let wall = wall_points(&[&base, &w1, &w2])?;
        let floor = if literal_strong { 0.0 } else { floor_q };
        let scaffold = RegionScaffold {
            kind,
            case,
            p1,
            p2: None,
            p3: None,
            t1,
            t2: None,
            t3: None,
            q_star: None,
            beta_min: bmin,
            beta_max: bmax,
            admissibility: Some(adm),
            rho_zero_ray: None,
            floor_q: floor,
            q_cap: Some(q_cap),
        };
        return b.finish(
            scaffold,
            Shape::Wall { side: Side::Right, floor_q: floor, wall },
            Closure::UnboundedWithCap { q_cap },
            None,
        );
    }

    let t2 = crossing_time_q(&c2, 1.0 / c, CrossingMode::FirstNegative)?;
    let p2 = half_turn_p2(params, bmin, p1);
    b.curve("C2", &c2, t2);
    let c3 = b.aux(bmax, PhasePoint::new(p2, 1.0 / c))?;
    let mode = if case == AlignmentCase::Weak {
        CrossingMode::LargestNegativeInBracket(turning_time(params, bmax), 0.0)
    } else {
        CrossingMode::UniqueNegative
    };
    let t3 = crossing_time_q(&c3, floor_q, mode)?;
    let p3 = c3.evaluate(t3).p;
    b.curve("C3", &c3, t3);
    b.line("C4", PhasePoint::new(p3, floor_q), start);

    let scaffold = RegionScaffold {
        kind,
        case,
        p1,
        p2: Some(p2),
        p3: Some(p3),
        t1,
        t2: Some(t2),
        t3: Some(t3),
        q_star: Some(apex_q(params, bmin, p1)?),
        beta_min: bmin,
        beta_max: bmax,
        admissibility: Some(adm),
        rho_zero_ray: None,
        floor_q,
        q_cap: None,
    };
    b.finish(scaffold, Shape::Enclosed { complement: false }, Closure::Bounded, None)
}

/// Subcritical and supercritical regions appropriate for the band.
/// The subcritical entry is skipped (not an error) when it fails to close.
pub fn regions_for_band(
    params: &PhysParams,
    band: &AlignmentBand,
    opts: &RegionOptions,
) -> Result<Vec<Region>, RegionError> {
    let mut out = Vec::new();
    let sub = match AlignmentCase::of(params, band) {
        AlignmentCase::Weak => build_sigma1(params, band, opts),
        AlignmentCase::Medium => build_sigma3(params, band, opts),
        AlignmentCase::Strong => build_sigma2(params, band, opts),
    };
    match sub {
        Ok(r) => out.push(r),
        Err(RegionError::AdmissibilityViolated { .. }) => {}
        Err(e) => return Err(e),
    }
    out.push(match AlignmentCase::of(params, band) {
        AlignmentCase::Weak => build_delta1(params, band, opts)?,
        _ => build_delta2(params, band, opts)?,
    });
    Ok(out)
}

impl Region {
    pub fn kind(&self) -> RegionKind {
        self.scaffold.kind
    }

    pub fn is_bounded(&self) -> bool {
        self.closure == Closure::Bounded
    }

    /// Boundary samples in the (w, s) plane regardless of `plane`.
    pub fn pq_boundary(&self) -> &[Segment] {
        &self.pq_boundary
    }

    /// Membership of (p, q) with signed distance in the (w, s) plane.
    pub fn membership_pq(&self, x: PhasePoint) -> MembershipVerdict {
        self.membership_capped(x, f64::INFINITY)
    }

    /// Label only; cheaper because distances beyond ε are never resolved.
    pub fn label_pq(&self, x: PhasePoint) -> Verdict {
        self.membership_capped(x, 2.0 * self.geometry.epsilon).label
    }

    fn membership_capped(&self, x: PhasePoint, cap: f64) -> MembershipVerdict {
        let g = &self.geometry;
        if !(x.p.is_finite() && x.q.is_finite()) {
            return MembershipVerdict { label: Verdict::Outside, distance_estimate: f64::NEG_INFINITY };
        }
        let (inside, dist) = match &g.shape {
            Shape::Enclosed { complement: false } => (g.index.winding(x) != 0, g.index.distance_capped(x, cap)),
            Shape::Enclosed { complement: true } => {
                let d = g.index.distance_capped(x, cap).min(x.q.abs());
                (x.q > 0.0 && g.index.winding(x) == 0, d)
            }
            Shape::Wall { side, floor_q, wall } => wall_membership(&g.index, *side, *floor_q, wall, x, cap),
        };
        let signed = if inside { dist } else { -dist };
        let label = if dist < g.epsilon {
            Verdict::Indeterminate
        } else if inside {
            Verdict::Inside
        } else {
            Verdict::Outside
        };
        MembershipVerdict { label, distance_estimate: signed }
    }

    /// Membership of a (G, ρ) state; ρ = 0 is answered by the vacuum ray.
    pub fn membership_grho(&self, g: f64, rho: f64) -> MembershipVerdict {
        if rho > 0.0 {
            return self.membership_pq(PhasePoint::from_grho(g, rho));
        }
        if rho < 0.0 || !g.is_finite() {
            return MembershipVerdict { label: Verdict::Outside, distance_estimate: rho.min(0.0) };
        }
        match self.rho_zero_ray {
            None => MembershipVerdict { label: Verdict::Outside, distance_estimate: f64::NEG_INFINITY },
            Some(ray) => {
                let d = ray.signed_distance(g);
                let label = if d.abs() < self.geometry.epsilon {
                    Verdict::Indeterminate
                } else if d > 0.0 {
                    Verdict::Inside
                } else {
                    Verdict::Outside
                };
                MembershipVerdict { label, distance_estimate: d }
            }
        }
    }

    pub fn membership(&self, point: [f64; 2], plane: Plane) -> MembershipVerdict {
        match plane {
            Plane::PQ => self.membership_pq(PhasePoint::new(point[0], point[1])),
            Plane::GRho => self.membership_grho(point[0], point[1]),
        }
    }

    /// Random interior point at least `min_distance` from the boundary, drawn
    /// by rejection from a box around the part of the region with q ≤ 4·max(1/c, q*).
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R, min_distance: f64) -> Option<PhasePoint> {
        let q_lim = 4.0 * (1.0 / self.params.c).max(self.scaffold.q_star.unwrap_or(0.0));
        let (mut pmin, mut pmax, mut qmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in self.pq_boundary.iter().flat_map(|s| s.points.iter()).filter(|v| v[1] <= q_lim) {
            pmin = pmin.min(v[0]);
            pmax = pmax.max(v[0]);
            qmax = qmax.max(v[1]);
        }
        let w = pmax - pmin;
        let (plo, phi, qlo, qhi) = match &self.geometry.shape {
            Shape::Enclosed { complement: false } => (pmin, pmax, self.scaffold.floor_q, qmax),
            Shape::Enclosed { complement: true } => (pmin - w, pmax + w, 0.0, 1.5 * qmax),
            Shape::Wall { side: Side::Right, floor_q, .. } => (pmin, pmax + w, *floor_q, qmax),
            Shape::Wall { side: Side::Left, floor_q, .. } => (pmin - w, pmax, *floor_q, qmax),
        };
        for _ in 0..200_000 {
            let x = PhasePoint::new(rng.gen_range(plo..=phi), rng.gen_range(qlo..=qhi));
            let v = self.membership_pq(x);
            if v.label == Verdict::Inside && v.distance_estimate > min_distance {
                return Some(x);
            }
        }
        None
    }

    /// Image under F; samples with q below 1/ρ_cap are cut.
    pub fn to_grho(&self, rho_cap: f64) -> Region {
        let mut out = self.clone();
        out.plane = Plane::GRho;
        out.boundary = self
            .pq_boundary
            .iter()
            .filter_map(|s| {
                let mut times = Vec::new();
                let mut points = Vec::new();
                for (t, v) in s.times.iter().zip(&s.points) {
                    if v[1] > 0.0 && v[1] >= 1.0 / rho_cap {
                        times.push(*t);
                        points.push([v[0] / v[1], 1.0 / v[1]]);
                    }
                }
                (points.len() >= 2).then(|| Segment { label: s.label.clone(), beta: s.beta, times, points })
            })
            .collect();
        out
    }

    pub fn write_boundary_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        match self.plane {
            Plane::PQ => w.write_record(["segment_label", "t", "p", "q"])?,
            Plane::GRho => w.write_record(["segment_label", "t", "G", "rho"])?,
        }
        for s in &self.boundary {
            for (t, v) in s.times.iter().zip(&s.points) {
                let t = t.map(|t| format!("{t:.17e}")).unwrap_or_default();
                w.write_record([s.label.clone(), t, format!("{:.17e}", v[0]), format!("{:.17e}", v[1])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn wall_p(wall: &[PhasePoint], q: f64) -> f64 {
    let n = wall.len();
    if q <= wall[0].q {
        return wall[0].p;
    }
    let (a, b) = if q >= wall[n - 1].q {
        (wall[n - 2], wall[n - 1])
    } else {
        let j = wall.partition_point(|x| x.q <= q);
        (wall[j - 1], wall[j])
    };
    if b.q == a.q {
        return b.p;
    }
    a.p + (b.p - a.p) * (q - a.q) / (b.q - a.q)
}

fn wall_membership(
    index: &SegmentIndex,
    side: Side,
    floor_q: f64,
    wall: &[PhasePoint],
    x: PhasePoint,
    cap: f64,
) -> (bool, f64) {
    let n = wall.len();
    let last = wall[n - 1];
    let prev = wall[n - 2];
    let mut d = index.distance_capped(x, cap);
    d = d.min(ray_distance(last, (last.p - prev.p, last.q - prev.q), x));
    let foot = PhasePoint::new(wall_p(wall, floor_q), floor_q);
    let dir = match side {
        Side::Right => (1.0, 0.0),
        Side::Left => (-1.0, 0.0),
    };
    d = d.min(ray_distance(foot, dir, x));
    if wall[0].q > floor_q {
        d = d.min(segment_distance(foot, wall[0], x));
    }
    let beyond = x.p - wall_p(wall, x.q);
    let inside = x.q > floor_q
        && match side {
            Side::Right => beyond > 0.0,
            Side::Left => beyond < 0.0,
        };
    (inside, d)
}
