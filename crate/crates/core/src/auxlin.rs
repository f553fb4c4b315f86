//! Closed-form solutions of the linear auxiliary systems
//! p' = k − kcq, q' = p − βq, and crossing times of horizontal lines.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::params::{AuxEigen, PhysParams, Regime};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuxError {
    #[error("beta must be a nonnegative number (got {0})")]
    NegativeBeta(f64),
    #[error("no crossing of q = {q_target} found on t in [{lo}, {hi}]")]
    NoCrossing { q_target: f64, lo: f64, hi: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    BadBracket { lo: f64, hi: f64 },
}

/// A point of the (w, s) = (G/ρ, 1/ρ) phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub q: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    /// F(p, q) = (p/q, 1/q).
    pub fn to_grho(self) -> (f64, f64) {
        (self.p / self.q, 1.0 / self.q)
    }

    /// F⁻¹(G, ρ) = (G/ρ, 1/ρ).
    pub fn from_grho(g: f64, rho: f64) -> Self {
        Self { p: g / rho, q: 1.0 / rho }
    }

    pub fn dist(self, other: PhasePoint) -> f64 {
        (self.p - other.p).hypot(self.q - other.q)
    }
}

/// Exact solution of one auxiliary system through a given start point.
///
/// In deviation variables P = p − β/c, Q = q − 1/c the solution is
/// Q(t) = e^{−βt/2}(Q₀·ch(t) + B·sh(t)), B = P₀ − βQ₀/2, where (ch, sh) is
/// (cos θt, sin θt/θ), (cosh δt, sinh δt/δ) or (1, t) by regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxTrajectory {
    pub beta: f64,
    pub start: PhasePoint,
    pub eigen: AuxEigen,
    pub params: PhysParams,
    pub equilibrium: PhasePoint,
    q0: f64,
    b: f64,
}

pub fn solve_aux(beta: f64, start: PhasePoint, params: &PhysParams) -> Result<AuxTrajectory, AuxError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(AuxError::NegativeBeta(beta));
    }
    let c = params.c;
    let equilibrium = PhasePoint::new(beta / c, 1.0 / c);
    let q0 = start.q - equilibrium.q;
    let p0 = start.p - equilibrium.p;
    Ok(AuxTrajectory {
        beta,
        start,
        eigen: AuxEigen::new(beta, params),
        params: *params,
        equilibrium,
        q0,
        b: p0 - 0.5 * beta * q0,
    })
}

impl AuxTrajectory {
    /// e^{−βt/2}·ch(t) and e^{−βt/2}·sh(t).
    fn modes(&self, t: f64) -> (f64, f64) {
        let e = &self.eigen;
        match e.regime {
            Regime::Spiral => {
                let damp = (-0.5 * self.beta * t).exp();
                let (s, c) = (e.theta * t).sin_cos();
                (damp * c, damp * s / e.theta)
            }
            Regime::Degenerate => {
                let damp = (-e.gamma_plus * t).exp();
                (damp, damp * t)
            }
            Regime::Node => {
                let delta = e.half_disc.sqrt();
                let slow = (-e.gamma_minus * t).exp();
                let m = (-2.0 * delta * t).exp_m1();
                (slow * (1.0 + 0.5 * m), -slow * m / (2.0 * delta))
            }
        }
    }

    pub fn evaluate(&self, t: f64) -> PhasePoint {
        let (ch, sh) = self.modes(t);
        let q = self.q0 * ch + self.b * sh;
        let p = 0.5 * self.beta * q + self.q0 * self.eigen.half_disc * sh + self.b * ch;
        PhasePoint::new(self.equilibrium.p + p, self.equilibrium.q + q)
    }

    /// Right-hand side of the auxiliary system at `x`.
    pub fn velocity(&self, x: PhasePoint) -> PhasePoint {
        let PhysParams { k, c } = self.params;
        PhasePoint::new(k - k * c * x.q, x.p - self.beta * x.q)
    }

    pub fn q_dot(&self, t: f64) -> f64 {
        let x = self.evaluate(t);
        x.p - self.beta * x.q
    }

    /// Length of a natural scan step for crossing searches.
    fn scan_step(&self) -> f64 {
        let e = &self.eigen;
        match e.regime {
            Regime::Spiral => PI / e.theta / 64.0,
            _ => 1.0 / (64.0 * e.gamma_plus.max(1e-300)),
        }
    }

    /// Search horizon for backward scans before declaring no crossing.
    fn horizon(&self) -> f64 {
        let e = &self.eigen;
        match e.regime {
            Regime::Spiral => {
                let half = PI / e.theta;
                if self.beta > 0.0 {
                    (64.0 * half).min(1200.0 / self.beta)
                } else {
                    64.0 * half
                }
            }
            _ => 600.0 / e.gamma_plus.max(1e-300),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossingMode {
    /// Crossing with the largest negative time.
    FirstNegative,
    /// The only negative crossing of a backward-monotone trajectory.
    UniqueNegative,
    /// Largest root inside `[lo, hi]`, `hi <= 0`.
    LargestNegativeInBracket(f64, f64),
}

fn sign_left_of_zero(traj: &AuxTrajectory, q_target: f64) -> f64 {
    let r0 = traj.start.q - q_target;
    if r0 != 0.0 {
        return r0.signum();
    }
    // r(−ε) ≈ −ε·q'(0) + ε²/2·q''(0)
    let v = traj.velocity(traj.start);
    if v.q != 0.0 {
        return -v.q.signum();
    }
    let acc = v.p - traj.beta * v.q;
    if acc != 0.0 {
        acc.signum()
    } else {
        0.0
    }
}

fn polish(traj: &AuxTrajectory, q_target: f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = |t: f64| traj.evaluate(t).q - q_target;
    let mut rlo = r(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let rm = r(mid);
        if rm == 0.0 {
            return mid;
        }
        if (rm > 0.0) == (rlo > 0.0) {
            lo = mid;
            rlo = rm;
        } else {
            hi = mid;
        }
    }
    let (best, best_r) = if r(lo).abs() <= r(hi).abs() { (lo, r(lo).abs()) } else { (hi, r(hi).abs()) };
    let qd = traj.q_dot(best);
    if qd != 0.0 && qd.is_finite() {
        let t_new = best - r(best) / qd;
        if t_new < 0.0 && r(t_new).abs() < best_r {
            return t_new;
        }
    }
    best
}

/// Time t < 0 at which the trajectory crosses q = `q_target`.
pub fn crossing_time_q(traj: &AuxTrajectory, q_target: f64, mode: CrossingMode) -> Result<f64, AuxError> {
    let r = |t: f64| traj.evaluate(t).q - q_target;
    match mode {
        CrossingMode::FirstNegative | CrossingMode::UniqueNegative => {
            let s0 = sign_left_of_zero(traj, q_target);
            let horizon = traj.horizon();
            let mut h = traj.scan_step();
            let grow = if mode == CrossingMode::UniqueNegative || traj.eigen.regime != Regime::Spiral {
                1.05
            } else {
                1.0
            };
            let mut t_hi = 0.0;
            loop {
                let t_lo = t_hi - h;
                let rl = r(t_lo);
                if !rl.is_finite() || -t_lo > horizon {
                    return Err(AuxError::NoCrossing { q_target, lo: t_lo.max(-horizon), hi: 0.0 });
                }
                if rl == 0.0 {
                    return Ok(t_lo);
                }
                if s0 != 0.0 && rl.signum() != s0 {
                    return Ok(polish(traj, q_target, t_lo, t_hi));
                }
                t_hi = t_lo;
                h *= grow;
            }
        }
        CrossingMode::LargestNegativeInBracket(lo, hi) => {
            if !(lo < hi && hi <= 0.0) {
                return Err(AuxError::BadBracket { lo, hi });
            }
            let n = 1024;
            let mut t_hi = hi;
            let mut r_hi = if hi == 0.0 { sign_left_of_zero(traj, q_target) } else { r(hi) };
            if r_hi == 0.0 && hi < 0.0 {
                return Ok(hi);
            }
            for i in 1..=n {
                let t_lo = hi + (lo - hi) * i as f64 / n as f64;
                let rl = r(t_lo);
                if rl == 0.0 {
                    return Ok(t_lo);
                }
                if r_hi != 0.0 && rl.signum() != r_hi.signum() {
                    return Ok(polish(traj, q_target, t_lo, t_hi));
                }
                t_hi = t_lo;
                r_hi = rl;
            }
            Err(AuxError::NoCrossing { q_target, lo, hi })
        }
    }
}

/// Uniform-in-time samples between `t_from` and `t_to`, endpoints exact.
pub fn sample_times(t_from: f64, t_to: f64, n_samples: usize) -> Vec<f64> {
    let n = n_samples.max(2);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                t_to
            } else {
                t_from + (t_to - t_from) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Polyline of the trajectory on a time interval, sampled uniformly in t.
/// Accepts either orientation of the interval; samples run from `t_from` to `t_to`.
pub fn trajectory_segment(traj: &AuxTrajectory, t_from: f64, t_to: f64, n_samples: usize) -> Vec<PhasePoint> {
    sample_times(t_from, t_to, n_samples).into_iter().map(|t| traj.evaluate(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_is_reproduced() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        for beta in [0.0, 0.3, 2f64.sqrt(), 2.5] {
            let start = PhasePoint::new(0.3, 0.7);
            let tr = solve_aux(beta, start, &params).unwrap();
            let x = tr.evaluate(0.0);
            assert!((x.p - start.p).abs() < 1e-15 && (x.q - start.q).abs() < 1e-15);
        }
    }

    #[test]
    fn node_modes_match_exponentials() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        let tr = solve_aux(3.0, PhasePoint::new(1.0, 0.2), &params).unwrap();
        let (gp, gm) = (tr.eigen.gamma_plus, tr.eigen.gamma_minus);
        let delta = tr.eigen.half_disc.sqrt();
        for t in [-2.0, -0.3, 0.7] {
            let (ch, sh) = tr.modes(t);
            let ch_ref = 0.5 * ((-gm * t).exp() + (-gp * t).exp());
            let sh_ref = ((-gm * t).exp() - (-gp * t).exp()) / (2.0 * delta);
            assert!((ch - ch_ref).abs() < 1e-12 * ch_ref.abs().max(1.0));
            assert!((sh - sh_ref).abs() < 1e-12 * sh_ref.abs().max(1.0));
        }
    }

    #[test]
    fn bad_bracket_is_rejected() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        let tr = solve_aux(0.5, PhasePoint::ORIGIN, &params).unwrap();
        assert!(matches!(
            crossing_time_q(&tr, 1.0, CrossingMode::LargestNegativeInBracket(0.0, -1.0)),
            Err(AuxError::BadBracket { .. })
        ));
    }
}
