//! Physical parameters, alignment bands, the auxiliary eigenstructure and the
//! admissibility inequalities that decide whether a region closes.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::rearrange::BoundsConfig;

/// Relative tolerance for classifying β² = 4kc as the repeated-root case.
pub const DEGENERATE_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("physical parameters need k >= 0 and c > 0 (got k={k}, c={c})")]
    InvalidPhys { k: f64, c: f64 },
    #[error("this construction needs a positive force strength k (got k={0})")]
    NoElectricForce(f64),
    #[error("extended exponential is defined for tau > 0 (got {0})")]
    NonPositiveTau(f64),
    #[error("alignment band needs 0 <= beta_min <= beta_max (got [{beta_min}, {beta_max}])")]
    InvalidBand { beta_min: f64, beta_max: f64 },
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("bounds config needs rho_min < c < rho_max and rho_min >= 0 (got rho_min={rho_min}, rho_max={rho_max}, c={c})")]
    BadBoundsConfig { rho_min: f64, rho_max: f64, c: f64 },
    #[error("invalid influence model: {0}")]
    InvalidInfluence(String),
}

/// Force strength `k` and background density `c`.
///
/// `k = 0` is accepted so that the solver can run pure Euler-alignment or
/// Burgers dynamics; every phase-plane construction rejects it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub k: f64,
    pub c: f64,
}

impl PhysParams {
    pub fn new(k: f64, c: f64) -> Result<Self, ParamsError> {
        if !(k.is_finite() && c.is_finite() && k >= 0.0 && c > 0.0) {
            return Err(ParamsError::InvalidPhys { k, c });
        }
        Ok(Self { k, c })
    }

    /// Parameters with a prescribed λ = 2√(k/c).
    pub fn from_lambda(lambda: f64, c: f64) -> Result<Self, ParamsError> {
        Self::new(lambda * lambda * c / 4.0, c)
    }

    pub fn lambda(&self) -> f64 {
        2.0 * (self.k / self.c).sqrt()
    }

    pub fn sqrt_kc(&self) -> f64 {
        (self.k * self.c).sqrt()
    }

    pub fn sqrt_k_over_c(&self) -> f64 {
        (self.k / self.c).sqrt()
    }

    pub fn require_force(&self) -> Result<(), ParamsError> {
        if self.k > 0.0 {
            Ok(())
        } else {
            Err(ParamsError::NoElectricForce(self.k))
        }
    }

    /// β = 2√(kc), the spiral/node border.
    pub fn critical_beta(&self) -> f64 {
        2.0 * self.sqrt_kc()
    }

    pub fn regime(&self, beta: f64) -> Regime {
        let four_kc = 4.0 * self.k * self.c;
        let d = beta * beta - four_kc;
        if d.abs() <= DEGENERATE_RTOL * four_kc.max(f64::MIN_POSITIVE) {
            Regime::Degenerate
        } else if d < 0.0 {
            Regime::Spiral
        } else {
            Regime::Node
        }
    }

    /// τ = √(kc)/β, infinite for β = 0.
    pub fn tau(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            f64::INFINITY
        } else {
            self.sqrt_kc() / beta
        }
    }

    /// e^{atan z / z} for the given β, continued into the node regime.
    pub fn ext_exp(&self, beta: f64) -> Result<f64, ParamsError> {
        self.require_force()?;
        extended_exponential(self.tau(beta))
    }

    /// π/z = πβ/√(4kc − β²); only meaningful for spiral (or zero) β.
    /// Infinite at the degenerate border.
    pub fn pi_over_z(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        match self.regime(beta) {
            Regime::Spiral => PI * beta / (4.0 * self.k * self.c - beta * beta).sqrt(),
            _ => f64::INFINITY,
        }
    }

    /// Lower root (β − √(β² − 4kc))/2 of g² − βg + kc, computed without cancellation.
    pub fn lower_root(&self, beta: f64) -> Option<f64> {
        let d = beta * beta - 4.0 * self.k * self.c;
        match self.regime(beta) {
            Regime::Spiral => None,
            Regime::Degenerate => Some(beta / 2.0),
            Regime::Node => {
                let gp = 0.5 * (beta + d.sqrt());
                Some(self.k * self.c / gp)
            }
        }
    }

    /// Upper root (β + √(β² − 4kc))/2.
    pub fn upper_root(&self, beta: f64) -> Option<f64> {
        match self.regime(beta) {
            Regime::Spiral => None,
            Regime::Degenerate => Some(beta / 2.0),
            Regime::Node => Some(0.5 * (beta + (beta * beta - 4.0 * self.k * self.c).sqrt())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Spiral,
    Node,
    Degenerate,
}

/// A priori bounds on ψ∗ρ along characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBand {
    pub beta_min: f64,
    pub beta_max: f64,
}

impl AlignmentBand {
    pub fn new(beta_min: f64, beta_max: f64) -> Result<Self, ParamsError> {
        if !(beta_min.is_finite() && beta_max.is_finite() && 0.0 <= beta_min && beta_min <= beta_max) {
            return Err(ParamsError::InvalidBand { beta_min, beta_max });
        }
        Ok(Self { beta_min, beta_max })
    }

    /// Band c·[ψ_min, ψ_max] for a bounded kernel.
    pub fn from_kernel_bounds(params: &PhysParams, psi_min: f64, psi_max: f64) -> Result<Self, ParamsError> {
        Self::new(params.c * psi_min, params.c * psi_max)
    }

    pub fn constant(beta: f64) -> Result<Self, ParamsError> {
        Self::new(beta, beta)
    }

    pub fn width(&self) -> f64 {
        self.beta_max - self.beta_min
    }

    pub fn contains(&self, beta: f64) -> bool {
        self.beta_min <= beta && beta <= self.beta_max
    }
}

/// How the alignment kernel is described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfluenceModel {
    Bounded { psi_min: f64, psi_max: f64, l1_norm: f64 },
    WeaklySingular { l1_norm: f64, gamma: f64 },
    /// Cell averages of the periodic kernel at offsets `i/N`.
    Tabulated { samples: Vec<f64> },
}

impl InfluenceModel {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let bad = |m: String| Err(ParamsError::InvalidInfluence(m));
        match *self {
            InfluenceModel::Bounded { psi_min, psi_max, l1_norm } => {
                if !(0.0 <= psi_min && psi_min <= psi_max && psi_max.is_finite()) {
                    return bad(format!("need 0 <= psi_min <= psi_max < inf, got [{psi_min}, {psi_max}]"));
                }
                if !(psi_min - 1e-12 <= l1_norm && l1_norm <= psi_max + 1e-12) {
                    return bad(format!("l1_norm {l1_norm} outside [psi_min, psi_max]"));
                }
                Ok(())
            }
            InfluenceModel::WeaklySingular { l1_norm, gamma } => {
                if !(l1_norm.is_finite() && gamma >= 0.0 && 2.0 * gamma <= l1_norm * (1.0 + 1e-14)) {
                    return bad(format!("need 0 <= 2*gamma <= l1_norm, got gamma={gamma}, l1_norm={l1_norm}"));
                }
                Ok(())
            }
            InfluenceModel::Tabulated { ref samples } => {
                if samples.is_empty() {
                    return bad("empty kernel table".into());
                }
                if let Some(v) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return bad(format!("cell average {v} is not a nonnegative number"));
                }
                Ok(())
            }
        }
    }

    pub fn l1_norm(&self) -> f64 {
        match self {
            InfluenceModel::Bounded { l1_norm, .. } | InfluenceModel::WeaklySingular { l1_norm, .. } => *l1_norm,
            InfluenceModel::Tabulated { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub holds: bool,
    /// Right-hand side minus left-hand side; positive when the condition holds.
    pub margin: f64,
}

impl Admissibility {
    pub fn from_margin(margin: f64) -> Self {
        Self { holds: margin > 0.0, margin }
    }
}

/// Eigen-data of the auxiliary system p' = k − kcq, q' = p − βq.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxEigen {
    pub beta: f64,
    pub regime: Regime,
    /// ½√(4kc − β²) in the spiral regime, else 0.
    pub theta: f64,
    /// (β ± √(β² − 4kc))/2 in the node regime, β/2 when degenerate, else 0.
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// Signed β²/4 − kc.
    pub half_disc: f64,
}

impl AuxEigen {
    pub fn new(beta: f64, params: &PhysParams) -> Self {
        let kc = params.k * params.c;
        let regime = params.regime(beta);
        let half_disc = beta * beta / 4.0 - kc;
        let (theta, gp, gm) = match regime {
            Regime::Spiral => ((-half_disc).sqrt(), 0.0, 0.0),
            Regime::Degenerate => (0.0, beta / 2.0, beta / 2.0),
            Regime::Node => {
                let gp = beta / 2.0 + half_disc.sqrt();
                (0.0, gp, kc / gp)
            }
        };
        Self { beta, regime, theta, gamma_plus: gp, gamma_minus: gm, half_disc }
    }

    /// z = √(4kc/β² − 1) when real; `None` in the node regime.
    pub fn z(&self) -> Option<f64> {
        match self.regime {
            Regime::Spiral if self.beta == 0.0 => Some(f64::INFINITY),
            Regime::Spiral => Some(2.0 * self.theta / self.beta),
            Regime::Degenerate => Some(0.0),
            Regime::Node => None,
        }
    }
}

/// atan(z)/z as a function of s = z² (or atanh(y)/y with y² = −s), by series near 0.
fn atan_ratio(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        1.0 - s / 3.0 + s * s / 5.0 - s * s * s / 7.0
    } else if s > 0.0 {
        let z = s.sqrt();
        z.atan() / z
    } else {
        let y = (-s).sqrt();
        y.atanh() / y
    }
}

/// E(τ) = e^{atan z / z} with z = √(4τ² − 1), continued through τ = ½ to the
/// real form ((1+y)/(1−y))^{1/(2y)}, y = √(1 − 4τ²), for τ < ½.
pub fn extended_exponential(tau: f64) -> Result<f64, ParamsError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(ParamsError::NonPositiveTau(tau));
    }
    if tau.is_infinite() {
        return Ok(1.0);
    }
    let s = 4.0 * tau * tau - 1.0;
    if s.is_infinite() {
        return Ok(1.0);
    }
    Ok(atan_ratio(s).exp())
}

fn require_weak(params: &PhysParams, band: &AlignmentBand) -> Result<(), ParamsError> {
    params.require_force()?;
    if params.regime(band.beta_max) != Regime::Spiral {
        return Err(ParamsError::RegimeMismatch(format!(
            "weak alignment needs beta_max^2 < 4kc (beta_max={}, 4kc={})",
            band.beta_max,
            4.0 * params.k * params.c
        )));
    }
    Ok(())
}

/// Closure condition for the weak-alignment subcritical region.
pub fn admissibility_weak(params: &PhysParams, band: &AlignmentBand) -> Result<Admissibility, ParamsError> {
    require_weak(params, band)?;
    let pz_hat = params.pi_over_z(band.beta_max);
    let pz_tilde = params.pi_over_z(band.beta_min);
    let e_hat = params.ext_exp(band.beta_max)?;
    let lhs = band.width() * (1.0 + (-pz_tilde).exp()) / e_hat;
    let rhs = params.sqrt_kc() * (-(-pz_hat - pz_tilde).exp_m1());
    Ok(Admissibility::from_margin(rhs - lhs))
}

/// The weaker closure condition that only asks C2 to end to the right of β_max/c.
pub fn admissibility_weak_p2(params: &PhysParams, band: &AlignmentBand) -> Result<Admissibility, ParamsError> {
    params.require_force()?;
    let pz_tilde = params.pi_over_z(band.beta_min);
    let lhs = band.width() * (1.0 + (-pz_tilde).exp());
    let rhs = params.sqrt_kc() * params.ext_exp(band.beta_max)?;
    Ok(Admissibility::from_margin(rhs - lhs))
}

/// Closure condition for the medium-alignment subcritical region.
pub fn admissibility_medium(params: &PhysParams, band: &AlignmentBand) -> Result<Admissibility, ParamsError> {
    params.require_force()?;
    let lo = params.regime(band.beta_min);
    let hi = params.regime(band.beta_max);
    if lo == Regime::Node || hi == Regime::Spiral {
        return Err(ParamsError::RegimeMismatch(format!(
            "medium alignment needs beta_min^2 <= 4kc <= beta_max^2 (band [{}, {}], 4kc={})",
            band.beta_min,
            band.beta_max,
            4.0 * params.k * params.c
        )));
    }
    admissibility_weak_p2(params, band)
}

fn require_rho_max(params: &PhysParams, cfg: &BoundsConfig) -> Result<(), ParamsError> {
    if cfg.rho_max.is_nan() || cfg.rho_max <= params.c {
        return Err(ParamsError::BadBoundsConfig { rho_min: cfg.rho_min, rho_max: cfg.rho_max, c: params.c });
    }
    Ok(())
}

/// Closure condition for the weakly singular, weak-alignment region floored at q = 1/ρ_max.
pub fn admissibility_weakly_singular(
    params: &PhysParams,
    band: &AlignmentBand,
    cfg: &BoundsConfig,
) -> Result<Admissibility, ParamsError> {
    require_rho_max(params, cfg)?;
    require_weak(params, band)?;
    let pz_hat = params.pi_over_z(band.beta_max);
    let pz_tilde = params.pi_over_z(band.beta_min);
    let rhs = params.sqrt_kc() * (1.0 - params.c / cfg.rho_max) * params.ext_exp(band.beta_max)?
        * (-(-pz_hat - pz_tilde).exp_m1())
        / (1.0 + (-pz_tilde).exp());
    Ok(Admissibility::from_margin(rhs - band.width()))
}

/// p1 < β_min/c for the floored construction: C2 leaves q = 1/c upwards.
pub fn admissibility_floor_p1(
    params: &PhysParams,
    band: &AlignmentBand,
    cfg: &BoundsConfig,
) -> Result<Admissibility, ParamsError> {
    require_rho_max(params, cfg)?;
    let rhs = params.sqrt_kc() * (1.0 - params.c / cfg.rho_max) * params.ext_exp(band.beta_max)?;
    Ok(Admissibility::from_margin(rhs - band.width()))
}

/// p2 > β_max/c for the floored construction.
pub fn admissibility_floor_p2(
    params: &PhysParams,
    band: &AlignmentBand,
    cfg: &BoundsConfig,
) -> Result<Admissibility, ParamsError> {
    require_rho_max(params, cfg)?;
    if params.regime(band.beta_min) != Regime::Spiral {
        return Err(ParamsError::RegimeMismatch(format!(
            "the p2 condition needs a spiral beta_min (beta_min={})",
            band.beta_min
        )));
    }
    let pz_tilde = params.pi_over_z(band.beta_min);
    let rhs = params.sqrt_kc() * (1.0 - params.c / cfg.rho_max) * params.ext_exp(band.beta_max)?
        / (1.0 + (-pz_tilde).exp());
    Ok(Admissibility::from_margin(rhs - band.width()))
}
