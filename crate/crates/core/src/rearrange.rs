//! Decreasing rearrangement of a tabulated kernel, the improved bounds on
//! ψ∗ρ under mass and box constraints, and the exact discrete LP behind them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ParamsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RearrangeError {
    #[error("kernel cell {index} has negative or non-finite average {value}")]
    NegativeSample { index: usize, value: f64 },
    #[error("kernel table is empty")]
    Empty,
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Box constraints ρ_min ≤ ρ ≤ ρ_max on a density of mean `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub c: f64,
}

impl BoundsConfig {
    pub fn new(rho_min: f64, rho_max: f64, c: f64) -> Result<Self, ParamsError> {
        if !(rho_min >= 0.0 && rho_min < c && c < rho_max && rho_max.is_finite()) {
            return Err(ParamsError::BadBoundsConfig { rho_min, rho_max, c });
        }
        Ok(Self { rho_min, rho_max, c })
    }

    /// ρ_min = 0, ρ_max = 2c.
    pub fn symmetric(c: f64) -> Self {
        Self { rho_min: 0.0, rho_max: 2.0 * c, c }
    }

    pub fn is_symmetric(&self) -> bool {
        ((self.rho_min + self.rho_max) - 2.0 * self.c).abs() <= 1e-14 * self.c
    }

    /// Measure of the set carrying ρ_min in the lower extremal density.
    pub fn d(&self) -> f64 {
        (self.rho_max - self.c) / (self.rho_max - self.rho_min)
    }

    /// Measure of the set carrying ρ_max in the upper extremal density.
    pub fn d_hat(&self) -> f64 {
        (self.c - self.rho_min) / (self.rho_max - self.rho_min)
    }
}

/// Non-increasing rearrangement ψ* of cell averages on a uniform partition of (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RearrangedKernel {
    pub values: Vec<f64>,
    pub width: f64,
    pub l1_norm: f64,
    pub gamma: f64,
    prefix: Vec<f64>,
}

impl RearrangedKernel {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// ∫₀^y ψ*, exact for the piecewise-constant profile.
    pub fn integral_to(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        let pos = y / self.width;
        let i = (pos.floor() as usize).min(self.n());
        if i >= self.n() {
            return self.l1_norm;
        }
        let frac = pos - i as f64;
        self.prefix[i] + frac * self.width * self.values[i]
    }

    /// γ₁(d) = ∫_d^1 ψ*.
    pub fn gamma1(&self, d: f64) -> f64 {
        self.l1_norm - self.integral_to(d)
    }

    /// γ₂(d̂) = ∫_{d̂}^1 ψ*.
    pub fn gamma2(&self, d_hat: f64) -> f64 {
        self.gamma1(d_hat)
    }
}

pub fn rearrange_kernel(samples: &[f64]) -> Result<RearrangedKernel, RearrangeError> {
    if samples.is_empty() {
        return Err(RearrangeError::Empty);
    }
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(RearrangeError::NegativeSample { index, value });
    }
    let mut values = samples.to_vec();
    values.sort_by(|a, b| b.total_cmp(a));
    let width = 1.0 / values.len() as f64;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for v in &values {
        acc += v * width;
        prefix.push(acc);
    }
    let mut k = RearrangedKernel { values, width, l1_norm: acc, gamma: 0.0, prefix };
    k.gamma = k.gamma1(0.5);
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn improved_bounds(kernel: &RearrangedKernel, cfg: &BoundsConfig) -> Bounds {
    let spread = cfg.rho_max - cfg.rho_min;
    Bounds {
        lower: cfg.rho_min * kernel.l1_norm + spread * kernel.gamma1(cfg.d()),
        upper: cfg.rho_max * kernel.l1_norm - spread * kernel.gamma2(cfg.d_hat()),
    }
}

/// Bounds that only use ‖ψ‖: ρ_min‖ψ‖ ≤ ψ∗ρ ≤ ρ_max‖ψ‖.
pub fn crude_bounds(l1_norm: f64, cfg: &BoundsConfig) -> Bounds {
    Bounds { lower: cfg.rho_min * l1_norm, upper: cfg.rho_max * l1_norm }
}

/// Improved bounds from the closed-form pair (‖ψ‖, γ); needs a symmetric config.
pub fn symmetric_bounds(l1_norm: f64, gamma: f64, cfg: &BoundsConfig) -> Result<Bounds, ParamsError> {
    if !cfg.is_symmetric() {
        return Err(ParamsError::InvalidInfluence(
            "closed-form (l1_norm, gamma) only determines the band when rho_min + rho_max = 2c".into(),
        ));
    }
    let spread = cfg.rho_max - cfg.rho_min;
    Ok(Bounds { lower: cfg.rho_min * l1_norm + spread * gamma, upper: cfg.rho_max * l1_norm - spread * gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub value: f64,
    /// Extremal density per kernel cell (bang-bang with at most one fractional cell).
    pub density: Vec<f64>,
}

/// Exact solution of min/max Σ ψᵢρᵢΔx over ρ_min ≤ ρᵢ ≤ ρ_max, Σ ρᵢΔx = c.
pub fn bound_oracle(samples: &[f64], cfg: &BoundsConfig, target: Target) -> Result<OracleSolution, RearrangeError> {
    BoundsConfig::new(cfg.rho_min, cfg.rho_max, cfg.c)?;
    if samples.is_empty() {
        return Err(RearrangeError::Empty);
    }
    let n = samples.len();
    let dx = 1.0 / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[b].total_cmp(&samples[a]).then(a.cmp(&b)));
    let (fill, rest, budget) = match target {
        // Start at ρ_max everywhere and remove the excess mass from the largest ψ first.
        Target::Min => (cfg.rho_min, cfg.rho_max, (cfg.rho_max - cfg.c) / dx),
        Target::Max => (cfg.rho_max, cfg.rho_min, (cfg.c - cfg.rho_min) / dx),
    };
    let step = (cfg.rho_max - cfg.rho_min).abs();
    let mut density = vec![rest; n];
    let mut left = budget;
    for &i in &order {
        if left <= 0.0 {
            break;
        }
        let take = left.min(step);
        density[i] = if target == Target::Min { rest - take } else { rest + take };
        if take == step {
            density[i] = fill;
        }
        left -= take;
    }
    let value = samples.iter().zip(&density).map(|(s, r)| s * r).sum::<f64>() * dx;
    Ok(OracleSolution { value, density })
}

/// JSON report of the band derived from a tabulated kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub l1_norm: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lower: f64,
    pub upper: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

pub fn bounds_report(kernel: &RearrangedKernel, cfg: &BoundsConfig) -> BoundsReport {
    let b = improved_bounds(kernel, cfg);
    BoundsReport {
        l1_norm: kernel.l1_norm,
        gamma: kernel.gamma,
        gamma1: kernel.gamma1(cfg.d()),
        gamma2: kernel.gamma2(cfg.d_hat()),
        lower: b.lower,
        upper: b.upper,
        beta_min: b.lower,
        beta_max: b.upper,
    }
}
