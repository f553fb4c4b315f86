//! Time-dependent stand-ins for ψ∗ρ along a characteristic.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::params::{AlignmentBand, PhysParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("value {value} at piece {index} lies outside the band [{beta_min}, {beta_max}]")]
    OutOfBand { index: usize, value: f64, beta_min: f64, beta_max: f64 },
    #[error("piecewise signal needs one more value than breakpoints (got {values} values, {breakpoints} breakpoints)")]
    Shape { values: usize, breakpoints: usize },
    #[error("breakpoints must be finite and strictly increasing")]
    Breakpoints,
}

#[derive(Clone)]
pub enum SignalKind {
    Constant(f64),
    /// `values[0]` on [0, b₀), `values[i]` on [b_{i−1}, b_i), last value afterwards.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    /// Externally driven value, clamped to the band.
    Coupled(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::Constant(b) => f.debug_tuple("Constant").field(b).finish(),
            SignalKind::PiecewiseConstant { breakpoints, values } => f
                .debug_struct("PiecewiseConstant")
                .field("breakpoints", breakpoints)
                .field("values", values)
                .finish(),
            SignalKind::Coupled(_) => f.write_str("Coupled(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentSignal {
    pub kind: SignalKind,
    pub band: AlignmentBand,
}

impl AlignmentSignal {
    pub fn constant(beta: f64) -> Self {
        Self { kind: SignalKind::Constant(beta), band: AlignmentBand { beta_min: beta, beta_max: beta } }
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>, band: AlignmentBand) -> Result<Self, SignalError> {
        if values.len() != breakpoints.len() + 1 {
            return Err(SignalError::Shape { values: values.len(), breakpoints: breakpoints.len() });
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SignalError::Breakpoints);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !band.contains(**v)) {
            return Err(SignalError::OutOfBand { index, value, beta_min: band.beta_min, beta_max: band.beta_max });
        }
        Ok(Self { kind: SignalKind::PiecewiseConstant { breakpoints, values }, band })
    }

    pub fn coupled(f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, band: AlignmentBand) -> Self {
        Self { kind: SignalKind::Coupled(f), band }
    }

    /// Alternates β_min / β_max every `period`, starting with β_min.
    pub fn alternating(band: AlignmentBand, period: f64, t_end: f64) -> Result<Self, SignalError> {
        let n = (t_end / period).ceil().max(1.0) as usize;
        let breakpoints: Vec<f64> = (1..n).map(|i| i as f64 * period).collect();
        let values = (0..n).map(|i| if i % 2 == 0 { band.beta_min } else { band.beta_max }).collect();
        Self::piecewise(breakpoints, values, band)
    }

    /// Exponential switching times with mean (2π/λ)/8 and values uniform in the band.
    pub fn random<R: Rng + ?Sized>(band: AlignmentBand, params: &PhysParams, t_end: f64, rng: &mut R) -> Self {
        let mean = TAU / params.lambda() / 8.0;
        let exp = Exp::new(1.0 / mean).expect("positive rate");
        let mut breakpoints = Vec::new();
        let mut values = vec![draw(band, rng)];
        let mut t = exp.sample(rng);
        while t < t_end {
            breakpoints.push(t);
            values.push(draw(band, rng));
            t += exp.sample(rng);
        }
        Self { kind: SignalKind::PiecewiseConstant { breakpoints, values }, band }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            SignalKind::Constant(b) => *b,
            SignalKind::PiecewiseConstant { breakpoints, values } => values[breakpoints.partition_point(|&b| b <= t)],
            SignalKind::Coupled(f) => f(t).clamp(self.band.beta_min, self.band.beta_max),
        }
    }

    /// First discontinuity strictly after `t`.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        match &self.kind {
            SignalKind::PiecewiseConstant { breakpoints, .. } => {
                breakpoints.get(breakpoints.partition_point(|&b| b <= t)).copied()
            }
            _ => None,
        }
    }
}

fn draw<R: Rng + ?Sized>(band: AlignmentBand, rng: &mut R) -> f64 {
    if band.beta_max > band.beta_min {
        rng.gen_range(band.beta_min..=band.beta_max)
    } else {
        band.beta_min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn piecewise_lookup() {
        let band = AlignmentBand::new(0.0, 3.0).unwrap();
        let s = AlignmentSignal::piecewise(vec![1.0, 2.0], vec![0.5, 1.5, 2.5], band).unwrap();
        assert_eq!(s.value(0.0), 0.5);
        assert_eq!(s.value(1.0), 1.5);
        assert_eq!(s.value(7.0), 2.5);
        assert_eq!(s.next_breakpoint(0.3), Some(1.0));
        assert_eq!(s.next_breakpoint(1.0), Some(2.0));
        assert_eq!(s.next_breakpoint(2.0), None);
    }

    #[test]
    fn out_of_band_rejected() {
        let band = AlignmentBand::new(1.0, 2.0).unwrap();
        assert!(matches!(
            AlignmentSignal::piecewise(vec![1.0], vec![1.5, 2.5], band),
            Err(SignalError::OutOfBand { index: 1, .. })
        ));
    }

    #[test]
    fn random_signal_stays_in_band_and_is_reproducible() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        let band = AlignmentBand::new(0.25, 0.75).unwrap();
        let a = AlignmentSignal::random(band, &params, 50.0, &mut ChaCha8Rng::seed_from_u64(7));
        let b = AlignmentSignal::random(band, &params, 50.0, &mut ChaCha8Rng::seed_from_u64(7));
        for i in 0..500 {
            let t = i as f64 * 0.1;
            assert_eq!(a.value(t), b.value(t));
            assert!(band.contains(a.value(t)));
        }
    }

    #[test]
    fn coupled_is_clamped() {
        let band = AlignmentBand::new(1.0, 2.0).unwrap();
        let s = AlignmentSignal::coupled(Arc::new(|t| t), band);
        assert_eq!(s.value(0.0), 1.0);
        assert_eq!(s.value(1.5), 1.5);
        assert_eq!(s.value(9.0), 2.0);
    }
}
