//! Uniform periodic grid on [−½, ½) with FFT-based derivatives and
//! circular convolutions.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size must be a power of two >= 16 (got {0})")]
    BadSize(usize),
    #[error("field has {got} values, grid has {expected}")]
    Length { expected: usize, got: usize },
}

#[derive(Clone)]
pub struct Grid {
    pub n: usize,
    pub dx: f64,
    pub x: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("dx", &self.dx).finish()
    }
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(GridError::BadSize(n));
        }
        let mut planner = FftPlanner::new();
        let dx = 1.0 / n as f64;
        Ok(Self {
            n,
            dx,
            x: (0..n).map(|i| -0.5 + i as f64 * dx).collect(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn check(&self, f: &[f64]) -> Result<(), GridError> {
        if f.len() != self.n {
            return Err(GridError::Length { expected: self.n, got: f.len() });
        }
        Ok(())
    }

    /// Signed wavenumber of mode `m`; the Nyquist mode gets 0.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.n;
        if m < n / 2 {
            m as f64
        } else if m == n / 2 {
            0.0
        } else {
            m as f64 - n as f64
        }
    }

    pub fn fft(&self, f: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn ifft(&self, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.into_iter().map(|z| z.re * s).collect()
    }

    /// ∂ₓf; with `dealias`, modes with |m| > N/3 are dropped.
    pub fn derivative(&self, f: &[f64], dealias: bool) -> Vec<f64> {
        let mut h = self.fft(f);
        let cut = self.n as f64 / 3.0;
        for (m, z) in h.iter_mut().enumerate() {
            let kappa = self.wavenumber(m);
            if dealias && kappa.abs() > cut {
                *z = Complex::new(0.0, 0.0);
            } else {
                *z *= Complex::new(0.0, TAU * kappa);
            }
        }
        self.ifft(h)
    }

    /// Drops modes with |m| > N/3 and the Nyquist mode.
    pub fn dealias(&self, f: &[f64]) -> Vec<f64> {
        let mut h = self.fft(f);
        let cut = self.n as f64 / 3.0;
        for (m, z) in h.iter_mut().enumerate() {
            if m == self.n / 2 || self.wavenumber(m).abs() > cut {
                *z = Complex::new(0.0, 0.0);
            }
        }
        self.ifft(h)
    }

    /// φₓ for the zero-mean periodic solution of −φₓₓ = f − mean(f).
    pub fn poisson_gradient(&self, f: &[f64]) -> Vec<f64> {
        let mut h = self.fft(f);
        for (m, z) in h.iter_mut().enumerate() {
            let kappa = self.wavenumber(m);
            if kappa == 0.0 {
                *z = Complex::new(0.0, 0.0);
            } else {
                // φ̂ = f̂/(2πκ)², φ̂ₓ = 2πiκ·φ̂
                *z *= Complex::new(0.0, 1.0 / (TAU * kappa));
            }
        }
        self.ifft(h)
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }

    /// ∫ f over the torus by the (spectrally exact) trapezoid rule.
    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.dx
    }
}

/// Circular convolution (ψ∗f)ᵢ = Σⱼ ψ_{i−j} fⱼ Δx with a precomputed kernel spectrum.
#[derive(Clone)]
pub struct Convolver {
    grid: Grid,
    kernel_hat: Vec<Complex<f64>>,
}

impl fmt::Debug for Convolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Convolver").field("n", &self.grid.n).finish()
    }
}

impl Convolver {
    /// `samples[i]` is the kernel cell average at offset i/N (mod 1).
    pub fn new(grid: &Grid, samples: &[f64]) -> Result<Self, GridError> {
        grid.check(samples)?;
        let kernel_hat = grid.fft(samples).into_iter().map(|z| z * grid.dx).collect();
        Ok(Self { grid: grid.clone(), kernel_hat })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let h: Vec<Complex<f64>> = self.grid.fft(f).into_iter().zip(&self.kernel_hat).map(|(a, b)| a * b).collect();
        self.grid.ifft(h)
    }
}
