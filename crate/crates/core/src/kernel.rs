//! Tabulated alignment kernels: exact cell averages of periodic, even
//! profiles at offsets `i/N`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rearrange::rearrange_kernel;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel needs at least 2 cells and an even count (got {0})")]
    BadSize(usize),
    #[error("kernel parameters out of range: {0}")]
    BadParams(String),
    #[error("kernel table is not even: cell {index} differs from its mirror by {diff}")]
    NotEven { index: usize, diff: f64 },
    #[error("cannot read kernel file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse kernel file: {0}")]
    Csv(#[from] csv::Error),
}

/// Cell averages `samples[i]` of ψ over `[(i − ½)/N, (i + ½)/N]` (periodic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub samples: Vec<f64>,
}

impl KernelTable {
    pub fn new(samples: Vec<f64>) -> Result<Self, KernelError> {
        let n = samples.len();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(KernelError::BadSize(n));
        }
        if let Some(v) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(KernelError::BadParams(format!("cell average {v} is not a nonnegative number")));
        }
        for i in 1..n / 2 {
            let diff = samples[i] - samples[n - i];
            if diff.abs() > 1e-12 * samples[i].abs().max(1.0) {
                return Err(KernelError::NotEven { index: i, diff });
            }
        }
        Ok(Self { samples })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.n() as f64
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// ∫_{1/2}^1 ψ* of the tabulated profile.
    pub fn gamma(&self) -> f64 {
        rearrange_kernel(&self.samples).map(|k| k.gamma).unwrap_or(f64::NAN)
    }

    pub fn zero(n: usize) -> Result<Self, KernelError> {
        Self::new(vec![0.0; n])
    }

    pub fn constant(n: usize, psi: f64) -> Result<Self, KernelError> {
        Self::new(vec![psi; n])
    }

    /// ψ(x) = ψ_min + (ψ_max − ψ_min)(1 + cos 2πx)/2.
    pub fn raised_cosine(n: usize, psi_min: f64, psi_max: f64) -> Result<Self, KernelError> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(KernelError::BadSize(n));
        }
        if !(0.0 <= psi_min && psi_min <= psi_max) {
            return Err(KernelError::BadParams(format!("need 0 <= psi_min <= psi_max, got [{psi_min}, {psi_max}]")));
        }
        let h = 1.0 / n as f64;
        let damp = (PI * h).sin() / (PI * h);
        let amp = 0.5 * (psi_max - psi_min);
        let samples = (0..n)
            .map(|i| psi_min + amp + amp * damp * (2.0 * PI * offset(i, n)).cos())
            .collect();
        Self::new(samples)
    }

    /// ψ(x) = a|x|^{−α} + b with exact cell averages, 0 < α < 1.
    pub fn power_law(n: usize, alpha: f64, a: f64, b: f64) -> Result<Self, KernelError> {
        let basis = power_law_basis(n, alpha)?;
        if !(a >= 0.0 && b >= 0.0) {
            return Err(KernelError::BadParams(format!("need a, b >= 0, got a={a}, b={b}")));
        }
        Self::new(basis.into_iter().map(|v| a * v + b).collect())
    }

    /// Power law a|x|^{−α} + b whose tabulated ‖ψ‖ and γ equal the targets exactly.
    pub fn calibrated_power_law(n: usize, alpha: f64, l1_norm: f64, gamma: f64) -> Result<Self, KernelError> {
        let basis = power_law_basis(n, alpha)?;
        let rk = rearrange_kernel(&basis).map_err(|e| KernelError::BadParams(e.to_string()))?;
        // ‖ψ‖ = a·S1 + b, γ = a·S2 + b/2
        let (s1, s2) = (rk.l1_norm, rk.gamma);
        let a = (l1_norm - 2.0 * gamma) / (s1 - 2.0 * s2);
        let b = l1_norm - a * s1;
        if !(a >= 0.0 && b >= 0.0) {
            return Err(KernelError::BadParams(format!(
                "no nonnegative a|x|^-{alpha} + b matches l1_norm={l1_norm}, gamma={gamma} (a={a}, b={b})"
            )));
        }
        Self::new(basis.into_iter().map(|v| a * v + b).collect())
    }

    /// Reads one cell average per row (optionally a header), in offset order.
    pub fn from_csv(path: &Path) -> Result<Self, KernelError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let Some(field) = rec.iter().next_back() else { continue };
            match field.parse::<f64>() {
                Ok(v) => samples.push(v),
                Err(_) if samples.is_empty() => continue,
                Err(_) => return Err(KernelError::BadParams(format!("not a number: {field:?}"))),
            }
        }
        Self::new(samples)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), KernelError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["offset", "psi"])?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([format!("{}", offset(i, self.n())), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Signed offset of cell `i` in `[−½, ½)`.
pub fn offset(i: usize, n: usize) -> f64 {
    let i = i as f64;
    let n = n as f64;
    if i < n / 2.0 {
        i / n
    } else {
        (i - n) / n
    }
}

/// Exact cell averages of |x|^{−α} on the torus.
fn power_law_basis(n: usize, alpha: f64) -> Result<Vec<f64>, KernelError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(KernelError::BadSize(n));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(KernelError::BadParams(format!("need 0 < alpha < 1, got {alpha}")));
    }
    let h = 1.0 / n as f64;
    let e = 1.0 - alpha;
    let prim = |r: f64| r.powf(e) / e;
    Ok((0..n)
        .map(|i| {
            let centre = offset(i, n).abs();
            if i == 0 {
                2.0 * prim(0.5 * h) / h
            } else if i == n / 2 {
                2.0 * (prim(0.5) - prim(0.5 - 0.5 * h)) / h
            } else {
                (prim(centre + 0.5 * h) - prim(centre - 0.5 * h)) / h
            }
        })
        .collect())
}
