#![allow(dead_code)]

use epa_core::auxlin::PhasePoint;
use epa_core::params::PhysParams;
use ode_solvers::{Dop853, System, Vector2};

struct Aux {
    k: f64,
    c: f64,
    beta: f64,
}

impl System<f64, Vector2<f64>> for Aux {
    fn system(&self, _t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        dy[0] = self.k - self.k * self.c * y[1];
        dy[1] = y[0] - self.beta * y[1];
    }
}

/// Adaptive DOP853 solution of p' = k − kcq, q' = p − βq from `start` at t = 0,
/// reported at t = 0, −h, −2h, … down to `t_end` < 0.
pub fn rk_oracle(beta: f64, start: PhasePoint, params: &PhysParams, t_end: f64, h: f64) -> Vec<(f64, PhasePoint)> {
    let sys = Aux { k: params.k, c: params.c, beta };
    let y0 = Vector2::new(start.p, start.q);
    let mut solver = Dop853::new(sys, 0.0, t_end, -h.abs(), y0, 1e-14, 1e-14);
    solver.integrate().expect("oracle integration");
    solver
        .x_out()
        .iter()
        .zip(solver.y_out())
        .map(|(&t, y)| (t, PhasePoint::new(y[0], y[1])))
        .collect()
}

/// Random cell values in [ρ_min, ρ_max] shifted (then clipped) until their mean is `c`.
pub fn random_feasible_density<R: rand::Rng>(rng: &mut R, n: usize, cfg: &epa_core::rearrange::BoundsConfig) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(cfg.rho_min..=cfg.rho_max)).collect();
    let shifted = |s: f64| -> Vec<f64> { raw.iter().map(|v| (v + s).clamp(cfg.rho_min, cfg.rho_max)).collect() };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let span = cfg.rho_max - cfg.rho_min;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mean(&shifted(mid)) < cfg.c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shifted(0.5 * (lo + hi))
}

/// Nonnegative random kernel: a random power-law spike plus a random smooth background and noise.
pub fn random_kernel<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let alpha = rng.gen_range(0.1..0.9);
    let a = rng.gen_range(0.0..2.0);
    let b = rng.gen_range(0.0..1.0);
    let spike = epa_core::kernel::KernelTable::power_law(n, alpha, a, b).unwrap().samples;
    let phase = rng.gen_range(0.0..1.0);
    spike
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let x = i as f64 / n as f64;
            v + 0.3 * (1.0 + (std::f64::consts::TAU * (x + phase)).cos()) + rng.gen_range(0.0..0.1)
        })
        .collect()
}

/// (ψ∗ρ)(x_shift) = Σ_j ψ_{shift−j} ρ_j Δx.
pub fn discrete_convolution_at(kernel: &[f64], rho: &[f64], shift: usize) -> f64 {
    let n = kernel.len();
    (0..n).map(|j| kernel[(shift + n - j) % n] * rho[j]).sum::<f64>() / n as f64
}
