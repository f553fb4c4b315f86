//! Periodic pseudo-spectral solver for the Euler-Poisson-alignment system in
//! conservative variables (ρ, m = ρu), advanced with SSP-RK3.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelTable;
use crate::params::PhysParams;
use crate::regions::{Region, Verdict};
use crate::spectral::{Convolver, Grid, GridError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("mean density {mean} differs from c = {c}")]
    MeanMismatch { mean: f64, c: f64 },
    #[error("time step {dt} violates the CFL limit; suggested dt = {suggested}")]
    CflViolation { dt: f64, suggested: f64 },
    #[error("kernel has {kernel} cells but the grid has {grid}")]
    KernelSize { kernel: usize, grid: usize },
    #[error("kernel table is not symmetric")]
    AsymmetricKernel,
    #[error("invalid solver setting: {0}")]
    Config(String),
    #[error("cannot read initial data: {0}")]
    Data(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub output_interval: f64,
    /// GradientBlowup once min uₓ < −blowup_ux.
    pub blowup_ux: f64,
    /// DensityBlowup once max ρ > rho_cap_factor·c.
    pub rho_cap_factor: f64,
    /// UnderResolved once the spectral tail fraction exceeds this (or ρ turns negative).
    pub tail_threshold: f64,
    /// Velocity recovery uses max(ρ, rho_floor_rel·c).
    pub rho_floor_rel: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 256,
            cfl: 0.4,
            t_end: 1.0,
            output_interval: 0.1,
            blowup_ux: 1e3,
            rho_cap_factor: 1e6,
            tail_threshold: 0.1,
            rho_floor_rel: 1e-12,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
}

/// Built-in initial data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialData {
    /// ρ = c + Σⱼ aⱼ cos 2πjx, u = ū + Σⱼ bⱼ sin 2πjx (j from 1).
    Cosine {
        #[serde(default)]
        rho_amplitudes: Vec<f64>,
        #[serde(default)]
        u_amplitudes: Vec<f64>,
        #[serde(default)]
        u_mean: f64,
    },
    /// CSV with columns x, rho, u (header optional), one row per grid node.
    Table { path: std::path::PathBuf },
}

impl GridState {
    pub fn steady(grid: &Grid, c: f64, u_mean: f64) -> Self {
        Self { rho: vec![c; grid.n], u: vec![u_mean; grid.n] }
    }

    pub fn cosine(grid: &Grid, c: f64, rho_amplitudes: &[f64], u_amplitudes: &[f64], u_mean: f64) -> Self {
        let series = |x: f64, amps: &[f64], f: fn(f64) -> f64| -> f64 {
            amps.iter().enumerate().map(|(j, a)| a * f(TAU * (j + 1) as f64 * x)).sum()
        };
        Self {
            rho: grid.x.iter().map(|&x| c + series(x, rho_amplitudes, f64::cos)).collect(),
            u: grid.x.iter().map(|&x| u_mean + series(x, u_amplitudes, f64::sin)).collect(),
        }
    }

    pub fn from_initial(grid: &Grid, c: f64, data: &InitialData) -> Result<Self, SolverError> {
        match data {
            InitialData::Cosine { rho_amplitudes, u_amplitudes, u_mean } => {
                Ok(Self::cosine(grid, c, rho_amplitudes, u_amplitudes, *u_mean))
            }
            InitialData::Table { path } => Self::from_csv(path, grid),
        }
    }

    pub fn from_csv(path: &Path, grid: &Grid) -> Result<Self, SolverError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| SolverError::Data(e.to_string()))?;
        let (mut rho, mut u) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| SolverError::Data(e.to_string()))?;
            let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match vals {
                Ok(v) if v.len() >= 3 => {
                    rho.push(v[1]);
                    u.push(v[2]);
                }
                Ok(v) => return Err(SolverError::Data(format!("expected x,rho,u but found {} columns", v.len()))),
                Err(_) if rho.is_empty() => continue,
                Err(e) => return Err(SolverError::Data(e.to_string())),
            }
        }
        grid.check(&rho)?;
        Ok(Self { rho, u })
    }

    pub fn write_csv(&self, grid: &Grid, path: &Path) -> Result<(), SolverError> {
        let io = |e: csv::Error| SolverError::Data(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["x", "rho", "u"]).map_err(io)?;
        for i in 0..grid.n {
            w.write_record([format!("{:.17e}", grid.x[i]), format!("{:.17e}", self.rho[i]), format!("{:.17e}", self.u[i])])
                .map_err(io)?;
        }
        w.flush().map_err(|e| SolverError::Data(e.to_string()))
    }
}

/// −kφₓ with −φₓₓ = ρ − c.
pub fn poisson_force(rho: &[f64], params: &PhysParams, grid: &Grid) -> Result<Vec<f64>, SolverError> {
    grid.check(rho)?;
    let mean = grid.mean(rho);
    if (mean - params.c).abs() > 1e-8 * params.c.max(1.0) {
        return Err(SolverError::MeanMismatch { mean, c: params.c });
    }
    Ok(grid.poisson_gradient(rho).into_iter().map(|v| -params.k * v).collect())
}

/// ψ∗(ρu) − u·(ψ∗ρ).
pub fn alignment_force(rho: &[f64], u: &[f64], conv: &Convolver) -> Vec<f64> {
    let m: Vec<f64> = rho.iter().zip(u).map(|(r, v)| r * v).collect();
    let cm = conv.apply(&m);
    let cr = conv.apply(rho);
    (0..rho.len()).map(|i| cm[i] - u[i] * cr[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub ux: Vec<f64>,
    pub g: Vec<f64>,
    pub phi_x: Vec<f64>,
    pub conv_rho: Vec<f64>,
    pub conv_momentum: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverEvent {
    GradientBlowup { t: f64, min_ux: f64, x: f64, rho_at_locus: f64 },
    DensityBlowup { t: f64, max_rho: f64, x: f64 },
    UnderResolved { t: f64, tail_fraction: f64, min_ux: f64, rho_at_locus: f64 },
    NonFinite { t: f64 },
}

impl SolverEvent {
    pub fn t(&self) -> f64 {
        match *self {
            SolverEvent::GradientBlowup { t, .. }
            | SolverEvent::DensityBlowup { t, .. }
            | SolverEvent::UnderResolved { t, .. }
            | SolverEvent::NonFinite { t } => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub min_ux: f64,
    pub max_rho: f64,
    pub min_rho: f64,
    pub mean_g: f64,
    pub momentum: f64,
    pub inside_fraction: Option<f64>,
    pub indeterminate_fraction: Option<f64>,
    pub mass: f64,
    pub min_g: f64,
    pub max_g: f64,
    pub tail_fraction: f64,
    pub g_residual: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub diagnostics: Vec<DiagnosticsRow>,
    pub events: Vec<SolverEvent>,
    pub final_state: GridState,
    pub t_final: f64,
    pub steps: usize,
}

impl RunReport {
    pub fn terminating_event(&self) -> Option<&SolverEvent> {
        self.events.last()
    }

    pub fn write_diagnostics_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "min_ux",
            "max_rho",
            "min_rho",
            "meanG",
            "momentum",
            "inside_fraction",
            "indeterminate_fraction",
            "mass",
            "min_G",
            "max_G",
            "tail_fraction",
            "g_residual",
            "dt",
        ])?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
        for r in &self.diagnostics {
            w.write_record([
                format!("{:.17e}", r.t),
                format!("{:.17e}", r.min_ux),
                format!("{:.17e}", r.max_rho),
                format!("{:.17e}", r.min_rho),
                format!("{:.17e}", r.mean_g),
                format!("{:.17e}", r.momentum),
                opt(r.inside_fraction),
                opt(r.indeterminate_fraction),
                format!("{:.17e}", r.mass),
                format!("{:.17e}", r.min_g),
                format!("{:.17e}", r.max_g),
                format!("{:.17e}", r.tail_fraction),
                format!("{:.17e}", r.g_residual),
                format!("{:.17e}", r.dt),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Cons {
    rho: Vec<f64>,
    m: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solver {
    pub grid: Grid,
    pub params: PhysParams,
    pub kernel: KernelTable,
    pub config: SolverConfig,
    conv: Convolver,
}

impl Solver {
    pub fn new(params: PhysParams, kernel: KernelTable, config: SolverConfig) -> Result<Self, SolverError> {
        let grid = Grid::new(config.n)?;
        if kernel.n() != grid.n {
            return Err(SolverError::KernelSize { kernel: kernel.n(), grid: grid.n });
        }
        let n = grid.n;
        if (1..n / 2).any(|i| kernel.samples[i] != kernel.samples[n - i]) {
            return Err(SolverError::AsymmetricKernel);
        }
        if !(config.cfl > 0.0 && config.t_end >= 0.0 && config.output_interval > 0.0) {
            return Err(SolverError::Config(format!(
                "need cfl > 0, t_end >= 0, output_interval > 0 (got {}, {}, {})",
                config.cfl, config.t_end, config.output_interval
            )));
        }
        let conv = Convolver::new(&grid, &kernel.samples)?;
        Ok(Self { grid, params, kernel, config, conv })
    }

    fn floor(&self) -> f64 {
        self.config.rho_floor_rel * self.params.c
    }

    fn velocity(&self, rho: &[f64], m: &[f64]) -> Vec<f64> {
        let f = self.floor();
        rho.iter().zip(m).map(|(r, m)| m / r.max(f)).collect()
    }

    fn mask(&self, h: &mut [Complex<f64>]) {
        let cut = self.grid.n as f64 / 3.0;
        for (k, z) in h.iter_mut().enumerate() {
            if k == self.grid.n / 2 || self.grid.wavenumber(k).abs() > cut {
                *z = Complex::new(0.0, 0.0);
            }
        }
    }

    fn masked(&self, f: Vec<f64>) -> Vec<f64> {
        let mut h = self.grid.fft(&f);
        self.mask(&mut h);
        self.grid.ifft(h)
    }

    /// Semi-discrete right-hand side, both components restricted to |κ| ≤ N/3.
    fn rhs(&self, s: &Cons) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n;
        let u = self.velocity(&s.rho, &s.m);
        let drho: Vec<f64> = self.grid.derivative(&s.m, true).into_iter().map(|v| -v).collect();
        let flux: Vec<f64> = (0..n).map(|i| s.m[i] * u[i]).collect();
        let dflux = self.grid.derivative(&flux, true);
        let efield: Vec<f64> = self.grid.poisson_gradient(&s.rho).into_iter().map(|v| -self.params.k * v).collect();
        let cm = self.conv.apply(&s.m);
        let cr = self.conv.apply(&s.rho);
        let dm: Vec<f64> = (0..n).map(|i| -dflux[i] + s.rho[i] * efield[i] + s.rho[i] * cm[i] - s.m[i] * cr[i]).collect();
        (self.masked(drho), self.masked(dm))
    }

    fn ssp_rk3(&self, s: &Cons, dt: f64) -> Cons {
        let n = self.grid.n;
        let axpy = |a: &Cons, d: &(Vec<f64>, Vec<f64>)| Cons {
            rho: (0..n).map(|i| a.rho[i] + dt * d.0[i]).collect(),
            m: (0..n).map(|i| a.m[i] + dt * d.1[i]).collect(),
        };
        let s1 = axpy(s, &self.rhs(s));
        let e1 = axpy(&s1, &self.rhs(&s1));
        let s2 = Cons {
            rho: (0..n).map(|i| 0.75 * s.rho[i] + 0.25 * e1.rho[i]).collect(),
            m: (0..n).map(|i| 0.75 * s.m[i] + 0.25 * e1.m[i]).collect(),
        };
        let e2 = axpy(&s2, &self.rhs(&s2));
        Cons {
            rho: (0..n).map(|i| s.rho[i] / 3.0 + 2.0 / 3.0 * e2.rho[i]).collect(),
            m: (0..n).map(|i| s.m[i] / 3.0 + 2.0 / 3.0 * e2.m[i]).collect(),
        }
    }

    fn to_cons(&self, s: &GridState) -> Cons {
        Cons { rho: s.rho.clone(), m: s.rho.iter().zip(&s.u).map(|(r, u)| r * u).collect() }
    }

    fn to_state(&self, s: &Cons) -> GridState {
        GridState { rho: s.rho.clone(), u: self.velocity(&s.rho, &s.m) }
    }

    pub fn derived(&self, s: &GridState) -> Derived {
        let ux = self.grid.derivative(&s.u, false);
        let conv_rho = self.conv.apply(&s.rho);
        let m: Vec<f64> = s.rho.iter().zip(&s.u).map(|(r, u)| r * u).collect();
        Derived {
            g: ux.iter().zip(&conv_rho).map(|(a, b)| a + b).collect(),
            ux,
            phi_x: self.grid.poisson_gradient(&s.rho),
            conv_momentum: self.conv.apply(&m),
            conv_rho,
        }
    }

    fn dt_limit(&self, rho: &[f64], u: &[f64], ux: &[f64]) -> f64 {
        let umax = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let uxmax = ux.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rmax = rho.iter().fold(0.0f64, |a, v| a.max(*v));
        let source = self.params.sqrt_kc().max(self.kernel.l1_norm() * rmax);
        let mut dt = f64::INFINITY;
        if umax > 0.0 {
            dt = dt.min(self.config.cfl * self.grid.dx / umax);
        }
        if source > 0.0 {
            dt = dt.min(0.1 / source);
        }
        if uxmax > 0.0 {
            dt = dt.min(0.25 * self.config.cfl / uxmax);
        }
        if dt.is_finite() {
            dt
        } else {
            self.config.cfl * self.grid.dx
        }
    }

    pub fn suggested_dt(&self, s: &GridState) -> f64 {
        let ux = self.grid.derivative(&s.u, false);
        self.dt_limit(&s.rho, &s.u, &ux)
    }

    /// One SSP-RK3 step; rejected when dt exceeds the advective CFL limit.
    pub fn step(&self, s: &GridState, dt: f64) -> Result<GridState, SolverError> {
        let umax = s.u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if umax > 0.0 && dt > self.config.cfl * self.grid.dx / umax * (1.0 + 1e-12) {
            return Err(SolverError::CflViolation { dt, suggested: self.suggested_dt(s) });
        }
        Ok(self.to_state(&self.ssp_rk3(&self.to_cons(s), dt)))
    }

    /// Largest fraction of non-mean spectral energy in N/6 < |κ| ≤ N/3 over ρ and uₓ.
    pub fn tail_fraction(&self, s: &GridState) -> f64 {
        self.tail_of(&s.rho).max(self.tail_of(&self.grid.derivative(&s.u, false)))
    }

    fn tail_of(&self, f: &[f64]) -> f64 {
        let h = self.grid.fft(f);
        let n = self.grid.n as f64;
        let (mut tail, mut total) = (0.0, 0.0);
        for (k, z) in h.iter().enumerate().skip(1) {
            let kappa = self.grid.wavenumber(k).abs();
            let e = z.norm_sqr();
            total += e;
            if kappa > n / 6.0 && kappa <= n / 3.0 {
                tail += e;
            }
        }
        let scale = h[0].norm_sqr().max(n * n);
        if total <= 1e-24 * scale {
            0.0
        } else {
            tail / total
        }
    }

    /// RMS of G_t + (Gu)ₓ − k(ρ − c) with G_t taken from the semi-discrete right-hand side.
    pub fn g_residual(&self, s: &GridState) -> f64 {
        let n = self.grid.n;
        let cons = self.to_cons(s);
        let (rho_t, m_t) = self.rhs(&cons);
        let f = self.floor();
        let u_t: Vec<f64> = (0..n).map(|i| (m_t[i] - s.u[i] * rho_t[i]) / s.rho[i].max(f)).collect();
        let g_t: Vec<f64> = self
            .grid
            .derivative(&u_t, false)
            .into_iter()
            .zip(self.conv.apply(&rho_t))
            .map(|(a, b)| a + b)
            .collect();
        let d = self.derived(s);
        let gu: Vec<f64> = (0..n).map(|i| d.g[i] * s.u[i]).collect();
        let dgu = self.grid.derivative(&gu, false);
        let r: Vec<f64> = (0..n).map(|i| g_t[i] + dgu[i] - self.params.k * (s.rho[i] - self.params.c)).collect();
        (r.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt()
    }

    fn diagnostics(&self, t: f64, dt: f64, s: &GridState, region: Option<&Region>) -> DiagnosticsRow {
        let d = self.derived(s);
        let fold = |v: &[f64], init: f64, f: fn(f64, f64) -> f64| v.iter().copied().fold(init, f);
        let (inside, indet) = match region {
            Some(r) => {
                let mut n_in = 0;
                let mut n_ind = 0;
                for i in 0..self.grid.n {
                    match r.membership_grho(d.g[i], s.rho[i]).label {
                        Verdict::Inside => n_in += 1,
                        Verdict::Indeterminate => n_ind += 1,
                        Verdict::Outside => {}
                    }
                }
                let n = self.grid.n as f64;
                (Some(n_in as f64 / n), Some(n_ind as f64 / n))
            }
            None => (None, None),
        };
        let m: Vec<f64> = s.rho.iter().zip(&s.u).map(|(r, u)| r * u).collect();
        DiagnosticsRow {
            t,
            min_ux: fold(&d.ux, f64::INFINITY, f64::min),
            max_rho: fold(&s.rho, f64::NEG_INFINITY, f64::max),
            min_rho: fold(&s.rho, f64::INFINITY, f64::min),
            mean_g: self.grid.mean(&d.g),
            momentum: self.grid.integral(&m),
            inside_fraction: inside,
            indeterminate_fraction: indet,
            mass: self.grid.integral(&s.rho),
            min_g: fold(&d.g, f64::INFINITY, f64::min),
            max_g: fold(&d.g, f64::NEG_INFINITY, f64::max),
            tail_fraction: self.tail_fraction(s),
            g_residual: self.g_residual(s),
            dt,
        }
    }

    fn check_events(&self, t: f64, s: &Cons) -> Option<SolverEvent> {
        if s.rho.iter().chain(&s.m).any(|v| !v.is_finite()) {
            return Some(SolverEvent::NonFinite { t });
        }
        let u = self.velocity(&s.rho, &s.m);
        let ux = self.grid.derivative(&u, false);
        let (imin, min_ux) = ux.iter().copied().enumerate().fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a });
        if min_ux < -self.config.blowup_ux {
            return Some(SolverEvent::GradientBlowup { t, min_ux, x: self.grid.x[imin], rho_at_locus: s.rho[imin] });
        }
        let (imax, max_rho) = s.rho.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
        if max_rho > self.config.rho_cap_factor * self.params.c {
            return Some(SolverEvent::DensityBlowup { t, max_rho, x: self.grid.x[imax] });
        }
        let state = GridState { rho: s.rho.clone(), u };
        let tail = self.tail_fraction(&state);
        if tail > self.config.tail_threshold || s.rho.iter().any(|&r| r < 0.0) {
            return Some(SolverEvent::UnderResolved { t, tail_fraction: tail, min_ux, rho_at_locus: s.rho[imin] });
        }
        None
    }

    /// Advances to `t_end` or the first terminating event, logging diagnostics
    /// (and a membership census when `region` is given) every output interval.
    pub fn run(&self, initial: &GridState, region: Option<&Region>) -> Result<RunReport, SolverError> {
        self.grid.check(&initial.rho)?;
        self.grid.check(&initial.u)?;
        let mean = self.grid.mean(&initial.rho);
        if (mean - self.params.c).abs() > 1e-8 * self.params.c.max(1.0) {
            return Err(SolverError::MeanMismatch { mean, c: self.params.c });
        }
        let cfg = &self.config;
        let mut s = self.to_cons(initial);
        let mut t = 0.0;
        let mut steps = 0;
        let mut diagnostics = vec![self.diagnostics(0.0, 0.0, initial, region)];
        let mut events = Vec::new();
        let mut next_out = cfg.output_interval.min(cfg.t_end);
        let mut last_dt = 0.0;
        if let Some(e) = self.check_events(0.0, &s) {
            events.push(e);
        }
        while events.is_empty() && t < cfg.t_end && steps < cfg.max_steps {
            let u = self.velocity(&s.rho, &s.m);
            let ux = self.grid.derivative(&u, false);
            let mut dt = self.dt_limit(&s.rho, &u, &ux);
            let mut hits_output = false;
            if t + dt >= next_out {
                dt = next_out - t;
                hits_output = true;
            }
            s = self.ssp_rk3(&s, dt);
            t = if hits_output { next_out } else { t + dt };
            steps += 1;
            last_dt = dt;
            if let Some(e) = self.check_events(t, &s) {
                events.push(e);
                break;
            }
            if hits_output {
                diagnostics.push(self.diagnostics(t, dt, &self.to_state(&s), region));
                next_out = (next_out + cfg.output_interval).min(cfg.t_end);
            }
        }
        let final_state = self.to_state(&s);
        if diagnostics.last().map(|d| d.t) != Some(t) && events.iter().all(|e| !matches!(e, SolverEvent::NonFinite { .. })) {
            diagnostics.push(self.diagnostics(t, last_dt, &final_state, region));
        }
        Ok(RunReport { diagnostics, events, final_state, t_final: t, steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_force_of_a_cosine() {
        let grid = Grid::new(64).unwrap();
        let params = PhysParams::new(0.7, 1.0).unwrap();
        let rho: Vec<f64> = grid.x.iter().map(|x| 1.0 + (TAU * x).cos()).collect();
        let f = poisson_force(&rho, &params, &grid).unwrap();
        for (x, v) in grid.x.iter().zip(&f) {
            assert!((v - 0.7 * (TAU * x).sin() / TAU).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_mismatch_rejected() {
        let grid = Grid::new(16).unwrap();
        let params = PhysParams::new(1.0, 1.0).unwrap();
        assert!(matches!(poisson_force(&[1.5; 16], &params, &grid), Err(SolverError::MeanMismatch { .. })));
    }

    #[test]
    fn cfl_violation_suggests_dt() {
        let params = PhysParams::new(0.5, 1.0).unwrap();
        let solver = Solver::new(params, KernelTable::zero(32).unwrap(), SolverConfig { n: 32, ..Default::default() }).unwrap();
        let s = GridState::cosine(&solver.grid, 1.0, &[], &[1.0], 0.0);
        match solver.step(&s, 1.0) {
            Err(SolverError::CflViolation { suggested, .. }) => assert!(suggested < 1.0 && suggested > 0.0),
            other => panic!("expected CFL rejection, got {other:?}"),
        }
    }
}
