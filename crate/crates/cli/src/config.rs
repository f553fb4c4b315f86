use std::path::{Path, PathBuf};

use epa_core::dynamics::FuzzConfig;
use epa_core::kernel::KernelTable;
use epa_core::params::{AlignmentBand, PhysParams};
use epa_core::rearrange::{improved_bounds, rearrange_kernel, symmetric_bounds, BoundsConfig};
use epa_core::regions::{RegionKind, RegionOptions};
use epa_core::solver::{InitialData, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One JSON document drives every subcommand. Only `physics` and `influence`
/// are required; everything else has the default noted on its field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    pub influence: Influence,
    /// Box constraints used by weakly singular bands and `rearrange`.
    #[serde(default)]
    pub bounds: DensityBounds,
    #[serde(default)]
    pub region: RegionSelection,
    /// Defaults: n 256, cfl 0.4, t_end 1, output_interval 0.1, blowup_ux 1e3,
    /// rho_cap_factor 1e6, tail_threshold 0.1, rho_floor_rel 1e-12.
    #[serde(default)]
    pub solver: SolverConfig,
    /// Default: cosine family with rho_amplitudes [0.05] and u ≡ 0.
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub fuzz: FuzzSettings,
    /// Default 0; `--seed` overrides.
    #[serde(default)]
    pub seed: u64,
    /// Default "out"; `--out` overrides.
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

/// Give `k` or `lambda = 2√(k/c)`; when both are present they must agree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub c: f64,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Influence {
    /// Band [c·psi_min, c·psi_max]; the solver kernel is the raised cosine between the two.
    Bounded { psi_min: f64, psi_max: f64 },
    Constant { psi: f64 },
    /// Either a kernel table (`kernel_file`, cell averages in offset order) or the
    /// calibrated power law a|x|^(−alpha) + b with the given l1_norm and gamma
    /// (alpha defaults to 0.5). A `gamma` next to a kernel file overrides the
    /// table's own γ in the band.
    WeaklySingular {
        #[serde(default)]
        kernel_file: Option<PathBuf>,
        #[serde(default)]
        l1_norm: Option<f64>,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

/// Defaults: rho_min 0, rho_max 2c.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityBounds {
    #[serde(default)]
    pub rho_min: f64,
    #[serde(default)]
    pub rho_max: Option<f64>,
}

/// `kind` absent or null selects the subcritical and supercritical regions for the band.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSelection {
    #[serde(default)]
    pub kind: Option<RegionKind>,
    /// Defaults: samples_per_segment 512, q_cap_factor 1e3, rho_cap_factor 1e3,
    /// epsilon_rel 1e-6, literal_paper_boundary false.
    #[serde(default)]
    pub options: RegionOptions,
}

/// Defaults: 1000 trials, dt 0.01, t_end 50/λ, signals drawn from the region's band.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzSettings {
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub signal_band: Option<AlignmentBand>,
    #[serde(default)]
    pub min_start_distance: Option<f64>,
}

impl Default for FuzzSettings {
    fn default() -> Self {
        Self { n_trials: default_trials(), dt: default_dt(), t_end: None, signal_band: None, min_start_distance: None }
    }
}

fn default_initial() -> InitialData {
    InitialData::Cosine { rho_amplitudes: vec![0.05], u_amplitudes: vec![], u_mean: 0.0 }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_alpha() -> f64 {
    0.5
}

fn default_trials() -> usize {
    1000
}

fn default_dt() -> f64 {
    0.01
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Fills derived defaults so the echoed config is complete.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let p = &mut self.physics;
        let k = match (p.k, p.lambda) {
            (Some(k), None) => k,
            (None, Some(l)) => l * l * p.c / 4.0,
            (Some(k), Some(l)) => {
                let from_lambda = l * l * p.c / 4.0;
                if (k - from_lambda).abs() > 1e-12 * k.abs().max(1.0) {
                    return Err(CliError::Config(format!("physics: k = {k} disagrees with lambda = {l} (k = {from_lambda})")));
                }
                k
            }
            (None, None) => return Err(CliError::Config("physics: give k or lambda".into())),
        };
        let params = PhysParams::new(k, p.c).map_err(config_err)?;
        p.k = Some(k);
        p.lambda = Some(params.lambda());
        if self.bounds.rho_max.is_none() {
            self.bounds.rho_max = Some(2.0 * params.c);
        }
        if self.fuzz.t_end.is_none() && params.k > 0.0 {
            self.fuzz.t_end = Some(50.0 / params.lambda());
        }
        Ok(())
    }

    pub fn params(&self) -> PhysParams {
        PhysParams { k: self.physics.k.unwrap_or(0.0), c: self.physics.c }
    }

    pub fn bounds_config(&self) -> Result<BoundsConfig, CliError> {
        let c = self.physics.c;
        BoundsConfig::new(self.bounds.rho_min, self.bounds.rho_max.unwrap_or(2.0 * c), c).map_err(config_err)
    }

    pub fn is_weakly_singular(&self) -> bool {
        matches!(self.influence, Influence::WeaklySingular { .. })
    }

    /// Kernel table on `n` cells.
    pub fn kernel(&self, n: usize) -> Result<KernelTable, CliError> {
        match &self.influence {
            Influence::Bounded { psi_min, psi_max } => KernelTable::raised_cosine(n, *psi_min, *psi_max).map_err(config_err),
            Influence::Constant { psi } => KernelTable::constant(n, *psi).map_err(config_err),
            Influence::WeaklySingular { kernel_file: Some(path), .. } => {
                let k = KernelTable::from_csv(path).map_err(|e| CliError::Data(e.to_string()))?;
                if k.n() != n {
                    return Err(CliError::Config(format!("kernel file has {} cells but solver.n = {n}", k.n())));
                }
                Ok(k)
            }
            Influence::WeaklySingular { kernel_file: None, l1_norm, gamma, alpha } => {
                let (Some(l1), Some(g)) = (l1_norm, gamma) else {
                    return Err(CliError::Config("weakly_singular needs kernel_file or both l1_norm and gamma".into()));
                };
                KernelTable::calibrated_power_law(n, *alpha, *l1, *g).map_err(config_err)
            }
        }
    }

    pub fn band(&self) -> Result<AlignmentBand, CliError> {
        let params = self.params();
        match &self.influence {
            Influence::Bounded { psi_min, psi_max } => {
                AlignmentBand::from_kernel_bounds(&params, *psi_min, *psi_max).map_err(config_err)
            }
            Influence::Constant { psi } => AlignmentBand::constant(params.c * psi).map_err(config_err),
            Influence::WeaklySingular { l1_norm, gamma, .. } => {
                let cfg = self.bounds_config()?;
                let b = match gamma {
                    Some(g) if cfg.is_symmetric() => {
                        let l1 = match l1_norm {
                            Some(l1) => *l1,
                            None => self.kernel(self.solver.n)?.l1_norm(),
                        };
                        symmetric_bounds(l1, *g, &cfg).map_err(config_err)?
                    }
                    _ => {
                        let table = self.kernel(self.solver.n)?;
                        improved_bounds(&rearrange_kernel(&table.samples).map_err(config_err)?, &cfg)
                    }
                };
                AlignmentBand::new(b.lower, b.upper).map_err(config_err)
            }
        }
    }

    pub fn fuzz_config(&self, mode: epa_core::dynamics::FuzzMode) -> Result<FuzzConfig, CliError> {
        let t_end = self.fuzz.t_end.ok_or_else(|| CliError::Config("fuzz.t_end is required when k = 0".into()))?;
        Ok(FuzzConfig {
            n_trials: self.fuzz.n_trials,
            base_seed: self.seed,
            dt: self.fuzz.dt,
            t_end,
            mode,
            min_start_distance: self.fuzz.min_start_distance,
            signal_band: self.fuzz.signal_band,
        })
    }
}
