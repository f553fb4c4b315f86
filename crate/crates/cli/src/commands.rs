use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use epa_core::auxlin::PhasePoint;
use epa_core::dynamics::{classify_field, fuzz_invariance, ClassifyError, FuzzError, FuzzMode, FuzzReport, PointClass};
use epa_core::kernel::KernelTable;
use epa_core::rearrange::{bound_oracle, bounds_report, rearrange_kernel, Target};
use epa_core::regions::*;
use epa_core::solver::{GridState, InitialData, Solver, SolverError};
use epa_core::spectral::Grid;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, CliError, Command, PlaneArg};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.literal_paper_boundary {
        cfg.region.options.literal_paper_boundary = true;
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Config(format!("{}: {e}", cfg.out.display())))?;
    write_json(&cfg.out.join("config.resolved.json"), &cfg)?;
    match &cli.command {
        Command::Region => region(&cfg),
        Command::Classify { data } => classify(&cfg, data.as_deref(), cli.plane),
        Command::Simulate => simulate(&cfg),
        Command::Fuzz => fuzz(&cfg),
        Command::Rearrange { kernel, oracle } => rearrange(&cfg, kernel.as_deref(), *oracle),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn region_err(e: RegionError) -> CliError {
    match e {
        RegionError::AdmissibilityViolated { kind, margin } => CliError::Admissibility { region: kind.to_string(), margin },
        other => CliError::Config(other.to_string()),
    }
}

fn build(cfg: &RunConfig, kind: RegionKind) -> Result<Region, RegionError> {
    let (params, opts) = (cfg.params(), &cfg.region.options);
    let band = cfg.band().map_err(|e| RegionError::Construction(e.to_string()))?;
    match kind {
        RegionKind::Sigma1 => build_sigma1(&params, &band, opts),
        RegionKind::Sigma2 => build_sigma2(&params, &band, opts),
        RegionKind::Sigma3 => build_sigma3(&params, &band, opts),
        RegionKind::Delta1 => build_delta1(&params, &band, opts),
        RegionKind::Delta2 => build_delta2(&params, &band, opts),
        RegionKind::SigmaL => {
            let bounds = cfg.bounds_config().map_err(|e| RegionError::Construction(e.to_string()))?;
            build_sigma_l(&params, &band, &bounds, opts)
        }
    }
}

/// Subcritical and supercritical kinds for the configured band.
fn auto_kinds(cfg: &RunConfig) -> Result<(RegionKind, RegionKind), CliError> {
    let case = AlignmentCase::of(&cfg.params(), &cfg.band()?);
    let sub = match case {
        _ if cfg.is_weakly_singular() => RegionKind::SigmaL,
        AlignmentCase::Weak => RegionKind::Sigma1,
        AlignmentCase::Medium => RegionKind::Sigma3,
        AlignmentCase::Strong => RegionKind::Sigma2,
    };
    let sup = if case == AlignmentCase::Weak { RegionKind::Delta1 } else { RegionKind::Delta2 };
    Ok((sub, sup))
}

fn selected_regions(cfg: &RunConfig) -> Result<Vec<Region>, CliError> {
    let kinds = match cfg.region.kind {
        Some(kind) => vec![kind],
        None => {
            let (sub, sup) = auto_kinds(cfg)?;
            vec![sub, sup]
        }
    };
    kinds.into_iter().map(|k| build(cfg, k).map_err(region_err)).collect()
}

#[derive(Serialize)]
struct RegionDoc<'a> {
    kind: RegionKind,
    closure: Closure,
    epsilon_boundary: f64,
    rho_zero_ray: Option<RhoZeroRay>,
    scaffold: &'a RegionScaffold,
    segments: Vec<&'a str>,
}

fn region(cfg: &RunConfig) -> Result<(), CliError> {
    let rho_cap = cfg.region.options.rho_cap_factor * cfg.physics.c;
    for r in selected_regions(cfg)? {
        let name = r.kind().name();
        let doc = RegionDoc {
            kind: r.kind(),
            closure: r.closure,
            epsilon_boundary: r.epsilon_boundary,
            rho_zero_ray: r.rho_zero_ray,
            scaffold: &r.scaffold,
            segments: r.boundary.iter().map(|s| s.label.as_str()).collect(),
        };
        write_json(&cfg.out.join(format!("{name}.json")), &doc)?;
        let pq = cfg.out.join(format!("{name}_pq.csv"));
        r.write_boundary_csv(create(&pq)?).map_err(|e| io_err(&pq, e))?;
        let grho = cfg.out.join(format!("{name}_grho.csv"));
        r.to_grho(rho_cap).write_boundary_csv(create(&grho)?).map_err(|e| io_err(&grho, e))?;
        let adm = r.scaffold.admissibility.map(|a| format!(", margin {:e}", a.margin)).unwrap_or_default();
        println!("{name}: p1 = {}{adm}", r.scaffold.p1);
    }
    Ok(())
}

fn solver_err(e: SolverError) -> CliError {
    match e {
        SolverError::MeanMismatch { .. } | SolverError::Data(_) | SolverError::Grid(_) => CliError::Data(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn initial_state(cfg: &RunConfig, grid: &Grid, data: Option<&Path>) -> Result<GridState, CliError> {
    let init = match data {
        Some(path) => InitialData::Table { path: path.to_path_buf() },
        None => cfg.initial.clone(),
    };
    GridState::from_initial(grid, cfg.physics.c, &init).map_err(solver_err)
}

#[derive(Serialize)]
struct ClassCounts {
    subcritical: usize,
    supercritical: usize,
    gap: usize,
    indeterminate: usize,
}

#[derive(Serialize)]
struct ClassifyDoc<'a> {
    summary: &'a epa_core::dynamics::FieldSummary,
    counts: ClassCounts,
    regions: Vec<RegionKind>,
}

fn classify(cfg: &RunConfig, data: Option<&Path>, plane: PlaneArg) -> Result<(), CliError> {
    let n = cfg.solver.n;
    let grid = Grid::new(n).map_err(|e| CliError::Config(e.to_string()))?;
    let state = initial_state(cfg, &grid, data)?;
    let kernel = cfg.kernel(n)?;
    let regions = selected_regions(cfg)?;
    let report = classify_field(&state.rho, &state.u, &kernel, &cfg.params(), &regions).map_err(|e| match e {
        ClassifyError::MeanMismatch { .. } | ClassifyError::NegativeDensity { .. } => CliError::Data(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    let count = |c: PointClass| report.points.iter().filter(|p| p.class == c).count();
    let doc = ClassifyDoc {
        summary: &report.summary,
        counts: ClassCounts {
            subcritical: count(PointClass::Subcritical),
            supercritical: count(PointClass::Supercritical),
            gap: count(PointClass::Gap),
            indeterminate: count(PointClass::Indeterminate),
        },
        regions: regions.iter().map(Region::kind).collect(),
    };
    write_json(&cfg.out.join("classify.json"), &doc)?;
    let path = cfg.out.join("points.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let header = match plane {
        PlaneArg::Grho => ["index", "x", "G", "rho", "class", "region", "distance"],
        PlaneArg::Pq => ["index", "x", "w", "s", "class", "region", "distance"],
    };
    w.write_record(header).map_err(|e| io_err(&path, e))?;
    for p in &report.points {
        let (a, b) = match plane {
            PlaneArg::Grho => (p.g, p.rho),
            PlaneArg::Pq => {
                let x = PhasePoint::from_grho(p.g, p.rho);
                (x.p, x.q)
            }
        };
        let class = serde_json::to_value(p.class).map_err(|e| io_err(&path, e))?;
        w.write_record([
            p.index.to_string(),
            format!("{:.17e}", p.x),
            format!("{a:.17e}"),
            format!("{b:.17e}"),
            class.as_str().unwrap_or_default().to_string(),
            p.region.map(|r| r.name().to_string()).unwrap_or_default(),
            format!("{:.17e}", p.distance_estimate),
        ])
        .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    println!("{}", serde_json::to_string(&report.summary).unwrap_or_default());
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    t_final: f64,
    steps: usize,
    terminating_event: Option<&'a epa_core::solver::SolverEvent>,
    census_region: Option<RegionKind>,
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.params();
    let kernel = cfg.kernel(cfg.solver.n)?;
    let solver = Solver::new(params, kernel, cfg.solver).map_err(solver_err)?;
    let state = initial_state(cfg, &solver.grid, None)?;
    let census = match cfg.region.kind {
        Some(kind) => Some(build(cfg, kind).map_err(region_err)?),
        None if params.k > 0.0 => auto_kinds(cfg).ok().and_then(|(sub, _)| build(cfg, sub).ok()),
        None => None,
    };
    let report = solver.run(&state, census.as_ref()).map_err(solver_err)?;
    let diag = cfg.out.join("diagnostics.csv");
    report.write_diagnostics_csv(create(&diag)?).map_err(|e| io_err(&diag, e))?;
    write_json(&cfg.out.join("events.json"), &report.events)?;
    report.final_state.write_csv(&solver.grid, &cfg.out.join("final_state.csv")).map_err(solver_err)?;
    let summary = RunSummary {
        t_final: report.t_final,
        steps: report.steps,
        terminating_event: report.terminating_event(),
        census_region: census.as_ref().map(Region::kind),
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    match report.terminating_event() {
        Some(e) => println!("stopped at t = {} by {}", e.t(), serde_json::to_value(e).map(|v| v["kind"].to_string()).unwrap_or_default()),
        None => println!("reached t = {} in {} steps", report.t_final, report.steps),
    }
    Ok(())
}

fn fuzz(cfg: &RunConfig) -> Result<(), CliError> {
    let mut reports: Vec<FuzzReport> = Vec::new();
    for r in selected_regions(cfg)? {
        let mode = if r.kind().is_subcritical() { FuzzMode::Invariance } else { FuzzMode::ReachAxis };
        let rep = fuzz_invariance(&r, &cfg.fuzz_config(mode)?).map_err(|e| match e {
            FuzzError::BadTiming { .. } => CliError::Config(e.to_string()),
            FuzzError::NoInteriorStart(_) => CliError::Data(e.to_string()),
        })?;
        println!("{}: {}/{} {}", r.kind(), rep.n_exits, rep.n_trials, if mode == FuzzMode::Invariance { "exits" } else { "reached the axis" });
        reports.push(rep);
    }
    write_json(&cfg.out.join("fuzz_report.json"), &reports)?;
    let failures: Vec<String> = reports
        .iter()
        .filter(|r| match r.mode {
            FuzzMode::Invariance => r.n_exits > 0,
            FuzzMode::ReachAxis => !r.violations.is_empty(),
        })
        .map(|r| format!("{} ({} violating trials)", r.region, r.violations.len()))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Fuzz(failures.join(", ")))
    }
}

#[derive(Serialize)]
struct OracleCheck {
    lower: f64,
    upper: f64,
    lower_gap: f64,
    upper_gap: f64,
}

#[derive(Serialize)]
struct RearrangeDoc {
    cells: usize,
    bounds: epa_core::rearrange::BoundsReport,
    oracle: Option<OracleCheck>,
}

fn rearrange(cfg: &RunConfig, kernel: Option<&Path>, oracle: bool) -> Result<(), CliError> {
    let table = match kernel {
        Some(path) => KernelTable::from_csv(path).map_err(|e| CliError::Data(e.to_string()))?,
        None => cfg.kernel(cfg.solver.n)?,
    };
    let bounds_cfg = cfg.bounds_config()?;
    let rk = rearrange_kernel(&table.samples).map_err(|e| CliError::Data(e.to_string()))?;
    let report = bounds_report(&rk, &bounds_cfg);
    let oracle = if oracle {
        let solve = |t| bound_oracle(&table.samples, &bounds_cfg, t).map(|s| s.value).map_err(|e| CliError::Data(e.to_string()));
        let (lower, upper) = (solve(Target::Min)?, solve(Target::Max)?);
        Some(OracleCheck { lower, upper, lower_gap: lower - report.lower, upper_gap: upper - report.upper })
    } else {
        None
    };
    println!("psi*rho in [{}, {}]", report.lower, report.upper);
    write_json(&cfg.out.join("rearrange.json"), &RearrangeDoc { cells: table.n(), bounds: report, oracle })
}
