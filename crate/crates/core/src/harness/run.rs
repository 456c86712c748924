//! Experiment drivers: coefficient table, single kinetic/fluid runs and the
//! ε-sweep convergence study, with CSV/JSON/gnuplot artifacts and a manifest.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::checkpoint::{hex, save_checkpoint, CheckpointMeta, Snapshot};
use super::config::{CoefficientChoice, ExperimentConfig, Mode, ResolvedConfig};
use crate::collision::{CollisionOperators, CollisionSpec};
use crate::diagnostics::{contraction_ratios, moment_errors, DiagContext, MomentFields, MomentRecord, ERROR_NAMES};
use crate::error::{Result, VmbError};
use crate::fluid::{FluidOptions, FluidParams, FluidSolver, FluidState};
use crate::kinetic::{KineticOptions, KineticSolver, KineticState};
use crate::seed::FluidSeed;
use crate::spectral::{Grid, C64};
use crate::transport::{solve_transport, with_refinement, CoefficientReport, TransportSolutions};
use crate::velocity::{QuadSpec, VelocityBasis};

/// Basis, collision operators and transport solutions for one basis order.
pub struct Setup {
    pub basis: Arc<VelocityBasis>,
    pub ops: Arc<CollisionOperators>,
    pub transport: TransportSolutions,
    pub report: CoefficientReport,
}

impl Setup {
    pub fn build(order: usize) -> Result<Setup> {
        let basis = Arc::new(VelocityBasis::build(order, QuadSpec::default())?);
        let ops = Arc::new(CollisionOperators::assemble(&basis, CollisionSpec::default())?);
        let transport = solve_transport(&ops, &basis)?;
        let report = transport.report(&ops, &basis);
        Ok(Setup { basis, ops, transport, report })
    }

    pub fn meta(&self, grid: &Grid) -> CheckpointMeta {
        CheckpointMeta::new(grid, self.basis.order, self.basis.quad, self.ops.spec)
    }
}

/// Fluid coefficients from the report, the configured convention and overrides.
pub fn fluid_params(cfg: &ExperimentConfig, report: &CoefficientReport) -> FluidParams {
    let mut p = match cfg.physics.coefficients {
        CoefficientChoice::TwoSpecies => FluidParams::two_species_limit(report),
        CoefficientChoice::AsDefined => FluidParams::from_report(report),
    };
    if let Some(m) = cfg.physics.mu {
        p.mu = m;
    }
    if let Some(k) = cfg.physics.kappa {
        p.kappa = k;
    }
    if let Some(s) = cfg.physics.sigma {
        p.sigma = s;
    }
    p
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), value, threshold, passed: value <= threshold }
    }
    fn positive(name: &str, value: f64) -> Check {
        Check { name: name.into(), value, threshold: 0.0, passed: value > 0.0 }
    }
}

/// Files written so far; turned into the manifest at the end.
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Artifacts> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r.iter().map(|x| x.to_string())).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated columns with a commented header, for gnuplot.
    pub fn write_dat(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut s = format!("# {}\n", header.join(" "));
        for r in rows {
            let line: Vec<String> = r.iter().map(|x| format!("{x:.17e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        fs::write(self.path(name), s)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(value).map_err(|e| VmbError::Config(e.to_string()))?;
        fs::write(self.path(name), s + "\n")?;
        Ok(())
    }

    pub fn checkpoint(&mut self, name: &str, snap: &Snapshot, meta: &CheckpointMeta) -> Result<()> {
        let p = self.path(name);
        save_checkpoint(&p, snap, meta)
    }
}

fn csv_err(e: csv::Error) -> VmbError {
    VmbError::Io(std::io::Error::other(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: &'static str,
    pub status: String,
    pub error: Option<String>,
    pub config: String,
    pub defaulted: Vec<String>,
    pub basis_hash: Option<String>,
    pub collision_hash: Option<String>,
    pub files: Vec<String>,
}

/// Result of one harness invocation.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub summary: serde_json::Value,
}

/// Run whatever the config asks for, always leaving a manifest behind.
pub fn run(resolved: &ResolvedConfig) -> Result<Outcome> {
    let cfg = &resolved.config;
    let mut art = Artifacts::new(&cfg.out)?;
    let mut hashes: Option<(String, String)> = None;
    let result = match cfg.mode {
        Mode::Coeffs => run_coeffs(cfg, &mut art, &mut hashes),
        Mode::SimulateKinetic => run_kinetic_sweep(cfg, &mut art, &mut hashes),
        Mode::SimulateFluid => run_fluid_mode(cfg, &mut art, &mut hashes),
        Mode::Converge => run_convergence_study(cfg, &mut art, &mut hashes),
    };
    let (status, error) = match &result {
        Ok(o) if o.passed => ("complete".to_string(), None),
        Ok(_) => ("complete; thresholds failed".to_string(), None),
        Err(e) => ("partial".to_string(), Some(e.to_string())),
    };
    let mut files = art.files.clone();
    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: "vmb",
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode.name(),
        status,
        error,
        config: cfg.to_toml(),
        defaulted: resolved.defaulted.clone(),
        basis_hash: hashes.as_ref().map(|h| h.0.clone()),
        collision_hash: hashes.as_ref().map(|h| h.1.clone()),
        files,
    };
    let s = serde_json::to_string_pretty(&manifest).map_err(|e| VmbError::Config(e.to_string()))?;
    fs::write(art.dir.join("manifest.json"), s + "\n")?;
    result
}

fn grid_of(cfg: &ExperimentConfig) -> Result<Grid> {
    Grid::new(cfg.grid.dim, cfg.grid.modes)
}

fn steps_of(cfg: &ExperimentConfig) -> usize {
    (cfg.time.t_end / cfg.time.dt).round() as usize
}

fn is_snapshot(step: usize, steps: usize, cadence: usize) -> bool {
    step % cadence == 0 || step == steps
}

// ---------------------------------------------------------------- coeffs

#[derive(Clone, Debug, Serialize)]
pub struct CoeffsSummary {
    pub report: CoefficientReport,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn coefficient_checks(report: &CoefficientReport, cfg: &ExperimentConfig) -> Vec<Check> {
    let th = &cfg.thresholds;
    let mut checks = vec![
        Check::positive("mu", report.mu),
        Check::positive("kappa", report.kappa),
        Check::positive("sigma", report.sigma),
        Check::positive("lambda", report.lambda),
        Check::at_most("isotropy_offdiag", report.isotropy_offdiag, th.isotropy),
        Check::at_most("isotropy_diag", report.isotropy_diag, th.isotropy),
    ];
    if let Some(r) = &report.refinement {
        for (name, v) in [("mu", r.mu), ("kappa", r.kappa), ("sigma", r.sigma), ("lambda", r.lambda)] {
            checks.push(Check::at_most(&format!("refinement_{name}"), v.abs(), th.refinement));
        }
    }
    checks
}

fn run_coeffs(cfg: &ExperimentConfig, art: &mut Artifacts, hashes: &mut Option<(String, String)>) -> Result<Outcome> {
    let setup = Setup::build(cfg.basis.order)?;
    let meta = setup.meta(&grid_of(cfg)?);
    *hashes = Some((hex(&meta.basis_hash), hex(&meta.collision_hash)));
    let mut report = setup.report.clone();
    let mut rows = vec![row_of(&setup.report)];
    if cfg.basis.refine {
        let fine = Setup::build(cfg.basis.order + 1)?;
        rows.push(row_of(&fine.report));
        report = with_refinement(report, &fine.report);
    }
    let checks = coefficient_checks(&report, cfg);
    let passed = checks.iter().all(|c| c.passed);
    let header = ["order", "mu", "kappa", "sigma", "lambda"];
    art.write_csv("coeffs.csv", &header, &rows)?;
    art.write_dat("coeffs.dat", &header, &rows)?;
    let summary = CoeffsSummary { report, checks, passed };
    art.write_json("summary.json", &summary)?;
    Ok(Outcome { passed, summary: serde_json::to_value(&summary).unwrap() })
}

fn row_of(r: &CoefficientReport) -> Vec<f64> {
    vec![r.order as f64, r.mu, r.kappa, r.sigma, r.lambda]
}

// ---------------------------------------------------------------- kinetic

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct KineticSummary {
    pub eps: f64,
    pub steps: usize,
    pub snapshots: usize,
    pub warnings: Vec<String>,
    /// max over steps of ‖div E − n‖/‖n‖ after re-projection
    pub max_gauss: f64,
    /// same, before re-projection (per-step drift)
    pub max_gauss_drift: f64,
    pub max_div_b: f64,
    /// mass pair, momentum + Poynting, energy + field
    pub conservation_drift: [f64; 3],
    pub energy_initial: f64,
    pub energy_ratio_max: f64,
    pub energy_ratio_min: f64,
    /// ∫ ε⁻²‖ℙ⊥G‖²_ν dt (trapezoid over steps)
    pub micro_integral: f64,
    pub max_fp_iterations: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub error: Option<String>,
}

/// A kinetic run with its snapshot series.
pub struct KineticRun {
    pub summary: KineticSummary,
    pub records: Vec<MomentRecord>,
    pub moments: Vec<(f64, MomentFields)>,
    pub final_state: KineticState,
}

pub fn kinetic_options(cfg: &ExperimentConfig) -> KineticOptions {
    KineticOptions {
        nonlinear: cfg.kinetic.nonlinear,
        enforce_gauss: cfg.kinetic.enforce_gauss,
        fp_tol: cfg.kinetic.fp_tol,
        fp_max_iter: cfg.kinetic.fp_max_iter,
        amplitude_limit: cfg.kinetic.amplitude_limit,
    }
}

/// Integrate one ε to t_end, recording diagnostics at every snapshot.
/// Local-law residuals use the pair (step − 2, step), or (step − 1, step)
/// when only one step is available.
pub fn run_kinetic(setup: &Setup, cfg: &ExperimentConfig, eps: f64) -> Result<KineticRun> {
    let grid = grid_of(cfg)?;
    let seed = FluidSeed::profile(&grid, &cfg.seed.profile, cfg.seed.amplitude);
    let mut solver = KineticSolver::new(grid.clone(), setup.basis.clone(), setup.ops.clone(), eps, kinetic_options(cfg))?;
    let diag = DiagContext::new(grid.clone(), setup.basis.clone(), setup.ops.clone(), &setup.transport, setup.report.sigma, eps, 0)?;
    let (mut st, warnings) = solver.init_well_prepared(&seed)?;
    let steps = steps_of(cfg);
    let cadence = cfg.time.cadence;
    let th = &cfg.thresholds;

    let c0 = solver.conserved(&st);
    let e0 = diag.energy_functional(&st, 0)?;
    let mut records = vec![diag.record(&st, None)];
    let mut moments = vec![(st.t, diag.moments(&st))];
    let mut history: VecDeque<KineticState> = VecDeque::new();
    let mut max_gauss: f64 = solver.gauss_residual(&st);
    let mut max_drift: f64 = 0.0;
    let mut max_div_b: f64 = 0.0;
    let mut drift = [0.0f64; 3];
    let mut ratio_max: f64 = 1.0;
    let mut ratio_min: f64 = 1.0;
    let mut micro_prev = diag.micro_dissipation(&st);
    let mut micro = 0.0;
    let mut max_iter = 0;
    for step in 1..=steps {
        history.push_back(st.clone());
        if history.len() > 2 {
            history.pop_front();
        }
        let info = solver.step(&mut st, cfg.time.dt)?;
        max_gauss = max_gauss.max(info.gauss_after);
        max_drift = max_drift.max(info.gauss_before);
        max_div_b = max_div_b.max(info.div_b);
        max_iter = max_iter.max(info.iterations);
        let m = diag.micro_dissipation(&st);
        micro += 0.5 * cfg.time.dt * (m + micro_prev);
        micro_prev = m;
        let e = diag.energy_functional(&st, 0)?;
        ratio_max = ratio_max.max(e / (e0 + 1e-300));
        ratio_min = ratio_min.min(e / (e0 + 1e-300));
        if is_snapshot(step, steps, cadence) {
            let d = solver.conserved(&st).drift_from(&c0);
            for i in 0..3 {
                drift[i] = drift[i].max(d[i]);
            }
            let local = diag.local_conservation_residuals(&history[0], &st)?;
            records.push(diag.record(&st, Some(local)));
            moments.push((st.t, diag.moments(&st)));
        }
    }
    let finite = st.is_finite() && records.iter().all(|r| r.all_finite_nonneg());
    let mut checks = vec![
        Check { name: "finite".into(), value: if finite { 1.0 } else { 0.0 }, threshold: 1.0, passed: finite },
        Check::at_most("gauss", max_gauss, th.gauss),
        Check::at_most("div_b", max_div_b, th.gauss),
        Check::at_most("energy_growth", ratio_max, th.energy_growth),
    ];
    for (i, name) in ["conservation_mass", "conservation_momentum", "conservation_energy"].iter().enumerate() {
        checks.push(Check::at_most(name, drift[i], th.conservation));
    }
    let passed = checks.iter().all(|c| c.passed);
    let summary = KineticSummary {
        eps,
        steps,
        snapshots: records.len(),
        warnings,
        max_gauss,
        max_gauss_drift: max_drift,
        max_div_b,
        conservation_drift: drift,
        energy_initial: e0,
        energy_ratio_max: ratio_max,
        energy_ratio_min: ratio_min,
        micro_integral: micro,
        max_fp_iterations: max_iter,
        checks,
        passed,
        error: None,
    };
    Ok(KineticRun { summary, records, moments, final_state: st })
}

fn failed_summary(eps: f64, e: &VmbError) -> KineticSummary {
    KineticSummary {
        eps,
        steps: 0,
        snapshots: 0,
        warnings: Vec::new(),
        max_gauss: f64::NAN,
        max_gauss_drift: f64::NAN,
        max_div_b: f64::NAN,
        conservation_drift: [f64::NAN; 3],
        energy_initial: f64::NAN,
        energy_ratio_max: f64::NAN,
        energy_ratio_min: f64::NAN,
        micro_integral: f64::NAN,
        max_fp_iterations: 0,
        checks: Vec::new(),
        passed: false,
        error: Some(e.to_string()),
    }
}

fn eps_tag(eps: f64) -> String {
    format!("{eps}")
}

fn write_kinetic(art: &mut Artifacts, run: &KineticRun, meta: &CheckpointMeta, checkpoint: bool) -> Result<()> {
    let tag = eps_tag(run.summary.eps);
    let header = MomentRecord::header();
    let rows: Vec<Vec<f64>> = run.records.iter().map(|r| r.row()).collect();
    art.write_csv(&format!("kinetic_eps_{tag}.csv"), &header, &rows)?;
    art.write_dat(&format!("kinetic_eps_{tag}.dat"), &header, &rows)?;
    if checkpoint {
        art.checkpoint(&format!("kinetic_eps_{tag}.ckpt"), &Snapshot::Kinetic(run.final_state.clone()), meta)?;
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| VmbError::Config(format!("worker pool: {e}")))
}

fn sweep(setup: &Setup, cfg: &ExperimentConfig) -> Result<Vec<std::result::Result<KineticRun, VmbError>>> {
    let p = pool(cfg.workers)?;
    Ok(p.install(|| cfg.physics.eps.par_iter().map(|&eps| run_kinetic(setup, cfg, eps)).collect()))
}

#[derive(Clone, Debug, Serialize)]
pub struct KineticSweepSummary {
    pub runs: Vec<KineticSummary>,
    pub passed: bool,
}

fn run_kinetic_sweep(cfg: &ExperimentConfig, art: &mut Artifacts, hashes: &mut Option<(String, String)>) -> Result<Outcome> {
    let setup = Setup::build(cfg.basis.order)?;
    let meta = setup.meta(&grid_of(cfg)?);
    *hashes = Some((hex(&meta.basis_hash), hex(&meta.collision_hash)));
    let mut runs = Vec::new();
    for (eps, r) in cfg.physics.eps.iter().zip(sweep(&setup, cfg)?) {
        match r {
            Ok(run) => {
                write_kinetic(art, &run, &meta, cfg.kinetic.checkpoint)?;
                runs.push(run.summary);
            }
            Err(e) => runs.push(failed_summary(*eps, &e)),
        }
    }
    let passed = runs.iter().all(|r| r.passed);
    let summary = KineticSweepSummary { runs, passed };
    art.write_json("summary.json", &summary)?;
    Ok(Outcome { passed, summary: serde_json::to_value(&summary).unwrap() })
}

// ---------------------------------------------------------------- fluid

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FluidSummary {
    pub params: [f64; 3],
    pub steps: usize,
    pub snapshots: usize,
    pub max_div_u: f64,
    pub max_div_b: f64,
    pub max_gauss: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub const FLUID_COLUMNS: [&str; 11] =
    ["t", "u", "theta", "n", "E", "B", "energy", "dissipation", "div_u", "div_b", "gauss"];

pub struct FluidRun {
    pub summary: FluidSummary,
    pub rows: Vec<Vec<f64>>,
    pub states: Vec<FluidState>,
}

fn fluid_row(solver: &FluidSolver, st: &FluidState) -> Vec<f64> {
    let g = &solver.grid;
    let d: Vec<C64> = g.div(&st.e).iter().zip(&st.n).map(|(a, b)| a - b).collect();
    vec![
        st.t,
        g.vec_norm(&st.u),
        g.norm(&st.theta),
        g.norm(&st.n),
        g.vec_norm(&st.e),
        g.vec_norm(&st.b),
        solver.energy(st),
        solver.dissipation(st),
        g.norm(&g.div(&st.u)),
        g.norm(&g.div(&st.b)),
        g.norm(&d),
    ]
}

pub fn run_fluid(cfg: &ExperimentConfig, params: FluidParams) -> Result<FluidRun> {
    let grid = grid_of(cfg)?;
    let seed = FluidSeed::profile(&grid, &cfg.seed.profile, cfg.seed.amplitude);
    let mut solver = FluidSolver::new(grid, params, FluidOptions::default())?;
    let mut st = solver.init_from_seed(&seed);
    let steps = steps_of(cfg);
    let mut rows = vec![fluid_row(&solver, &st)];
    let mut states = vec![st.clone()];
    for step in 1..=steps {
        solver.step(&mut st, cfg.time.dt)?;
        if is_snapshot(step, steps, cfg.time.cadence) {
            rows.push(fluid_row(&solver, &st));
            states.push(st.clone());
        }
    }
    let col = |i: usize| rows.iter().map(|r| r[i]).fold(0.0f64, f64::max);
    let (max_div_u, max_div_b, max_gauss) = (col(8), col(9), col(10));
    let th = cfg.thresholds.fluid_divergence;
    let e0 = rows[0][6];
    let e1 = rows.last().unwrap()[6];
    let checks = vec![
        Check::at_most("div_u", max_div_u, th),
        Check::at_most("div_b", max_div_b, th),
        Check::at_most("gauss", max_gauss, th),
        Check::at_most("energy_ratio", e1 / (e0 + 1e-300), 1.0 + 1e-9),
    ];
    let passed = checks.iter().all(|c| c.passed) && st.is_finite();
    let summary = FluidSummary {
        params: [params.mu, params.kappa, params.sigma],
        steps,
        snapshots: rows.len(),
        max_div_u,
        max_div_b,
        max_gauss,
        energy_initial: e0,
        energy_final: e1,
        checks,
        passed,
    };
    Ok(FluidRun { summary, rows, states })
}

fn write_fluid(art: &mut Artifacts, run: &FluidRun, meta: &CheckpointMeta, checkpoint: bool) -> Result<()> {
    art.write_csv("fluid.csv", &FLUID_COLUMNS, &run.rows)?;
    art.write_dat("fluid.dat", &FLUID_COLUMNS, &run.rows)?;
    if checkpoint {
        art.checkpoint("fluid.ckpt", &Snapshot::Fluid(run.states.last().unwrap().clone()), meta)?;
    }
    Ok(())
}

fn run_fluid_mode(cfg: &ExperimentConfig, art: &mut Artifacts, hashes: &mut Option<(String, String)>) -> Result<Outcome> {
    let grid = grid_of(cfg)?;
    let needs_report = cfg.physics.mu.is_none() || cfg.physics.kappa.is_none() || cfg.physics.sigma.is_none();
    let (params, meta) = if needs_report {
        let setup = Setup::build(cfg.basis.order)?;
        (fluid_params(cfg, &setup.report), setup.meta(&grid))
    } else {
        let p = FluidParams { mu: cfg.physics.mu.unwrap(), kappa: cfg.physics.kappa.unwrap(), sigma: cfg.physics.sigma.unwrap() };
        (p, CheckpointMeta::new(&grid, cfg.basis.order, QuadSpec::default(), CollisionSpec::default()))
    };
    *hashes = Some((hex(&meta.basis_hash), hex(&meta.collision_hash)));
    let run = run_fluid(cfg, params)?;
    write_fluid(art, &run, &meta, cfg.kinetic.checkpoint)?;
    art.write_json("summary.json", &run.summary)?;
    Ok(Outcome { passed: run.summary.passed, summary: serde_json::to_value(&run.summary).unwrap() })
}

// ---------------------------------------------------------------- converge

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MetricRow {
    pub name: String,
    /// final-time value per ε (descending ε)
    pub values: Vec<f64>,
    pub ratios: Vec<f64>,
    pub monotone: bool,
    /// only for the metrics with a contraction bound
    pub contraction_ok: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub status: String,
    pub eps: Vec<f64>,
    pub fluid_params: [f64; 3],
    pub runs: Vec<KineticSummary>,
    pub fluid: FluidSummary,
    pub table: Vec<MetricRow>,
    /// sup-in-time moment errors per ε
    pub sup_errors: Vec<[f64; 5]>,
    /// max over ε of E₀(t)/E₀(0)
    pub energy_ratio_max: f64,
    /// max/min over ε of ∫ε⁻²‖ℙ⊥G‖²_ν dt
    pub dissipation_spread: f64,
    pub passed: bool,
}

pub const TABLE_METRICS: [&str; 8] = ["R_ohm", "R_bsq", "R_w", "err_u", "err_theta", "err_n", "err_E", "err_B"];

/// Assemble the cross-ε table from final-time values (rows in ε order).
pub fn contraction_table(finals: &[[f64; 8]], bound: f64) -> Vec<MetricRow> {
    (0..8)
        .map(|i| {
            let values: Vec<f64> = finals.iter().map(|f| f[i]).collect();
            let ratios = contraction_ratios(&values);
            let monotone = values.windows(2).all(|w| w[1] <= w[0]);
            let contraction_ok = if i < 2 { Some(ratios.iter().all(|r| *r <= bound)) } else { None };
            MetricRow { name: TABLE_METRICS[i].into(), values, ratios, monotone, contraction_ok }
        })
        .collect()
}

pub fn run_convergence_study(
    cfg: &ExperimentConfig,
    art: &mut Artifacts,
    hashes: &mut Option<(String, String)>,
) -> Result<Outcome> {
    let setup = Setup::build(cfg.basis.order)?;
    let grid = grid_of(cfg)?;
    let meta = setup.meta(&grid);
    *hashes = Some((hex(&meta.basis_hash), hex(&meta.collision_hash)));
    let params = fluid_params(cfg, &setup.report);
    let fluid = run_fluid(cfg, params)?;
    write_fluid(art, &fluid, &meta, cfg.kinetic.checkpoint)?;

    let mut runs = Vec::new();
    let mut finals = Vec::new();
    let mut sup_errors = Vec::new();
    let mut failures = 0;
    for (eps, r) in cfg.physics.eps.iter().zip(sweep(&setup, cfg)?) {
        let run = match r {
            Ok(run) => run,
            Err(e) => {
                failures += 1;
                runs.push(failed_summary(*eps, &e));
                continue;
            }
        };
        write_kinetic(art, &run, &meta, cfg.kinetic.checkpoint)?;
        let mut rows = Vec::new();
        let mut sup = [0.0f64; 5];
        for ((t, m), f) in run.moments.iter().zip(&fluid.states) {
            let e = moment_errors(&grid, m, f);
            for i in 0..5 {
                sup[i] = sup[i].max(e[i]);
            }
            let mut row = vec![*t];
            row.extend_from_slice(&e);
            rows.push(row);
        }
        let mut header = vec!["t"];
        header.extend_from_slice(&ERROR_NAMES);
        let tag = eps_tag(*eps);
        art.write_csv(&format!("errors_eps_{tag}.csv"), &header, &rows)?;
        art.write_dat(&format!("errors_eps_{tag}.dat"), &header, &rows)?;
        let last = run.records.last().unwrap();
        let e = &rows.last().unwrap()[1..];
        finals.push([last.ohm, last.boussinesq, last.energy_equiv, e[0], e[1], e[2], e[3], e[4]]);
        sup_errors.push(sup);
        runs.push(run.summary);
    }
    let table = contraction_table(&finals, cfg.thresholds.contraction);
    let ok_runs: Vec<&KineticSummary> = runs.iter().filter(|r| r.error.is_none()).collect();
    let energy_ratio_max = ok_runs.iter().map(|r| r.energy_ratio_max).fold(0.0, f64::max);
    let mi: Vec<f64> = ok_runs.iter().map(|r| r.micro_integral).collect();
    let dissipation_spread = if mi.is_empty() {
        f64::NAN
    } else {
        mi.iter().cloned().fold(0.0, f64::max) / mi.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-300)
    };
    let status = if failures > 0 {
        format!("partial: {failures} sub-run(s) failed")
    } else if finals.len() < 2 {
        "insufficient sweep".to_string()
    } else {
        "complete".to_string()
    };
    let passed = status == "complete"
        && table.iter().all(|r| r.monotone && r.contraction_ok.unwrap_or(true))
        && energy_ratio_max <= cfg.thresholds.energy_growth
        && dissipation_spread < cfg.thresholds.dissipation_spread;

    let mut header = vec!["eps"];
    header.extend_from_slice(&TABLE_METRICS);
    let rows: Vec<Vec<f64>> = ok_runs.iter().zip(&finals).map(|(r, f)| std::iter::once(r.eps).chain(f.iter().cloned()).collect()).collect();
    art.write_csv("contraction.csv", &header, &rows)?;
    art.write_dat("contraction.dat", &header, &rows)?;

    let report = ConvergenceReport {
        status,
        eps: cfg.physics.eps.clone(),
        fluid_params: [params.mu, params.kappa, params.sigma],
        runs,
        fluid: fluid.summary,
        table,
        sup_errors,
        energy_ratio_max,
        dissipation_spread,
        passed,
    };
    art.write_json("summary.json", &report)?;
    Ok(Outcome { passed, summary: serde_json::to_value(&report).unwrap() })
}
