//! Command-line front end. Inputs are SI/eV; every run writes CSV plus a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{self, EvolutionConfig, C_STAB};
use crate::groundstate::{self, GroundStateConfig, RadialState};
use crate::io::{fmt_f64, fmt_opt, table1_targets, write_json, CsvTable, RunManifest};
use crate::kernels::{kernel_from_form_factor, GravityKernel};
use crate::radial::RadialGrid;
use crate::units::{
    energy_to_si, length_to_si, natural_scales, time_to_si, Model, PhysicalParams, HBAR_C_EV_M,
};
use crate::variational::{minimize_spread, sweep};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "solitonic",
    version,
    about = "Spreads and dynamics of self-gravitating quantum wave-packets"
)]
pub struct Cli {
    /// TOML file with one table per subcommand; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Variational spreads on the 4x5 reference grid, with deviations from the printed values.
    Table1(Table1Args),
    /// Log-spaced mass sweep of variational spreads per model.
    Fig1(Fig1Args),
    /// Self-consistent ground state on a radial grid.
    Groundstate(GroundstateArgs),
    /// Real-time evolution from the ground state or a Gaussian.
    Evolve(EvolveArgs),
    /// Compare the nonlocal kernel with its numerically inverted form factor.
    KernelCheck(KernelCheckArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Args {
    /// Relative band used for the pass/fail summary.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig1Args {
    #[arg(long)]
    pub mass_min: Option<f64>,
    #[arg(long)]
    pub mass_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Comma-separated M_s values in eV; pass the flag with no value for a Newtonian-only sweep.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub ms_ev: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundstateArgs {
    #[arg(long)]
    pub mass_kg: Option<f64>,
    #[arg(long)]
    pub model: Option<Model>,
    #[arg(long)]
    pub ms_ev: Option<f64>,
    /// Yukawa inverse range in 1/m; defaults to M_s / (hbar c) when only M_s is given.
    #[arg(long)]
    pub mu_inv_m: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Fixed outer radius in meters; disables automatic expansion.
    #[arg(long)]
    pub r_max_m: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Also report the gap to the best Gaussian on the same discrete functional.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub compare_variational: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Ground,
    Gaussian,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveArgs {
    #[arg(long)]
    pub mass_kg: Option<f64>,
    #[arg(long)]
    pub model: Option<Model>,
    #[arg(long)]
    pub ms_ev: Option<f64>,
    #[arg(long)]
    pub mu_inv_m: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub r_max_m: Option<f64>,
    /// Time step in units of the gravitational time; defaults to half the stability bound.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_enum)]
    pub initial: Option<InitialState>,
    /// Gaussian start width as a multiple of the variational spread.
    #[arg(long)]
    pub sigma_factor: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gravity_off: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckArgs {
    /// Dimensionless non-locality `M_s l0`; radii are sampled in [r_min/beta, r_max/beta].
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else if matches!(e, Error::Io(_)) {
        1
    } else {
        EXIT_NUMERICAL
    }
}

/// Overlay explicitly given flags on the config-file section for `command`.
fn merge_config<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<&toml::Table>,
    command: &str,
) -> Result<T> {
    let Some(section) = config.and_then(|c| c.get(command)) else {
        return serde_json::from_value(serde_json::to_value(flags).map_err(cfg_err)?)
            .map_err(cfg_err);
    };
    let mut merged = serde_json::to_value(section).map_err(cfg_err)?;
    let serde_json::Value::Object(base) = &mut merged else {
        return Err(Error::Config(format!("[{command}] must be a table")));
    };
    if let serde_json::Value::Object(given) = serde_json::to_value(flags).map_err(cfg_err)? {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| Error::Config(format!("[{command}]: {e}")))
}

fn cfg_err(e: serde_json::Error) -> Error {
    Error::Config(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<Option<toml::Table>> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path)?;
    text.parse::<toml::Table>()
        .map(Some)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn physical(
    mass_kg: f64,
    model: Model,
    ms_ev: Option<f64>,
    mu_inv_m: Option<f64>,
) -> Result<PhysicalParams> {
    let p = match model {
        Model::Newtonian => PhysicalParams::newtonian(mass_kg),
        Model::Idg => PhysicalParams::idg(
            mass_kg,
            ms_ev.ok_or_else(|| Error::Config("idg needs --ms-ev".into()))?,
        ),
        Model::Yukawa => {
            let mu = mu_inv_m
                .or(ms_ev.map(|m| m / HBAR_C_EV_M))
                .ok_or_else(|| Error::Config("yukawa needs --mu-inv-m or --ms-ev".into()))?;
            PhysicalParams::yukawa(mass_kg, mu)
        }
    };
    p.validate()?;
    Ok(p)
}

struct Outputs<'a> {
    dir: &'a Path,
    command: &'a str,
    written: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path, command: &'a str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir,
            command,
            written: Vec::new(),
        })
    }

    fn csv(&mut self, table: &CsvTable) -> Result<()> {
        let name = format!("{}.csv", self.command);
        table.write(&self.dir.join(&name))?;
        self.written.push(name);
        Ok(())
    }

    fn report<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let name = format!("{}.report.json", self.command);
        write_json(&self.dir.join(&name), value)?;
        self.written.push(name);
        Ok(())
    }

    fn manifest<P: Serialize>(mut self, params: &P) -> Result<()> {
        let name = format!("{}.manifest.json", self.command);
        let mut m = RunManifest::new(self.command, params)?;
        self.written.push(name.clone());
        m.outputs = self.written;
        m.write(&self.dir.join(name))
    }
}

/// Run a parsed invocation and return the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let config = load_config(cli.config.as_deref())?;
    let config = config.as_ref();
    let dir = cli.out_dir.as_path();
    match &cli.command {
        Command::Table1(a) => cmd_table1(&merge_config(a, config, "table1")?, dir),
        Command::Fig1(a) => cmd_fig1(&merge_config(a, config, "fig1")?, dir),
        Command::Groundstate(a) => cmd_groundstate(&merge_config(a, config, "groundstate")?, dir),
        Command::Evolve(a) => cmd_evolve(&merge_config(a, config, "evolve")?, dir),
        Command::KernelCheck(a) => cmd_kernel_check(&merge_config(a, config, "kernel-check")?, dir),
    }
}

#[derive(Debug, Serialize)]
struct Table1Params {
    tolerance: f64,
}

pub fn cmd_table1(a: &Table1Args, dir: &Path) -> Result<i32> {
    let params = Table1Params {
        tolerance: a.tolerance.unwrap_or(0.05),
    };
    let start = Instant::now();
    let targets = table1_targets()?;
    let mut table = CsvTable::new(
        "table1/v1",
        &[
            "mass_kg",
            "model",
            "ms_ev",
            "sigma_m",
            "sigma_reference_m",
            "rel_deviation",
            "regime",
            "status",
        ],
    );
    let (mut failures, mut outside, mut worst) = (0, 0, 0.0_f64);
    for t in &targets {
        let p = match t.model {
            Model::Idg => PhysicalParams::idg(t.mass_kg, t.ms_ev.unwrap_or(f64::NAN)),
            _ => PhysicalParams::newtonian(t.mass_kg),
        };
        let mut row = vec![fmt_f64(t.mass_kg), t.model.to_string(), fmt_opt(t.ms_ev)];
        match minimize_spread(&p) {
            Ok(r) => {
                let dev = (r.sigma_m - t.sigma_m) / t.sigma_m;
                worst = worst.max(dev.abs());
                if dev.abs() > params.tolerance {
                    outside += 1;
                }
                row.extend([
                    fmt_f64(r.sigma_m),
                    fmt_f64(t.sigma_m),
                    fmt_f64(dev),
                    r.regime.map(|g| g.as_str()).unwrap_or("").to_string(),
                    "ok".to_string(),
                ]);
            }
            Err(e) => {
                failures += 1;
                row.extend([
                    String::new(),
                    fmt_f64(t.sigma_m),
                    String::new(),
                    String::new(),
                    format!("error: {e}"),
                ]);
            }
        }
        table.push(row);
    }
    let mut out = Outputs::new(dir, "table1")?;
    out.csv(&table)?;
    out.manifest(&params)?;
    println!(
        "table1: {} cells, {failures} failed, {outside} outside {:.1}%, max |deviation| {:.4} ({:.3} s)",
        targets.len(),
        100.0 * params.tolerance,
        worst,
        start.elapsed().as_secs_f64()
    );
    Ok(if failures > 0 {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Serialize)]
struct Fig1Params {
    mass_min: f64,
    mass_max: f64,
    points: usize,
    ms_ev: Vec<f64>,
}

pub fn cmd_fig1(a: &Fig1Args, dir: &Path) -> Result<i32> {
    let params = Fig1Params {
        mass_min: a.mass_min.unwrap_or(1e-18),
        mass_max: a.mass_max.unwrap_or(1e-8),
        points: a.points.unwrap_or(101),
        ms_ev: a.ms_ev.clone().unwrap_or_else(|| vec![0.004, 0.01, 0.1]),
    };
    if !(params.mass_min > 0.0 && params.mass_max > params.mass_min && params.points >= 2) {
        return Err(Error::Config(
            "need 0 < mass_min < mass_max and points >= 2".into(),
        ));
    }
    let (l0, l1) = (params.mass_min.log10(), params.mass_max.log10());
    let masses: Vec<f64> = (0..params.points)
        .map(|i| 10f64.powf(l0 + (l1 - l0) * i as f64 / (params.points - 1) as f64))
        .collect();
    let mut templates = vec![PhysicalParams::newtonian(1.0)];
    templates.extend(params.ms_ev.iter().map(|&ms| PhysicalParams::idg(1.0, ms)));
    let rows = sweep(&masses, &templates)?;
    let mut table = CsvTable::new(
        "fig1/v1",
        &["m_kg", "model", "ms_ev", "sigma_m", "regime", "status"],
    );
    let mut failures = 0;
    for row in &rows {
        let p = row.params;
        let mut line = vec![fmt_f64(p.mass_kg), p.model.to_string(), fmt_opt(p.ms_ev)];
        match &row.result {
            Ok(r) => line.extend([
                fmt_f64(r.sigma_m),
                r.regime.map(|g| g.as_str()).unwrap_or("").to_string(),
                "ok".to_string(),
            ]),
            Err(e) => {
                failures += 1;
                line.extend([String::new(), String::new(), format!("error: {e}")]);
            }
        }
        table.push(line);
    }
    let mut out = Outputs::new(dir, "fig1")?;
    out.csv(&table)?;
    out.manifest(&params)?;
    println!("fig1: {} rows, {failures} failed", rows.len());
    Ok(if failures > 0 {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Serialize)]
struct GroundstateParams {
    physical: PhysicalParams,
    solver: GroundStateConfig,
    compare_variational: bool,
}

#[derive(Debug, Serialize)]
struct GroundstateReport {
    #[serde(flatten)]
    solver: groundstate::SolverReport,
    virial_ratio: f64,
    width_m: f64,
    energy_functional_j: f64,
    sigma_variational: f64,
    sigma_variational_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaussian_functional_gap: Option<groundstate::FunctionalGap>,
}

fn solver_config(nodes: Option<usize>, r_max_m: Option<f64>, l0_m: f64) -> GroundStateConfig {
    let d = GroundStateConfig::default();
    GroundStateConfig {
        nodes: nodes.unwrap_or(d.nodes),
        r_max: r_max_m.map(|r| r / l0_m),
        ..d
    }
}

pub fn cmd_groundstate(a: &GroundstateArgs, dir: &Path) -> Result<i32> {
    let p = physical(
        a.mass_kg.unwrap_or(1e-14),
        a.model.unwrap_or(Model::Newtonian),
        a.ms_ev,
        a.mu_inv_m,
    )?;
    let scales = natural_scales(&p)?;
    let mut cfg = solver_config(a.nodes, a.r_max_m, scales.l0_m);
    cfg.tolerance = a.tolerance.unwrap_or(cfg.tolerance);
    cfg.max_iterations = a.max_iterations.unwrap_or(cfg.max_iterations);
    let params = GroundstateParams {
        physical: p,
        solver: cfg.clone(),
        compare_variational: a.compare_variational,
    };
    let kernel = GravityKernel::from_scales(p.model, &scales);
    let variational = minimize_spread(&p)?;
    let (state, report) = groundstate::solve_with_kernel(&kernel, variational.sigma_natural, &cfg)?;
    let gap = if a.compare_variational {
        Some(groundstate::functional_gap(&kernel, &state, &report)?)
    } else {
        None
    };

    let mut table = CsvTable::new("groundstate_profile/v1", &["r", "r_m", "R", "u"]);
    for (i, (u, rf)) in state.u.iter().zip(state.radial_function()).enumerate() {
        let r = state.grid.r(i);
        table.push(vec![
            fmt_f64(r),
            fmt_f64(length_to_si(r, &scales)),
            fmt_f64(rf),
            fmt_f64(*u),
        ]);
    }
    let full = GroundstateReport {
        virial_ratio: report.virial_ratio(),
        width_m: length_to_si(report.width, &scales),
        energy_functional_j: energy_to_si(report.energy_functional, &scales),
        sigma_variational: variational.sigma_natural,
        sigma_variational_m: variational.sigma_m,
        gaussian_functional_gap: gap,
        solver: report,
    };
    let mut out = Outputs::new(dir, "groundstate")?;
    out.csv(&table)?;
    out.report(&full)?;
    out.manifest(&params)?;
    println!(
        "groundstate: converged={} residual={:.3e} F={:.12} width={:.6e} m virial={:.6}{}",
        full.solver.converged,
        full.solver.residual,
        full.solver.energy_functional,
        full.width_m,
        full.virial_ratio,
        gap.map(|g| format!(" gaussian_gap={:.6e}", g.gap))
            .unwrap_or_default()
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct EvolveParams {
    physical: PhysicalParams,
    nodes: usize,
    r_max_m: Option<f64>,
    initial: InitialState,
    sigma_factor: f64,
    evolution: EvolutionConfig,
}

#[derive(Debug, Serialize)]
struct EvolveReport {
    samples: usize,
    t_end: f64,
    t_end_s: f64,
    max_norm_drift: f64,
    max_energy_drift: f64,
    max_width_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    free_law_max_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationarity_deviation: Option<f64>,
}

pub fn cmd_evolve(a: &EvolveArgs, dir: &Path) -> Result<i32> {
    let p = physical(
        a.mass_kg.unwrap_or(1e-14),
        a.model.unwrap_or(Model::Newtonian),
        a.ms_ev,
        a.mu_inv_m,
    )?;
    let scales = natural_scales(&p)?;
    let kernel = GravityKernel::from_scales(p.model, &scales);
    let initial_kind = a.initial.unwrap_or_default();
    let sigma_factor = a.sigma_factor.unwrap_or(1.0);
    let cfg = solver_config(a.nodes, a.r_max_m, scales.l0_m);
    let variational = minimize_spread(&p)?;
    let initial = match initial_kind {
        InitialState::Ground => {
            groundstate::solve_with_kernel(&kernel, variational.sigma_natural, &cfg)?.0
        }
        InitialState::Gaussian => {
            let sigma = sigma_factor * variational.sigma_natural;
            let r_max = cfg.r_max.unwrap_or(cfg.r_max_factor * sigma);
            RadialState::gaussian(RadialGrid::new(cfg.nodes, r_max)?, sigma)?
        }
    };
    let h = initial.grid.h;
    let mut ecfg = EvolutionConfig::new(
        a.dt.unwrap_or(0.5 * C_STAB * h * h),
        a.steps.unwrap_or(1000),
    )
    .with_stride(a.stride.unwrap_or(10));
    ecfg.gravity_off = a.gravity_off;
    let params = EvolveParams {
        physical: p,
        nodes: initial.grid.nodes,
        r_max_m: a.r_max_m,
        initial: initial_kind,
        sigma_factor,
        evolution: ecfg,
    };
    let traj = evolution::evolve_with_kernel(&initial, &kernel, &ecfg)?;

    let mut table = CsvTable::new(
        "trajectory/v1",
        &["t", "t_s", "width", "width_m", "norm", "F"],
    );
    for i in 0..traj.len() {
        table.push(vec![
            fmt_f64(traj.times[i]),
            fmt_f64(time_to_si(traj.times[i], &scales)),
            fmt_f64(traj.widths[i]),
            fmt_f64(length_to_si(traj.widths[i], &scales)),
            fmt_f64(traj.norms[i]),
            fmt_f64(traj.energies_f[i]),
        ]);
    }
    let free_law = (a.gravity_off).then(|| {
        let s0 = traj.widths[0];
        traj.times
            .iter()
            .zip(&traj.widths)
            .map(|(t, w)| {
                let exact = evolution::free_gaussian_width(s0, *t);
                ((w - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    });
    let t_end = *traj.times.last().unwrap_or(&0.0);
    let report = EvolveReport {
        samples: traj.len(),
        t_end,
        t_end_s: time_to_si(t_end, &scales),
        max_norm_drift: traj.max_norm_drift(),
        max_energy_drift: traj.max_energy_drift(),
        max_width_deviation: traj.max_width_deviation(),
        free_law_max_deviation: free_law,
        stationarity_deviation: (initial_kind == InitialState::Ground && !a.gravity_off)
            .then(|| traj.max_width_deviation()),
    };
    let mut out = Outputs::new(dir, "evolve")?;
    out.csv(&table)?;
    out.report(&report)?;
    out.manifest(&params)?;
    println!(
        "evolve: {} samples to t={:.4} norm_drift={:.3e} F_drift={:.3e} width_deviation={:.3e}{}",
        report.samples,
        report.t_end,
        report.max_norm_drift,
        report.max_energy_drift,
        report.max_width_deviation,
        free_law
            .map(|d| format!(" free_law_deviation={d:.3e}"))
            .unwrap_or_default()
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct KernelCheckParams {
    beta: f64,
    points: usize,
    r_min: f64,
    r_max: f64,
    tolerance: f64,
}

pub fn cmd_kernel_check(a: &KernelCheckArgs, dir: &Path) -> Result<i32> {
    let params = KernelCheckParams {
        beta: a.beta.unwrap_or(1.0),
        points: a.points.unwrap_or(50),
        r_min: a.r_min.unwrap_or(1e-3),
        r_max: a.r_max.unwrap_or(1e2),
        tolerance: a.tolerance.unwrap_or(1e-6),
    };
    if !(params.r_min > 0.0 && params.r_max > params.r_min && params.points >= 2) {
        return Err(Error::Config(
            "need 0 < r_min < r_max and points >= 2".into(),
        ));
    }
    let kernel = GravityKernel::idg(params.beta);
    kernel.validate()?;
    let (l0, l1) = (params.r_min.log10(), params.r_max.log10());
    let mut table = CsvTable::new(
        "kernel_check/v1",
        &["r", "kernel", "kernel_spectral", "rel_deviation"],
    );
    let mut worst = 0.0_f64;
    for i in 0..params.points {
        let r = 10f64.powf(l0 + (l1 - l0) * i as f64 / (params.points - 1) as f64) / params.beta;
        let exact = kernel.eval(r)?;
        let spectral = kernel_from_form_factor(params.beta, r)?;
        let dev = ((spectral - exact) / exact).abs();
        worst = worst.max(dev);
        table.push(vec![
            fmt_f64(r),
            fmt_f64(exact),
            fmt_f64(spectral),
            fmt_f64(dev),
        ]);
    }
    let mut out = Outputs::new(dir, "kernel-check")?;
    out.csv(&table)?;
    out.manifest(&params)?;
    println!(
        "kernel-check: beta={} max relative deviation {worst:.3e}",
        params.beta
    );
    Ok(if worst <= params.tolerance {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}
