//! Experiment runner: single optimizations and dissociation-curve
//! sweeps driven by flags or a TOML config file, with deterministic
//! CSV traces and summaries.
//!
//! Exit codes: 0 converged, 2 not converged within the iteration
//! budget, 3 line-search stall, 64 usage or input error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::ansatz::{generate_pool, OperatorPool};
use crate::bounds::{nk_rate, temple_bracket, BoundOutcome};
use crate::exactdiag::SpectralOracle;
use crate::fock::{build_hamiltonian, SectorBasis, SparseHamiltonian};
use crate::integrals::{load_fixture, SidecarMeta};
use crate::optimizers::{fit_gamma, run, Method, OptimizerConfig, RunResult, RunStatus};
use crate::residues::{variance_full, MeasurementLedger};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_STALLED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "pqe", about = "Projective quantum eigensolver laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize a single FCIDUMP instance and write its trace.
    Run(RunArgs),
    /// Run every fixture matching a glob and tabulate the curve.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML config file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// standard | approx_mnr | approx_nr | hybrid | algorithm1 | vqe_bfgs
    #[arg(long)]
    method: Option<String>,
    /// Maximum excitation rank of the operator pool.
    #[arg(long)]
    max_rank: Option<usize>,
    /// Stopping threshold on the practical criterion.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    eta_threshold: Option<f64>,
    #[arg(long)]
    tau_reset: Option<f64>,
    #[arg(long)]
    armijo_c: Option<f64>,
    #[arg(long)]
    alpha_threshold: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// on | off: exact-diagonalization diagnostics in the outputs.
    #[arg(long)]
    oracle: Option<String>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// FCIDUMP file to optimize.
    #[arg(long)]
    fcidump: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Glob over FCIDUMP files, e.g. `fixtures/h4/*.fcidump`.
    #[arg(long)]
    fixtures: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

/// Config-file counterpart of the flags.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    fcidump: Option<PathBuf>,
    fixtures: Option<String>,
    method: Option<String>,
    max_rank: Option<usize>,
    epsilon: Option<f64>,
    eta_threshold: Option<f64>,
    tau_reset: Option<f64>,
    armijo_c: Option<f64>,
    alpha_threshold: Option<f64>,
    max_iters: Option<usize>,
    oracle: Option<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub fcidump: Option<PathBuf>,
    pub fixtures: Option<String>,
    pub max_rank: usize,
    pub oracle: bool,
    pub out: PathBuf,
    pub seed: u64,
    pub opt: OptimizerConfig,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(format!("expected on/off, got {other:?}")),
    }
}

fn resolve(
    common: &CommonArgs,
    fcidump: Option<PathBuf>,
    fixtures: Option<String>,
) -> Result<RunConfig, String> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let method_str = common.method.clone().or(file.method);
    let method = match method_str {
        Some(s) => s.parse::<Method>()?,
        None => Method::Algorithm1,
    };
    let defaults = OptimizerConfig::default();
    let opt = OptimizerConfig {
        method,
        epsilon: common.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        eta_threshold: common
            .eta_threshold
            .or(file.eta_threshold)
            .unwrap_or(defaults.eta_threshold),
        tau_reset: common.tau_reset.or(file.tau_reset).unwrap_or(defaults.tau_reset),
        armijo_c: common.armijo_c.or(file.armijo_c).unwrap_or(defaults.armijo_c),
        alpha_threshold: common
            .alpha_threshold
            .or(file.alpha_threshold)
            .unwrap_or(defaults.alpha_threshold),
        max_iters: common.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
        ..defaults
    };
    let oracle = match common.oracle.clone().or(file.oracle) {
        Some(s) => parse_on_off(&s)?,
        None => true,
    };
    Ok(RunConfig {
        fcidump: fcidump.or(file.fcidump),
        fixtures: fixtures.or(file.fixtures),
        max_rank: common.max_rank.or(file.max_rank).unwrap_or(2),
        oracle,
        out: common.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        seed: file.seed.unwrap_or(0),
        opt,
    })
}

/// Entry point; returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Keep clap's rendering but the spec'd usage exit code for
            // genuine errors (help/version still exit 0).
            let code = if e.exit_code() == 0 { 0 } else { EXIT_USAGE };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => match resolve(&a.common, a.fcidump, None) {
            Ok(cfg) => run_single(&cfg),
            Err(msg) => Err(msg),
        },
        Command::Sweep(a) => match resolve(&a.common, None, a.fixtures) {
            Ok(cfg) => run_sweep(&cfg),
            Err(msg) => Err(msg),
        },
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

struct Instance {
    h: SparseHamiltonian,
    pool: OperatorPool,
    meta: SidecarMeta,
    oracle: Option<SpectralOracle>,
}

fn load_instance(cfg: &RunConfig, path: &Path) -> Result<Instance, String> {
    let (ints, meta) =
        load_fixture(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let basis = Arc::new(SectorBasis::new(ints.m, ints.n_electrons, 0));
    let h = build_hamiltonian(&ints, basis.clone())
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let pool = generate_pool(&ints, basis, cfg.max_rank)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let oracle = if cfg.oracle {
        Some(crate::exactdiag::solve(&h, 3).map_err(|e| format!("{}: {e}", path.display()))?)
    } else {
        None
    };
    Ok(Instance { h, pool, meta, oracle })
}

/// Formats a float for CSV: empty for NaN, full precision otherwise.
fn csv_f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| format!("{}: {e}", tmp.display()))?;
    std::fs::rename(&tmp, path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_trace(path: &Path, result: &RunResult) -> Result<(), String> {
    let mut csv =
        String::from("iter,energy,r_norm1,r_norm2_sq,eta,eps_ta,alpha,probes,rule,energy_measurements\n");
    for rec in &result.trace {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            rec.iter,
            csv_f(rec.energy),
            csv_f(rec.r_norm1),
            csv_f(rec.r_norm2_sq),
            csv_f(rec.eta),
            csv_f(rec.eps_ta),
            csv_f(rec.alpha),
            rec.probes,
            rec.rule_used,
            rec.ledger_snapshot
        );
    }
    write_atomic(path, &csv)
}

/// Oracle-side diagnostics for one finished run.
struct Diagnostics {
    eps_exact: f64,
    eps_t_full: f64,
    gamma_fit: f64,
    gamma_lb: f64,
}

fn diagnostics(inst: &Instance, result: &RunResult) -> Diagnostics {
    let mut d = Diagnostics {
        eps_exact: f64::NAN,
        eps_t_full: f64::NAN,
        gamma_fit: f64::NAN,
        gamma_lb: f64::NAN,
    };
    if let Some(oracle) = &inst.oracle {
        d.eps_exact = result.energy - oracle.e_gs;
        if let Ok(var) = variance_full(&inst.h, &inst.pool, &result.t) {
            if let BoundOutcome::Applicable((lower, upper)) =
                temple_bracket(result.energy, var, oracle.e_es)
            {
                d.eps_t_full = upper - lower;
            }
        }
    }
    if result.status == RunStatus::Converged {
        if let Some(g) = fit_gamma(&result.t_history, &result.t) {
            d.gamma_fit = g;
        }
    }
    if result.trace[0].eta > 0.0 {
        if let BoundOutcome::Applicable((_, gamma_lb)) = nk_rate(result.trace[0].eta, 1.0) {
            d.gamma_lb = gamma_lb;
        }
    }
    d
}

fn status_str(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::MaxIters => "max_iters",
        RunStatus::Stalled => "stalled",
    }
}

fn status_code(s: RunStatus) -> i32 {
    match s {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxIters => EXIT_NOT_CONVERGED,
        RunStatus::Stalled => EXIT_STALLED,
    }
}

fn run_single(cfg: &RunConfig) -> Result<i32, String> {
    let path = cfg.fcidump.clone().ok_or("run: --fcidump (or config fcidump) is required")?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| format!("{}: {e}", cfg.out.display()))?;
    let inst = load_instance(cfg, &path)?;
    let ledger = MeasurementLedger::new();
    let result = run(&cfg.opt, &inst.pool, &inst.h, &ledger).map_err(|e| e.to_string())?;
    let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
    write_trace(&cfg.out.join(format!("{stem}.trace.csv")), &result)?;

    let d = diagnostics(&inst, &result);
    let mut summary = String::new();
    let _ = writeln!(summary, "fcidump = {}", path.display());
    let _ = writeln!(summary, "method = {}", cfg.opt.method);
    let _ = writeln!(summary, "max_rank = {}", cfg.max_rank);
    let _ = writeln!(summary, "epsilon = {:e}", cfg.opt.epsilon);
    let _ = writeln!(summary, "status = {}", status_str(result.status));
    let _ = writeln!(summary, "iterations = {}", result.iterations);
    let _ = writeln!(summary, "energy_final = {:.12}", result.energy);
    let _ = writeln!(summary, "eps_ta_final = {}", csv_f(result.eps_ta_final));
    let _ = writeln!(summary, "energy_measurements = {}", ledger.total());
    if let Some(oracle) = &inst.oracle {
        let _ = writeln!(summary, "oracle_e_gs = {:.12}", oracle.e_gs);
        let _ = writeln!(summary, "oracle_e_es = {:.12}", oracle.e_es);
        let _ = writeln!(summary, "eps_exact = {}", csv_f(d.eps_exact));
        let _ = writeln!(summary, "eps_t_full = {}", csv_f(d.eps_t_full));
    }
    let _ = writeln!(summary, "gamma_fit = {}", csv_f(d.gamma_fit));
    let _ = writeln!(summary, "gamma_lb = {}", csv_f(d.gamma_lb));
    write_atomic(&cfg.out.join(format!("{stem}.summary.txt")), &summary)?;
    Ok(status_code(result.status))
}

fn run_sweep(cfg: &RunConfig) -> Result<i32, String> {
    let pattern = cfg.fixtures.clone().ok_or("sweep: --fixtures (or config fixtures) is required")?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| format!("{}: {e}", cfg.out.display()))?;
    let mut paths: Vec<PathBuf> = glob::glob(&pattern)
        .map_err(|e| format!("bad glob {pattern:?}: {e}"))?
        .filter_map(|p| p.ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        eprintln!("warning: no fixtures match {pattern:?}");
    }

    let mut table = String::from(
        "distance_angstrom,e_final,eps_exact,eps_ta_final,eps_t_full,converged,iterations,\
         energy_measurements,gamma_fit,gamma_lb\n",
    );
    for path in &paths {
        let row = sweep_point(cfg, path);
        match row {
            Ok(row) => table.push_str(&row),
            Err(msg) => {
                // Failures stay in-row; the sweep keeps going.
                eprintln!("warning: {msg}");
                let _ = writeln!(table, ",,,,,false,,,,");
            }
        }
    }
    write_atomic(&cfg.out.join("sweep.csv"), &table)?;
    Ok(EXIT_OK)
}

fn sweep_point(cfg: &RunConfig, path: &Path) -> Result<String, String> {
    let inst = load_instance(cfg, path)?;
    let ledger = MeasurementLedger::new();
    let result = run(&cfg.opt, &inst.pool, &inst.h, &ledger).map_err(|e| format!("{}: {e}", path.display()))?;
    let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
    write_trace(&cfg.out.join(format!("{stem}.trace.csv")), &result)?;
    let d = diagnostics(&inst, &result);
    Ok(format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        csv_f(inst.meta.bond_distance_angstrom.unwrap_or(f64::NAN)),
        csv_f(result.energy),
        csv_f(d.eps_exact),
        csv_f(result.eps_ta_final),
        csv_f(d.eps_t_full),
        result.status == RunStatus::Converged,
        result.iterations,
        ledger.total(),
        csv_f(d.gamma_fit),
        csv_f(d.gamma_lb),
    ))
}
