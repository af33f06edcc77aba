//! Command-line driver: loads a run configuration, dispatches one pipeline,
//! and writes `report.json` plus CSV tables to the output directory.

use crate::assembly::{assemble_dirac, DiracVariant};
use crate::config::RunConfig;
use crate::domain::{voxelize, VoxelDomain};
use crate::eigen::{cluster, dense_hermitian_eig, lanczos_eig, EigenResult, Target};
use crate::error::{Error, Result};
use crate::modes::{kernel_growth, verify_zero_modes, weyl_checks, weyl_diagnostic};
use crate::report::{Check, VerificationReport};
use crate::spectral_map::{convergence_study, verify_theorem, ConvergenceConfig, TheoremConfig};
use crate::susy::{random_pair_suite, verify_susy, verify_symmetries, SusyConfig, SusyPair};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "ZIGZAG_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "zigzag", version, about = "Zigzag Dirac operators on voxelized domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, overriding the configuration.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Solver seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Assemble the operator and write it as Matrix Market.
    Assemble,
    /// Eigenvalues of the Dirac operator.
    Spectrum,
    /// Supersymmetric structure and symmetries on a domain.
    VerifySusy,
    /// Exact map between the induced Laplacian and the Dirac spectrum.
    VerifyTheorem,
    /// Polynomial zero modes and their residuals.
    ZeroModes,
    /// Kernel dimension at the mass along a refinement sequence.
    KernelGrowth,
    /// Measure ratios and cutoff Rayleigh quotients on an unbounded domain.
    Weyl,
    /// Convergence of the lowest eigenvalues on the unit cube.
    Converge,
    /// Random-pair suite with built-in defaults.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Assemble => "assemble",
            Command::Spectrum => "spectrum",
            Command::VerifySusy => "verify-susy",
            Command::VerifyTheorem => "verify-theorem",
            Command::ZeroModes => "zero-modes",
            Command::KernelGrowth => "kernel-growth",
            Command::Weyl => "weyl",
            Command::Converge => "converge",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Serialize)]
struct Metadata {
    timestamp_unix: u64,
    elapsed_seconds: f64,
    version: &'static str,
}

#[derive(Serialize)]
struct RunReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    config_hash: String,
    threads: usize,
    passed: bool,
    #[serde(flatten)]
    report: &'a VerificationReport,
    metadata: Metadata,
}

#[derive(Serialize)]
struct ErrorRecord {
    command: &'static str,
    exit_code: i32,
    error: String,
    config_hash: Option<String>,
    metadata: Metadata,
}

/// Exit code for an error, following the documented contract.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } | Error::ShiftSingular { .. } | Error::WindowMismatch(_) => EXIT_NO_CONVERGENCE,
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::EmptyDomain
        | Error::EmptyInterior
        | Error::BoundedDomain { .. }
        | Error::TooLargeForDense { .. }
        | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_CHECK_FAILED,
    }
}

fn metadata(start: Instant) -> Metadata {
    let timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Metadata { timestamp_unix, elapsed_seconds: start.elapsed().as_secs_f64(), version: env!("CARGO_PKG_VERSION") }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    run(&cli)
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if cli.command == Command::Selftest => RunConfig::default(),
        None => return Err(Error::Config("--config is required for this command".into())),
    };
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        cfg.output.dir = PathBuf::from(dir);
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(t) = cli.threads {
        cfg.solver.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and writes its artifacts. Returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let fallback_out = cli.out.clone().or_else(|| std::env::var(OUT_DIR_ENV).ok().map(PathBuf::from));
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => return report_error(cli.command, &e, None, fallback_out.as_deref(), start),
    };
    if cfg.solver.threads > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.solver.threads).build_global();
    }
    let out = cfg.output.dir.clone();
    let result = std::fs::create_dir_all(&out).map_err(Error::from).and_then(|_| dispatch(cli.command, &cfg, &out));
    match result {
        Ok(report) => {
            let passed = report.passed();
            let doc = RunReport {
                command: cli.command.name(),
                config: &cfg,
                config_hash: cfg.hash(),
                threads: rayon::current_num_threads(),
                passed,
                report: &report,
                metadata: metadata(start),
            };
            let json = serde_json::to_string_pretty(&doc).expect("report serializes");
            if let Err(e) = std::fs::write(out.join("report.json"), json + "\n") {
                return report_error(cli.command, &Error::from(e), Some(&cfg), Some(&out), start);
            }
            for c in &report.checks {
                eprintln!("{:>4}  {}", format!("{:?}", c.verdict).to_uppercase(), c.id);
            }
            if passed { EXIT_PASS } else { EXIT_CHECK_FAILED }
        }
        Err(e) => report_error(cli.command, &e, Some(&cfg), Some(&out), start),
    }
}

fn report_error(command: Command, e: &Error, cfg: Option<&RunConfig>, out: Option<&Path>, start: Instant) -> i32 {
    let code = exit_code_for(e);
    eprintln!("error: {e}");
    if let Some(dir) = out {
        let record = ErrorRecord {
            command: command.name(),
            exit_code: code,
            error: e.to_string(),
            config_hash: cfg.map(RunConfig::hash),
            metadata: metadata(start),
        };
        if std::fs::create_dir_all(dir).is_ok() {
            let json = serde_json::to_string_pretty(&record).expect("error record serializes");
            let _ = std::fs::write(dir.join("error.json"), json + "\n");
        }
    }
    code
}

fn write(out: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(out.join(name), contents)?;
    Ok(())
}

fn domain(cfg: &RunConfig) -> Result<VoxelDomain> {
    voxelize(cfg.require_domain()?, cfg.require_h()?, &cfg.bbox()?)
}

fn susy_config(cfg: &RunConfig) -> SusyConfig {
    let t = &cfg.tolerances;
    SusyConfig {
        dense_cap: cfg.solver.dense_cap,
        match_tol: t.spectrum_match,
        cluster_tol: t.cluster,
        block_square_tol: t.block_square,
        lift_tol: t.lift,
        lift_clusters: cfg.diagnostics.lift_clusters,
    }
}

fn dispatch(command: Command, cfg: &RunConfig, out: &Path) -> Result<VerificationReport> {
    match command {
        Command::Assemble => assemble(cfg, out),
        Command::Spectrum => spectrum(cfg, out),
        Command::VerifySusy => {
            let d = domain(cfg)?;
            let mut report = verify_susy(&SusyPair::from_domain(&d, cfg.mass)?, &susy_config(cfg))?;
            let sym = verify_symmetries(&d, cfg.mass, &susy_config(cfg), cfg.tolerances.symmetry)?;
            report.absorb("", sym);
            report.set_env("num_all", d.num_all());
            report.set_env("num_interior", d.num_interior());
            Ok(report)
        }
        Command::VerifyTheorem => {
            let d = domain(cfg)?;
            let t = &cfg.tolerances;
            let tc = TheoremConfig {
                dense_cap: cfg.solver.dense_cap,
                lanczos: cfg.solver.lanczos(),
                window: cfg.solver.window,
                map_tol: t.map,
                cluster_tol: t.cluster,
                zero_tol: t.zero,
                batch: cfg.solver.batch,
            };
            let report = verify_theorem(&d, cfg.mass, &tc)?;
            if let Some(rows) = report.env.get("window").and_then(|w| w.as_array()) {
                let mut csv = String::from("lambda,mult_laplacian,dirac,mult_dirac\n");
                for r in rows {
                    csv += &format!("{},{},{},{}\n", r["lambda"], r["mult_laplacian"], r["dirac"], r["mult_dirac"]);
                }
                write(out, "clusters.csv", &csv)?;
            }
            Ok(report)
        }
        Command::ZeroModes => {
            let d = domain(cfg)?;
            let (modes, report) = verify_zero_modes(&d, cfg.diagnostics.zero_mode_degree, cfg.tolerances.zero_mode)?;
            if cfg.output.fields {
                for z in &modes {
                    if let Some(f) = &z.field {
                        write(out, &format!("field_n{}.csv", z.n), &f.to_csv())?;
                    }
                }
            }
            Ok(report)
        }
        Command::KernelGrowth => {
            let (table, report) = kernel_growth(
                cfg.require_domain()?,
                &cfg.bbox()?,
                cfg.mass,
                cfg.require_h_list()?,
                cfg.solver.dense_cap,
                cfg.tolerances.zero,
                &cfg.solver.lanczos(),
            )?;
            write(out, "kernel_growth.csv", &table.to_csv())?;
            Ok(report)
        }
        Command::Weyl => {
            let d = weyl_diagnostic(cfg.require_domain()?, cfg.require_h()?, cfg.diagnostics.n_max, cfg.diagnostics.weight_exponent)?;
            write(out, "weyl.csv", &d.to_csv())?;
            Ok(weyl_checks(&d, cfg.tolerances.rayleigh_c))
        }
        Command::Converge => {
            let cc = ConvergenceConfig {
                dense_cap: cfg.solver.dense_cap,
                lanczos: cfg.solver.lanczos(),
                merge_tol: cfg.tolerances.merge,
                count: cfg.solver.k,
            };
            let table = convergence_study(cfg.require_domain()?, cfg.require_h_list()?, cfg.mass, &cc)?;
            write(out, "convergence.csv", &table.to_csv())?;
            let mut report = VerificationReport::new();
            let errors: Vec<f64> = table.rows.iter().map(|r| r.dirac_rel_error).collect();
            report.push(Check::holds("converge.dirac_error_decreasing", errors.windows(2).all(|w| w[1] < w[0]), "table"));
            let seven: Vec<f64> = table.rows.iter().map(|r| r.seven_point_rel_error).collect();
            report.push(Check::holds(
                "converge.seven_point_error_decreasing",
                seven.windows(2).all(|w| w[1] < w[0]),
                "table",
            ));
            report.set_env("convergence", &table);
            Ok(report)
        }
        Command::Selftest => {
            let d = &cfg.diagnostics;
            random_pair_suite(cfg.solver.seed, d.trials, &d.masses, &susy_config(cfg))
        }
    }
}

fn assemble(cfg: &RunConfig, out: &Path) -> Result<VerificationReport> {
    let d = domain(cfg)?;
    let a = assemble_dirac(&d, cfg.mass, DiracVariant::A)?;
    let mut report = VerificationReport::new();
    report.push(Check::within("assemble.hermitian", a.hermitian_deviation(), 0.0, "exact"));
    report.set_env("num_all", d.num_all());
    report.set_env("num_interior", d.num_interior());
    report.set_env("dimension", a.nrows());
    report.set_env("nnz", a.nnz());
    let mut mtx = Vec::new();
    a.write_matrix_market(&mut mtx)?;
    std::fs::write(out.join("operator.mtx"), mtx)?;
    write(out, "nodes.csv", &d.nodes_csv())?;
    Ok(report)
}

fn spectrum(cfg: &RunConfig, out: &Path) -> Result<VerificationReport> {
    let d = domain(cfg)?;
    let a = assemble_dirac(&d, cfg.mass, DiracVariant::A)?;
    let result: EigenResult = if a.nrows() <= cfg.solver.dense_cap {
        dense_hermitian_eig(&a, cfg.solver.dense_cap)?
    } else {
        let target = cfg.solver.shift.map_or(Target::Smallest, Target::Nearest);
        lanczos_eig(&a, cfg.solver.k.min(a.nrows()), target, &cfg.solver.lanczos())?
    };
    let span = match (result.eigenvalues.first(), result.eigenvalues.last()) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => 0.0,
    };
    let clusters = cluster(&result.eigenvalues, cfg.tolerances.cluster * span);
    write(out, "spectrum.csv", &result.to_csv())?;
    write(out, "clusters.csv", &clusters.to_csv())?;
    if cfg.output.operator {
        let mut mtx = Vec::new();
        a.write_matrix_market(&mut mtx)?;
        std::fs::write(out.join("operator.mtx"), mtx)?;
    }
    let mut report = VerificationReport::new();
    let norm = a.inf_norm().max(f64::MIN_POSITIVE);
    report.push(Check::within("spectrum.residual", result.max_residual() / norm, cfg.solver.tol, &result.method));
    report.set_env("dimension", a.nrows());
    report.set_env("eigenvalues", result.len());
    report.set_env("clusters", clusters.len());
    Ok(report)
}
