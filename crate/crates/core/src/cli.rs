//! Batch driver behind the `bergman-lab` binary.
//!
//! Exit codes: 0 all checks pass, 1 a checked inequality or fit fails,
//! 2 numerical non-convergence (or a residual above tolerance for `weight`),
//! 3 configuration or I/O problems. Outputs are built in memory and written
//! at the end, so a run that fails early leaves no partial files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Error;
use crate::fit::LinearFit;
use crate::functionals::{phi_fit, PHI_FIT_RANGE};
use crate::verify::{self, Check, Suite};
use crate::weight::{ode_residual, sandwich_bounds, standard_grid, RadialProfile};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BERGMAN_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "bergman-lab",
    version,
    about = "Spherical Bergman weights, rearrangements and their inequalities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory (must exist).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate k, h, W, the ODE residual and the sandwich bounds (weight.csv).
    Weight,
    /// Run a verification suite and write report.json.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Fit the exponent of φ(T) near T = 1 (phi_fit.csv, fit.json).
    StabilityFit,
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Files to write, plus the exit code they go with.
struct Output {
    files: Vec<(&'static str, Vec<u8>)>,
    code: i32,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`] when it holds a positive
/// integer.
pub fn init_threads() {
    if let Some(k) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if k > 0 {
            // a second call (tests) finds the pool already built; that is fine
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global();
        }
    }
}

/// Loads the configuration with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match resolve_config(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if !cfg.output_dir.is_dir() {
        eprintln!(
            "error: output directory {} does not exist",
            cfg.output_dir.display()
        );
        return EXIT_CONFIG;
    }
    let result = match &cli.command {
        Command::Weight => cmd_weight(&cfg),
        Command::Verify { suite } => cmd_verify(&cfg, *suite),
        Command::StabilityFit => cmd_stability_fit(&cfg),
    };
    match result {
        Ok(out) => match write_all(&cfg.output_dir, &out.files) {
            Ok(()) => out.code,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numerical failure: {e}");
            EXIT_NUMERIC
        }
    }
}

/// Writes every file or none: on the first failure the ones already
/// written are removed.
fn write_all(dir: &Path, files: &[(&'static str, Vec<u8>)]) -> Result<(), String> {
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, bytes) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(format!("{}: {e}", path.display()));
        }
        written.push(path);
    }
    Ok(())
}

fn csv_bytes(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Config(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        // Display for f64 is the shortest string that parses back exactly
        w.write_record(row.iter().map(|x| x.to_string()))
            .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Failure::Config(format!("csv: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut s =
        serde_json::to_vec_pretty(value).map_err(|e| Failure::Config(format!("json: {e}")))?;
    s.push(b'\n');
    Ok(s)
}

fn cmd_weight(cfg: &RunConfig) -> Result<Output, Failure> {
    let n = cfg.n;
    let profile = RadialProfile::new(n, 0, -1.0)?;
    let radii = standard_grid();
    let mut rows = Vec::with_capacity(radii.len());
    let mut worst: f64 = 0.0;
    for &r in &radii {
        let h = profile.log_value(r)?;
        // the residual tends to 0 at the origin (k ~ 4cr/n); the formula needs r > 0
        let res = if r > 0.0 {
            ode_residual(n, -1.0, r)?
        } else {
            0.0
        };
        let (lo, hi) = sandwich_bounds(n, -1.0, r);
        worst = worst.max(res.abs());
        rows.push(vec![r, profile.derivative(r)?, h, h.exp(), res, lo, hi]);
    }
    let csv = csv_bytes(
        &[
            "r",
            "k",
            "h",
            "W",
            "ode_residual",
            "lower_bound",
            "upper_bound",
        ],
        &rows,
    )?;
    let plot = "set logscale x\nset datafile separator ','\nset key autotitle columnhead\n\
plot 'weight.csv' using 1:4 with lines, '' using 1:6 with lines, '' using 1:7 with lines\n";
    let code = if worst <= cfg.tolerances.ode_residual {
        EXIT_PASS
    } else {
        eprintln!(
            "ODE residual {worst:e} exceeds {:e}",
            cfg.tolerances.ode_residual
        );
        EXIT_NUMERIC
    };
    Ok(Output {
        files: vec![("weight.csv", csv), ("weight.gp", plot.as_bytes().to_vec())],
        code,
    })
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    suite: &'static str,
    passed: bool,
    runtime_s: f64,
    config: &'a RunConfig,
    checks: Vec<Check>,
}

fn cmd_verify(cfg: &RunConfig, suite: Suite) -> Result<Output, Failure> {
    let start = Instant::now();
    let checks = verify::run(cfg, suite).map_err(|e| match e {
        Error::Parameter(msg) => Failure::Config(msg),
        e => Failure::Numeric(e),
    })?;
    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        eprintln!(
            "{} {:<14} {:<60} margin {:+.3e} ({} items, {:.2}s)",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.worst_margin,
            c.count,
            c.runtime_s
        );
    }
    let report = VerifyReport {
        suite: suite.name(),
        passed,
        runtime_s: start.elapsed().as_secs_f64(),
        config: cfg,
        checks,
    };
    Ok(Output {
        files: vec![("report.json", json_bytes(&report)?)],
        code: if passed { EXIT_PASS } else { EXIT_FAIL },
    })
}

#[derive(Serialize)]
struct FitSummary {
    n: usize,
    alpha: f64,
    window: (f64, f64),
    #[serde(flatten)]
    fit: LinearFit,
    target: f64,
    tolerance: f64,
    passed: bool,
}

fn cmd_stability_fit(cfg: &RunConfig) -> Result<Output, Failure> {
    let fit = phi_fit(
        cfg.n,
        cfg.alpha,
        PHI_FIT_RANGE.0,
        PHI_FIT_RANGE.1,
        cfg.levels,
    )?;
    let rows: Vec<Vec<f64>> = fit
        .points
        .iter()
        .map(|p| vec![p.t, p.phi, p.log1m_t, p.log_phi])
        .collect();
    let csv = csv_bytes(&["T", "phi", "log1mT", "logphi"], &rows)?;
    let target = cfg.n as f64 / 2.0 + 1.0;
    let passed = (fit.fit.slope - target).abs() <= cfg.tolerances.slope;
    let summary = FitSummary {
        n: cfg.n,
        alpha: cfg.alpha,
        window: PHI_FIT_RANGE,
        fit: fit.fit,
        target,
        tolerance: cfg.tolerances.slope,
        passed,
    };
    let mut plot = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    let _ = writeln!(
        plot,
        "plot 'phi_fit.csv' using 3:4 with points, {} + {}*x with lines title 'fit'",
        fit.fit.intercept, fit.fit.slope
    );
    eprintln!(
        "slope {:.4} (target {target}, R² {:.8})",
        fit.fit.slope, fit.fit.r_squared
    );
    Ok(Output {
        files: vec![
            ("phi_fit.csv", csv),
            ("fit.json", json_bytes(&summary)?),
            ("phi_fit.gp", plot.into_bytes()),
        ],
        code: if passed { EXIT_PASS } else { EXIT_FAIL },
    })
}
