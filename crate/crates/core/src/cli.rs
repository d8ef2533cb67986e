//! Command-line front end: `validate`, `bounds`, `build`, `generate` and
//! `replicate`. Exit codes are 0 on success, 1 on a domain failure
//! (validation, feasibility, convergence) and 2 on usage, parse or I/O
//! errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::calibration::write_trajectories;
use crate::config::RunConfig;
use crate::engine::{build_plan_with_labels, check_specs, generate, validate_specs, GenerationPlan};
use crate::error::{Error, Result};
use crate::harness::{plan_options, preset, run_with_plan, HarnessOptions, DEFAULT_RESAMPLES};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MULTIDISCRETE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "multidiscrete", version, about = "Correlated count data with GP, NB and binomial margins")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CalibrationFlags {
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Calibration tolerance on the discrete correlation.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Samples per calibration iteration and per simulated bound.
    #[arg(long = "n-binary")]
    pub n_binary: Option<usize>,
    /// Fraction of the correlation gap applied at each update.
    #[arg(long = "step-fraction")]
    pub step_fraction: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check marginal parameters and the correlation matrix.
    Validate { config: PathBuf },
    /// Report feasibility bounds for every target correlation.
    Bounds {
        config: PathBuf,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cal: CalibrationFlags,
    },
    /// Calibrate and save a generation plan.
    Build {
        config: PathBuf,
        /// Plan file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write calibration trajectories as CSV.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[command(flatten)]
        cal: CalibrationFlags,
    },
    /// Draw a dataset from a saved plan.
    Generate {
        plan: PathBuf,
        /// Number of rows.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// CSV output; metadata goes to the same path with `.meta.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replication study on a preset (e.g. `gp-large`) or a config file.
    Replicate {
        scenario: String,
        #[arg(long)]
        replications: Option<usize>,
        /// Rows per replicate dataset.
        #[arg(long)]
        n: Option<usize>,
        /// Bootstrap resamples per parameter interval.
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        /// Write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cal: CalibrationFlags,
    },
}

fn apply_flags(cfg: &mut RunConfig, f: &CalibrationFlags) {
    if let Some(s) = f.seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = f.tolerance {
        cfg.calibration.tolerance = t;
    }
    if let Some(n) = f.n_binary {
        cfg.calibration.n_binary = n;
    }
    if let Some(s) = f.step_fraction {
        cfg.calibration.step_fraction = s;
    }
}

/// Metadata path for a dataset written to `csv`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

enum Outcome {
    Ok,
    DomainFailure,
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<Outcome> {
    match cmd {
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = validate_specs(&cfg.margins);
            for (i, spec) in cfg.margins.iter().enumerate() {
                let own = spec.validate();
                let status = if own.is_ok() { "ok".to_string() } else { own.to_string() };
                writeln!(out, "margin {} ({}): {status}", i + 1, spec.family())?;
            }
            let sigma = cfg.sigma();
            match &sigma {
                Ok(m) => writeln!(out, "correlation: ok ({0}x{0})", m.dim())?,
                Err(e) => writeln!(out, "correlation: {e}")?,
            }
            Ok(if report.is_ok() && sigma.is_ok() { Outcome::Ok } else { Outcome::DomainFailure })
        }
        Command::Bounds { config, out: path, cal } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_flags(&mut cfg, &cal);
            let report = check_specs(&cfg.margins, &cfg.sigma()?, &cfg.calibration_options())?;
            write!(out, "{report}")?;
            if let Some(p) = path.or(cfg.output.report.clone()) {
                write_json(&p, &report)?;
            }
            if report.is_feasible() {
                Ok(Outcome::Ok)
            } else {
                writeln!(out, "infeasible: {}", report.infeasible_labels())?;
                Ok(Outcome::DomainFailure)
            }
        }
        Command::Build {
            config,
            out: path,
            trajectories,
            cal,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_flags(&mut cfg, &cal);
            let path = path
                .or(cfg.output.plan.clone())
                .ok_or_else(|| Error::InvalidArgument("no plan output path (use --out)".into()))?;
            let plan = build_plan_with_labels(&cfg.margins, &cfg.sigma()?, &cfg.calibration_options(), cfg.labels()?)?;
            plan.save(&path)?;
            if let Some(t) = trajectories.or(cfg.output.trajectories.clone()) {
                write_trajectories(&plan.calibration, fs::File::create(t)?)?;
            }
            let iters: usize = plan.calibration.iter().map(|p| p.iterations).sum();
            writeln!(
                out,
                "plan written to {} ({} margins, {} pairs, {} calibration iterations, binary repair: {})",
                path.display(),
                plan.dim(),
                plan.calibration.len(),
                iters,
                if plan.binary_repair.was_repaired { "yes" } else { "no" }
            )?;
            Ok(Outcome::Ok)
        }
        Command::Generate { plan, n, seed, out: path } => {
            let plan = GenerationPlan::load(&plan)?;
            let data = generate(&plan, n as usize, seed)?;
            data.save(&path, &meta_path(&path))?;
            writeln!(out, "{} rows x {} columns written to {}", data.n_rows(), data.columns.len(), path.display())?;
            Ok(Outcome::Ok)
        }
        Command::Replicate {
            scenario,
            replications,
            n,
            resamples,
            out: path,
            cal,
        } => {
            let (mut sc, mut cfg) = match preset(&scenario) {
                Some(sc) => (sc, None),
                None => {
                    let cfg = RunConfig::load(Path::new(&scenario))?;
                    (cfg.scenario()?, Some(cfg))
                }
            };
            let mut cal_opts = cfg.as_ref().map(|c| c.calibration).unwrap_or_default();
            let mut seed = cfg.as_ref().and_then(|c| c.seed).unwrap_or(1);
            if let Some(s) = cal.seed {
                seed = s;
            }
            if let Some(t) = cal.tolerance {
                cal_opts.tolerance = t;
            }
            if let Some(v) = cal.n_binary {
                cal_opts.n_binary = v;
            }
            if let Some(v) = cal.step_fraction {
                cal_opts.step_fraction = v;
            }
            if let Some(r) = replications {
                sc.replications = r;
            }
            if let Some(n) = n {
                sc.n = n;
            }
            let opts = HarnessOptions {
                calibration: cal_opts,
                resamples,
                ..HarnessOptions::default()
            };
            let plan = crate::engine::build_plan(&sc.specs, &sc.sigma_star, &plan_options(seed, &cal_opts))?;
            let table = run_with_plan(&sc, &plan, seed, &opts)?;
            write!(out, "{table}")?;
            let path = path.or_else(|| cfg.as_mut().and_then(|c| c.output.table.take()));
            if let Some(p) = path {
                table.write_csv(fs::File::create(p)?)?;
            }
            Ok(Outcome::Ok)
        }
    }
}

fn limit_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // fails only if the pool already exists, in which case it stays as is
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    limit_threads();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli.command, &mut lock) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::DomainFailure) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Infeasible(report) = &e {
                eprint!("{report}");
            }
            if e.is_domain() {
                1
            } else {
                2
            }
        }
    }
}
