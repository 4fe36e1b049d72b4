//! Command-line front end: `memmon <command> --config experiment.toml`.
//!
//! Every command reads one [`ExperimentConfig`], writes its files into the
//! output directory through temporary files and renames, and finishes with
//! `manifest.json` listing the sha256 of each file. Exit codes: 0 on
//! success, 1 for configuration errors, 2 for numerical or output failures
//! (including failed `validate` checks).

pub mod config;
pub mod output;
pub mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::hilbert::{purity, trace_distance};
use crate::kernel::{factorize, reconstruct};
use crate::monitor::{conditional_states_to_text, Monitor};

pub use config::{Experiment, ExperimentConfig, Format};
pub use output::{OutputDir, RunManifest, Table, CSV_SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "memmon",
    version,
    about = "Monitored non-Markovian open quantum systems on a memory lattice"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factorize the configured correlation into a coupling kernel.
    Factorize(CommonArgs),
    /// Sample one heterodyne trajectory.
    Trajectory(CommonArgs),
    /// Average conditional states over many trajectories.
    Ensemble(CommonArgs),
    /// Reduced system state with the exiting field traced out.
    Nonselective(CommonArgs),
    /// Run the invariant suites on the configured experiment.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides `outputs.directory`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Overrides `outputs.formats`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Factorize(_) => "factorize",
            Command::Trajectory(_) => "trajectory",
            Command::Ensemble(_) => "ensemble",
            Command::Nonselective(_) => "nonselective",
            Command::Validate(_) => "validate",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Factorize(a)
            | Command::Trajectory(a)
            | Command::Ensemble(a)
            | Command::Nonselective(a)
            | Command::Validate(a) => a,
        }
    }
}

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub directory: PathBuf,
    pub manifest: PathBuf,
    /// Lines for standard output.
    pub report: Vec<String>,
    /// False when `validate` found a failing check.
    pub success: bool,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() {
        1
    } else {
        2
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            if outcome.success {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn run(command: &Command) -> Result<Outcome> {
    let args = command.args();
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(format) = args.format {
        cfg.outputs.formats = vec![format];
    }
    let directory = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
    let exp = cfg.build()?;

    let pool = match args.threads {
        Some(0) => return Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("--threads: {e}")))?,
        ),
        None => None,
    };
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis());
    let clock = Instant::now();
    let mut out = OutputDir::create(&directory)?;
    let mut body = || -> Result<(Vec<String>, bool)> {
        match command {
            Command::Factorize(_) => factorize_command(&exp, &mut out),
            Command::Trajectory(_) => trajectory_command(&exp, &mut out),
            Command::Ensemble(_) => ensemble_command(&exp, &mut out),
            Command::Nonselective(_) => nonselective_command(&exp, &mut out),
            Command::Validate(_) => validate_command(&exp, &mut out),
        }
    };
    let (report, success) = match &pool {
        Some(p) => p.install(body)?,
        None => body()?,
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        config_sha256: cfg.hash(),
        seed: cfg.run.seed,
        csv_schema_version: CSV_SCHEMA_VERSION,
        started_unix_ms: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        files: Vec::new(),
    };
    let manifest = out.finish(manifest)?;
    Ok(Outcome {
        directory,
        manifest,
        report,
        success,
    })
}

fn write_table(exp: &Experiment, out: &mut OutputDir, stem: &str, table: &Table) -> Result<()> {
    for format in &exp.config.outputs.formats {
        match format {
            Format::Csv => out.write(&format!("{stem}.csv"), &table.to_csv())?,
            Format::Json => out.write(&format!("{stem}.json"), &table.to_json())?,
        };
    }
    Ok(())
}

fn monitor(exp: &Experiment) -> Result<Monitor> {
    Monitor::new(exp.system.clone(), exp.kernel.clone(), exp.lattice.clone())
}

fn state_columns(first: &[&str], d: usize) -> Vec<String> {
    let mut cols: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    cols.extend(output::matrix_columns("rho", d));
    cols
}

fn factorize_command(exp: &Experiment, out: &mut OutputDir) -> Result<(Vec<String>, bool)> {
    let target = exp.config.target_correlation()?;
    let n = exp.lattice.memory_bins();
    let f = match &exp.factorization {
        Some(f) => f.clone(),
        None => factorize(&target, n)?,
    };
    let alpha = reconstruct(&f.kernel);
    let dt = exp.lattice.dt();
    let mut table = Table::new(
        [
            "k",
            "time",
            "re_kappa",
            "im_kappa",
            "re_alpha_target",
            "im_alpha_target",
            "re_alpha_reconstructed",
            "im_alpha_reconstructed",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    for k in 0..n {
        let kappa = f.kernel.samples()[k];
        let t = target.samples().get(k).copied().unwrap_or_default();
        let a = alpha.samples()[k];
        table.push(vec![
            k as f64,
            k as f64 * dt,
            kappa.re,
            kappa.im,
            t.re,
            t.im,
            a.re,
            a.im,
        ]);
    }
    write_table(exp, out, "kernel", &table)?;
    out.write("kernel.txt", f.kernel.to_text().as_bytes())?;
    out.write("correlation.txt", target.to_text().as_bytes())?;
    Ok((
        vec![
            format!("kernel bins: {n}"),
            format!("residual: {:e}", f.residual),
            format!("window: {}", f.window),
            format!("diagonal loading: {:e}", f.loading),
        ],
        true,
    ))
}

fn trajectory_command(exp: &Experiment, out: &mut OutputDir) -> Result<(Vec<String>, bool)> {
    let m = monitor(exp)?;
    let run = &exp.config.run;
    let traj = m.run_trajectory(&exp.initial, run.steps, run.seed, 0)?;
    let d = exp.system.dim();
    let dt = exp.lattice.dt();
    let mut table = Table::new(state_columns(
        &["step", "time", "re_xi", "im_xi", "weight", "purity"],
        d,
    ));
    for st in &traj.states {
        let xi = match st.step {
            0 => crate::hilbert::C64::new(f64::NAN, f64::NAN),
            k => traj.record.bins()[k - 1],
        };
        let mut row = vec![
            st.step as f64,
            st.step as f64 * dt,
            xi.re,
            xi.im,
            st.weight(),
            st.purity(),
        ];
        row.extend(output::matrix_fields(&st.rho));
        table.push(row);
    }
    write_table(exp, out, "trajectory", &table)?;
    out.write("record.txt", traj.record.to_text().as_bytes())?;
    out.write(
        "conditional_states.txt",
        conditional_states_to_text(&traj.states).as_bytes(),
    )?;
    let last = traj.states.last().expect("at least the initial state");
    Ok((
        vec![
            format!("steps: {}", run.steps),
            format!("final log weight: {}", last.log_weight),
            format!("final purity: {}", last.purity()),
        ],
        true,
    ))
}

fn ensemble_command(exp: &Experiment, out: &mut OutputDir) -> Result<(Vec<String>, bool)> {
    let m = monitor(exp)?;
    let run = &exp.config.run;
    let d = exp.system.dim();
    let dt = exp.lattice.dt();

    let mut finals = Table::new(state_columns(&["trajectory", "log_weight", "purity"], d));
    let summary = m.run_ensemble_with(&exp.initial, run.steps, run.trajectories, run.seed, |t| {
        let last = t.states.last().expect("at least the initial state");
        let mut row = vec![t.record.stream as f64, last.log_weight, last.purity()];
        row.extend(output::matrix_fields(&last.rho));
        finals.push(row);
        Ok(())
    })?;
    let exact = m.evolve_nonselective(&exp.initial, run.steps)?;

    let mut cols = state_columns(&["step", "time", "trace_distance", "trace_distance_se"], d);
    cols.extend(output::matrix_columns("se", d));
    cols.extend(output::matrix_columns("nonselective", d));
    let mut table = Table::new(cols);
    let mut worst = 0.0f64;
    for (n, rho) in exact.iter().enumerate() {
        let dist = trace_distance(&summary.mean[n], rho);
        let se = summary.trace_distance_error(n);
        if dist > 1e-12 {
            worst = worst.max(dist / se);
        }
        let mut row = vec![n as f64, n as f64 * dt, dist, se];
        row.extend(output::matrix_fields(&summary.mean[n]));
        row.extend(output::matrix_fields(&summary.standard_error[n]));
        row.extend(output::matrix_fields(rho));
        table.push(row);
    }
    write_table(exp, out, "ensemble", &table)?;
    write_table(exp, out, "ensemble_final_states", &finals)?;
    Ok((
        vec![
            format!("trajectories: {}", summary.trajectories),
            format!("largest trace distance to the non-selective state in standard errors: {worst:.3}"),
        ],
        true,
    ))
}

fn nonselective_command(exp: &Experiment, out: &mut OutputDir) -> Result<(Vec<String>, bool)> {
    let m = monitor(exp)?;
    let steps = exp.config.run.steps;
    let states = m.evolve_nonselective(&exp.initial, steps)?;
    let d = exp.system.dim();
    let dt = exp.lattice.dt();
    let mut table = Table::new(state_columns(&["step", "time", "population", "purity"], d));
    for (n, rho) in states.iter().enumerate() {
        let mut row = vec![n as f64, n as f64 * dt, rho[(0, 0)].re, purity(rho)];
        row.extend(output::matrix_fields(rho));
        table.push(row);
    }
    write_table(exp, out, "nonselective", &table)?;
    let last = states.last().expect("at least the initial state");
    Ok((
        vec![
            format!("steps: {steps}"),
            format!("final population: {}", last[(0, 0)].re),
        ],
        true,
    ))
}

fn validate_command(exp: &Experiment, out: &mut OutputDir) -> Result<(Vec<String>, bool)> {
    let opts = validate::ValidateOptions {
        seed: exp.config.run.seed,
        ..Default::default()
    };
    let checks = validate::run_all(exp, &opts)?;
    let mut text = serde_json::to_string_pretty(&checks).expect("checks serialize");
    text.push('\n');
    out.write("validate.json", text.as_bytes())?;
    let passed = checks.iter().all(|c| c.passed);
    let mut report: Vec<String> = checks.iter().map(|c| c.line()).collect();
    report.push(format!(
        "{} of {} checks passed",
        checks.iter().filter(|c| c.passed).count(),
        checks.len()
    ));
    Ok((report, passed))
}
