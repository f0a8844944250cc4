use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soliton_lab::config::{ConfigError, Experiment, ExperimentConfig};
use soliton_lab::sweep::{sweep, write_sweep, CellStatus};
use soliton_lab::{run, Status};

#[derive(Parser)]
#[command(name = "soliton-lab", version, about = "Dark-soliton stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a (perturbed) soliton and record conserved quantities.
    Simulate(RunArgs),
    /// Linearised operators, coercivity constants and the essential edge.
    Spectrum(RunArgs),
    /// Modulation tracking and the amplitude scaling test.
    Modulate(RunArgs),
    /// Momentum-window monotonicity audit.
    Monotonicity(RunArgs),
    /// Virial functionals along a tracked trajectory.
    Virial(RunArgs),
    /// Phase extraction checks and the phase history of a spin run.
    Phase(RunArgs),
    /// Run the experiment named in the config at every `sweep.speeds` entry.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `results/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random perturbations and random test pairs.
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value` override, applied after the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn load(args: &RunArgs, experiment: Option<Experiment>) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = experiment {
        cfg.experiment = e;
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = args.seed {
        cfg.perturbation.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, default: &str) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(default))
}

fn single(args: &RunArgs, experiment: Experiment) -> Result<ExitCode, ConfigError> {
    let cfg = load(args, Some(experiment))?;
    let report = run(&cfg)?;
    let dir = out_dir(&cfg, experiment.name());
    if let Err(e) = report.write(&dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return Ok(ExitCode::from(2));
    }
    for c in &report.summary.checks {
        let mark = if c.passed { "ok  " } else if c.hard { "FAIL" } else { "warn" };
        println!("{mark} {} = {} ({} {})", c.name, c.value, c.relation, c.bound);
    }
    for e in &report.summary.errors {
        eprintln!("error: {e}");
    }
    println!("status: {:?} -> {}", report.summary.status, dir.display());
    Ok(match report.summary.status {
        Status::Pass => ExitCode::SUCCESS,
        Status::Fail => ExitCode::from(1),
        Status::Error => ExitCode::from(2),
    })
}

fn sweep_command(args: &SweepArgs) -> Result<ExitCode, ConfigError> {
    let cfg = load(&args.run, None)?;
    let cells = sweep(&cfg, &cfg.sweep_speeds, args.workers).map_err(|e| ConfigError::Invalid {
        key: "workers".into(),
        message: e.to_string(),
    })?;
    let dir = out_dir(&cfg, "sweep");
    if let Err(e) = write_sweep(&cells, &dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return Ok(ExitCode::from(2));
    }
    for c in &cells {
        println!("c = {}: {}", c.speed, c.status.name());
    }
    let worst = cells.iter().map(|c| c.status).fold(0, |acc, s| {
        acc.max(match s {
            CellStatus::Pass => 0,
            CellStatus::Fail => 1,
            CellStatus::Error | CellStatus::Invalid => 2,
        })
    });
    Ok(ExitCode::from(worst))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => single(a, Experiment::Simulate),
        Command::Spectrum(a) => single(a, Experiment::Spectrum),
        Command::Modulate(a) => single(a, Experiment::Modulate),
        Command::Monotonicity(a) => single(a, Experiment::Monotonicity),
        Command::Virial(a) => single(a, Experiment::Virial),
        Command::Phase(a) => single(a, Experiment::Phase),
        Command::Sweep(a) => sweep_command(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
