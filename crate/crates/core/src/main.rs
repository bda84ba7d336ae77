use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use qaus::experiments::{run_experiment, validate, Config, Experiment, Overrides, RunError};

/// Adiabatic unstructured search experiments.
#[derive(Parser, Debug)]
#[command(name = "qaus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Success probability against size for exact and piecewise schedules.
    ScheduleSweep(Common),
    /// Success probability against size under a misspecified Hamiltonian.
    ChiSweep(Common),
    /// Median success probability of random-noise ensembles.
    NoiseSweep(Common),
    /// Thermal success probability and expected excitations per bath policy.
    ThermalReport(Common),
    /// Checks closed forms against brute-force oracles.
    Validate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n_min: Option<u32>,
    #[arg(long)]
    n_max: Option<u32>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            epsilon: self.epsilon,
            n_min: self.n_min,
            n_max: self.n_max,
        }
    }
}

fn resolve(common: &Common, experiment: Option<Experiment>) -> Result<Config, RunError> {
    let mut config = Config::load(common.config.as_deref())?;
    config.apply(experiment, &common.overrides());
    Ok(config)
}

fn run_validate(common: &Common) -> Result<bool, RunError> {
    let config = resolve(common, None)?;
    let checks = validate::run_all(config.run.seed, config.run.epsilon, &config.integrator)?;
    for check in &checks {
        println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn run(command: &Command) -> Result<bool, RunError> {
    let (experiment, common) = match command {
        Command::ScheduleSweep(c) => (Experiment::ScheduleSweep, c),
        Command::ChiSweep(c) => (Experiment::ChiSweep, c),
        Command::NoiseSweep(c) => (Experiment::NoiseSweep, c),
        Command::ThermalReport(c) => (Experiment::ThermalReport, c),
        Command::Validate(c) => return run_validate(c),
    };
    let config = resolve(common, Some(experiment))?;
    let report = run_experiment(experiment, &config)?;
    for path in &report.outputs {
        println!("{}", path.display());
    }
    if report.invalid_runs > 0 {
        error!("{experiment}: {} runs failed their accuracy checks", report.invalid_runs);
    }
    Ok(report.invalid_runs == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
