//! Experiment drivers behind the `qaus` command line.
//!
//! Each experiment computes its rows on the current rayon pool, collects them
//! in index order and writes CSV files plus a manifest into the output
//! directory. Outputs do not depend on the number of workers.

mod config;
pub mod validate;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    ChiSweepConfig, Config, Experiment, NoiseSweepConfig, Overrides, PolicyName, Provenance, RunSection,
    ScheduleSweepConfig, ThermalReportConfig,
};

use crate::dynamics::{evolve, RunResult, RunStatus, Space};
use crate::error::Error;
use crate::noise::{fit_decay_constant, instance_seed, run_noise_grid, DecayPoint, EnsembleRecord, NoiseParams};
use crate::noise::REFERENCE_DECAY_CONSTANT;
use crate::problem::{reduced_plus_state, HamiltonianSpec, ProblemInstance};
use crate::schedule::{piecewise_schedule, Schedule, ScheduleKind, ScheduleParams};
use crate::spectrum::shifted_gap_minimum;
use crate::stats::{bootstrap_median, linear_fit, median};
use crate::thermal::{scaling_report, BathParams, ScalingReport};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
}

impl RunError {
    /// 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

type Outcome<T> = std::result::Result<T, RunError>;

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Success probability and diagnostics of one deterministic run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOutcome {
    pub success_probability: f64,
    pub norm_drift: f64,
    pub accepted_steps: u64,
    pub status: RunStatus,
}

impl RunOutcome {
    fn from_run(run: crate::Result<RunResult>) -> crate::Result<Self> {
        match run {
            Ok(r) => Ok(Self {
                success_probability: r.success_probability,
                norm_drift: r.norm_drift,
                accepted_steps: r.accepted_steps,
                status: r.status,
            }),
            Err(Error::StepUnderflow { .. }) => Ok(Self {
                success_probability: f64::NAN,
                norm_drift: f64::NAN,
                accepted_steps: 0,
                status: RunStatus::StepUnderflow,
            }),
            Err(e) => Err(e),
        }
    }
}

fn reduced_run(qubits: u32, chi: f64, schedule: &Schedule, config: &Config) -> crate::Result<RunOutcome> {
    let instance = ProblemInstance::new(qubits, 0)?;
    let spec = HamiltonianSpec::new(instance).with_chi(chi)?;
    let initial = reduced_plus_state(instance.dim());
    RunOutcome::from_run(evolve(&spec, schedule, &config.integrator, Space::Reduced, &initial))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleRow {
    pub qubits: u32,
    pub dim: usize,
    pub kind: ScheduleKind,
    pub epsilon: f64,
    pub outcome: RunOutcome,
}

fn schedule_for(kind: &ScheduleKind, params: ScheduleParams) -> crate::Result<Schedule> {
    match *kind {
        ScheduleKind::Exact => Ok(Schedule::exact(params)),
        ScheduleKind::Piecewise(k) => piecewise_schedule(k, params),
    }
}

/// Schedule kinds in output order: piece counts as configured, then exact.
pub fn schedule_kinds(c: &ScheduleSweepConfig) -> Vec<ScheduleKind> {
    let mut kinds: Vec<ScheduleKind> = c.pieces.iter().map(|&k| ScheduleKind::Piecewise(k)).collect();
    if c.include_exact {
        kinds.push(ScheduleKind::Exact);
    }
    kinds
}

/// Noiseless reduced-space success probability for every size and schedule.
pub fn schedule_sweep(config: &Config) -> crate::Result<Vec<ScheduleRow>> {
    let c = &config.schedule_sweep;
    let eps = config.run.epsilon;
    let tasks: Vec<(u32, ScheduleKind)> =
        (c.n_min..=c.n_max).flat_map(|n| schedule_kinds(c).into_iter().map(move |k| (n, k))).collect();
    tasks
        .into_par_iter()
        .map(|(n, kind)| {
            let dim = 1usize << n;
            let schedule = schedule_for(&kind, ScheduleParams::new(dim, eps)?)?;
            let outcome = reduced_run(n, 0.0, &schedule, config)?;
            Ok(ScheduleRow { qubits: n, dim, kind, epsilon: eps, outcome })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiRow {
    pub qubits: u32,
    pub dim: usize,
    pub chi: f64,
    pub s_star: f64,
    pub epsilon: f64,
    pub outcome: RunOutcome,
}

/// Per-χ summary of the success probability against size.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiCrossing {
    pub chi: f64,
    /// First size with `P_s` below the threshold.
    pub crossing_n: Option<u32>,
    /// Crossing size interpolated linearly in `ln P_s`.
    pub crossing_interpolated: Option<f64>,
    pub tail_slope: Option<f64>,
    pub tail_r2: Option<f64>,
    pub tail_n_min: Option<u32>,
    pub tail_n_max: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSweep {
    pub rows: Vec<ChiRow>,
    pub crossings: Vec<ChiCrossing>,
}

/// Threshold crossing and log-linear tail fit for rows of a single χ, sorted
/// by size.
pub fn chi_crossing(chi: f64, rows: &[&ChiRow], threshold: f64, tail_points: usize) -> ChiCrossing {
    let probs: Vec<(u32, f64)> = rows
        .iter()
        .filter(|r| r.outcome.status.is_valid())
        .map(|r| (r.qubits, r.outcome.success_probability))
        .collect();
    let first = probs.iter().position(|&(_, p)| p < threshold);
    let crossing_n = first.map(|i| probs[i].0);
    let crossing_interpolated = first.filter(|&i| i > 0).map(|i| {
        let (n0, p0) = probs[i - 1];
        let (n1, p1) = probs[i];
        let frac = (threshold.ln() - p0.ln()) / (p1.ln() - p0.ln());
        n0 as f64 + frac * (n1 - n0) as f64
    });
    let tail: Vec<(u32, f64)> = probs.iter().rev().take(tail_points).rev().copied().collect();
    let fit = (tail.len() == tail_points && tail.iter().all(|&(_, p)| p > 0.0))
        .then(|| {
            let x: Vec<f64> = tail.iter().map(|&(n, _)| n as f64).collect();
            let y: Vec<f64> = tail.iter().map(|&(_, p)| p.ln()).collect();
            linear_fit(&x, &y).ok()
        })
        .flatten();
    ChiCrossing {
        chi,
        crossing_n,
        crossing_interpolated,
        tail_slope: fit.map(|f| f.slope),
        tail_r2: fit.map(|f| f.r_squared),
        tail_n_min: fit.map(|_| tail[0].0),
        tail_n_max: fit.map(|_| tail[tail.len() - 1].0),
    }
}

/// Success probability under a misspecified problem Hamiltonian, exact schedule.
pub fn chi_sweep(config: &Config) -> crate::Result<ChiSweep> {
    let c = &config.chi_sweep;
    let eps = config.run.epsilon;
    let tasks: Vec<(f64, u32)> = c.chi.iter().flat_map(|&chi| (c.n_min..=c.n_max).map(move |n| (chi, n))).collect();
    let rows: Vec<ChiRow> = tasks
        .into_par_iter()
        .map(|(chi, n)| {
            let dim = 1usize << n;
            let schedule = Schedule::exact(ScheduleParams::new(dim, eps)?);
            let outcome = reduced_run(n, chi, &schedule, config)?;
            Ok(ChiRow { qubits: n, dim, chi, s_star: shifted_gap_minimum(chi, dim)?, epsilon: eps, outcome })
        })
        .collect::<crate::Result<_>>()?;
    let crossings = c
        .chi
        .iter()
        .enumerate()
        .map(|(i, &chi)| {
            let per_size = (c.n_max - c.n_min + 1) as usize;
            let block: Vec<&ChiRow> = rows[i * per_size..(i + 1) * per_size].iter().collect();
            chi_crossing(chi, &block, c.threshold, c.tail_points)
        })
        .collect();
    Ok(ChiSweep { rows, crossings })
}

/// Bootstrap summary of one `(n, sigma)` ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMedian {
    pub qubits: u32,
    pub dim: usize,
    pub sigma: f64,
    pub median: f64,
    pub mean_of_medians: f64,
    pub error_bar: f64,
    pub instances: usize,
    pub valid_instances: usize,
    pub bootstrap_seed: u64,
}

impl NoiseMedian {
    /// `N sigma^2`
    pub fn scaled_variance(&self) -> f64 {
        self.dim as f64 * self.sigma * self.sigma
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSweep {
    pub records: Vec<EnsembleRecord>,
    pub medians: Vec<NoiseMedian>,
    /// Small-noise decay constant, when enough small-noise points exist.
    pub decay_constant: Option<f64>,
    pub fit_points: usize,
}

/// Seed of the bootstrap for grid point `sigma_index` at `qubits`.
pub fn bootstrap_seed(base_seed: u64, qubits: u32, sigma_index: usize) -> u64 {
    instance_seed(base_seed, (u64::from(qubits) << 32) | sigma_index as u64)
}

/// Noise ensembles on the configured grid with bootstrap medians and the
/// small-noise decay fit.
pub fn noise_sweep(config: &Config) -> crate::Result<NoiseSweep> {
    let c = &config.noise_sweep;
    let eps = config.run.epsilon;
    let params = NoiseParams { instances: c.instances, kind: c.kind, ..NoiseParams::new(0.0, config.run.seed) };
    let mut records = Vec::new();
    let mut medians = Vec::new();
    for &n in &c.qubits {
        let dim = 1usize << n;
        let sigmas = c.sigmas_for(n);
        let schedule = Schedule::exact(ScheduleParams::new(dim, eps)?);
        let started = Instant::now();
        let grid = run_noise_grid(n, &sigmas, &params, &schedule, &config.integrator)?;
        info!("noise-sweep: n = {n} finished in {:.1} s", started.elapsed().as_secs_f64());
        for (index, (column, &sigma)) in grid.iter().zip(&sigmas).enumerate() {
            let valid: Vec<f64> =
                column.iter().filter(|r| r.status.is_valid()).map(|r| r.success_probability).collect();
            let seed = bootstrap_seed(config.run.seed, n, index);
            let (med, mom, bar) = if valid.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let est = bootstrap_median(&valid, c.resamples, seed)?;
                (median(&valid)?, est.mean_of_medians, est.error_bar())
            };
            medians.push(NoiseMedian {
                qubits: n,
                dim,
                sigma,
                median: med,
                mean_of_medians: mom,
                error_bar: bar,
                instances: column.len(),
                valid_instances: valid.len(),
                bootstrap_seed: seed,
            });
        }
        records.extend(grid.into_iter().flatten());
    }
    let points: Vec<DecayPoint> = medians
        .iter()
        .filter(|m| m.sigma > 0.0 && m.median.is_finite())
        .map(|m| DecayPoint { dim: m.dim, sigma: m.sigma, median: m.median })
        .collect();
    let fit_points = points.iter().filter(|p| p.in_small_noise_regime()).count();
    let decay_constant = match fit_decay_constant(&points) {
        Ok(k) => Some(k),
        Err(e) => {
            warn!("noise-sweep: no decay fit ({e})");
            None
        }
    };
    Ok(NoiseSweep { records, medians, decay_constant, fit_points })
}

/// Scaling report for each configured bath policy.
pub fn thermal_report(config: &Config) -> crate::Result<Vec<ScalingReport>> {
    let c = &config.thermal_report;
    let reference = BathParams::new(c.beta, c.g)?;
    c.policies
        .par_iter()
        .map(|&name| scaling_report(c.n_min..=c.n_max, &reference, c.policy(name), config.run.epsilon))
        .collect()
}

#[derive(Serialize)]
struct ScheduleCsv<'a> {
    n: u32,
    #[serde(rename = "N")]
    dim: usize,
    k_pieces: String,
    epsilon: f64,
    #[serde(rename = "P_s")]
    p: f64,
    norm_drift: f64,
    accepted_steps: u64,
    status: &'a str,
}

#[derive(Serialize)]
struct ChiCsv<'a> {
    n: u32,
    #[serde(rename = "N")]
    dim: usize,
    chi: f64,
    s_star: f64,
    epsilon: f64,
    #[serde(rename = "P_s")]
    p: f64,
    norm_drift: f64,
    accepted_steps: u64,
    status: &'a str,
}

#[derive(Serialize)]
struct CrossingCsv {
    chi: f64,
    threshold: f64,
    crossing_n: Option<u32>,
    crossing_interpolated: Option<f64>,
    tail_slope: Option<f64>,
    tail_r2: Option<f64>,
    tail_n_min: Option<u32>,
    tail_n_max: Option<u32>,
}

#[derive(Serialize)]
struct EnsembleCsv<'a> {
    n: u32,
    #[serde(rename = "N")]
    dim: usize,
    sigma: f64,
    instance_index: u64,
    seed: u64,
    marked_state: usize,
    #[serde(rename = "P_s")]
    p: f64,
    norm_drift: f64,
    accepted_steps: u64,
    status: &'a str,
}

#[derive(Serialize)]
struct MedianCsv {
    n: u32,
    #[serde(rename = "N")]
    dim: usize,
    sigma: f64,
    #[serde(rename = "N_sigma2")]
    n_sigma2: f64,
    median: f64,
    mean_of_medians: f64,
    error_bar: f64,
    instances: usize,
    valid_instances: usize,
    bootstrap_seed: u64,
}

#[derive(Serialize)]
struct FitCsv {
    decay_constant: Option<f64>,
    reference_decay_constant: f64,
    points_used: usize,
}

#[derive(Serialize)]
struct ThermalCsv<'a> {
    n: u32,
    #[serde(rename = "N")]
    dim: usize,
    beta: f64,
    g: f64,
    policy: &'a str,
    #[serde(rename = "thermal_P_at_half")]
    p_half: f64,
    expected_excitations: f64,
}

/// Guide constants for the plotting component.
#[derive(Serialize)]
struct GuideParams {
    decay_constant: f64,
    success_threshold: f64,
    epsilon: f64,
    /// Upper end of the small-noise regime in `N sigma^2`.
    small_noise_n_sigma2_max: f64,
    /// Start of the large-noise regime in `N sigma^2`.
    large_noise_n_sigma2_min: f64,
    /// Large-noise median and large-N noiseless limits are `value / N`.
    large_noise_median_times_n: f64,
}

fn write_rows<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Outcome<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(io_error(path))
}

fn csv_error(path: &Path, e: csv::Error) -> RunError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    RunError::Io { path: path.to_path_buf(), source }
}

/// Files written and invalid runs encountered by one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub outputs: Vec<PathBuf>,
    pub invalid_runs: usize,
    pub wall_time_seconds: f64,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

fn write_schedule_sweep(config: &Config, rows: &[ScheduleRow], out: &mut Outputs) -> Outcome<usize> {
    write_rows(
        &out.path("schedule_sweep.csv"),
        rows.iter().map(|r| ScheduleCsv {
            n: r.qubits,
            dim: r.dim,
            k_pieces: r.kind.to_string(),
            epsilon: r.epsilon,
            p: r.outcome.success_probability,
            norm_drift: r.outcome.norm_drift,
            accepted_steps: r.outcome.accepted_steps,
            status: r.outcome.status.as_str(),
        }),
    )?;
    let c = &config.schedule_sweep;
    let params = ScheduleParams::new(1usize << c.curve_qubits, config.run.epsilon)?;
    for kind in schedule_kinds(c) {
        let name = match kind {
            ScheduleKind::Exact => "schedule_exact.csv".to_string(),
            ScheduleKind::Piecewise(k) => format!("schedule_pieces_{k}.csv"),
        };
        let path = out.path(&name);
        let file = File::create(&path).map_err(io_error(&path))?;
        let mut w = BufWriter::new(file);
        schedule_for(&kind, params)?.write_csv(&mut w, c.curve_points).map_err(io_error(&path))?;
        w.flush().map_err(io_error(&path))?;
    }
    Ok(rows.iter().filter(|r| !r.outcome.status.is_valid()).count())
}

fn write_chi_sweep(sweep: &ChiSweep, threshold: f64, out: &mut Outputs) -> Outcome<usize> {
    write_rows(
        &out.path("chi_sweep.csv"),
        sweep.rows.iter().map(|r| ChiCsv {
            n: r.qubits,
            dim: r.dim,
            chi: r.chi,
            s_star: r.s_star,
            epsilon: r.epsilon,
            p: r.outcome.success_probability,
            norm_drift: r.outcome.norm_drift,
            accepted_steps: r.outcome.accepted_steps,
            status: r.outcome.status.as_str(),
        }),
    )?;
    write_rows(
        &out.path("chi_crossings.csv"),
        sweep.crossings.iter().map(|c| CrossingCsv {
            chi: c.chi,
            threshold,
            crossing_n: c.crossing_n,
            crossing_interpolated: c.crossing_interpolated,
            tail_slope: c.tail_slope,
            tail_r2: c.tail_r2,
            tail_n_min: c.tail_n_min,
            tail_n_max: c.tail_n_max,
        }),
    )?;
    Ok(sweep.rows.iter().filter(|r| !r.outcome.status.is_valid()).count())
}

fn write_noise_sweep(sweep: &NoiseSweep, out: &mut Outputs) -> Outcome<usize> {
    write_rows(
        &out.path("noise_ensemble.csv"),
        sweep.records.iter().map(|r| EnsembleCsv {
            n: r.qubits,
            dim: r.dim,
            sigma: r.sigma,
            instance_index: r.instance_index,
            seed: r.seed,
            marked_state: r.marked_state,
            p: r.success_probability,
            norm_drift: r.norm_drift,
            accepted_steps: r.accepted_steps,
            status: r.status.as_str(),
        }),
    )?;
    write_rows(
        &out.path("noise_medians.csv"),
        sweep.medians.iter().map(|m| MedianCsv {
            n: m.qubits,
            dim: m.dim,
            sigma: m.sigma,
            n_sigma2: m.scaled_variance(),
            median: m.median,
            mean_of_medians: m.mean_of_medians,
            error_bar: m.error_bar,
            instances: m.instances,
            valid_instances: m.valid_instances,
            bootstrap_seed: m.bootstrap_seed,
        }),
    )?;
    write_rows(
        &out.path("noise_fit.csv"),
        [FitCsv {
            decay_constant: sweep.decay_constant,
            reference_decay_constant: REFERENCE_DECAY_CONSTANT,
            points_used: sweep.fit_points,
        }],
    )?;
    Ok(sweep.records.iter().filter(|r| !r.status.is_valid()).count())
}

fn write_thermal_report(reports: &[ScalingReport], out: &mut Outputs) -> Outcome<usize> {
    for report in reports {
        let name = report.policy.name();
        write_rows(
            &out.path(&format!("thermal_{name}.csv")),
            report.rows.iter().map(|r| ThermalCsv {
                n: r.qubits,
                dim: r.dim,
                beta: r.beta,
                g: r.g,
                policy: name,
                p_half: r.thermal_p_at_half,
                expected_excitations: r.expected_excitations,
            }),
        )?;
    }
    Ok(0)
}

fn write_params(config: &Config, out: &mut Outputs) -> Outcome<()> {
    let params = GuideParams {
        decay_constant: REFERENCE_DECAY_CONSTANT,
        success_threshold: config.chi_sweep.threshold,
        epsilon: config.run.epsilon,
        small_noise_n_sigma2_max: 1.0 / 7.0,
        large_noise_n_sigma2_min: 3.0,
        large_noise_median_times_n: 1.0,
    };
    let text = toml::to_string(&params).map_err(|e| RunError::Config(e.to_string()))?;
    let path = out.path("params.toml");
    fs::write(&path, text).map_err(io_error(&path))
}

fn thread_pool(workers: usize) -> Outcome<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Validates `config`, runs `experiment` on `config.run.workers` threads and
/// writes its CSV files, `params.toml` and `<experiment>.manifest.toml`.
pub fn run_experiment(experiment: Experiment, config: &Config) -> Outcome<Report> {
    config.validate(experiment)?;
    let dir = config.run.out.clone();
    fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let pool = thread_pool(config.run.workers)?;
    let mut out = Outputs { dir, files: Vec::new() };
    let started = Instant::now();
    info!("{experiment}: starting on {} workers", pool.current_num_threads());
    let invalid_runs = pool.install(|| -> Outcome<usize> {
        match experiment {
            Experiment::ScheduleSweep => write_schedule_sweep(config, &schedule_sweep(config)?, &mut out),
            Experiment::ChiSweep => write_chi_sweep(&chi_sweep(config)?, config.chi_sweep.threshold, &mut out),
            Experiment::NoiseSweep => write_noise_sweep(&noise_sweep(config)?, &mut out),
            Experiment::ThermalReport => write_thermal_report(&thermal_report(config)?, &mut out),
        }
    })?;
    write_params(config, &mut out)?;
    let wall_time_seconds = started.elapsed().as_secs_f64();
    let manifest_path = out.dir.join(format!("{}.manifest.toml", experiment.name()));
    let provenance = Provenance {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: experiment.command().into(),
        wall_time_seconds,
        outputs: out
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    fs::write(&manifest_path, config.manifest(provenance)?).map_err(io_error(&manifest_path))?;
    out.files.push(manifest_path);
    if invalid_runs > 0 {
        warn!("{experiment}: {invalid_runs} invalid runs");
    }
    info!("{experiment}: done in {wall_time_seconds:.2} s");
    Ok(Report { experiment, outputs: out.files, invalid_runs, wall_time_seconds })
}
