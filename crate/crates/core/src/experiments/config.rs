//! Experiment configuration: TOML sections with defaults, command-line
//! overrides and manifests.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::integrator::IntegratorConfig;
use crate::noise::{NoiseKind, MAX_NOISE_QUBITS};
use crate::problem::MAX_QUBITS;
use crate::schedule::DEFAULT_EPSILON;
use crate::stats::DEFAULT_RESAMPLES;
use crate::thermal::{BathParams, BathPolicy, DEFAULT_BETA_SLOPE};

use super::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    ScheduleSweep,
    ChiSweep,
    NoiseSweep,
    ThermalReport,
}

impl Experiment {
    pub const ALL: [Experiment; 4] =
        [Experiment::ScheduleSweep, Experiment::ChiSweep, Experiment::NoiseSweep, Experiment::ThermalReport];

    /// Section name, also the stem of output files.
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ScheduleSweep => "schedule_sweep",
            Experiment::ChiSweep => "chi_sweep",
            Experiment::NoiseSweep => "noise_sweep",
            Experiment::ThermalReport => "thermal_report",
        }
    }

    /// Subcommand name.
    pub fn command(&self) -> &'static str {
        match self {
            Experiment::ScheduleSweep => "schedule-sweep",
            Experiment::ChiSweep => "chi-sweep",
            Experiment::NoiseSweep => "noise-sweep",
            Experiment::ThermalReport => "thermal-report",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.command())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub out: PathBuf,
    pub epsilon: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 2024, workers: 0, out: PathBuf::from("results"), epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSweepConfig {
    pub n_min: u32,
    pub n_max: u32,
    pub pieces: Vec<usize>,
    pub include_exact: bool,
    /// Size at which the `t, s` curves are written.
    pub curve_qubits: u32,
    /// Samples on the exact curve.
    pub curve_points: usize,
}

impl Default for ScheduleSweepConfig {
    fn default() -> Self {
        Self { n_min: 4, n_max: 14, pieces: vec![1, 2, 3, 4], include_exact: true, curve_qubits: 10, curve_points: 401 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiSweepConfig {
    pub n_min: u32,
    pub n_max: u32,
    pub chi: Vec<f64>,
    pub threshold: f64,
    /// Largest sizes used for the log-linear tail fit.
    pub tail_points: usize,
}

impl Default for ChiSweepConfig {
    fn default() -> Self {
        Self { n_min: 4, n_max: 24, chi: vec![0.16, 0.08, 0.04, 0.02], threshold: 0.1, tail_points: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSweepConfig {
    pub qubits: Vec<u32>,
    /// Grid in `N sigma^2`, converted per size. Ignored when `sigma` is set.
    pub n_sigma2: Vec<f64>,
    /// Absolute noise strengths shared by every size.
    pub sigma: Vec<f64>,
    pub instances: usize,
    pub resamples: usize,
    pub kind: NoiseKind,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            qubits: vec![6, 8, 10],
            n_sigma2: vec![0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0],
            sigma: Vec::new(),
            instances: 200,
            resamples: DEFAULT_RESAMPLES,
            kind: NoiseKind::RealSymmetric,
        }
    }
}

impl NoiseSweepConfig {
    /// Noise strengths used at `qubits`.
    pub fn sigmas_for(&self, qubits: u32) -> Vec<f64> {
        if !self.sigma.is_empty() {
            return self.sigma.clone();
        }
        let dim = (1u64 << qubits) as f64;
        self.n_sigma2.iter().map(|x| (x / dim).sqrt()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    FixedBeta,
    BetaLinearInN,
    GScaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalReportConfig {
    pub n_min: u32,
    pub n_max: u32,
    pub beta: f64,
    pub g: f64,
    /// `beta / n` under the `beta_linear_in_n` policy.
    pub beta_slope: f64,
    pub policies: Vec<PolicyName>,
}

impl Default for ThermalReportConfig {
    fn default() -> Self {
        Self {
            n_min: 6,
            n_max: 16,
            beta: 1.0,
            g: 0.1,
            beta_slope: DEFAULT_BETA_SLOPE,
            policies: vec![PolicyName::FixedBeta, PolicyName::BetaLinearInN, PolicyName::GScaled],
        }
    }
}

impl ThermalReportConfig {
    pub fn policy(&self, name: PolicyName) -> BathPolicy {
        match name {
            PolicyName::FixedBeta => BathPolicy::FixedBeta,
            PolicyName::BetaLinearInN => BathPolicy::BetaLinearInN { slope: self.beta_slope },
            PolicyName::GScaled => BathPolicy::GScaled,
        }
    }
}

/// Written by manifests; ignored on input apart from key checking.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub integrator: IntegratorConfig,
    pub schedule_sweep: ScheduleSweepConfig,
    pub chi_sweep: ChiSweepConfig,
    pub noise_sweep: NoiseSweepConfig,
    pub thermal_report: ThermalReportConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Command-line values that replace configuration entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub epsilon: Option<f64>,
    pub n_min: Option<u32>,
    pub n_max: Option<u32>,
}

fn config_error(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn check_range(section: &str, n_min: u32, n_max: u32, limit: u32) -> Result<(), RunError> {
    if n_min < 2 {
        return Err(config_error(format!("{section}.n_min must be at least 2, got {n_min}")));
    }
    if n_min > n_max {
        return Err(config_error(format!("{section}: empty range n_min = {n_min} > n_max = {n_max}")));
    }
    if n_max > limit {
        return Err(config_error(format!("{section}.n_max must be at most {limit}, got {n_max}")));
    }
    Ok(())
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, RunError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| RunError::Io { path: p.to_path_buf(), source })?;
                Self::from_toml_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Applies flag overrides. `--n-min`/`--n-max` act on the section of
    /// `experiment`; for the noise sweep they restrict the qubit list.
    pub fn apply(&mut self, experiment: Option<Experiment>, o: &Overrides) {
        if let Some(out) = &o.out {
            self.run.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.run.seed = seed;
        }
        if let Some(workers) = o.workers {
            self.run.workers = workers;
        }
        if let Some(eps) = o.epsilon {
            self.run.epsilon = eps;
        }
        let range = match experiment {
            Some(Experiment::ScheduleSweep) => Some((&mut self.schedule_sweep.n_min, &mut self.schedule_sweep.n_max)),
            Some(Experiment::ChiSweep) => Some((&mut self.chi_sweep.n_min, &mut self.chi_sweep.n_max)),
            Some(Experiment::ThermalReport) => Some((&mut self.thermal_report.n_min, &mut self.thermal_report.n_max)),
            Some(Experiment::NoiseSweep) => {
                let lo = o.n_min.unwrap_or(0);
                let hi = o.n_max.unwrap_or(u32::MAX);
                self.noise_sweep.qubits.retain(|&n| (lo..=hi).contains(&n));
                None
            }
            None => None,
        };
        if let Some((n_min, n_max)) = range {
            if let Some(v) = o.n_min {
                *n_min = v;
            }
            if let Some(v) = o.n_max {
                *n_max = v;
            }
        }
    }

    /// Checks the shared settings and those of `experiment`.
    pub fn validate(&self, experiment: Experiment) -> Result<(), RunError> {
        let eps = self.run.epsilon;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(config_error(format!("run.epsilon must be positive, got {eps}")));
        }
        if self.run.seed > i64::MAX as u64 {
            return Err(config_error(format!("run.seed must be below 2^63, got {}", self.run.seed)));
        }
        self.integrator.validate().map_err(|e| config_error(e.to_string()))?;
        match experiment {
            Experiment::ScheduleSweep => {
                let c = &self.schedule_sweep;
                check_range("schedule_sweep", c.n_min, c.n_max, MAX_QUBITS)?;
                if c.pieces.is_empty() && !c.include_exact {
                    return Err(config_error("schedule_sweep: no schedules selected"));
                }
                if let Some(k) = c.pieces.iter().find(|&&k| k == 0) {
                    return Err(config_error(format!("schedule_sweep.pieces entries must be positive, got {k}")));
                }
                if !(2..=MAX_QUBITS).contains(&c.curve_qubits) {
                    return Err(config_error(format!(
                        "schedule_sweep.curve_qubits must lie in [2, {MAX_QUBITS}], got {}",
                        c.curve_qubits
                    )));
                }
                if c.curve_points < 2 {
                    return Err(config_error("schedule_sweep.curve_points must be at least 2"));
                }
            }
            Experiment::ChiSweep => {
                let c = &self.chi_sweep;
                check_range("chi_sweep", c.n_min, c.n_max, MAX_QUBITS)?;
                if c.chi.is_empty() {
                    return Err(config_error("chi_sweep.chi is empty"));
                }
                if let Some(chi) = c.chi.iter().find(|&&x| !(x > -1.0) || !x.is_finite()) {
                    return Err(config_error(format!("chi_sweep.chi entries must be finite and above -1, got {chi}")));
                }
                if !(c.threshold > 0.0 && c.threshold < 1.0) {
                    return Err(config_error(format!("chi_sweep.threshold must lie in (0, 1), got {}", c.threshold)));
                }
                if c.tail_points < 2 {
                    return Err(config_error("chi_sweep.tail_points must be at least 2"));
                }
            }
            Experiment::NoiseSweep => {
                let c = &self.noise_sweep;
                if c.qubits.is_empty() {
                    return Err(config_error("noise_sweep.qubits is empty"));
                }
                if let Some(n) = c.qubits.iter().find(|&&n| !(2..=MAX_NOISE_QUBITS).contains(&n)) {
                    return Err(config_error(format!(
                        "noise_sweep.qubits entries must lie in [2, {MAX_NOISE_QUBITS}], got {n}"
                    )));
                }
                let grid = if c.sigma.is_empty() { &c.n_sigma2 } else { &c.sigma };
                if grid.is_empty() {
                    return Err(config_error("noise_sweep: both n_sigma2 and sigma are empty"));
                }
                if let Some(x) = grid.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(config_error(format!("noise_sweep: noise grid entries must be nonnegative, got {x}")));
                }
                if c.instances == 0 || c.resamples == 0 {
                    return Err(config_error("noise_sweep.instances and noise_sweep.resamples must be positive"));
                }
            }
            Experiment::ThermalReport => {
                let c = &self.thermal_report;
                check_range("thermal_report", c.n_min, c.n_max, MAX_QUBITS)?;
                BathParams::new(c.beta, c.g).map_err(|e| config_error(format!("thermal_report: {e}")))?;
                if !(c.beta_slope > 0.0) || !c.beta_slope.is_finite() {
                    return Err(config_error(format!("thermal_report.beta_slope must be positive, got {}", c.beta_slope)));
                }
                if c.policies.is_empty() {
                    return Err(config_error("thermal_report.policies is empty"));
                }
            }
        }
        Ok(())
    }

    /// Resolved configuration with a `[provenance]` table.
    pub fn manifest(&self, provenance: Provenance) -> Result<String, RunError> {
        let resolved = Config { provenance: Some(provenance), ..self.clone() };
        toml::to_string(&resolved).map_err(|e| config_error(format!("cannot serialise manifest: {e}")))
    }
}
