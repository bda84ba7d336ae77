//! Static Gaussian noise Hamiltonians and noise ensembles.
//!
//! A noise matrix is stored at unit standard deviation together with its
//! scale `sigma`, so every `sigma` on a sweep reuses the same draw (and the
//! same eigendecomposition) for a given instance index.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, RunResult, RunStatus, Space};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::problem::{make_plus_state, reduced_plus_state, HamiltonianSpec, ProblemInstance};
use crate::schedule::Schedule;

/// Largest qubit count for which a dense noise ensemble is attempted.
pub const MAX_NOISE_QUBITS: u32 = 12;

/// Reference decay constant for the small-noise regime.
pub const REFERENCE_DECAY_CONSTANT: f64 = 2.11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Real symmetric, every independent entry `~ N(0, sigma^2)`.
    #[default]
    RealSymmetric,
    /// Complex Hermitian: real diagonal `~ N(0, sigma^2)`, off-diagonal real
    /// and imaginary parts each `~ N(0, sigma^2 / 2)`.
    ComplexHermitian,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::RealSymmetric => "real_symmetric",
            NoiseKind::ComplexHermitian => "complex_hermitian",
        }
    }
}

/// Unit-variance entries of a noise matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseEntries {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

/// Eigendecomposition `G = V diag(values) V^dagger` of the unit-variance
/// matrix, with the driver ground state pre-rotated.
#[derive(Clone, Debug)]
pub struct NoiseEigenbasis {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
    plus: Vec<C64>,
}

impl NoiseEigenbasis {
    fn new(entries: &NoiseEntries) -> Self {
        let (values, vectors) = match entries {
            NoiseEntries::Real(g) => {
                let eig = g.clone().symmetric_eigen();
                (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
            }
            NoiseEntries::Complex(g) => {
                let eig = g.clone().symmetric_eigen();
                (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
            }
        };
        let dim = values.len();
        let amp = 1.0 / (dim as f64).sqrt();
        let plus = (0..dim).map(|k| vectors.column(k).iter().map(|v| v.conj()).sum::<C64>() * amp).collect();
        Self { values, vectors, plus }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V^dagger |+>`
    pub fn plus(&self) -> &[C64] {
        &self.plus
    }

    /// `V^dagger |m>`
    pub fn marked_coefficients(&self, marked: usize) -> Vec<C64> {
        self.vectors.row(marked).iter().map(|v| v.conj()).collect()
    }

    pub fn to_eigenbasis(&self, psi: &[C64]) -> Vec<C64> {
        (0..self.values.len())
            .map(|k| self.vectors.column(k).iter().zip(psi).map(|(v, p)| v.conj() * p).sum())
            .collect()
    }

    pub fn from_eigenbasis(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.values.len()];
        for (k, c) in coeffs.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.vectors.column(k).iter()) {
                *o += v * c;
            }
        }
        out
    }
}

/// Static noise Hamiltonian `sigma * G`.
#[derive(Clone, Debug)]
pub struct NoiseMatrix {
    sigma: f64,
    seed: u64,
    kind: NoiseKind,
    entries: Arc<NoiseEntries>,
    eigen: Arc<OnceLock<NoiseEigenbasis>>,
}

impl NoiseMatrix {
    pub fn from_entries(entries: NoiseEntries, sigma: f64, seed: u64) -> Self {
        let kind = match entries {
            NoiseEntries::Real(_) => NoiseKind::RealSymmetric,
            NoiseEntries::Complex(_) => NoiseKind::ComplexHermitian,
        };
        Self { sigma, seed, kind, entries: Arc::new(entries), eigen: Arc::new(OnceLock::new()) }
    }

    /// Same draw at a different scale; shares storage and the cached
    /// eigendecomposition.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..self.clone() }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match &*self.entries {
            NoiseEntries::Real(g) => g.nrows(),
            NoiseEntries::Complex(g) => g.nrows(),
        }
    }

    pub fn entries(&self) -> &NoiseEntries {
        &self.entries
    }

    /// Scaled matrix element `(i, j)`.
    pub fn element(&self, i: usize, j: usize) -> C64 {
        match &*self.entries {
            NoiseEntries::Real(g) => C64::new(g[(i, j)] * self.sigma, 0.0),
            NoiseEntries::Complex(g) => g[(i, j)] * self.sigma,
        }
    }

    pub fn eigenbasis(&self) -> &NoiseEigenbasis {
        self.eigen.get_or_init(|| NoiseEigenbasis::new(&self.entries))
    }

    /// `out += sigma * G * psi`, dense O(N^2).
    pub fn apply_add(&self, psi: &[C64], out: &mut [C64]) {
        if self.sigma == 0.0 {
            return;
        }
        // G is symmetric / Hermitian, so row i is (the conjugate of) column i
        match &*self.entries {
            NoiseEntries::Real(g) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let acc: C64 = g.column(i).iter().zip(psi).map(|(a, p)| p * *a).sum();
                    *o += acc * self.sigma;
                }
            }
            NoiseEntries::Complex(g) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let acc: C64 = g.column(i).iter().zip(psi).map(|(a, p)| a.conj() * p).sum();
                    *o += acc * self.sigma;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseParams {
    pub sigma: f64,
    pub base_seed: u64,
    pub instances: usize,
    pub kind: NoiseKind,
}

impl NoiseParams {
    pub fn new(sigma: f64, base_seed: u64) -> Self {
        Self { sigma, base_seed, instances: 200, kind: NoiseKind::RealSymmetric }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInstance(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if self.instances == 0 {
            return Err(Error::InvalidInstance("ensemble needs at least one instance".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble member `index`; independent of evaluation order.
pub fn instance_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ splitmix64(index)
}

const MATRIX_STREAM: u64 = 0;
const MARKED_STREAM: u64 = 1;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the unit-variance entries for `seed`.
pub fn sample_entries(dim: usize, kind: NoiseKind, seed: u64) -> NoiseEntries {
    let mut rng = stream_rng(seed, MATRIX_STREAM);
    match kind {
        NoiseKind::RealSymmetric => {
            let mut g = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                for j in i..dim {
                    let x: f64 = rng.sample(StandardNormal);
                    g[(i, j)] = x;
                    g[(j, i)] = x;
                }
            }
            NoiseEntries::Real(g)
        }
        NoiseKind::ComplexHermitian => {
            let half = std::f64::consts::FRAC_1_SQRT_2;
            let mut g = DMatrix::<C64>::zeros(dim, dim);
            for i in 0..dim {
                let d: f64 = rng.sample(StandardNormal);
                g[(i, i)] = C64::new(d, 0.0);
                for j in i + 1..dim {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let z = C64::new(re * half, im * half);
                    g[(i, j)] = z;
                    g[(j, i)] = z.conj();
                }
            }
            NoiseEntries::Complex(g)
        }
    }
}

/// Noise matrix of ensemble member `instance_index`.
pub fn sample_noise(dim: usize, params: &NoiseParams, instance_index: u64) -> NoiseMatrix {
    let seed = instance_seed(params.base_seed, instance_index);
    NoiseMatrix::from_entries(sample_entries(dim, params.kind, seed), params.sigma, seed)
}

/// Marked state of ensemble member `instance_index`, uniform over `[0, dim)`.
pub fn sample_marked(dim: usize, base_seed: u64, instance_index: u64) -> usize {
    stream_rng(instance_seed(base_seed, instance_index), MARKED_STREAM).gen_range(0..dim)
}

/// One ensemble member's outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRecord {
    pub qubits: u32,
    pub dim: usize,
    pub sigma: f64,
    pub instance_index: u64,
    pub seed: u64,
    pub marked_state: usize,
    pub success_probability: f64,
    pub norm_drift: f64,
    pub accepted_steps: u64,
    pub status: RunStatus,
}

impl EnsembleRecord {
    fn from_run(index: u64, seed: u64, sigma: f64, instance: &ProblemInstance, run: Result<RunResult>) -> Result<Self> {
        let base = Self {
            qubits: instance.qubits(),
            dim: instance.dim(),
            sigma,
            instance_index: index,
            seed,
            marked_state: instance.marked(),
            success_probability: f64::NAN,
            norm_drift: f64::NAN,
            accepted_steps: 0,
            status: RunStatus::StepUnderflow,
        };
        match run {
            Ok(r) => Ok(Self {
                success_probability: r.success_probability,
                norm_drift: r.norm_drift,
                accepted_steps: r.accepted_steps,
                status: r.status,
                ..base
            }),
            Err(Error::StepUnderflow { .. }) => Ok(base),
            Err(e) => Err(e),
        }
    }
}

/// Runs every `sigma` in `sigmas` for each ensemble member, starting from
/// `|+>` under the given (exact) schedule. Members run in parallel on the
/// current rayon pool; results are indexed `[sigma][instance]`.
///
/// `sigma = 0` runs in the reduced space, where the noiseless dynamics is
/// exactly confined.
pub fn run_noise_grid(
    qubits: u32,
    sigmas: &[f64],
    params: &NoiseParams,
    schedule: &Schedule,
    config: &IntegratorConfig,
) -> Result<Vec<Vec<EnsembleRecord>>> {
    if qubits > MAX_NOISE_QUBITS {
        return Err(Error::Unsupported(format!(
            "noise ensembles are limited to n <= {MAX_NOISE_QUBITS}, got {qubits}"
        )));
    }
    params.validate()?;
    for &sigma in sigmas {
        NoiseParams { sigma, ..params.clone() }.validate()?;
    }
    config.validate()?;
    let dim = 1usize << qubits;
    if schedule.params().dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: schedule.params().dim() });
    }

    let per_instance: Vec<Result<Vec<EnsembleRecord>>> = (0..params.instances as u64)
        .into_par_iter()
        .map(|index| {
            let marked = sample_marked(dim, params.base_seed, index);
            let instance = ProblemInstance::new(qubits, marked)?;
            let seed = instance_seed(params.base_seed, index);
            let needs_noise = sigmas.iter().any(|&s| s > 0.0);
            let unit = needs_noise.then(|| NoiseMatrix::from_entries(sample_entries(dim, params.kind, seed), 1.0, seed));
            sigmas
                .iter()
                .map(|&sigma| {
                    let run = match &unit {
                        Some(unit) if sigma > 0.0 => {
                            let spec = HamiltonianSpec::new(instance).with_noise(Arc::new(unit.with_sigma(sigma)))?;
                            evolve(&spec, schedule, config, Space::Full, &make_plus_state(&instance))
                        }
                        _ => {
                            let spec = HamiltonianSpec::new(instance);
                            evolve(&spec, schedule, config, Space::Reduced, &reduced_plus_state(dim))
                        }
                    };
                    EnsembleRecord::from_run(index, seed, sigma, &instance, run)
                })
                .collect()
        })
        .collect();

    let mut grid: Vec<Vec<EnsembleRecord>> = sigmas.iter().map(|_| Vec::with_capacity(params.instances)).collect();
    for member in per_instance {
        for (column, record) in grid.iter_mut().zip(member?) {
            column.push(record);
        }
    }
    Ok(grid)
}

/// Ensemble at the single noise strength `params.sigma`.
pub fn run_noise_ensemble(
    qubits: u32,
    params: &NoiseParams,
    schedule: &Schedule,
    config: &IntegratorConfig,
) -> Result<Vec<EnsembleRecord>> {
    Ok(run_noise_grid(qubits, &[params.sigma], params, schedule, config)?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayPoint {
    pub dim: usize,
    pub sigma: f64,
    pub median: f64,
}

impl DecayPoint {
    /// `N sigma^2`
    pub fn scaled_variance(&self) -> f64 {
        self.dim as f64 * self.sigma * self.sigma
    }

    /// Small-noise regime `sigma < 1 / sqrt(7 N)`.
    pub fn in_small_noise_regime(&self) -> bool {
        7.0 * self.scaled_variance() < 1.0
    }
}

/// Least-squares slope through the origin of `-ln(median)` against `N sigma^2`,
/// using only points in the small-noise regime.
pub fn fit_decay_constant(points: &[DecayPoint]) -> Result<f64> {
    let usable: Vec<&DecayPoint> = points.iter().filter(|p| p.in_small_noise_regime()).collect();
    if usable.len() < 3 {
        return Err(Error::FitFailed(format!(
            "need at least 3 small-noise points, got {}",
            usable.len()
        )));
    }
    if let Some(bad) = usable.iter().find(|p| !(p.median > 0.0)) {
        return Err(Error::FitFailed(format!("nonpositive median {} at sigma {}", bad.median, bad.sigma)));
    }
    let (sxy, sxx) = usable.iter().fold((0.0, 0.0), |(sxy, sxx), p| {
        let x = p.scaled_variance();
        (sxy - x * p.median.ln(), sxx + x * x)
    });
    if sxx == 0.0 {
        return Err(Error::FitFailed("all points have sigma = 0".into()));
    }
    Ok(sxy / sxx)
}
