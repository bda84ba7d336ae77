//! Search problem definition and matrix-free application of the interpolating
//! Hamiltonian
//!
//! ```text
//! H'(s) = (1 - s) (1 - |+><+|) + s (1 + chi) (1 - |m><m|) + H_noise
//! ```
//!
//! The two projector terms only need the overlaps `<+|psi>` and `<m|psi>`, so
//! they are applied in O(N). The optional noise term is dense and costs
//! O(N^2).

use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::noise::NoiseMatrix;

/// Largest qubit count accepted for a dense state vector.
pub const MAX_QUBITS: u32 = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ProblemInstance {
    n: u32,
    marked: usize,
}

impl ProblemInstance {
    pub fn new(n: u32, marked: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need at least 2 qubits, got {n}")));
        }
        if n > MAX_QUBITS {
            return Err(Error::InvalidInstance(format!("{n} qubits exceeds the limit of {MAX_QUBITS}")));
        }
        let dim = 1usize << n;
        if marked >= dim {
            return Err(Error::InvalidInstance(format!(
                "marked index {marked} outside [0, {dim})"
            )));
        }
        Ok(Self { n, marked })
    }

    pub fn qubits(&self) -> u32 {
        self.n
    }

    /// Hilbert space dimension `N = 2^n`.
    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn marked(&self) -> usize {
        self.marked
    }
}

/// Complex amplitude vector, either over the full computational basis or over
/// the ordered pair `{|m>, |m_perp>}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<C64>);

impl StateVector {
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        Self(amplitudes)
    }

    /// Equal superposition over `dim` basis states.
    pub fn uniform(dim: usize) -> Self {
        let amp = 1.0 / (dim as f64).sqrt();
        Self(vec![C64::new(amp, 0.0); dim])
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[index] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.0
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(&self, factor: C64) -> StateVector {
        Self(self.0.iter().map(|a| a * factor).collect())
    }
}

/// `|+>` over the full space of `instance`.
pub fn make_plus_state(instance: &ProblemInstance) -> StateVector {
    StateVector::uniform(instance.dim())
}

/// `|+>` expressed in the reduced basis `{|m>, |m_perp>}`.
pub fn reduced_plus_state(dim: usize) -> StateVector {
    let p = 1.0 / dim as f64;
    StateVector(vec![C64::new(p.sqrt(), 0.0), C64::new((1.0 - p).sqrt(), 0.0)])
}

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    pub instance: ProblemInstance,
    pub chi: f64,
    pub noise: Option<Arc<NoiseMatrix>>,
}

impl HamiltonianSpec {
    pub fn new(instance: ProblemInstance) -> Self {
        Self { instance, chi: 0.0, noise: None }
    }

    pub fn with_chi(mut self, chi: f64) -> Result<Self> {
        if !(chi > -1.0) || !chi.is_finite() {
            return Err(Error::InvalidChi { chi, dim: self.instance.dim() });
        }
        self.chi = chi;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: Arc<NoiseMatrix>) -> Result<Self> {
        if noise.dim() != self.instance.dim() {
            return Err(Error::DimensionMismatch { expected: self.instance.dim(), got: noise.dim() });
        }
        self.noise = Some(noise);
        Ok(self)
    }

    /// Coefficient of the driver projector at `s`.
    pub fn driver_weight(&self, s: f64) -> f64 {
        1.0 - s
    }

    /// Coefficient of the problem projector at `s`, including misspecification.
    pub fn problem_weight(&self, s: f64) -> f64 {
        s * (1.0 + self.chi)
    }
}

fn check_s(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(s))
    }
}

/// Writes `(H(s) - offset) psi` into `out` for the projector part only.
///
/// Shared by [`apply_hamiltonian`] and the full-space propagator, which
/// removes a scalar offset to keep the phase rotation slow.
pub(crate) fn apply_projectors_into(
    driver: f64,
    problem: f64,
    offset: f64,
    marked: usize,
    psi: &[C64],
    out: &mut [C64],
) {
    let dim = psi.len();
    let sum: C64 = psi.iter().sum();
    // (1 - |+><+|) psi = psi - (sum / N) * ones
    let plus_part = sum / dim as f64;
    let diag = driver + problem - offset;
    let shift = driver * plus_part;
    for (o, p) in out.iter_mut().zip(psi) {
        *o = p * diag - shift;
    }
    out[marked] -= psi[marked] * problem;
}

/// `H'(s) psi` without materializing the Hamiltonian.
pub fn apply_hamiltonian(spec: &HamiltonianSpec, s: f64, psi: &StateVector) -> Result<StateVector> {
    check_s(s)?;
    let dim = spec.instance.dim();
    if psi.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: psi.dim() });
    }
    let mut out = vec![C64::new(0.0, 0.0); dim];
    apply_projectors_into(
        spec.driver_weight(s),
        spec.problem_weight(s),
        0.0,
        spec.instance.marked(),
        psi.amplitudes(),
        &mut out,
    );
    if let Some(noise) = &spec.noise {
        noise.apply_add(psi.amplitudes(), &mut out);
    }
    Ok(StateVector(out))
}

/// `H'(s)` restricted to the ordered basis `{|m>, |m_perp>}`.
pub fn reduced_hamiltonian(spec: &HamiltonianSpec, s: f64) -> Result<Matrix2<f64>> {
    if spec.noise.is_some() {
        return Err(Error::NoiseBreaksSubspace);
    }
    check_s(s)?;
    Ok(reduced_matrix(spec.instance.dim(), spec.driver_weight(s), spec.problem_weight(s)))
}

pub(crate) fn reduced_matrix(dim: usize, driver: f64, problem: f64) -> Matrix2<f64> {
    // v = <m|+>, <m_perp|+>
    let v0 = (1.0 / dim as f64).sqrt();
    let v1 = (1.0 - 1.0 / dim as f64).sqrt();
    Matrix2::new(
        driver * (1.0 - v0 * v0),
        -driver * v0 * v1,
        -driver * v0 * v1,
        driver * (1.0 - v1 * v1) + problem,
    )
}
