//! Propagation of `i dpsi/dt = H'(s(t)) psi`.
//!
//! Three right-hand sides are available:
//!
//! * the exact two-level problem in `{|m>, |m_perp>}` (no noise),
//! * the full space with matrix-free projectors, where an attached noise term
//!   is applied in the eigenbasis of the noise matrix,
//! * the full space with the noise term applied as a dense matrix-vector
//!   product ([`Space::FullDense`]), kept as an independent cross-check.
//!
//! Returned states are defined up to a global phase. The full-space
//! right-hand sides subtract the instantaneous ground energy of the noiseless
//! two-level problem, so a state that follows the ground state adiabatically
//! hardly rotates. The two-level problem is integrated in a frame that removes
//! both diagonal phases exactly; only the `O(1/sqrt(N))` off-diagonal coupling
//! remains. Both keep the non-unitary drift of the Runge-Kutta steps small on
//! long anneals.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Rkf45, StepCounts, System};
use crate::noise::NoiseEigenbasis;
use crate::problem::{apply_projectors_into, reduced_matrix, HamiltonianSpec, StateVector};
use crate::schedule::Anneal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// Two-dimensional subspace `{|m>, |m_perp>}`, in that order.
    Reduced,
    /// Full computational basis.
    Full,
    /// Full computational basis with dense O(N^2) noise application.
    FullDense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Final norm drift above the configured ceiling.
    NormDrift,
    StepUnderflow,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::NormDrift => "norm_drift",
            RunStatus::StepUnderflow => "step_underflow",
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

/// Parameters echoed alongside each result.
#[derive(Clone, Debug, PartialEq)]
pub struct RunParams {
    pub qubits: u32,
    pub dim: usize,
    pub marked: usize,
    pub epsilon: Option<f64>,
    pub chi: f64,
    pub sigma: f64,
    pub seed: Option<u64>,
    pub schedule: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub success_probability: f64,
    pub norm_drift: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub status: RunStatus,
    pub params: RunParams,
}

/// Final state together with integration statistics.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub state: StateVector,
    pub counts: StepCounts,
    pub space: Space,
}

/// Ground energy of the noiseless two-level problem.
fn ground_energy(dim: usize, driver: f64, problem: f64) -> f64 {
    let h = reduced_matrix(dim, driver, problem);
    let mean = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let half_split = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    mean - half_split.hypot(h[(0, 1)])
}

/// Two-level dynamics in the frame `phi_k = e^{i Phi_k(t)} psi_k`,
/// `Phi_k = int h_kk dt`; only the relative phase enters.
struct ReducedSystem<'a, A> {
    dim: usize,
    spec: &'a HamiltonianSpec,
    schedule: &'a A,
}

impl<A: Anneal> ReducedSystem<'_, A> {
    /// `int_0^t (h_00 - h_11) dt'`, linear in `t` and `int_0^t s dt'`.
    fn relative_phase(&self, t: f64) -> f64 {
        let n = self.dim as f64;
        let integral_s = self.schedule.integral_s(t);
        (1.0 - 2.0 / n) * (t - integral_s) - (1.0 + self.spec.chi) * integral_s
    }
}

impl<A: Anneal> System for ReducedSystem<'_, A> {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let s = self.schedule.s_at(t);
        let h = reduced_matrix(self.dim, self.spec.driver_weight(s), self.spec.problem_weight(s));
        let rotation = C64::from_polar(1.0, self.relative_phase(t));
        let coupling = C64::new(0.0, -h[(0, 1)]);
        dy[0] = coupling * rotation * y[1];
        dy[1] = coupling * rotation.conj() * y[0];
    }
}

struct FullSystem<'a, A> {
    spec: &'a HamiltonianSpec,
    schedule: &'a A,
    dense_noise: bool,
}

impl<A: Anneal> System for FullSystem<'_, A> {
    fn dim(&self) -> usize {
        self.spec.instance.dim()
    }

    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let s = self.schedule.s_at(t);
        let driver = self.spec.driver_weight(s);
        let problem = self.spec.problem_weight(s);
        let offset = ground_energy(self.spec.instance.dim(), driver, problem);
        apply_projectors_into(driver, problem, offset, self.spec.instance.marked(), y, dy);
        if self.dense_noise {
            if let Some(noise) = &self.spec.noise {
                noise.apply_add(y, dy);
            }
        }
        for d in dy.iter_mut() {
            *d = C64::new(d.im, -d.re);
        }
    }
}

/// Full-space dynamics in the eigenbasis of the noise matrix, where the
/// Hamiltonian is a diagonal plus two rank-one projector terms.
pub(crate) struct EigenSystem<'a, A> {
    /// Noise eigenvalues, already scaled by sigma.
    energies: Vec<f64>,
    /// `V^dagger |+>` and `V^dagger |m>`, split into real and imaginary parts.
    plus_re: Vec<f64>,
    plus_im: Vec<f64>,
    marked_re: Vec<f64>,
    marked_im: Vec<f64>,
    real_basis: bool,
    chi: f64,
    schedule: &'a A,
}

impl<'a, A: Anneal> EigenSystem<'a, A> {
    pub(crate) fn new(basis: &NoiseEigenbasis, sigma: f64, marked: &[C64], chi: f64, schedule: &'a A) -> Self {
        let plus = basis.plus();
        Self {
            energies: basis.values().iter().map(|v| v * sigma).collect(),
            plus_re: plus.iter().map(|z| z.re).collect(),
            plus_im: plus.iter().map(|z| z.im).collect(),
            marked_re: marked.iter().map(|z| z.re).collect(),
            marked_im: marked.iter().map(|z| z.im).collect(),
            real_basis: plus.iter().chain(marked).all(|z| z.im == 0.0),
            chi,
            schedule,
        }
    }

    /// `(<+|y>, <m|y>)` with real basis vectors.
    fn overlaps_real(&self, y: &[C64]) -> (C64, C64) {
        let (mut pr, mut pi, mut qr, mut qi) = (0.0, 0.0, 0.0, 0.0);
        for ((p, q), v) in self.plus_re.iter().zip(&self.marked_re).zip(y) {
            pr += p * v.re;
            pi += p * v.im;
            qr += q * v.re;
            qi += q * v.im;
        }
        (C64::new(pr, pi), C64::new(qr, qi))
    }

    fn overlaps_complex(&self, y: &[C64]) -> (C64, C64) {
        let mut on_plus = C64::new(0.0, 0.0);
        let mut on_marked = C64::new(0.0, 0.0);
        let plus = self.plus_re.iter().zip(&self.plus_im);
        let marked = self.marked_re.iter().zip(&self.marked_im);
        for (((pr, pi), (qr, qi)), v) in plus.zip(marked).zip(y) {
            on_plus += C64::new(*pr, -pi) * v;
            on_marked += C64::new(*qr, -qi) * v;
        }
        (on_plus, on_marked)
    }
}

impl<A: Anneal> System for EigenSystem<'_, A> {
    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let s = self.schedule.s_at(t);
        let driver = 1.0 - s;
        let problem = s * (1.0 + self.chi);
        let diag = driver + problem - ground_energy(self.energies.len(), driver, problem);
        let (on_plus, on_marked) = if self.real_basis { self.overlaps_real(y) } else { self.overlaps_complex(y) };
        let a = on_plus * driver;
        let b = on_marked * problem;
        let rows = self.energies.iter().zip(y).zip(dy.iter_mut());
        if self.real_basis {
            for (((e, v), d), (p, q)) in rows.zip(self.plus_re.iter().zip(&self.marked_re)) {
                let w = diag + e;
                // dy = -i (H y)
                let re = w * v.re - p * a.re - q * b.re;
                let im = w * v.im - p * a.im - q * b.im;
                *d = C64::new(im, -re);
            }
        } else {
            let plus = self.plus_re.iter().zip(&self.plus_im);
            let marked = self.marked_re.iter().zip(&self.marked_im);
            for (((e, v), d), ((pr, pi), (qr, qi))) in rows.zip(plus.zip(marked)) {
                let h = v * (diag + e) - C64::new(*pr, *pi) * a - C64::new(*qr, *qi) * b;
                *d = C64::new(h.im, -h.re);
            }
        }
    }
}

fn integrate_schedule<S: System, A: Anneal>(
    sys: &S,
    schedule: &A,
    config: &IntegratorConfig,
    y: &mut [C64],
) -> Result<StepCounts> {
    let mut rk = Rkf45::new(sys.dim(), config.clone())?;
    let total = schedule.total_time();
    let mut t = 0.0;
    for knot in schedule.breakpoints().into_iter().chain(std::iter::once(total)) {
        if knot > t {
            rk.integrate(sys, t, knot, y)?;
            t = knot;
        }
    }
    Ok(rk.counts())
}

fn check_initial(initial: &StateVector, expected_dim: usize, config: &IntegratorConfig) -> Result<()> {
    if initial.dim() != expected_dim {
        return Err(Error::DimensionMismatch { expected: expected_dim, got: initial.dim() });
    }
    let drift = (initial.norm_sqr() - 1.0).abs();
    if drift > config.norm_drift_ceiling {
        return Err(Error::InvalidInstance(format!("initial state norm deviates from 1 by {drift}")));
    }
    Ok(())
}

/// Evolves `initial` over the whole schedule and returns the final state.
///
/// With [`Space::Reduced`], states are 2-vectors over `{|m>, |m_perp>}`.
pub fn evolve_state<A: Anneal>(
    spec: &HamiltonianSpec,
    schedule: &A,
    config: &IntegratorConfig,
    space: Space,
    initial: &StateVector,
) -> Result<Evolution> {
    let dim = spec.instance.dim();
    match space {
        Space::Reduced => {
            if spec.noise.is_some() {
                return Err(Error::NoiseBreaksSubspace);
            }
            check_initial(initial, 2, config)?;
            let mut y = initial.amplitudes().to_vec();
            let sys = ReducedSystem { dim, spec, schedule };
            let counts = integrate_schedule(&sys, schedule, config, &mut y)?;
            y[1] *= C64::from_polar(1.0, sys.relative_phase(schedule.total_time()));
            Ok(Evolution { state: StateVector::from_amplitudes(y), counts, space })
        }
        Space::Full if spec.noise.is_some() => {
            check_initial(initial, dim, config)?;
            let noise = spec.noise.as_ref().expect("checked above");
            let basis = noise.eigenbasis();
            let marked = basis.marked_coefficients(spec.instance.marked());
            let mut y = basis.to_eigenbasis(initial.amplitudes());
            let sys = EigenSystem::new(basis, noise.sigma(), &marked, spec.chi, schedule);
            let counts = integrate_schedule(&sys, schedule, config, &mut y)?;
            Ok(Evolution { state: StateVector::from_amplitudes(basis.from_eigenbasis(&y)), counts, space })
        }
        Space::Full | Space::FullDense => {
            check_initial(initial, dim, config)?;
            let mut y = initial.amplitudes().to_vec();
            let sys = FullSystem { spec, schedule, dense_noise: space == Space::FullDense };
            let counts = integrate_schedule(&sys, schedule, config, &mut y)?;
            Ok(Evolution { state: StateVector::from_amplitudes(y), counts, space })
        }
    }
}

/// `|<m|psi>|^2`. In the reduced space the marked state is the first basis
/// vector.
pub fn success_probability(psi: &StateVector, marked: usize) -> f64 {
    if psi.dim() == 2 {
        psi.amplitudes()[0].norm_sqr()
    } else {
        psi.amplitudes()[marked].norm_sqr()
    }
}

pub(crate) fn run_params<A: Anneal>(spec: &HamiltonianSpec, schedule: &A) -> RunParams {
    RunParams {
        qubits: spec.instance.qubits(),
        dim: spec.instance.dim(),
        marked: spec.instance.marked(),
        epsilon: schedule.epsilon(),
        chi: spec.chi,
        sigma: spec.noise.as_ref().map_or(0.0, |z| z.sigma()),
        seed: spec.noise.as_ref().map(|z| z.seed()),
        schedule: schedule.label(),
    }
}

pub(crate) fn finish(
    state: &StateVector,
    success_probability: f64,
    counts: StepCounts,
    config: &IntegratorConfig,
    params: RunParams,
) -> RunResult {
    let norm_drift = (state.norm_sqr() - 1.0).abs();
    let status = if norm_drift > config.norm_drift_ceiling || !norm_drift.is_finite() {
        RunStatus::NormDrift
    } else {
        RunStatus::Ok
    };
    RunResult {
        success_probability,
        norm_drift,
        accepted_steps: counts.accepted,
        rejected_steps: counts.rejected,
        status,
        params,
    }
}

/// Runs one anneal and reports the probability of measuring the marked state.
///
/// Step-size underflow is an error; excessive norm drift yields a result with
/// [`RunStatus::NormDrift`].
pub fn evolve<A: Anneal>(
    spec: &HamiltonianSpec,
    schedule: &A,
    config: &IntegratorConfig,
    space: Space,
    initial: &StateVector,
) -> Result<RunResult> {
    let evolution = evolve_state(spec, schedule, config, space, initial)?;
    let p = success_probability(&evolution.state, spec.instance.marked());
    Ok(finish(&evolution.state, p, evolution.counts, config, run_params(spec, schedule)))
}
