//! Weak-coupling excitation out of the two-level subspace for a per-qubit
//! Ohmic dephasing bath, and the instantaneous Gibbs-state success
//! probability.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::quadrature::{integrate, QuadratureConfig};
use crate::schedule::{Schedule, ScheduleKind, ScheduleParams};
use crate::spectrum::{gap, sigma_z_matrix_elements};

/// Below this `|delta|` the spectral density uses its `delta -> 0` limit.
pub const SMALL_GAP: f64 = 1e-8;

/// Default slope `c` of the `beta = c n` policy; `e^{-beta/2} N` stays at 1.
pub const DEFAULT_BETA_SLOPE: f64 = 2.0 * std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathParams {
    beta: f64,
    g: f64,
}

impl BathParams {
    /// `beta` may be `+inf` (zero temperature).
    pub fn new(beta: f64, g: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidBath(format!("beta must be >= 0, got {beta}")));
        }
        if !(g >= 0.0) || !g.is_finite() {
            return Err(Error::InvalidBath(format!("g must be finite and >= 0, got {g}")));
        }
        Ok(Self { beta, g })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn g(&self) -> f64 {
        self.g
    }
}

/// `gamma(delta) = 2 pi g^2 delta / (1 - e^{-beta delta})`.
pub fn ohmic_gamma(delta: f64, bath: &BathParams) -> Result<f64> {
    if bath.beta == 0.0 {
        return Err(Error::InvalidBath("spectral density is undefined at beta = 0".into()));
    }
    let coupling = 2.0 * PI * bath.g * bath.g;
    if delta.abs() < SMALL_GAP {
        return Ok(if bath.beta.is_infinite() { 0.0 } else { coupling / bath.beta });
    }
    Ok(coupling * delta / -(-bath.beta * delta).exp_m1())
}

/// Total excitation rate from the instantaneous ground state into the
/// energy-1 manifold, summed over all `n` qubit couplings.
pub fn excitation_rate(s: f64, instance: &ProblemInstance, bath: &BathParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ParameterOutOfRange(s));
    }
    if bath.g == 0.0 {
        return Ok(0.0);
    }
    let dim = instance.dim();
    let n = dim as f64;
    let elements = sigma_z_matrix_elements(s, dim);
    let weight = (n / 2.0 - 1.0) * elements.antisymmetric.powi(2) + elements.complement.powi(2);
    if weight == 0.0 {
        return Ok(0.0);
    }
    let excitation = 0.5 * (1.0 + gap(s, dim));
    let boltzmann = (-bath.beta * excitation).exp();
    Ok(instance.qubits() as f64 * ohmic_gamma(excitation, bath)? * boltzmann * weight)
}

/// `int_0^T R(s(t)) dt` along the exact schedule, evaluated in `s` using
/// `ds/dt = epsilon delta^2`.
pub fn expected_excitations(instance: &ProblemInstance, bath: &BathParams, schedule: &Schedule) -> Result<f64> {
    if *schedule.kind() != ScheduleKind::Exact {
        return Err(Error::Unsupported("expected excitations need the exact schedule".into()));
    }
    let dim = instance.dim();
    if schedule.params().dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: schedule.params().dim() });
    }
    if bath.g == 0.0 {
        return Ok(0.0);
    }
    // fail early instead of inside the integrand
    ohmic_gamma(1.0, bath)?;
    let epsilon = schedule.params().epsilon();
    let integrand = |s: f64| {
        let delta = gap(s, dim);
        excitation_rate(s, instance, bath).expect("validated bath and s in [0, 1]") / (epsilon * delta * delta)
    };
    Ok(integrate(integrand, &[0.0, 0.5, 1.0], &QuadratureConfig::default())?.value)
}

/// Ground-state weight of the Gibbs state of `H(s)`.
pub fn thermal_success(s: f64, dim: usize, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidBath(format!("beta must be >= 0, got {beta}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ParameterOutOfRange(s));
    }
    let delta = gap(s, dim);
    let others = (dim as f64 - 2.0) * (-beta * 0.5 * (1.0 + delta)).exp();
    Ok(1.0 / (1.0 + (-beta * delta).exp() + others))
}

/// How the bath parameters change with problem size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BathPolicy {
    /// `beta` and `g` held fixed.
    FixedBeta,
    /// `beta = slope * n`, `g` fixed.
    BetaLinearInN { slope: f64 },
    /// `g = g0 N^{-1/4}`, `beta` fixed.
    GScaled,
}

impl BathPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            BathPolicy::FixedBeta => "fixed_beta",
            BathPolicy::BetaLinearInN { .. } => "beta_linear_in_n",
            BathPolicy::GScaled => "g_scaled",
        }
    }

    /// Bath at `qubits` given the reference parameters.
    pub fn bath_for(&self, qubits: u32, reference: &BathParams) -> Result<BathParams> {
        match *self {
            BathPolicy::FixedBeta => Ok(*reference),
            BathPolicy::BetaLinearInN { slope } => BathParams::new(slope * qubits as f64, reference.g),
            BathPolicy::GScaled => {
                let dim = (1u64 << qubits) as f64;
                BathParams::new(reference.beta, reference.g * dim.powf(-0.25))
            }
        }
    }
}

impl fmt::Display for BathPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalRow {
    pub qubits: u32,
    pub dim: usize,
    pub beta: f64,
    pub g: f64,
    pub policy: BathPolicy,
    pub thermal_p_at_half: f64,
    pub expected_excitations: f64,
}

impl ThermalRow {
    /// `N P_thermal(1/2)`
    pub fn scaled_success(&self) -> f64 {
        self.dim as f64 * self.thermal_p_at_half
    }
}

/// Relative tolerance on successive `N P_thermal` ratios for a plateau.
pub const PLATEAU_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub policy: BathPolicy,
    pub rows: Vec<ThermalRow>,
}

impl ScalingReport {
    /// `N P_thermal` ratio between the last two sizes.
    pub fn last_plateau_ratio(&self) -> Option<f64> {
        let k = self.rows.len();
        (k >= 2).then(|| self.rows[k - 1].scaled_success() / self.rows[k - 2].scaled_success())
    }

    /// Whether `N P_thermal(1/2)` has settled to within [`PLATEAU_TOLERANCE`].
    pub fn plateau_reached(&self) -> bool {
        self.last_plateau_ratio().is_some_and(|r| (r - 1.0).abs() <= PLATEAU_TOLERANCE)
    }
}

/// One row per qubit count in `qubits`, evaluated along the exact schedule
/// with slope `epsilon`.
pub fn scaling_report(
    qubits: impl IntoIterator<Item = u32>,
    reference: &BathParams,
    policy: BathPolicy,
    epsilon: f64,
) -> Result<ScalingReport> {
    let mut rows = Vec::new();
    for n in qubits {
        let instance = ProblemInstance::new(n, 0)?;
        let bath = policy.bath_for(n, reference)?;
        let schedule = Schedule::exact(ScheduleParams::new(instance.dim(), epsilon)?);
        rows.push(ThermalRow {
            qubits: n,
            dim: instance.dim(),
            beta: bath.beta,
            g: bath.g,
            policy,
            thermal_p_at_half: thermal_success(0.5, instance.dim(), bath.beta)?,
            expected_excitations: expected_excitations(&instance, &bath, &schedule)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(ScalingReport { policy, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bath(beta: f64, g: f64) -> BathParams {
        BathParams::new(beta, g).unwrap()
    }

    #[test]
    fn gamma_values() {
        let two_pi_g2 = 2.0 * PI * 0.01;
        assert_relative_eq!(ohmic_gamma(1.0, &bath(f64::INFINITY, 0.1)).unwrap(), two_pi_g2, max_relative = 1e-15);
        assert_relative_eq!(ohmic_gamma(1.0, &bath(2.0, 0.1)).unwrap(), 0.072_666, max_relative = 1e-5);
        assert_relative_eq!(ohmic_gamma(0.0, &bath(2.0, 0.1)).unwrap(), two_pi_g2 / 2.0, max_relative = 1e-15);
        let near = ohmic_gamma(2e-8, &bath(2.0, 0.1)).unwrap();
        assert_relative_eq!(near, two_pi_g2 / 2.0, max_relative = 1e-7);
        assert!(ohmic_gamma(0.0, &bath(0.0, 0.1)).is_err());
    }

    #[test]
    fn bath_validation() {
        assert!(BathParams::new(-1.0, 0.1).is_err());
        assert!(BathParams::new(1.0, -0.1).is_err());
        assert!(BathParams::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn rate_limits() {
        let inst = ProblemInstance::new(5, 3).unwrap();
        assert_eq!(excitation_rate(1.0, &inst, &bath(1.0, 0.2)).unwrap(), 0.0);
        for s in [0.0, 0.3, 0.5, 0.9] {
            assert_eq!(excitation_rate(s, &inst, &bath(1.0, 0.0)).unwrap(), 0.0);
            assert!(excitation_rate(s, &inst, &bath(1.0, 0.2)).unwrap() > 0.0);
        }
        assert!(excitation_rate(1.5, &inst, &bath(1.0, 0.2)).is_err());
    }

    #[test]
    fn thermal_success_values() {
        assert_relative_eq!(thermal_success(0.3, 64, 0.0).unwrap(), 1.0 / 64.0, max_relative = 1e-15);
        assert_eq!(thermal_success(0.3, 64, f64::INFINITY).unwrap(), 1.0);
        let expected = 1.0 / (1.0 + (-0.25f64).exp() + 14.0 * (-0.625f64).exp());
        assert_relative_eq!(thermal_success(0.5, 16, 1.0).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.1078, max_relative = 1e-3);
    }

    #[test]
    fn expected_excitations_vanish_without_coupling() {
        let inst = ProblemInstance::new(6, 0).unwrap();
        let sched = Schedule::exact(ScheduleParams::new(64, 0.01).unwrap());
        assert_eq!(expected_excitations(&inst, &bath(1.0, 0.0), &sched).unwrap(), 0.0);
        let piecewise = crate::schedule::piecewise_schedule(3, ScheduleParams::new(64, 0.01).unwrap()).unwrap();
        assert!(expected_excitations(&inst, &bath(1.0, 0.1), &piecewise).is_err());
    }

    #[test]
    fn policies() {
        let reference = bath(1.0, 0.2);
        assert_eq!(BathPolicy::FixedBeta.bath_for(9, &reference).unwrap(), reference);
        let lin = BathPolicy::BetaLinearInN { slope: DEFAULT_BETA_SLOPE }.bath_for(8, &reference).unwrap();
        assert_relative_eq!(lin.beta(), 16.0 * std::f64::consts::LN_2, max_relative = 1e-15);
        let scaled = BathPolicy::GScaled.bath_for(8, &reference).unwrap();
        assert_relative_eq!(scaled.g(), 0.2 / 4.0, max_relative = 1e-15);
    }
}
