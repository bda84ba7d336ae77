//! Self-checks run by `qaus validate`: closed forms against dense
//! diagonalization and brute-force sums, schedule identities and space
//! agreement.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{evolve, Space};
use crate::integrator::IntegratorConfig;
use crate::problem::{make_plus_state, reduced_plus_state, HamiltonianSpec, ProblemInstance, StateVector};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::schedule::{s_exact, total_time, Schedule, ScheduleParams};
use crate::spectrum::{dense_oracle, gap, sigma_z_matrix_elements, ExcitedBasis, SpectrumPoint};
use crate::stats::{bootstrap_median, median};
use crate::thermal::{excitation_rate, ohmic_gamma, BathParams};
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        Self { name, passed: worst <= tolerance, detail: format!("worst {worst:.3e}, tolerance {tolerance:.0e}") }
    }
}

fn sigma_z(psi: &StateVector, qubit: u32) -> StateVector {
    let amps = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(x, &a)| if (x >> qubit) & 1 == 1 { -a } else { a })
        .collect();
    StateVector::from_amplitudes(amps)
}

fn random_s(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Closed-form levels and `sigma^z` elements against dense diagonalization.
pub fn spectrum_check(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 2..=6u32 {
        let dim = 1usize << n;
        let instance = ProblemInstance::new(n, rng.gen_range(0..dim))?;
        let spec = HamiltonianSpec::new(instance);
        let excited = ExcitedBasis::new(instance);
        for s in random_s(&mut rng, 20) {
            let dense = dense_oracle(&spec, s)?;
            let p = SpectrumPoint::at(s, dim);
            let mut expected = vec![p.e0, p.e1];
            expected.resize(dim, 1.0);
            expected.sort_by(f64::total_cmp);
            for (a, b) in dense.eigenvalues.iter().zip(&expected) {
                worst = worst.max((a - b).abs());
            }
            let ground = dense.ground_state();
            let elements = sigma_z_matrix_elements(s, dim);
            for qubit in 0..n {
                let flipped = sigma_z(&ground, qubit);
                for v in &excited.antisymmetric {
                    worst = worst.max((v.inner(&flipped).norm() - elements.antisymmetric).abs());
                }
                for (k, v) in excited.symmetric.iter().enumerate() {
                    let closed = if k == 0 { elements.complement } else { elements.symmetric };
                    worst = worst.max((v.inner(&flipped).norm() - closed).abs());
                }
            }
        }
    }
    Ok(Check::new("spectrum", worst, 1e-10))
}

/// End points, finite-difference slope and total time of the exact schedule.
pub fn schedule_check(epsilon: f64) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut endpoints_exact = true;
    for n in 2..=14u32 {
        let dim = 1usize << n;
        let params = ScheduleParams::new(dim, epsilon)?;
        let total = params.total_time();
        endpoints_exact &= s_exact(0.0, &params)? == 0.0;
        endpoints_exact &= s_exact(0.5 * total, &params)? == 0.5;
        endpoints_exact &= s_exact(total, &params)? == 1.0;
        for j in 1..50 {
            let t = total * j as f64 / 50.0;
            let h = total * 1e-6;
            let fd = (s_exact(t + h, &params)? - s_exact(t - h, &params)?) / (2.0 * h);
            let slope = epsilon * gap(s_exact(t, &params)?, dim).powi(2);
            worst = worst.max(((fd - slope) / slope).abs());
        }
        let recovered =
            integrate(|s| 1.0 / (epsilon * gap(s, dim).powi(2)), &[0.0, 0.5, 1.0], &QuadratureConfig::default())?.value;
        worst = worst.max(((recovered - total_time(dim, epsilon)) / total).abs());
    }
    let mut check = Check::new("schedule", worst, 1e-6);
    check.passed &= endpoints_exact;
    check.detail = format!("{}, endpoints exact: {endpoints_exact}", check.detail);
    Ok(check)
}

/// Reduced-space and full-space success probabilities along the exact schedule.
pub fn dynamics_check(epsilon: f64, config: &IntegratorConfig) -> Result<Check> {
    let mut worst = 0.0f64;
    for n in 4..=8u32 {
        let dim = 1usize << n;
        let instance = ProblemInstance::new(n, dim / 3)?;
        let spec = HamiltonianSpec::new(instance);
        let schedule = Schedule::exact(ScheduleParams::new(dim, epsilon)?);
        let reduced = evolve(&spec, &schedule, config, Space::Reduced, &reduced_plus_state(dim))?;
        let full = evolve(&spec, &schedule, config, Space::Full, &make_plus_state(&instance))?;
        worst = worst.max((reduced.success_probability - full.success_probability).abs());
    }
    Ok(Check::new("reduced_vs_full", worst, 1e-6))
}

/// Closed-form excitation rate against an explicit sum over the dense
/// eigenbasis and every qubit coupling.
pub fn thermal_check(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7468_6572_6d61_6c00);
    let bath = BathParams::new(1.0, 0.1)?;
    let mut worst = 0.0f64;
    for n in 3..=6u32 {
        let dim = 1usize << n;
        let instance = ProblemInstance::new(n, rng.gen_range(0..dim))?;
        let spec = HamiltonianSpec::new(instance);
        for s in random_s(&mut rng, 20) {
            let dense = dense_oracle(&spec, s)?;
            let ground = dense.ground_state();
            let mut brute = 0.0;
            for level in 2..dim {
                let omega = dense.eigenvalues[level] - dense.eigenvalues[0];
                let v: Vec<C64> = dense.eigenvectors.column(level).iter().copied().collect();
                let v = StateVector::from_amplitudes(v);
                let weight: f64 = (0..n).map(|q| v.inner(&sigma_z(&ground, q)).norm_sqr()).sum();
                brute += ohmic_gamma(omega, &bath)? * (-bath.beta() * omega).exp() * weight;
            }
            let closed = excitation_rate(s, &instance, &bath)?;
            worst = worst.max(((closed - brute) / brute).abs());
        }
    }
    Ok(Check::new("thermal_rate", worst, 1e-8))
}

/// Median and bootstrap on data with known answers.
pub fn stats_check(seed: u64) -> Result<Check> {
    let odd = median(&[5.0, 1.0, 3.0])?;
    let even = median(&[4.0, 1.0, 3.0, 2.0])?;
    let flat = bootstrap_median(&[0.25; 50], 100, seed)?;
    let worst = (odd - 3.0).abs().max((even - 2.5).abs()).max((flat.mean_of_medians - 0.25).abs()).max(flat.error_bar());
    Ok(Check::new("statistics", worst, 0.0))
}

/// Every check, in a fixed order.
pub fn run_all(seed: u64, epsilon: f64, config: &IntegratorConfig) -> Result<Vec<Check>> {
    Ok(vec![
        spectrum_check(seed)?,
        schedule_check(epsilon)?,
        dynamics_check(epsilon, config)?,
        thermal_check(seed)?,
        stats_check(seed)?,
    ])
}
