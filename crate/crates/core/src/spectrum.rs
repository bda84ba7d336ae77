//! Closed-form spectrum of the unperturbed interpolation.
//!
//! The ground and first excited states live in `span{|m>, |m_perp>}` and are
//! parametrized by a mixing angle `theta(s)`; the remaining `N - 2` states sit
//! at energy 1 for every `s`. The angle itself is never formed: only its
//! cosine, sine and half-angle squares, the latter through cancellation-free
//! identities.
//!
//! [`dense_oracle`] diagonalizes the explicit matrix and is used to check the
//! closed forms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::noise::NoiseEntries;
use crate::problem::{HamiltonianSpec, ProblemInstance, StateVector};

/// Gap `delta(s)` between ground and first excited state.
pub fn gap(s: f64, dim: usize) -> f64 {
    let n = dim as f64;
    ((1.0 - 2.0 * s).powi(2) + 4.0 / n * s * (1.0 - s)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumPoint {
    pub s: f64,
    pub delta: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub e0: f64,
    pub e1: f64,
    /// `sin^2(theta / 2)`, the ground-state weight on `|m_perp>`.
    pub sin2_half: f64,
    /// `cos^2(theta / 2)`, the ground-state weight on `|m>`.
    pub cos2_half: f64,
}

impl SpectrumPoint {
    pub fn at(s: f64, dim: usize) -> Self {
        let n = dim as f64;
        let delta = gap(s, dim);
        let x = 1.0 - 2.0 * (1.0 - s) * (1.0 - 1.0 / n);
        let y = 2.0 * (1.0 - s) * (1.0 / n).sqrt() * (1.0 - 1.0 / n).sqrt();
        // delta^2 = x^2 + y^2, so delta -/+ x = y^2 / (delta +/- x) whenever the
        // direct difference would cancel.
        let delta_minus_x = if x > 0.0 { y * y / (delta + x) } else { delta - x };
        let delta_plus_x = if x < 0.0 { y * y / (delta - x) } else { delta + x };
        Self {
            s,
            delta,
            cos_theta: x / delta,
            sin_theta: y / delta,
            e0: 0.5 * (1.0 - delta),
            e1: 0.5 * (1.0 + delta),
            sin2_half: 0.5 * delta_minus_x / delta,
            cos2_half: 0.5 * delta_plus_x / delta,
        }
    }

    pub fn sin_half(&self) -> f64 {
        self.sin2_half.sqrt()
    }

    pub fn cos_half(&self) -> f64 {
        self.cos2_half.sqrt()
    }
}

/// `(cos theta, sin theta)` at `s`.
pub fn mixing_angle(s: f64, dim: usize) -> (f64, f64) {
    let p = SpectrumPoint::at(s, dim);
    (p.cos_theta, p.sin_theta)
}

/// Instantaneous ground-state population on the marked state, `cos^2(theta/2)`.
pub fn ground_overlap_marked(s: f64, dim: usize) -> f64 {
    SpectrumPoint::at(s, dim).cos2_half
}

/// Magnitudes of the `sigma^z` matrix elements between the ground state and
/// the energy-1 manifold, identical for every qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaZElements {
    /// Ground to each antisymmetric pair state.
    pub antisymmetric: f64,
    /// Ground to the state built on the complement of `m`.
    pub complement: f64,
    /// Ground to the remaining symmetric combinations.
    pub symmetric: f64,
}

pub fn sigma_z_matrix_elements(s: f64, dim: usize) -> SigmaZElements {
    let n = dim as f64;
    let sin_half = SpectrumPoint::at(s, dim).sin_half();
    SigmaZElements {
        antisymmetric: (2.0 / (n - 1.0)).sqrt() * sin_half,
        complement: (n - 2.0).sqrt() / (n - 1.0) * sin_half,
        symmetric: 0.0,
    }
}

/// Location of the minimum gap for the misspecified interpolation
/// `(1 - s) H_b + s (1 + chi) H_p`.
pub fn shifted_gap_minimum(chi: f64, dim: usize) -> Result<f64> {
    let n = dim as f64;
    if !(chi > -1.0) || dim < 2 {
        return Err(Error::InvalidChi { chi, dim });
    }
    let num = n * (chi + 2.0) - 2.0 * (chi + 1.0);
    let den = n * (chi + 2.0).powi(2) - 4.0 * (chi + 1.0);
    Ok(num / den)
}

/// Large-N limit of [`shifted_gap_minimum`].
pub fn shifted_gap_minimum_limit(chi: f64) -> f64 {
    1.0 / (chi + 2.0)
}

/// Pairing used to build the energy-1 eigenvectors: enumerates
/// `{0, .., N/2 - 1}` with `min(m, N - 1 - m)` skipped, for `j = 1 .. N/2 - 1`.
pub fn pair_index(j: usize, marked: usize, dim: usize) -> usize {
    let complement = dim - 1 - marked;
    debug_assert_ne!(marked, complement, "N is even, so m and its complement differ");
    if j - 1 < marked.min(complement) {
        j - 1
    } else {
        j
    }
}

/// Explicit eigenbasis of the energy-1 manifold.
#[derive(Clone, Debug)]
pub struct ExcitedBasis {
    pub instance: ProblemInstance,
    /// `(|f(k)> - |f(k)_bar>) / sqrt(2)` for `k = 1 .. N/2 - 1`.
    pub antisymmetric: Vec<StateVector>,
    /// The complement state followed by the symmetric combinations for
    /// `k = 2 .. N/2 - 1`.
    pub symmetric: Vec<StateVector>,
}

impl ExcitedBasis {
    pub fn new(instance: ProblemInstance) -> Self {
        let dim = instance.dim();
        let marked = instance.marked();
        let half = dim / 2;
        let pairs: Vec<(usize, usize)> = (1..half)
            .map(|j| {
                let f = pair_index(j, marked, dim);
                (f, dim - 1 - f)
            })
            .collect();

        let real = |v: Vec<f64>| StateVector::from_amplitudes(v.into_iter().map(|x| C64::new(x, 0.0)).collect());

        let antisymmetric = pairs
            .iter()
            .map(|&(f, fb)| {
                let mut v = vec![0.0; dim];
                v[f] = std::f64::consts::FRAC_1_SQRT_2;
                v[fb] = -std::f64::consts::FRAC_1_SQRT_2;
                real(v)
            })
            .collect();

        let mut symmetric = Vec::with_capacity(half.saturating_sub(1));
        let nf = dim as f64;
        let mut complement = vec![0.0; dim];
        complement[dim - 1 - marked] = 1.0;
        for &(f, fb) in &pairs {
            complement[f] = -1.0 / (nf - 2.0);
            complement[fb] = -1.0 / (nf - 2.0);
        }
        let scale = ((nf - 2.0) / (nf - 1.0)).sqrt();
        symmetric.push(real(complement.into_iter().map(|x| x * scale).collect()));

        for k in 2..half {
            let kf = k as f64;
            let mut v = vec![0.0; dim];
            let (f, fb) = pairs[k - 1];
            v[f] = 0.5;
            v[fb] = 0.5;
            for &(g, gb) in &pairs[..k - 1] {
                v[g] = -1.0 / (2.0 * (kf - 1.0));
                v[gb] = -1.0 / (2.0 * (kf - 1.0));
            }
            let scale = (2.0 * (kf - 1.0) / kf).sqrt();
            symmetric.push(real(v.into_iter().map(|x| x * scale).collect()));
        }

        Self { instance, antisymmetric, symmetric }
    }

    pub fn vectors(&self) -> impl Iterator<Item = &StateVector> {
        self.antisymmetric.iter().chain(self.symmetric.iter())
    }

    pub fn len(&self) -> usize {
        self.antisymmetric.len() + self.symmetric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Explicit `N x N` Hamiltonian, for verification only.
pub fn dense_hamiltonian(spec: &HamiltonianSpec, s: f64) -> DMatrix<C64> {
    let dim = spec.instance.dim();
    let driver = spec.driver_weight(s);
    let problem = spec.problem_weight(s);
    let inv = 1.0 / dim as f64;
    let mut h = DMatrix::from_fn(dim, dim, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        C64::new(driver * (id - inv) + problem * id, 0.0)
    });
    let m = spec.instance.marked();
    h[(m, m)] -= problem;
    if let Some(noise) = &spec.noise {
        match noise.entries() {
            NoiseEntries::Real(unit) => {
                h.zip_apply(unit, |a, b| *a += C64::new(noise.sigma() * b, 0.0));
            }
            NoiseEntries::Complex(unit) => {
                h.zip_apply(unit, |a, b| *a += b * noise.sigma());
            }
        }
    }
    h
}

/// Full eigendecomposition, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    pub eigenvalues: DVector<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: DMatrix<C64>,
}

impl DenseSpectrum {
    pub fn ground_state(&self) -> StateVector {
        StateVector::from_amplitudes(self.eigenvectors.column(0).iter().copied().collect())
    }

    pub fn gap(&self) -> f64 {
        self.eigenvalues[1] - self.eigenvalues[0]
    }
}

pub const ORACLE_MAX_QUBITS: u32 = 10;

pub fn dense_oracle(spec: &HamiltonianSpec, s: f64) -> Result<DenseSpectrum> {
    let n = spec.instance.qubits();
    if n > ORACLE_MAX_QUBITS {
        return Err(Error::OracleTooLarge(n));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ParameterOutOfRange(s));
    }
    let h = dense_hamiltonian(spec, s);
    let is_real = spec.noise.as_ref().map_or(true, |z| matches!(z.entries(), NoiseEntries::Real(_)));
    let (values, vectors) = if is_real {
        let eig = h.map(|z| z.re).symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = h.clone().symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&i| values[i]));
    let mut eigenvectors = DMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    if eigenvalues.len() > 1 && eigenvalues[1] - eigenvalues[0] > 1e-6 {
        let polished = polish_ground(&h, eigenvalues[0], eigenvectors.column(0).into_owned());
        eigenvectors.set_column(0, &polished);
    }
    Ok(DenseSpectrum { eigenvalues, eigenvectors })
}

/// Two steps of shifted inverse iteration. Near the degenerate level the
/// dense ground vector is only accurate to about 1e-9.
fn polish_ground(h: &DMatrix<C64>, value: f64, mut v: DVector<C64>) -> DVector<C64> {
    let shift = value - 1e-9 * (1.0 + value.abs());
    let lu = (h - DMatrix::<C64>::identity(h.nrows(), h.ncols()) * C64::new(shift, 0.0)).lu();
    for _ in 0..2 {
        match lu.solve(&v) {
            Some(x) if x.norm().is_finite() && x.norm() > 0.0 => v = x.unscale(x.norm()),
            _ => break,
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::apply_hamiltonian;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gap_values() {
        for dim in [2, 16, 1024] {
            assert_eq!(gap(0.0, dim), 1.0);
            assert_eq!(gap(1.0, dim), 1.0);
        }
        assert_abs_diff_eq!(gap(0.5, 16), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(gap(0.25, 4), 0.4375f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(gap(0.25, 4), 0.6614378, epsilon = 1e-7);
    }

    #[test]
    fn mixing_angle_values() {
        let (c, s) = mixing_angle(1.0, 64);
        assert_eq!((c, s), (1.0, 0.0));
        let (c, s) = mixing_angle(0.0, 4);
        assert_abs_diff_eq!(c, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c * c + s * s, 1.0, epsilon = 1e-15);
        for dim in [4, 16, 256, 1 << 20] {
            for i in 0..=100 {
                let p = SpectrumPoint::at(i as f64 / 100.0, dim);
                assert_abs_diff_eq!(p.cos_theta.powi(2) + p.sin_theta.powi(2), 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(p.sin2_half + p.cos2_half, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(p.e1 - p.e0, p.delta, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ground_overlap_values() {
        assert_eq!(ground_overlap_marked(1.0, 16), 1.0);
        assert_abs_diff_eq!(ground_overlap_marked(0.0, 16), 1.0 / 16.0, epsilon = 1e-15);
        // sin^2(theta/2) = 1/2 - 1/(2 sqrt N) at the midpoint
        assert_abs_diff_eq!(ground_overlap_marked(0.5, 16), 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(SpectrumPoint::at(0.0, 16).sin2_half, 1.0 - 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn ground_overlap_matches_dense_ground_state() {
        for n in 2..=6u32 {
            let inst = ProblemInstance::new(n, (1 << n) - 2).unwrap();
            let spec = HamiltonianSpec::new(inst);
            for s in [0.1, 0.5, 0.77] {
                let dense = dense_oracle(&spec, s).unwrap();
                let amp = dense.eigenvectors[(inst.marked(), 0)].norm_sqr();
                assert_abs_diff_eq!(amp, ground_overlap_marked(s, inst.dim()), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn half_angle_is_accurate_near_the_end() {
        // 1 - cos(theta) computed naively loses everything here
        let s = 1.0 - 1e-9;
        let p = SpectrumPoint::at(s, 1024);
        let expected = (p.sin_theta / 2.0).powi(2) / p.cos2_half;
        assert!((p.sin2_half - expected).abs() / expected < 1e-8);
    }

    #[test]
    fn sigma_z_elements_values() {
        let e = sigma_z_matrix_elements(1.0, 64);
        assert_eq!((e.antisymmetric, e.complement, e.symmetric), (0.0, 0.0, 0.0));
        let e = sigma_z_matrix_elements(0.0, 8);
        assert_abs_diff_eq!(e.antisymmetric, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn shifted_minimum_values() {
        for dim in [4, 64, 1 << 16] {
            assert_abs_diff_eq!(shifted_gap_minimum(0.0, dim).unwrap(), 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(shifted_gap_minimum_limit(0.1), 1.0 / 2.1, epsilon = 1e-15);
        assert_abs_diff_eq!(shifted_gap_minimum(0.1, 1 << 40).unwrap(), 0.4761905, epsilon = 1e-7);
        assert_abs_diff_eq!(shifted_gap_minimum(0.1, 1024).unwrap(), 2148.2 / 4511.44, epsilon = 1e-12);
        assert!(shifted_gap_minimum(-1.0, 16).is_err());
        assert!(shifted_gap_minimum(0.1, 1).is_err());
    }

    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-12 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn shifted_minimum_matches_numerical_gap_minimum() {
        // n = 10 through the exact 2x2 block, which carries the two lowest levels
        let inst = ProblemInstance::new(10, 0).unwrap();
        let spec = HamiltonianSpec::new(inst).with_chi(0.1).unwrap();
        let gap_at = |s: f64| {
            let e = crate::problem::reduced_hamiltonian(&spec, s).unwrap().symmetric_eigen().eigenvalues;
            (e[0] - e[1]).abs()
        };
        let s_min = golden_min(gap_at, 0.3, 0.7);
        assert_abs_diff_eq!(s_min, shifted_gap_minimum(0.1, 1024).unwrap(), epsilon = 1e-6);
        assert_abs_diff_eq!(s_min, 0.476167, epsilon = 1e-6);
    }

    #[test]
    fn shifted_minimum_matches_dense_grid() {
        let inst = ProblemInstance::new(6, 5).unwrap();
        let spec = HamiltonianSpec::new(inst).with_chi(0.1).unwrap();
        let step = 1e-3;
        let (mut best, mut best_gap) = (0.0, f64::INFINITY);
        for i in 300..=700 {
            let s = i as f64 * step;
            let g = dense_oracle(&spec, s).unwrap().gap();
            if g < best_gap {
                best_gap = g;
                best = s;
            }
        }
        assert!((best - shifted_gap_minimum(0.1, 64).unwrap()).abs() <= step);
    }

    #[test]
    fn dense_spectrum_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6u32 {
            let inst = ProblemInstance::new(n, rng.gen_range(0..1usize << n)).unwrap();
            let spec = HamiltonianSpec::new(inst);
            let dim = inst.dim();
            for _ in 0..5 {
                let s = rng.gen::<f64>();
                let ev = dense_oracle(&spec, s).unwrap().eigenvalues;
                let p = SpectrumPoint::at(s, dim);
                assert_abs_diff_eq!(ev[0], p.e0, epsilon = 1e-10);
                assert_abs_diff_eq!(ev[dim - 1], p.e1.max(1.0), epsilon = 1e-10);
                let mut closed = vec![p.e0, p.e1];
                closed.extend(std::iter::repeat(1.0).take(dim - 2));
                closed.sort_by(f64::total_cmp);
                for (a, b) in ev.iter().zip(&closed) {
                    assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
                }
            }
            let start = dense_oracle(&spec, 0.0).unwrap();
            assert_abs_diff_eq!(start.eigenvalues[0], 0.0, epsilon = 1e-12);
            let overlap = start.ground_state().inner(&StateVector::uniform(dim)).norm();
            assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let spec = HamiltonianSpec::new(ProblemInstance::new(11, 0).unwrap());
        assert_eq!(dense_oracle(&spec, 0.5).unwrap_err(), Error::OracleTooLarge(11));
    }

    #[test]
    fn matrix_free_agrees_with_dense_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=8u32 {
            let inst = ProblemInstance::new(n, rng.gen_range(0..1usize << n)).unwrap();
            let spec = HamiltonianSpec::new(inst).with_chi(rng.gen::<f64>() * 0.2).unwrap();
            let psi: Vec<C64> = (0..inst.dim()).map(|_| C64::new(rng.gen(), rng.gen())).collect();
            let s = rng.gen::<f64>();
            let dense = dense_hamiltonian(&spec, s) * DVector::from_column_slice(&psi);
            let free = apply_hamiltonian(&spec, s, &StateVector::from_amplitudes(psi)).unwrap();
            for (a, b) in dense.iter().zip(free.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        // the n = 2 midpoint case against the dense matrix
        let spec = HamiltonianSpec::new(ProblemInstance::new(2, 0).unwrap());
        let plus = StateVector::uniform(4);
        let dense = dense_hamiltonian(&spec, 0.5) * DVector::from_column_slice(plus.amplitudes());
        let free = apply_hamiltonian(&spec, 0.5, &plus).unwrap();
        for (a, b) in dense.iter().zip(free.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn pair_index_skips_marked_pair() {
        for n in 2..=6u32 {
            let dim = 1usize << n;
            for m in 0..dim {
                let mut seen: Vec<usize> = (1..dim / 2).map(|j| pair_index(j, m, dim)).collect();
                seen.push(m.min(dim - 1 - m));
                seen.sort();
                assert_eq!(seen, (0..dim / 2).collect::<Vec<_>>());
            }
        }
    }
}
