//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;

use qaus::problem::StateVector;

/// `(1 - s)(I - |+><+|) + s (I - |m><m|)` built entry by entry.
pub fn hamiltonian(n: u32, marked: usize, s: f64) -> DMatrix<f64> {
    let dim = 1usize << n;
    let inv = 1.0 / dim as f64;
    DMatrix::from_fn(dim, dim, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        let problem = if i == j && i != marked { 1.0 } else { 0.0 };
        (1.0 - s) * (id - inv) + s * problem
    })
}

pub fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let values: Vec<f64> = values;
    // the dense ground vector is off by about 1e-9 near the degenerate level
    let lu = (&h - DMatrix::identity(h.nrows(), h.ncols()) * (values[0] - 1e-9)).lu();
    let mut ground = vectors.column(0).into_owned();
    for _ in 0..2 {
        let x = lu.solve(&ground).expect("shifted matrix is invertible");
        ground = &x / x.norm();
    }
    vectors.set_column(0, &ground);
    (values, vectors)
}

pub fn column(m: &DMatrix<f64>, c: usize) -> Vec<f64> {
    m.column(c).iter().copied().collect()
}

pub fn apply_sigma_z(v: &[f64], qubit: u32) -> Vec<f64> {
    v.iter().enumerate().map(|(x, a)| if x >> qubit & 1 == 1 { -a } else { *a }).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn real_parts(v: &StateVector) -> Vec<f64> {
    v.amplitudes().iter().map(|z| z.re).collect()
}

/// Ohmic spectral density times the detailed-balance factor, written out.
pub fn emission_weight(omega: f64, beta: f64, g: f64) -> f64 {
    let gamma = 2.0 * std::f64::consts::PI * g * g * omega / (1.0 - (-beta * omega).exp());
    gamma * (-beta * omega).exp()
}

/// Time for `ds/dt = eps delta(s)^2` to carry `s` from 0 to 1, by classical
/// RK4 with `steps` nominal steps.
pub fn schedule_duration(dim: usize, eps: f64, guess: f64, steps: usize) -> f64 {
    let gap = |s: f64| ((1.0 - 2.0 * s).powi(2) + 4.0 * s * (1.0 - s) / dim as f64).sqrt();
    let f = |s: f64| eps * gap(s).powi(2);
    let h = guess / steps as f64;
    let (mut t, mut s) = (0.0, 0.0);
    while s < 1.0 {
        let k1 = f(s);
        let k2 = f(s + 0.5 * h * k1);
        let k3 = f(s + 0.5 * h * k2);
        let k4 = f(s + h * k3);
        let next = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += if next >= 1.0 { h * (1.0 - s) / (next - s) } else { h };
        s = next;
    }
    t
}
