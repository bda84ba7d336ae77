//! Embedded Runge-Kutta-Fehlberg 4(5) integrator for complex linear systems.
//!
//! The fifth-order solution is propagated and the difference to the embedded
//! fourth-order solution drives the step-size controller.

use num_complex::Complex64 as C64;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub safety: f64,
    /// Largest factor a step may grow by after an accepted step.
    pub max_growth: f64,
    /// Smallest factor a step may shrink by after a rejection.
    pub max_shrink: f64,
    /// Final `| ||psi||^2 - 1 |` above which a run is flagged invalid.
    pub norm_drift_ceiling: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            initial_step: 1e-2,
            max_step: 10.0,
            min_step: 1e-12,
            safety: 0.9,
            max_growth: 5.0,
            max_shrink: 0.1,
            norm_drift_ceiling: 1e-6,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("min_step", self.min_step),
            ("safety", self.safety),
            ("norm_drift_ceiling", self.norm_drift_ceiling),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || value.is_nan() {
                return Err(Error::InvalidIntegrator(format!("{name} must be positive, got {value}")));
            }
        }
        if self.min_step >= self.max_step {
            return Err(Error::InvalidIntegrator(format!(
                "min_step {} must be below max_step {}",
                self.min_step, self.max_step
            )));
        }
        if self.safety >= 1.0 || self.max_growth <= 1.0 || !(0.0..1.0).contains(&self.max_shrink) || self.max_shrink == 0.0 {
            return Err(Error::InvalidIntegrator("controller factors out of range".into()));
        }
        Ok(())
    }
}

/// Right-hand side `dy/dt = f(t, y)`.
pub trait System {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub accepted: u64,
    pub rejected: u64,
}

// Fehlberg tableau
const C: [f64; 6] = [0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5];
const A2: [f64; 1] = [0.25];
const A3: [f64; 2] = [3.0 / 32.0, 9.0 / 32.0];
const A4: [f64; 3] = [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0];
const A5: [f64; 4] = [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0];
const A6: [f64; 5] = [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0];

fn axpy(out: &mut [C64], x: &[C64], a: f64) {
    for (o, v) in out.iter_mut().zip(x) {
        o.re += a * v.re;
        o.im += a * v.im;
    }
}

/// Reusable stage storage and controller state.
pub struct Rkf45 {
    config: IntegratorConfig,
    k: [Vec<C64>; 6],
    stage: Vec<C64>,
    next: Vec<C64>,
    step: f64,
    counts: StepCounts,
}

impl Rkf45 {
    pub fn new(dim: usize, config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        let zeros = || vec![C64::new(0.0, 0.0); dim];
        Ok(Self {
            step: config.initial_step.min(config.max_step),
            config,
            k: std::array::from_fn(|_| zeros()),
            stage: zeros(),
            next: zeros(),
            counts: StepCounts::default(),
        })
    }

    pub fn counts(&self) -> StepCounts {
        self.counts
    }

    /// `stage = y + h * sum_j coeffs[j] * k[j]`
    fn stage_input(&mut self, y: &[C64], h: f64, coeffs: &[f64]) {
        self.stage.copy_from_slice(y);
        for (kj, &a) in self.k.iter().zip(coeffs) {
            if a != 0.0 {
                axpy(&mut self.stage, kj, h * a);
            }
        }
    }

    /// One trial step of size `h`; leaves the fifth-order result in `self.next`
    /// and returns the 2-norm of the embedded error estimate.
    fn trial<S: System>(&mut self, sys: &S, t: f64, y: &[C64], h: f64) -> f64 {
        sys.eval(t, y, &mut self.k[0]);
        let tableau: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, coeffs) in tableau.iter().enumerate() {
            self.stage_input(y, h, coeffs);
            sys.eval(t + C[s + 1] * h, &self.stage, &mut self.k[s + 1]);
        }
        self.stage_input(y, h, &B5);
        std::mem::swap(&mut self.stage, &mut self.next);
        self.stage.fill(C64::new(0.0, 0.0));
        for (j, kj) in self.k.iter().enumerate() {
            let e = B5[j] - B4[j];
            if e != 0.0 {
                axpy(&mut self.stage, kj, h * e);
            }
        }
        self.stage.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Advances `y` from `t0` to exactly `t1`.
    pub fn integrate<S: System>(&mut self, sys: &S, t0: f64, t1: f64, y: &mut [C64]) -> Result<()> {
        let cfg = self.config.clone();
        let mut t = t0;
        let mut h = self.step.clamp(cfg.min_step, cfg.max_step);
        while t < t1 {
            let remaining = t1 - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let h_try = if last { remaining } else { h };
            let err = self.trial(sys, t, y, h_try);
            let norm = y.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let tol = cfg.abs_tol.max(cfg.rel_tol * norm);
            let ratio = err / tol;
            if ratio <= 1.0 {
                y.copy_from_slice(&self.next);
                t = if last { t1 } else { t + h_try };
                self.counts.accepted += 1;
                let grow = if ratio == 0.0 { cfg.max_growth } else { cfg.safety * ratio.powf(-0.2) };
                let factor = grow.clamp(cfg.max_shrink, cfg.max_growth);
                // a truncated final step says nothing about the natural step size
                if !last || factor < 1.0 {
                    h = (h_try * factor).clamp(cfg.min_step, cfg.max_step);
                }
            } else {
                self.counts.rejected += 1;
                if h_try <= cfg.min_step {
                    return Err(Error::StepUnderflow { t, step: h_try, ratio });
                }
                let factor = (cfg.safety * ratio.powf(-0.25)).clamp(cfg.max_shrink, 1.0);
                h = (h_try * factor).max(cfg.min_step);
            }
        }
        self.step = h;
        Ok(())
    }
}
