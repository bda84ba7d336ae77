//! Locally adiabatic annealing schedule and its piecewise-linear
//! discretizations.
//!
//! The exact schedule obeys `ds/dt = eps * delta(s)^2`, which integrates to a
//! closed form `s(t)` and total time
//! `T = N / (eps sqrt(N - 1)) * atan(sqrt(N - 1))`.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::spectrum::gap;

/// Default adiabatic rate constant.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Relative overshoot past either end of the schedule that is silently clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

pub fn total_time(dim: usize, epsilon: f64) -> f64 {
    let n = dim as f64;
    let root = (n - 1.0).sqrt();
    n / (epsilon * root) * root.atan()
}

/// `(pi / (2 eps)) sqrt(N)`, the large-N form of [`total_time`].
pub fn total_time_asymptotic(dim: usize, epsilon: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 / epsilon * (dim as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleParams {
    dim: usize,
    epsilon: f64,
    total_time: f64,
}

impl ScheduleParams {
    pub fn new(dim: usize, epsilon: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInstance(format!("schedule needs N >= 2, got {dim}")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInstance(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { dim, epsilon, total_time: total_time(dim, epsilon) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }
}

/// Closed-form exact schedule value at `t`.
pub fn s_exact(t: f64, params: &ScheduleParams) -> Result<f64> {
    let t = clamp_time(t, params.total_time)?;
    Ok(s_exact_unchecked(t, params))
}

fn s_exact_unchecked(t: f64, params: &ScheduleParams) -> f64 {
    let total = params.total_time;
    if t <= 0.0 {
        return 0.0;
    }
    if t >= total {
        return 1.0;
    }
    let root = (params.dim as f64 - 1.0).sqrt();
    let arg = (2.0 * t / total - 1.0) * root.atan();
    (0.5 + arg.tan() / (2.0 * root)).clamp(0.0, 1.0)
}

fn clamp_time(t: f64, total: f64) -> Result<f64> {
    let slack = CLAMP_TOLERANCE * total;
    if t < -slack || t > total + slack || t.is_nan() {
        return Err(Error::TimeOutOfRange { t, total });
    }
    Ok(t.clamp(0.0, total))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleKind {
    Exact,
    /// `k` linear segments between equally spaced knots on the exact curve.
    Piecewise(usize),
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Exact => write!(f, "exact"),
            ScheduleKind::Piecewise(k) => write!(f, "{k}"),
        }
    }
}

/// Anything the propagator can follow: a map `t -> s(t)` on `[0, T]`.
pub trait Anneal {
    fn total_time(&self) -> f64;

    /// `s(t)`; callers guarantee `t` lies in `[0, T]`.
    fn s_at(&self, t: f64) -> f64;

    /// Interior times where `ds/dt` is discontinuous. The integrator restarts
    /// at each of them.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `int_0^t s(t') dt'` for `t` in `[0, T]`.
    fn integral_s(&self, t: f64) -> f64;

    fn label(&self) -> String;

    fn epsilon(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    params: ScheduleParams,
    /// `(t_j, s_j)`, empty for the exact schedule.
    knots: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn exact(params: ScheduleParams) -> Self {
        Self { kind: ScheduleKind::Exact, params, knots: Vec::new() }
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn s(&self, t: f64) -> Result<f64> {
        let t = clamp_time(t, self.params.total_time)?;
        Ok(self.s_at(t))
    }

    pub fn ds_dt(&self, t: f64) -> Result<f64> {
        let t = clamp_time(t, self.params.total_time)?;
        Ok(match self.kind {
            ScheduleKind::Exact => {
                let s = s_exact_unchecked(t, &self.params);
                self.params.epsilon * gap(s, self.params.dim).powi(2)
            }
            ScheduleKind::Piecewise(_) => {
                let j = self.segment(t);
                let (t0, s0) = self.knots[j];
                let (t1, s1) = self.knots[j + 1];
                (s1 - s0) / (t1 - t0)
            }
        })
    }

    /// Segment index whose half-open interval `[t_j, t_j+1)` contains `t`; the
    /// final knot belongs to the last segment.
    fn segment(&self, t: f64) -> usize {
        let segments = self.knots.len() - 1;
        let idx = self.knots.partition_point(|&(tk, _)| tk <= t);
        idx.saturating_sub(1).min(segments - 1)
    }

    /// Samples `(t, s)` at `points` equally spaced times.
    pub fn sample(&self, points: usize) -> Vec<(f64, f64)> {
        let total = self.params.total_time;
        let last = points.max(2) - 1;
        (0..=last)
            .map(|i| {
                let t = if i == last { total } else { total * i as f64 / last as f64 };
                (t, self.s_at(t))
            })
            .collect()
    }

    /// Writes the schedule as a `t,s` CSV. Piecewise schedules are written as
    /// their knots, which fully determine them.
    pub fn write_csv<W: Write>(&self, mut out: W, points: usize) -> std::io::Result<()> {
        writeln!(out, "t,s")?;
        let rows = match self.kind {
            ScheduleKind::Exact => self.sample(points),
            ScheduleKind::Piecewise(_) => self.knots.clone(),
        };
        for (t, s) in rows {
            writeln!(out, "{t},{s}")?;
        }
        Ok(())
    }
}

impl Anneal for Schedule {
    fn total_time(&self) -> f64 {
        self.params.total_time
    }

    fn s_at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Exact => s_exact_unchecked(t, &self.params),
            ScheduleKind::Piecewise(_) => {
                let j = self.segment(t);
                let (t0, s0) = self.knots[j];
                let (t1, s1) = self.knots[j + 1];
                if t == t1 {
                    return s1;
                }
                s0 + (s1 - s0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            ScheduleKind::Exact => Vec::new(),
            ScheduleKind::Piecewise(_) => self.knots[1..self.knots.len() - 1].iter().map(|k| k.0).collect(),
        }
    }

    fn integral_s(&self, t: f64) -> f64 {
        let total = self.params.total_time;
        match self.kind {
            ScheduleKind::Exact => {
                if t <= 0.0 {
                    return 0.0;
                }
                if t >= total {
                    // s(T - t) = 1 - s(t)
                    return 0.5 * total;
                }
                // s = 1/2 + tan(u) / (2 r) with u linear in t, and the
                // integral of tan is -ln cos
                let n = self.params.dim as f64;
                let root = (n - 1.0).sqrt();
                let angle = root.atan();
                let u = (2.0 * t / total - 1.0) * angle;
                0.5 * t - total / (4.0 * angle * root) * (n.sqrt() * u.cos()).ln()
            }
            ScheduleKind::Piecewise(_) => {
                let j = self.segment(t);
                let full: f64 = self.knots[..=j].windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
                let (t0, s0) = self.knots[j];
                full + 0.5 * (s0 + self.s_at(t)) * (t - t0)
            }
        }
    }

    fn label(&self) -> String {
        self.kind.to_string()
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.params.epsilon)
    }
}

/// Piecewise-linear schedule with `pieces` segments whose knots lie on the
/// exact schedule at `t_j = j T / pieces`.
pub fn piecewise_schedule(pieces: usize, params: ScheduleParams) -> Result<Schedule> {
    if pieces == 0 {
        return Err(Error::InvalidInstance("piecewise schedule needs at least one segment".into()));
    }
    let total = params.total_time;
    let knots = (0..=pieces)
        .map(|j| {
            let t = if j == pieces { total } else { total * j as f64 / pieces as f64 };
            (t, s_exact_unchecked(t, &params))
        })
        .collect();
    Ok(Schedule { kind: ScheduleKind::Piecewise(pieces), params, knots })
}
