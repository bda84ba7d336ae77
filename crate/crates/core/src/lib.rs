//! Simulator for adiabatic unstructured search and its failure modes:
//! discretized schedules, misspecified Hamiltonians, static random noise and
//! thermal excitation.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod noise;
pub mod problem;
pub mod quadrature;
pub mod schedule;
pub mod spectrum;
pub mod stats;
pub mod thermal;

pub use error::{Error, Result};
