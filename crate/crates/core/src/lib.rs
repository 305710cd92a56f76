//! One-dimensional wave mechanics under a shared split-step spectral engine.
//!
//! The crate propagates the linear Schrödinger equation, the nonlinear
//! classical Schrödinger equation (the quantum potential subtracted from the
//! Hamiltonian) and the interpolation between them, and integrates Bohmian,
//! classical-wave and Newtonian trajectory ensembles for the same scenario.

pub mod analysis;
pub mod distribution;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod scenario;
pub mod simulation;
pub mod trajectories;

pub use error::{Error, Result};
pub use grid::{Grid, Spectral, WaveField};
pub use scenario::{preset, EngineKind, ScenarioConfig, PRESET_NAMES};
pub use simulation::{simulate, SimulationOptions, SimulationRun};
