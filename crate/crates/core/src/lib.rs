//! Quenched-disorder spin and gauge models for surface-code thresholds.
//!
//! The crate maps code-capacity, phenomenological and circuit-level noise on
//! the toric code to random-bond Ising, random eight-vertex, random plaquette
//! gauge and random coupled-plaquette gauge models, samples them with
//! parallel tempering, and locates their transitions from Polyakov-line
//! statistics.

pub mod analysis;
pub mod circuit;
mod codec;
pub mod config;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod lattice;
pub mod model;
pub mod noise;
pub mod numeric;
pub mod observables;
pub mod ptmc;
pub mod rng;

pub use error::{Error, Result};
pub use hamiltonian::{EnergyCache, Geometry, Hamiltonian};
pub use lattice::{Direction, Init, LatticeState, SpinId, Sublattice};
pub use model::{ModelKind, Orientation, TermKind};
pub use noise::{CouplingSet, DisorderConfig, NoiseRates};
