//! Dyson Brownian motion at the spectral edge: samplers, integrators,
//! coupling experiments and the statistics used to test edge limit laws.

pub mod airy;
pub mod comparison;
pub mod coupling;
pub mod cutoff;
pub mod dbm;
pub mod error;
pub mod gbe;
pub mod quadrature;
pub mod semicircle;
pub mod stats;
pub mod tridiag;

mod integrate;

pub use coupling::noise::NoiseSource;
pub use dbm::{ParticleState, RegularizationConfig, Trajectory};
pub use error::{Error, Result};
pub use gbe::GbeSample;
pub use semicircle::SemicircleModel;
