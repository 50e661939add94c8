//! Pseudo-spectral simulation and verification toolkit for the stochastic
//! two-dimensional Boussinesq system on the torus `[−π, π]²`.
//!
//! The state is the pair `(ω, θ)` of vorticity and temperature stored as real
//! cos/sin coefficients on the half lattice. Noise acts on a few temperature
//! modes only; the crate provides the forward flow, its linearization and
//! adjoint, the Malliavin matrix with cone-restricted spectral probes, the
//! Lie-bracket calculus that spreads the noise to every mode, and ergodic
//! diagnostics.

pub mod brackets;
pub mod dynamics;
pub mod ergodics;
pub mod error;
pub mod exec;
pub mod io;
pub mod malliavin;
pub mod modes;
pub mod params;
pub mod spectral;
pub mod state;
pub mod stats;
pub mod variational;

pub use error::{Error, Result};
pub use exec::Exec;
pub use modes::{BasisElement, Kind, ModeIndex};
pub use params::{Forcing, PhysParams};
pub use state::{Band, SpectralState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
