//! Molecular dynamics and normal-mode analysis for planar ion crystals in a
//! Penning trap with a rotating-wall potential.
//!
//! The crate is `no_std` compatible (it needs `alloc`). Enable the default
//! `std` feature for hardware float intrinsics, or `libm` on bare targets.
//!
//! Internally every computation runs in the dimensionless [`UnitSystem`]:
//! lengths in `l0`, times in `1/omega_z`, masses in the ion mass. Public
//! entry points take and return SI quantities.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("drumhead-core needs either the `std` or the `libm` feature");

extern crate alloc;

mod math;

pub mod coulomb;
pub mod equilibrium;
pub mod error;
pub mod forces;
pub mod frame;
pub mod hessian;
pub mod integrator;
pub mod laser;
pub mod linear;
mod minimize;
pub mod modes;
pub mod params;
pub mod run;
pub mod state;

pub use equilibrium::{
    critical_wall_frequency, find_equilibrium, EquilibriumConfig, EquilibriumOptions,
};
pub use error::{Error, Result};
pub use forces::{CoulombMode, ForceField};
pub use laser::{nist_beam_set, BeamProfile, CoolingConfig, LaserBeam};
pub use linear::LinearizedCoulomb;
pub use modes::{Branch, BranchTemperatures, ModeDecomposition};
pub use params::{
    beta_from_wall, default_nist_params, SpeciesParams, TrapParams, UnitSystem,
};
pub use run::{run, DiagnosticsSeries, InitialState, RunConfig, RunOutput};
pub use state::CrystalState;
