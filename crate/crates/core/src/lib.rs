//! Coupled-dipole simulation of the cooperative optical response of finite
//! dual-species atom arrays, plus lattice sums for the infinite-array limit.
//!
//! Everything inside the crate works in natural units: wavelength `λ = 1`
//! (so `k = 2π`), linewidth `γ = 1`, `ε₀ = 1` and unit incident peak
//! amplitude. [`units::UnitSystem`] converts to SI at reporting boundaries.
//!
//! The pipeline for a finite array is
//!
//! 1. build an [`geometry::AtomArray`] and per-atom [`coupling::Coupling`]s,
//! 2. pick an incident field from [`beam`],
//! 3. solve the self-consistent local fields with [`solver::CoupledSystem`],
//! 4. evaluate total fields ([`fields`]) or lens-integrated transmission
//!    ([`observables`]).
//!
//! [`sweep`] drives parameter scans over these steps and [`infinite`] handles
//! the infinite rectangular lattice.

pub mod beam;
pub mod coupling;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod greens;
pub mod infinite;
pub mod observables;
pub mod solver;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A point in space, in units of the wavelength.
pub type Point = [f64; 3];

/// A complex Cartesian 3-vector (field or polarization).
pub type CVec3 = [Complex64; 3];

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub(crate) fn cvec_norm(v: &CVec3) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}
