//! Species parameters and the complex coupling strength of a near-resonant
//! two-level (J = 0 → J = 1) atom.
//!
//! The near-resonant polarizability `α = -(3/4π²) ε₀λ³ (γ/2)/(δ + iγ/2)`
//! only ever enters the coupled-dipole equations multiplied by
//! `C = 4π²/(ε₀λ²)`, so the two are fused into one dimensionless number
//!
//! ```text
//! g = C·α/λ = -3 (γ/2) / (δ + iγ/2)
//! ```
//!
//! with which `E(r) = E_inc(r) + Σₙ gₙ G(r, rₙ) E(rₙ)` and `G` in units of 1/λ.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Smallest |δ|/γ for which [`coupling_asymptotics`] is documented as valid.
pub const ASYMPTOTIC_VALIDITY: f64 = 10.0;

/// Atomic species label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    A,
    B,
}

impl Species {
    pub fn other(self) -> Self {
        match self {
            Species::A => Species::B,
            Species::B => Species::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Species::A => "A",
            Species::B => "B",
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Species {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" => Ok(Species::A),
            "B" => Ok(Species::B),
            other => Err(Error::Parse(format!("unknown species `{other}`, expected A or B"))),
        }
    }
}

/// Detuning and linewidth of one species, both in units of γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    pub species: Species,
    pub detuning: f64,
    pub linewidth: f64,
}

impl SpeciesParams {
    pub fn new(species: Species, detuning: f64, linewidth: f64) -> Result<Self> {
        ensure_finite("detuning", detuning)?;
        ensure_positive("linewidth", linewidth)?;
        Ok(Self { species, detuning, linewidth })
    }

    pub fn coupling(&self) -> Result<Coupling> {
        coupling_from_detuning(self.detuning, self.linewidth)
    }
}

/// Dimensionless complex coupling `g` of an atom to the dyadic Green's function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling(pub Complex64);

impl Coupling {
    pub const TRANSPARENT: Coupling = Coupling(Complex64::new(0.0, 0.0));

    pub fn value(self) -> Complex64 {
        self.0
    }

    /// Polarizability `α = g λ ε₀λ² / 4π²` in natural units (`ε₀λ³ = 1`).
    pub fn polarizability(self) -> Complex64 {
        self.0 / (4.0 * PI * PI)
    }
}

/// `g = -3 (γ/2)/(δ + iγ/2)` for detuning `δ` and linewidth `γ`.
pub fn coupling_from_detuning(detuning: f64, linewidth: f64) -> Result<Coupling> {
    ensure_finite("detuning", detuning)?;
    ensure_positive("linewidth", linewidth)?;
    let half = 0.5 * linewidth;
    Ok(Coupling(-3.0 * half / Complex64::new(detuning, half)))
}

/// Leading-order far-detuned form of the coupling, `(Re g, Im g)`:
///
/// ```text
/// Re g ≈ -3 (γ/2)/δ,    Im g ≈ 3 ((γ/2)/δ)²
/// ```
///
/// The relative error is `(γ/2δ)²`, so the approximation is meant for
/// `|δ| ≥ ASYMPTOTIC_VALIDITY·γ`; the caller is responsible for staying in it.
pub fn coupling_asymptotics(detuning: f64, linewidth: f64) -> Result<(f64, f64)> {
    ensure_finite("detuning", detuning)?;
    ensure_positive("linewidth", linewidth)?;
    if detuning == 0.0 {
        return Err(Error::param("detuning", "asymptotic form is singular at zero detuning"));
    }
    let ratio = 0.5 * linewidth / detuning;
    Ok((-3.0 * ratio, 3.0 * ratio * ratio))
}
