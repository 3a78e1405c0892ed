//! Natural units and the SI bridge used when reporting.
//!
//! Internally lengths are measured in wavelengths and rates in linewidths, so
//! `k = 2π`, `γ = 1` and `ε₀ = 1`. SI only appears through [`UnitSystem`]
//! and the linewidth formula for an electric-dipole transition.

use std::f64::consts::PI;

use crate::error::{ensure_positive, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Bohr radius (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

/// Wavelength in natural units.
pub const WAVELENGTH: f64 = 1.0;
/// Wavenumber `2π/λ` in natural units.
pub const WAVENUMBER: f64 = 2.0 * PI;

/// Unit convention marker with optional SI scales for reporting.
///
/// With no scales set, conversions are the identity and the system is purely
/// natural (`λ = γ = ε₀ = E₀ = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnitSystem {
    wavelength_m: Option<f64>,
    linewidth_hz: Option<f64>,
}

impl UnitSystem {
    pub fn natural() -> Self {
        Self::default()
    }

    pub fn with_si(wavelength_m: f64, linewidth_hz: f64) -> Result<Self> {
        Ok(Self {
            wavelength_m: Some(ensure_positive("wavelength_m", wavelength_m)?),
            linewidth_hz: Some(ensure_positive("linewidth_hz", linewidth_hz)?),
        })
    }

    pub fn wavelength_m(&self) -> Option<f64> {
        self.wavelength_m
    }

    pub fn linewidth_hz(&self) -> Option<f64> {
        self.linewidth_hz
    }

    pub fn wavenumber(&self) -> f64 {
        WAVENUMBER
    }

    /// Length in λ to metres (identity when no SI scale is set).
    pub fn length_to_si(&self, length: f64) -> f64 {
        length * self.wavelength_m.unwrap_or(1.0)
    }

    pub fn length_from_si(&self, metres: f64) -> f64 {
        metres / self.wavelength_m.unwrap_or(1.0)
    }

    /// Rate in γ to Hz (identity when no SI scale is set).
    pub fn rate_to_si(&self, rate: f64) -> f64 {
        rate * self.linewidth_hz.unwrap_or(1.0)
    }

    pub fn rate_from_si(&self, hz: f64) -> f64 {
        hz / self.linewidth_hz.unwrap_or(1.0)
    }
}

/// Spontaneous decay rate `γ = d²ω³ / (3π ε₀ ħ c³)` of an electric-dipole
/// transition with matrix element `d` (C·m) and angular frequency `ω`.
///
/// The value is reported in Hz, which is how transition linewidths are
/// compared with frequency splittings in the experimental proposal.
pub fn linewidth_from_dipole_si(dipole: f64, omega: f64) -> Result<f64> {
    ensure_positive("dipole", dipole)?;
    ensure_positive("omega", omega)?;
    Ok(dipole * dipole * omega.powi(3) / linewidth_denominator())
}

/// Inverse of [`linewidth_from_dipole_si`].
pub fn dipole_from_linewidth_si(linewidth: f64, omega: f64) -> Result<f64> {
    ensure_positive("linewidth", linewidth)?;
    ensure_positive("omega", omega)?;
    Ok((linewidth * linewidth_denominator() / omega.powi(3)).sqrt())
}

fn linewidth_denominator() -> f64 {
    3.0 * PI * VACUUM_PERMITTIVITY * HBAR * SPEED_OF_LIGHT.powi(3)
}

/// A frequency splitting expressed in units of a linewidth.
pub fn splitting_in_linewidths(f_a_hz: f64, f_b_hz: f64, linewidth_hz: f64) -> Result<f64> {
    ensure_positive("linewidth_hz", linewidth_hz)?;
    Ok((f_b_hz - f_a_hz).abs() / linewidth_hz)
}
