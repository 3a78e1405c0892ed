//! Incident fields: a paraxial Gaussian beam and a plane wave, both
//! propagating along +z, with transverse polarization.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::units::WAVENUMBER;
use crate::{cvec_norm, CVec3, Point, ZERO};

/// Anything that can supply the incident field at a point.
pub trait IncidentField: Sync {
    fn field_at(&self, r: &Point) -> CVec3;
}

impl<F> IncidentField for F
where
    F: Fn(&Point) -> CVec3 + Sync,
{
    fn field_at(&self, r: &Point) -> CVec3 {
        self(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Right,
    Left,
}

/// Polarization `(e_x + e_y)/√2`.
pub fn diagonal_polarization() -> CVec3 {
    [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0), ZERO]
}

/// Circular polarization. Convention: right-handed is `(e_x + i e_y)/√2`,
/// which has Stokes `S3 = +1`; left-handed is `(e_x - i e_y)/√2`.
pub fn circular_polarization(handedness: Handedness) -> CVec3 {
    let s = match handedness {
        Handedness::Right => 1.0,
        Handedness::Left => -1.0,
    };
    [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, s * FRAC_1_SQRT_2), ZERO]
}

/// Linear polarization at `angle` (radians) from the x axis.
pub fn linear_polarization(angle: f64) -> CVec3 {
    let (s, c) = angle.sin_cos();
    [Complex64::new(c, 0.0), Complex64::new(s, 0.0), ZERO]
}

fn check_polarization(p: &CVec3) -> Result<()> {
    if p.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::param("polarization", "non-finite component"));
    }
    if p[2] != ZERO {
        return Err(Error::param("polarization", "must be transverse (zero z component)"));
    }
    let n = cvec_norm(p);
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::param("polarization", format!("must have unit norm, got {n}")));
    }
    Ok(())
}

/// Paraxial Gaussian beam focused at the origin.
///
/// `E = E₀ (w₀/w) e^{ikz} e^{-iφ} e^{-ρ²/w²} e^{ikρ²/2R} e_d`, where the
/// curvature enters through `1/R(z) = z/(z² + z_R²)` so the waist plane needs
/// no special case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    waist: f64,
    amplitude: f64,
    polarization: CVec3,
}

impl GaussianBeam {
    pub fn new(waist: f64, polarization: CVec3) -> Result<Self> {
        Self::with_amplitude(waist, 1.0, polarization)
    }

    pub fn with_amplitude(waist: f64, amplitude: f64, polarization: CVec3) -> Result<Self> {
        ensure_positive("waist", waist)?;
        ensure_finite("amplitude", amplitude)?;
        check_polarization(&polarization)?;
        Ok(Self { waist, amplitude, polarization })
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn polarization(&self) -> CVec3 {
        self.polarization
    }

    /// `z_R = π w₀²/λ`.
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist * self.waist
    }

    pub fn radius_at(&self, z: f64) -> f64 {
        let zr = self.rayleigh_range();
        self.waist * (1.0 + (z / zr).powi(2)).sqrt()
    }

    /// Complex scalar envelope multiplying the polarization vector.
    pub fn scalar_at(&self, r: &Point) -> Complex64 {
        let [x, y, z] = *r;
        let zr = self.rayleigh_range();
        let w2 = self.waist * self.waist * (1.0 + (z / zr).powi(2));
        let rho2 = x * x + y * y;
        let inv_curvature = z / (z * z + zr * zr);
        let gouy = (z / zr).atan();
        let phase = WAVENUMBER * z - gouy + WAVENUMBER * rho2 * inv_curvature / 2.0;
        let magnitude = self.amplitude * (self.waist * self.waist / w2).sqrt() * (-rho2 / w2).exp();
        Complex64::from_polar(magnitude, phase)
    }

    pub fn field(&self, r: &Point) -> CVec3 {
        let s = self.scalar_at(r);
        self.polarization.map(|p| p * s)
    }
}

impl IncidentField for GaussianBeam {
    fn field_at(&self, r: &Point) -> CVec3 {
        self.field(r)
    }
}

/// Plane wave `E₀ e^{ikz} e_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    amplitude: f64,
    polarization: CVec3,
}

impl PlaneWave {
    pub fn new(amplitude: f64, polarization: CVec3) -> Result<Self> {
        ensure_finite("amplitude", amplitude)?;
        check_polarization(&polarization)?;
        Ok(Self { amplitude, polarization })
    }
}

impl IncidentField for PlaneWave {
    fn field_at(&self, r: &Point) -> CVec3 {
        let s = Complex64::from_polar(self.amplitude, WAVENUMBER * r[2]);
        self.polarization.map(|p| p * s)
    }
}

/// Either beam, for configuration-driven code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beam {
    Gaussian(GaussianBeam),
    Plane(PlaneWave),
}

impl IncidentField for Beam {
    fn field_at(&self, r: &Point) -> CVec3 {
        match self {
            Beam::Gaussian(b) => b.field_at(r),
            Beam::Plane(b) => b.field_at(r),
        }
    }
}

/// Empty incident field, useful for isolating scattered contributions.
pub struct NoField;

impl IncidentField for NoField {
    fn field_at(&self, _r: &Point) -> CVec3 {
        [ZERO; 3]
    }
}
