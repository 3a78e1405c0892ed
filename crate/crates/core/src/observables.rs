//! Lens-collected power, transmission coefficients and Stokes parameters.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::IncidentField;
use crate::error::{ensure_positive, Error, Result};
use crate::fields::{TotalField, FIELD_EXCLUSION};
use crate::geometry::AtomArray;
use crate::solver::DipoleSolution;
use crate::Complex64;

/// Below this a transmission counts as a zero in tabulated output.
pub const ZERO_TRANSMISSION: f64 = 1e-3;

/// Circular collection lens in the plane `z = z`, centred on the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensConfig {
    pub z: f64,
    pub radius: f64,
    /// Gauss-Legendre nodes in the radius.
    pub n_r: usize,
    /// Uniform midpoint samples in the angle.
    pub n_theta: usize,
}

impl Default for LensConfig {
    fn default() -> Self {
        Self { z: 150.0, radius: 90.0, n_r: 200, n_theta: 256 }
    }
}

impl LensConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("lens.z", self.z)?;
        ensure_positive("lens.radius", self.radius)?;
        if self.n_r < 8 || self.n_theta < 8 {
            return Err(Error::param("lens quadrature", "needs at least 8 points in each direction"));
        }
        Ok(())
    }

    /// Aperture quoted as the tangent `R_L/z_L`, not the sine.
    pub fn numerical_aperture(&self) -> f64 {
        self.radius / self.z
    }

    /// Same lens with both quadrature sizes doubled.
    pub fn refined(&self) -> Self {
        Self { n_r: 2 * self.n_r, n_theta: 2 * self.n_theta, ..*self }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Power through the lens, split by transverse component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensPower {
    pub total: f64,
    pub x: f64,
    pub y: f64,
}

/// `P_μ = ½ ∫ |E_μ|² dA` over the lens disk under the plane-wave flux relation.
pub fn lens_power(field: &dyn IncidentField, lens: &LensConfig) -> Result<LensPower> {
    lens.validate()?;
    let (t, w) = gauss_legendre(lens.n_r);
    let half = 0.5 * lens.radius;
    let d_theta = 2.0 * PI / lens.n_theta as f64;
    let rings: Vec<(f64, f64)> = t
        .par_iter()
        .zip(&w)
        .map(|(ti, wi)| {
            let r = half * (1.0 + ti);
            let weight = wi * half * r * d_theta;
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in 0..lens.n_theta {
                let theta = (j as f64 + 0.5) * d_theta;
                let e = field.field_at(&[r * theta.cos(), r * theta.sin(), lens.z]);
                sx += e[0].norm_sqr();
                sy += e[1].norm_sqr();
            }
            (0.5 * weight * sx, 0.5 * weight * sy)
        })
        .collect();
    let x: f64 = rings.iter().map(|r| r.0).sum();
    let y: f64 = rings.iter().map(|r| r.1).sum();
    Ok(LensPower { total: x + y, x, y })
}

fn ratio(p: f64, p_inc: f64) -> f64 {
    if p_inc > 0.0 {
        p / p_inc
    } else {
        f64::NAN
    }
}

/// Transmission through the lens. A coefficient whose incident power
/// vanishes (e.g. `T_y` for an x-polarized beam) is NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionResult {
    pub p: f64,
    pub p_inc: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_inc_x: f64,
    pub p_inc_y: f64,
    pub t: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub lens: LensConfig,
    pub numerical_aperture: f64,
}

impl TransmissionResult {
    pub fn from_powers(p: LensPower, p_inc: LensPower, lens: LensConfig) -> Self {
        Self {
            p: p.total,
            p_inc: p_inc.total,
            p_x: p.x,
            p_y: p.y,
            p_inc_x: p_inc.x,
            p_inc_y: p_inc.y,
            t: ratio(p.total, p_inc.total),
            t_x: ratio(p.x, p_inc.x),
            t_y: ratio(p.y, p_inc.y),
            lens,
            numerical_aperture: lens.numerical_aperture(),
        }
    }
}

/// Lens transmission of the solved array, normalized by the same beam
/// with no atoms present.
pub fn transmission(
    solution: &DipoleSolution,
    array: &AtomArray,
    beam: &dyn IncidentField,
    lens: &LensConfig,
) -> Result<TransmissionResult> {
    lens.validate()?;
    if let Some(r) = array.positions().iter().find(|r| (r[2] - lens.z).abs() < FIELD_EXCLUSION) {
        return Err(Error::Geometry(format!("atom at z = {} lies in the lens plane", r[2])));
    }
    let total = TotalField::new(solution, array, beam)?;
    let p = lens_power(&total, lens)?;
    let p_inc = lens_power(beam, lens)?;
    Ok(TransmissionResult::from_powers(p, p_inc, *lens))
}

/// Polarization ellipse: orientation `psi` and ellipticity angle `chi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub psi: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesState {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    /// `None` when the intensity vanishes.
    pub ellipse: Option<Ellipse>,
}

impl StokesState {
    pub fn ellipse(&self) -> Result<Ellipse> {
        self.ellipse.ok_or(Error::ZeroIntensity)
    }

    pub fn degree_of_polarization(&self) -> Result<f64> {
        if self.s0 > 0.0 {
            Ok((self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt() / self.s0)
        } else {
            Err(Error::ZeroIntensity)
        }
    }
}

pub fn stokes(ex: Complex64, ey: Complex64) -> StokesState {
    let (ix, iy) = (ex.norm_sqr(), ey.norm_sqr());
    let cross = ex.conj() * ey;
    let (s0, s1, s2, s3) = (ix + iy, ix - iy, 2.0 * cross.re, 2.0 * cross.im);
    let ellipse = (s0 > 0.0).then(|| Ellipse { psi: 0.5 * s2.atan2(s1), chi: 0.5 * (s3 / s0).clamp(-1.0, 1.0).asin() });
    StokesState { s0, s1, s2, s3, ellipse }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{diagonal_polarization, GaussianBeam, NoField};
    use crate::ZERO;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for n in [1, 2, 5, 8, 200] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            // Exact for degree 2n-1.
            let deg = 2 * n - 1;
            let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((integral - exact).abs() < 1e-12, "n = {n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_has_no_power() {
        let p = lens_power(&NoField, &LensConfig::default()).unwrap();
        assert_eq!((p.total, p.x, p.y), (0.0, 0.0, 0.0));
    }

    #[test]
    fn uniform_field_fills_disk() {
        let lens = LensConfig::default();
        let uniform = |_: &crate::Point| [c(1.0, 0.0), ZERO, ZERO];
        let p = lens_power(&uniform, &lens).unwrap();
        let expect = 0.5 * PI * 90.0 * 90.0;
        assert!((p.total - expect).abs() < 1e-10 * expect);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.total, p.x + p.y);
    }

    #[test]
    fn gaussian_power_converges_under_refinement() {
        let waist = 0.3 * 676f64.sqrt() * 0.4;
        let beam = GaussianBeam::new(waist, diagonal_polarization()).unwrap();
        let lens = LensConfig::default();
        let p = lens_power(&beam, &lens).unwrap();
        let fine = lens_power(&beam, &lens.refined()).unwrap();
        assert!(((p.total - fine.total) / fine.total).abs() < 1e-6);
        // The lens catches almost all of the paraxial beam: πw₀²/4 for |E₀| = 1.
        let full = PI * waist * waist / 4.0;
        assert!((p.total / full - 1.0).abs() < 0.05);
        assert!(((p.x - p.y) / p.total).abs() < 1e-12);
    }

    #[test]
    fn lens_validation() {
        assert!(LensConfig { n_r: 4, ..LensConfig::default() }.validate().is_err());
        assert!(LensConfig { z: -1.0, ..LensConfig::default() }.validate().is_err());
        assert!(LensConfig { radius: 0.0, ..LensConfig::default() }.validate().is_err());
        assert!((LensConfig::default().numerical_aperture() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn empty_array_transmits_everything() {
        let beam = GaussianBeam::new(3.0, diagonal_polarization()).unwrap();
        let array = AtomArray::empty();
        let sol = DipoleSolution::empty(2.0 * PI);
        let t = transmission(&sol, &array, &beam, &LensConfig::default()).unwrap();
        assert_eq!((t.t, t.t_x, t.t_y), (1.0, 1.0, 1.0));
        let json = serde_json::to_value(t).unwrap();
        assert_eq!(json["lens"]["n_r"], 200);
        assert!(json["numerical_aperture"].as_f64().is_some());
    }

    #[test]
    fn undefined_component_ratio_is_nan() {
        let beam = GaussianBeam::new(3.0, [c(1.0, 0.0), ZERO, ZERO]).unwrap();
        let t = transmission(&DipoleSolution::empty(2.0 * PI), &AtomArray::empty(), &beam, &LensConfig::default())
            .unwrap();
        assert_eq!(t.t_x, 1.0);
        assert!(t.t_y.is_nan());
    }

    #[test]
    fn stokes_examples() {
        let s = stokes(c(1.0, 0.0), ZERO);
        assert_eq!((s.s0, s.s1, s.s2, s.s3), (1.0, 1.0, 0.0, 0.0));
        assert_eq!(s.ellipse().unwrap().psi, 0.0);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = stokes(c(h, 0.0), c(0.0, h));
        assert!((s.s0 - 1.0).abs() < 1e-15 && s.s1.abs() < 1e-15 && s.s2.abs() < 1e-15);
        assert!((s.s3 - 1.0).abs() < 1e-15);
        assert!((s.ellipse().unwrap().chi - PI / 4.0).abs() < 1e-7);

        let s = stokes(c(h, 0.0), c(h, 0.0));
        assert!((s.s2 - 1.0).abs() < 1e-15 && s.s1.abs() < 1e-15 && s.s3.abs() < 1e-15);
        assert!((s.ellipse().unwrap().psi - PI / 4.0).abs() < 1e-15);

        let s = stokes(ZERO, ZERO);
        assert!(s.ellipse.is_none());
        assert!(matches!(s.ellipse(), Err(Error::ZeroIntensity)));
    }

    proptest! {
        #[test]
        fn coherent_fields_are_fully_polarized(a in -5.0f64..5.0, b in -5.0f64..5.0, cc in -5.0f64..5.0, d in -5.0f64..5.0) {
            let s = stokes(c(a, b), c(cc, d));
            let excess = s.s0 * s.s0 - (s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3);
            prop_assert!(excess.abs() <= 1e-12 * s.s0 * s.s0 + 1e-300);
            prop_assert!(s.s0 >= (s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3).sqrt() - 1e-12);
            if let Some(e) = s.ellipse {
                prop_assert!(e.psi.abs() <= PI / 2.0 + 1e-15 && e.chi.abs() <= PI / 4.0 + 1e-15);
            }
        }
    }
}
