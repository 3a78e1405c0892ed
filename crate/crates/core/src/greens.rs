//! Free-space dyadic Green's function
//!
//! ```text
//! G(r, r') = [I + ∇∇/k²] e^{ikR}/(4πR),   R = r - r'
//! ```
//!
//! in closed form,
//! `G_νμ = e^{ikR}/(4πR) [(1 + (ikR-1)/(kR)²) δ_νμ + (-1 + (3-3ikR)/(kR)²) R_νR_μ/R²]`.
//! The closed form is evaluated directly for every separation above
//! [`COINCIDENT_FLOOR`]; there is no near-field series switch.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CVec3, Point, ZERO};

/// Separations below this (in λ) are treated as the same point.
pub const COINCIDENT_FLOOR: f64 = 1e-9;

/// 3×3 complex Green tensor, entries in units of 1/λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenTensor(pub [[Complex64; 3]; 3]);

impl GreenTensor {
    pub const ZERO: GreenTensor = GreenTensor([[ZERO; 3]; 3]);

    pub fn get(&self, nu: usize, mu: usize) -> Complex64 {
        self.0[nu][mu]
    }

    pub fn transpose(&self) -> GreenTensor {
        let mut out = *self;
        for nu in 0..3 {
            for mu in 0..3 {
                out.0[nu][mu] = self.0[mu][nu];
            }
        }
        out
    }

    pub fn apply(&self, v: &CVec3) -> CVec3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl std::ops::Sub for GreenTensor {
    type Output = GreenTensor;

    fn sub(mut self, rhs: GreenTensor) -> GreenTensor {
        for nu in 0..3 {
            for mu in 0..3 {
                self.0[nu][mu] -= rhs.0[nu][mu];
            }
        }
        self
    }
}

impl Mul<Complex64> for GreenTensor {
    type Output = GreenTensor;

    fn mul(mut self, rhs: Complex64) -> GreenTensor {
        self.0.iter_mut().flatten().for_each(|c| *c *= rhs);
        self
    }
}

/// The two scalar factors of the Green tensor for separation `d`:
/// `G = diag·I + dyad·d dᵀ`, where `dyad` already carries the 1/R².
///
/// No coincidence check; callers guarantee `|d| > 0`.
#[inline]
pub(crate) fn kernel(d: [f64; 3], k: f64) -> (Complex64, Complex64) {
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let r = r2.sqrt();
    let kr = k * r;
    let inv_kr2 = 1.0 / (kr * kr);
    let (s, c) = kr.sin_cos();
    let prefactor = Complex64::new(c, s) / (4.0 * PI * r);
    let diag = Complex64::new(1.0 - inv_kr2, inv_kr2 * kr);
    let dyad = Complex64::new(-1.0 + 3.0 * inv_kr2, -3.0 * inv_kr2 * kr);
    (prefactor * diag, prefactor * dyad / r2)
}

/// `G(r_from + d, r_from) v` for a separation `d` already known to be nonzero.
#[inline]
pub(crate) fn kernel_apply(d: [f64; 3], k: f64, v: &CVec3) -> CVec3 {
    let (diag, dyad) = kernel(d, k);
    let proj = dyad * (v[0] * d[0] + v[1] * d[1] + v[2] * d[2]);
    [diag * v[0] + proj * d[0], diag * v[1] + proj * d[1], diag * v[2] + proj * d[2]]
}

#[inline]
pub(crate) fn separation(r: &Point, rp: &Point) -> [f64; 3] {
    [r[0] - rp[0], r[1] - rp[1], r[2] - rp[2]]
}

fn checked_separation(r: &Point, rp: &Point) -> Result<[f64; 3]> {
    let d = separation(r, rp);
    let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !dist.is_finite() || dist < COINCIDENT_FLOOR {
        return Err(Error::CoincidentPoints { separation: dist, floor: COINCIDENT_FLOOR });
    }
    Ok(d)
}

pub(crate) fn tensor_from_kernel(d: [f64; 3], k: f64) -> GreenTensor {
    let (diag, dyad) = kernel(d, k);
    let mut g = GreenTensor::ZERO;
    for nu in 0..3 {
        for mu in nu..3 {
            let mut v = dyad * (d[nu] * d[mu]);
            if nu == mu {
                v += diag;
            }
            g.0[nu][mu] = v;
            g.0[mu][nu] = v;
        }
    }
    g
}

/// Green tensor connecting a dipole at `rp` to the field at `r`.
pub fn green_tensor(r: &Point, rp: &Point, k: f64) -> Result<GreenTensor> {
    let d = checked_separation(r, rp)?;
    Ok(tensor_from_kernel(d, k))
}

/// `green_tensor(r, rp, k) · v` without forming the matrix.
pub fn green_apply(r: &Point, rp: &Point, k: f64, v: &CVec3) -> Result<CVec3> {
    let d = checked_separation(r, rp)?;
    Ok(kernel_apply(d, k, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::WAVENUMBER as K;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_green(d: [f64; 3]) -> Complex64 {
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        Complex64::new(0.0, K * r).exp() / (4.0 * PI * r)
    }

    /// `[I + ∇∇/k²] g` with second-order central differences of step `h`.
    fn finite_difference_tensor(d: [f64; 3], h: f64) -> GreenTensor {
        let at = |shift: [f64; 3]| scalar_green([d[0] + shift[0], d[1] + shift[1], d[2] + shift[2]]);
        let unit = |i: usize, s: f64| {
            let mut v = [0.0; 3];
            v[i] = s;
            v
        };
        let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let g0 = at([0.0; 3]);
        let mut out = GreenTensor::ZERO;
        for nu in 0..3 {
            for mu in 0..3 {
                let second = if nu == mu {
                    (at(unit(nu, h)) - 2.0 * g0 + at(unit(nu, -h))) / (h * h)
                } else {
                    (at(add(unit(nu, h), unit(mu, h))) - at(add(unit(nu, h), unit(mu, -h)))
                        - at(add(unit(nu, -h), unit(mu, h)))
                        + at(add(unit(nu, -h), unit(mu, -h))))
                        / (4.0 * h * h)
                };
                let delta = if nu == mu { g0 } else { ZERO };
                out.0[nu][mu] = delta + second / (K * K);
            }
        }
        out
    }

    #[test]
    fn axial_separation_values() {
        let g = green_tensor(&[0.0, 0.0, 1.0], &[0.0; 3], K).unwrap();
        // Frozen from the finite-difference oracle below.
        assert!((g.get(0, 0) - c(0.077562, 0.012665)).norm() < 1e-6);
        let zz = c(1.0, -2.0 * PI) / (8.0 * PI.powi(3));
        assert!((g.get(2, 2) - zz).norm() < 1e-15);
        assert!((g.get(2, 2) - c(0.0040314, -0.025330)).norm() < 1e-6);
        assert_eq!(g.get(0, 1), ZERO);
        assert_eq!(g.get(0, 2), ZERO);
        assert_eq!(g.get(1, 2), ZERO);

        let fd = finite_difference_tensor([0.0, 0.0, 1.0], 1e-4);
        assert!((fd - g).frobenius_norm() / g.frobenius_norm() < 1e-6);
    }

    #[test]
    fn matches_finite_difference_oracle() {
        let dirs: [[f64; 3]; 4] = [[1.0, 0.0, 0.0], [0.3, -0.8, 0.52], [0.6, 0.6, -0.529], [-0.2, 0.1, 0.97]];
        for kr in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
            for dir in dirs {
                let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
                let r = kr / K;
                let d = [dir[0] * r / n, dir[1] * r / n, dir[2] * r / n];
                let g = tensor_from_kernel(d, K);
                let fd = finite_difference_tensor(d, 1e-4 * r);
                let err = (fd - g).frobenius_norm() / g.frobenius_norm();
                assert!(err < 1e-6, "kR = {kr}: {err}");
            }
        }
    }

    #[test]
    fn apply_special_cases() {
        let zero = green_apply(&[0.3, 0.1, 0.7], &[0.0; 3], K, &[ZERO; 3]).unwrap();
        assert_eq!(zero, [ZERO; 3]);
        let one = Complex64::new(1.0, 0.0);
        let v = green_apply(&[0.0, 0.0, 1.0], &[0.0; 3], K, &[one, ZERO, ZERO]).unwrap();
        let g = green_tensor(&[0.0, 0.0, 1.0], &[0.0; 3], K).unwrap();
        assert!((v[0] - g.get(0, 0)).norm() < 1e-16);
        assert_eq!(v[1], ZERO);
        assert_eq!(v[2], ZERO);
    }

    #[test]
    fn rejects_coincident_points() {
        let p = [0.1, 0.2, 0.3];
        assert!(matches!(green_tensor(&p, &p, K), Err(Error::CoincidentPoints { .. })));
        let q = [0.1 + 5e-10, 0.2, 0.3];
        assert!(green_apply(&p, &q, K, &[ZERO; 3]).is_err());
    }

    #[test]
    fn stable_near_the_floor() {
        // Static dipole limit: G → (3 R̂R̂ - I)/(4π k² R³).
        for r in [2e-9, 1e-7, 1e-5] {
            let g = green_tensor(&[r, 0.0, 0.0], &[0.0; 3], K).unwrap();
            let stat = 1.0 / (4.0 * PI * K * K * r.powi(3));
            assert!(g.0.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite()));
            assert!((g.get(0, 0).re / (2.0 * stat) - 1.0).abs() < 1e-6);
            assert!((g.get(1, 1).re / (-stat) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn far_field_is_transverse() {
        // The radial response falls off as 2/(kR) relative to the transverse one.
        let dir = [0.6, 0.0, 0.8];
        let one = Complex64::new(1.0, 0.0);
        let mut previous = f64::INFINITY;
        for kr in [1e2, 1e3, 1e4] {
            let r = kr / K;
            let g = tensor_from_kernel([r * dir[0], r * dir[1], r * dir[2]], K);
            let w = g.apply(&[one * dir[0], one * dir[1], one * dir[2]]);
            let longitudinal = w[0] * dir[0] + w[1] * dir[1] + w[2] * dir[2];
            let ratio = longitudinal.norm() / g.get(1, 1).norm();
            assert!((ratio * kr / 2.0 - 1.0).abs() < 1e-3, "kR = {kr}: {ratio}");
            assert!(ratio < previous);
            previous = ratio;
        }
    }

    fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
        let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
        let rx = [[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]];
        let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] = (0..3).map(|l| p[i][l] * q[l][j]).sum();
                }
            }
            out
        };
        mul(rz, mul(ry, rx))
    }

    fn rotate(q: &[[f64; 3]; 3], p: Point) -> Point {
        [
            q[0][0] * p[0] + q[0][1] * p[1] + q[0][2] * p[2],
            q[1][0] * p[0] + q[1][1] * p[1] + q[1][2] * p[2],
            q[2][0] * p[0] + q[2][1] * p[1] + q[2][2] * p[2],
        ]
    }

    proptest! {
        #[test]
        fn reciprocity(r in prop::array::uniform3(-3.0f64..3.0), rp in prop::array::uniform3(-3.0f64..3.0)) {
            prop_assume!(separation(&r, &rp).iter().map(|x| x * x).sum::<f64>() > 1e-6);
            let g = green_tensor(&r, &rp, K).unwrap();
            let h = green_tensor(&rp, &r, K).unwrap();
            prop_assert_eq!(g, h.transpose());
            prop_assert_eq!(g, g.transpose());
        }

        #[test]
        fn apply_matches_tensor(r in prop::array::uniform3(-3.0f64..3.0),
                                v in prop::array::uniform6(-1.0f64..1.0)) {
            let rp = [0.05, -0.1, 0.02];
            prop_assume!(separation(&r, &rp).iter().map(|x| x * x).sum::<f64>() > 1e-6);
            let vec = [c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5])];
            let direct = green_apply(&r, &rp, K, &vec).unwrap();
            let via = green_tensor(&r, &rp, K).unwrap().apply(&vec);
            let scale = crate::cvec_norm(&via).max(1e-300);
            let diff = [direct[0] - via[0], direct[1] - via[1], direct[2] - via[2]];
            prop_assert!(crate::cvec_norm(&diff) / scale < 1e-14);
        }

        #[test]
        fn rotation_equivariance(angles in prop::array::uniform3(0.0f64..6.28),
                                 r in prop::array::uniform3(-2.0f64..2.0)) {
            prop_assume!(r.iter().map(|x| x * x).sum::<f64>() > 1e-2);
            let q = rotation(angles[0], angles[1], angles[2]);
            let rp = [0.0; 3];
            let g = green_tensor(&r, &rp, K).unwrap();
            let gq = green_tensor(&rotate(&q, r), &rotate(&q, rp), K).unwrap();
            let mut expect = GreenTensor::ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = ZERO;
                    for l in 0..3 {
                        for m in 0..3 {
                            acc += g.0[l][m] * (q[i][l] * q[j][m]);
                        }
                    }
                    expect.0[i][j] = acc;
                }
            }
            prop_assert!((gq - expect).frobenius_norm() / g.frobenius_norm() < 1e-12);
        }
    }
}
