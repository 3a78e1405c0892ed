//! Infinite planar lattice: lattice-summed Green tensor, cooperative shift
//! and width tensors, and the effective polarizability.
//!
//! The lattice sum `ḡ(k∥) = Σ_{A≠0} G(0, r_A) e^{-i k∥·r_A}` converges only
//! conditionally, so it is truncated to the box `|i|, |j| ≤ M` and reported
//! together with the change from the box of half the size.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::geometry::{build_single_species_rectangle, AtomArray};
use crate::greens::{kernel, separation};
use crate::units::WAVENUMBER;
use crate::{Point, ZERO};

pub const DEFAULT_TRUNCATION: usize = 1000;

/// Smallest accepted `M`: 2M+1 ≥ 50 sites per axis.
pub const MIN_TRUNCATION: usize = 25;

/// Exponential damping `e^{-ηR}` over `levels` halvings of `eta`, combined by
/// Richardson extrapolation to `η → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Damping {
    pub eta: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSpec {
    pub a_x: f64,
    pub a_y: f64,
    /// Maximum site index `M` per axis: `(2M+1)²` sites.
    pub truncation: usize,
    /// Also sum the `M/2` box and report the difference.
    pub convergence_check: bool,
    pub damping: Option<Damping>,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { a_x: 0.27, a_y: 0.54, truncation: DEFAULT_TRUNCATION, convergence_check: true, damping: None }
    }
}

impl LatticeSpec {
    pub fn rectangular(a_x: f64, a_y: f64) -> Self {
        Self { a_x, a_y, ..Self::default() }
    }

    pub fn square(a: f64) -> Self {
        Self::rectangular(a, a)
    }

    pub fn with_truncation(self, truncation: usize) -> Self {
        Self { truncation, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("a_x", self.a_x)?;
        ensure_positive("a_y", self.a_y)?;
        if self.truncation < MIN_TRUNCATION {
            return Err(Error::param(
                "truncation",
                format!("need at least {MIN_TRUNCATION} (2M+1 ≥ 50 sites per axis), got {}", self.truncation),
            ));
        }
        if let Some(d) = self.damping {
            ensure_positive("damping.eta", d.eta)?;
            if d.levels < 2 {
                return Err(Error::param("damping.levels", "Richardson extrapolation needs at least 2 levels"));
            }
        }
        Ok(())
    }

    /// Unit-cell area `a_x a_y`.
    pub fn cell_area(&self) -> f64 {
        self.a_x * self.a_y
    }
}

/// Symmetric planar tensor: `xz` and `yz` vanish identically for a lattice in
/// the plane `z = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Planar {
    xx: Complex64,
    xy: Complex64,
    yy: Complex64,
    zz: Complex64,
}

impl std::ops::Add for Planar {
    type Output = Planar;
    fn add(self, o: Planar) -> Planar {
        Planar { xx: self.xx + o.xx, xy: self.xy + o.xy, yy: self.yy + o.yy, zz: self.zz + o.zz }
    }
}

impl Planar {
    fn accumulate(&mut self, d: [f64; 3], k: f64, weight: Complex64) {
        let (diag, dyad) = kernel(d, k);
        let (diag, dyad) = (diag * weight, dyad * weight);
        self.xx += diag + dyad * (d[0] * d[0]);
        self.xy += dyad * (d[0] * d[1]);
        self.yy += diag + dyad * (d[1] * d[1]);
        self.zz += diag;
    }

    fn tensor(&self) -> [[Complex64; 3]; 3] {
        [[self.xx, self.xy, ZERO], [self.xy, self.yy, ZERO], [ZERO, ZERO, self.zz]]
    }
}

/// Pairwise reduction in fixed order, independent of thread scheduling.
fn tree_sum(mut parts: Vec<Planar>) -> Planar {
    if parts.is_empty() {
        return Planar::default();
    }
    while parts.len() > 1 {
        parts = parts.chunks(2).map(|c| if c.len() == 2 { c[0] + c[1] } else { c[0] }).collect();
    }
    parts[0]
}

/// Row-by-row sum of `G(origin, r)` over site rows, with the rows reduced by
/// [`tree_sum`]. Shared by the lattice and finite-array paths.
fn sum_rows(origin: &Point, rows: &[Vec<Point>], k: f64, k_par: [f64; 2], eta: f64) -> Planar {
    let parts: Vec<Planar> = rows
        .par_iter()
        .map(|row| {
            let mut acc = Planar::default();
            for r in row {
                let d = separation(origin, r);
                let rr = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if rr == 0.0 {
                    continue;
                }
                let phase = -(k_par[0] * r[0] + k_par[1] * r[1]);
                let weight = Complex64::from_polar((-eta * rr).exp(), phase);
                acc.accumulate(d, k, weight);
            }
            acc
        })
        .collect();
    tree_sum(parts)
}

/// Box sums for `M` and `M/2` in one pass over the rows.
fn box_sums(spec: &LatticeSpec, k_par: [f64; 2], eta: f64, half: bool) -> (Planar, Option<Planar>) {
    let m = spec.truncation as i64;
    let h = m / 2;
    let k = WAVENUMBER;
    let parts: Vec<(Planar, Planar)> = (-m..=m)
        .into_par_iter()
        .map(|j| {
            let y = j as f64 * spec.a_y;
            let mut full = Planar::default();
            let mut inner = Planar::default();
            for i in -m..=m {
                if i == 0 && j == 0 {
                    continue;
                }
                let x = i as f64 * spec.a_x;
                let d = [-x, -y, 0.0];
                let rr = (x * x + y * y).sqrt();
                let weight = Complex64::from_polar((-eta * rr).exp(), -(k_par[0] * x + k_par[1] * y));
                let mut term = Planar::default();
                term.accumulate(d, k, weight);
                full = full + term;
                if half && i.abs() <= h && j.abs() <= h {
                    inner = inner + term;
                }
            }
            (full, inner)
        })
        .collect();
    let (full, inner): (Vec<Planar>, Vec<Planar>) = parts.into_iter().unzip();
    (tree_sum(full), half.then(|| tree_sum(inner)))
}

fn max_entry_diff(a: &Planar, b: &Planar) -> f64 {
    [(a.xx - b.xx), (a.xy - b.xy), (a.yy - b.yy), (a.zz - b.zz)].iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Truncated lattice sum with its convergence estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSum {
    pub tensor: [[Complex64; 3]; 3],
    pub truncation: usize,
    /// Largest entry change between the `M` and `M/2` boxes (λ⁻¹), or between
    /// the last two Richardson levels when damping is on.
    pub error_estimate: Option<f64>,
}

fn check_k_par(spec: &LatticeSpec, k_par: [f64; 2]) -> Result<()> {
    ensure_finite("k_par", k_par[0])?;
    ensure_finite("k_par", k_par[1])?;
    if k_par[0].abs() > PI / spec.a_x + 1e-12 || k_par[1].abs() > PI / spec.a_y + 1e-12 {
        return Err(Error::param("k_par", "must lie in the first Brillouin zone"));
    }
    Ok(())
}

pub fn lattice_green_sum(spec: &LatticeSpec, k_par: [f64; 2]) -> Result<LatticeSum> {
    spec.validate()?;
    check_k_par(spec, k_par)?;
    let (sum, estimate) = match spec.damping {
        None => {
            let (full, inner) = box_sums(spec, k_par, 0.0, spec.convergence_check);
            let estimate = inner.map(|i| max_entry_diff(&full, &i));
            (full, estimate)
        }
        Some(d) => {
            let levels: Vec<Planar> =
                (0..d.levels).map(|l| box_sums(spec, k_par, d.eta / 2f64.powi(l as i32), false).0).collect();
            let scale = |p: &Planar, s: f64| Planar { xx: p.xx * s, xy: p.xy * s, yy: p.yy * s, zz: p.zz * s };
            // Neville table for error linear, quadratic, ... in η.
            let mut table = levels;
            let mut previous = table[table.len() - 1];
            for order in 1..table.len() {
                let f = 2f64.powi(order as i32);
                let next: Vec<Planar> =
                    table.windows(2).map(|w| scale(&(scale(&w[1], f) + scale(&w[0], -1.0)), 1.0 / (f - 1.0))).collect();
                previous = table[table.len() - 1];
                table = next;
            }
            let best = table[0];
            (best, Some(max_entry_diff(&best, &previous)))
        }
    };
    if let Some(e) = estimate {
        log::debug!("lattice sum M = {}: truncation change {e:e}", spec.truncation);
    }
    Ok(LatticeSum { tensor: sum.tensor(), truncation: spec.truncation, error_estimate: estimate })
}

/// Same sum taken over a finite centred rectangle of `(2M+1)²` atoms, seen
/// from its central atom (k∥ = 0).
pub fn finite_array_green_sum(spec: &LatticeSpec) -> Result<[[Complex64; 3]; 3]> {
    spec.validate()?;
    let n = 2 * spec.truncation + 1;
    let array = build_single_species_rectangle(n, n, spec.a_x, spec.a_y, crate::coupling::Species::A)?;
    Ok(central_sum(&array, n).tensor())
}

fn central_sum(array: &AtomArray, n: usize) -> Planar {
    let positions = array.positions();
    let centre = positions[(n / 2) * n + n / 2];
    let rows: Vec<Vec<Point>> = positions.chunks(n).map(|r| r.to_vec()).collect();
    sum_rows(&centre, &rows, WAVENUMBER, [0.0, 0.0], 0.0)
}

/// Cooperative shift `Δ` and width `Γ` in the units of the supplied linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperativeTensors {
    pub k_par: [f64; 2],
    pub delta: [[f64; 3]; 3],
    pub gamma: [[f64; 3]; 3],
    pub truncation: usize,
    /// Truncation estimate propagated to Δ and Γ.
    pub error_estimate: Option<f64>,
}

impl CooperativeTensors {
    fn from_sum(sum: &LatticeSum, k_par: [f64; 2], linewidth: f64) -> Self {
        let mut delta = [[0.0; 3]; 3];
        let mut gamma = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                delta[i][j] = -1.5 * linewidth * sum.tensor[i][j].re;
                gamma[i][j] = 3.0 * linewidth * sum.tensor[i][j].im;
            }
        }
        Self {
            k_par,
            delta,
            gamma,
            truncation: sum.truncation,
            error_estimate: sum.error_estimate.map(|e| 3.0 * linewidth * e),
        }
    }
}

/// `Δ - iΓ/2 = -(3/2) γ λ ḡ(k∥)`.
pub fn cooperative_tensors(spec: &LatticeSpec, k_par: [f64; 2], linewidth: f64) -> Result<CooperativeTensors> {
    ensure_positive("linewidth", linewidth)?;
    let sum = lattice_green_sum(spec, k_par)?;
    Ok(CooperativeTensors::from_sum(&sum, k_par, linewidth))
}

fn det3(m: &[[Complex64; 3]; 3]) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &[[Complex64; 3]; 3]) -> Option<[[Complex64; 3]; 3]> {
    let det = det3(m);
    let scale = m.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    if det.norm() <= 1e-14 * scale.powi(3) || !det.is_finite() {
        return None;
    }
    let mut inv = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(inv)
}

/// `α_e = -(3/4π²)(γ/2) [δ_A - Δ + i(γ + Γ)/2]⁻¹` in natural units.
/// Fails when the bracket is singular (cooperative resonance with zero width).
pub fn effective_polarizability(
    tensors: &CooperativeTensors,
    detuning: f64,
    linewidth: f64,
) -> Result<[[Complex64; 3]; 3]> {
    ensure_finite("detuning", detuning)?;
    ensure_positive("linewidth", linewidth)?;
    let mut bracket = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            bracket[i][j] = Complex64::new(
                detuning * id - tensors.delta[i][j],
                0.5 * (linewidth * id + tensors.gamma[i][j]),
            );
        }
    }
    let inv = inverse3(&bracket).ok_or_else(|| Error::Singular { condition: f64::INFINITY, residual: f64::NAN })?;
    let pre = -3.0 / (4.0 * PI * PI) * (linewidth / 2.0);
    Ok(inv.map(|row| row.map(|c| c * pre)))
}

/// Bisection for `f(a) = target` on `[lo, hi]`. Stops when
/// `|f - target| < value_tol` or the interval is below `interval_tol`.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    target: f64,
    bracket: [f64; 2],
    value_tol: f64,
    interval_tol: f64,
) -> Result<f64> {
    let [mut lo, mut hi] = bracket;
    let f_lo = f(lo)? - target;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let f_hi = f(hi)? - target;
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::NoBracket { lo, hi, f_lo: f_lo + target, f_hi: f_hi + target });
    }
    let mut s_lo = f_lo.signum();
    loop {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)? - target;
        if v.abs() < value_tol || hi - lo < interval_tol {
            return Ok(mid);
        }
        if v.signum() == s_lo {
            lo = mid;
            s_lo = v.signum();
        } else {
            hi = mid;
        }
    }
}

/// Lattice constant `a` where `Δ_{ij}` of the family `(a, aspect·a)` equals
/// `target` (γ-units), to 1e-3γ or 1e-4λ.
pub fn crossing_finder(
    aspect: f64,
    component: (usize, usize),
    target: f64,
    bracket: [f64; 2],
    truncation: usize,
) -> Result<f64> {
    ensure_positive("aspect", aspect)?;
    if component.0 > 2 || component.1 > 2 {
        return Err(Error::param("component", "indices must be 0, 1 or 2"));
    }
    let f = |a: f64| {
        let spec = LatticeSpec { convergence_check: false, ..LatticeSpec::rectangular(a, aspect * a) }
            .with_truncation(truncation);
        Ok(cooperative_tensors(&spec, [0.0, 0.0], 1.0)?.delta[component.0][component.1])
    };
    bisect(f, target, bracket, 1e-3, 1e-4)
}

pub const TENSOR_SCAN_COLUMNS: [&str; 9] =
    ["a", "delta_xx", "delta_yy", "delta_zz", "gamma_xx", "gamma_yy", "gamma_zz", "truncation", "error_estimate"];

/// Δ and Γ at k∥ = 0 for each lattice constant of the family `(a, aspect·a)`.
pub fn tensor_scan(aspect: f64, a_values: &[f64], truncation: usize) -> Result<Vec<(f64, CooperativeTensors)>> {
    a_values
        .iter()
        .map(|&a| {
            let spec = LatticeSpec::rectangular(a, aspect * a).with_truncation(truncation);
            Ok((a, cooperative_tensors(&spec, [0.0, 0.0], 1.0)?))
        })
        .collect()
}

pub fn write_tensor_scan<W: Write>(rows: &[(f64, CooperativeTensors)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TENSOR_SCAN_COLUMNS)?;
    for (a, t) in rows {
        w.write_record([
            a.to_string(),
            t.delta[0][0].to_string(),
            t.delta[1][1].to_string(),
            t.delta[2][2].to_string(),
            t.gamma[0][0].to_string(),
            t.gamma[1][1].to_string(),
            t.gamma[2][2].to_string(),
            t.truncation.to_string(),
            t.error_estimate.map(|e| e.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::coupling_from_detuning;

    fn quick(a_x: f64, a_y: f64, m: usize) -> LatticeSpec {
        LatticeSpec::rectangular(a_x, a_y).with_truncation(m)
    }

    #[test]
    fn square_lattice_is_degenerate() {
        let sum = lattice_green_sum(&quick(0.3, 0.3, 200), [0.0, 0.0]).unwrap();
        let g = sum.tensor;
        assert!((g[0][0] - g[1][1]).norm() <= 1e-12 * g[0][0].norm());
        assert!(g[0][1].norm() < 1e-12);
        assert_eq!(g[0][2], ZERO);
        let t = cooperative_tensors(&quick(0.3, 0.3, 200), [0.0, 0.0], 1.0).unwrap();
        assert!((t.delta[0][0] - t.delta[1][1]).abs() < 1e-10);
        assert!((t.gamma[0][0] - t.gamma[1][1]).abs() < 1e-10);
    }

    #[test]
    fn rectangular_lattice_is_anisotropic() {
        let t = cooperative_tensors(&quick(0.27, 0.54, 200), [0.0, 0.0], 1.0).unwrap();
        assert!((t.delta[0][0] - t.delta[1][1]).abs() > 0.1);
        assert!(t.delta[0][1].abs() < 1e-10);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.delta[i][j], t.delta[j][i]);
                assert_eq!(t.gamma[i][j], t.gamma[j][i]);
            }
        }
    }

    #[test]
    fn subdiffractive_width_matches_cell_area() {
        // Below the diffraction threshold only the zeroth order radiates:
        // γ + Γ_in-plane = 3λ²γ/(4π A₀).
        for (ax, ay) in [(0.3, 0.6), (0.4, 0.4), (0.2, 0.45)] {
            let spec = LatticeSpec {
                damping: Some(Damping { eta: 0.2, levels: 3 }),
                ..quick(ax, ay, 1500)
            };
            let t = cooperative_tensors(&spec, [0.0, 0.0], 1.0).unwrap();
            let expect = 3.0 / (4.0 * PI * ax * ay);
            for c in 0..2 {
                let got = 1.0 + t.gamma[c][c];
                assert!((got / expect - 1.0).abs() < 0.02, "({ax}, {ay}) component {c}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn width_positive_below_wavelength() {
        for a in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let t = cooperative_tensors(&quick(a, 2.0 * a, 300), [0.0, 0.0], 1.0).unwrap();
            assert!(1.0 + t.gamma[0][0] > 0.0 && 1.0 + t.gamma[1][1] > 0.0, "a = {a}");
        }
    }

    #[test]
    fn finite_array_path_agrees() {
        let spec = quick(0.27, 0.54, 40);
        let lattice = lattice_green_sum(&spec, [0.0, 0.0]).unwrap().tensor;
        let finite = finite_array_green_sum(&spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((lattice[i][j] - finite[i][j]).norm() <= 1e-14 * lattice[0][0].norm().max(1.0));
            }
        }
    }

    #[test]
    fn convergence_estimate_reported() {
        let sum = lattice_green_sum(&quick(0.27, 0.54, 100), [0.0, 0.0]).unwrap();
        assert!(sum.error_estimate.unwrap() > 0.0);
        let spec = LatticeSpec { convergence_check: false, ..quick(0.27, 0.54, 100) };
        assert!(lattice_green_sum(&spec, [0.0, 0.0]).unwrap().error_estimate.is_none());
    }

    #[test]
    fn finite_k_par_breaks_mirror_sum() {
        let spec = quick(0.3, 0.3, 100);
        let at_zero = lattice_green_sum(&spec, [0.0, 0.0]).unwrap().tensor;
        let shifted = lattice_green_sum(&spec, [1.0, 0.0]).unwrap().tensor;
        assert!((at_zero[0][0] - shifted[0][0]).norm() > 1e-3);
        assert!(lattice_green_sum(&spec, [20.0, 0.0]).is_err());
    }

    #[test]
    fn validation() {
        assert!(quick(0.3, 0.3, 10).validate().is_err());
        assert!(quick(-0.3, 0.3, 100).validate().is_err());
        assert!(LatticeSpec { damping: Some(Damping { eta: 0.1, levels: 1 }), ..LatticeSpec::default() }
            .validate()
            .is_err());
    }

    #[test]
    fn bare_polarizability_without_cooperative_terms() {
        let t = CooperativeTensors {
            k_par: [0.0; 2],
            delta: [[0.0; 3]; 3],
            gamma: [[0.0; 3]; 3],
            truncation: 0,
            error_estimate: None,
        };
        for d in [-2.0, 0.0, 0.7] {
            let alpha = effective_polarizability(&t, d, 1.0).unwrap();
            let expect = coupling_from_detuning(d, 1.0).unwrap().polarizability();
            for i in 0..3 {
                assert!((alpha[i][i] - expect).norm() < 1e-15);
                assert_eq!(alpha[i][(i + 1) % 3], ZERO);
            }
        }
    }

    #[test]
    fn resonance_peaks_where_detuning_meets_shift() {
        let t = cooperative_tensors(&quick(0.27, 0.54, 200), [0.0, 0.0], 1.0).unwrap();
        let at = |d: f64| effective_polarizability(&t, d, 1.0).unwrap()[1][1].norm();
        let peak = at(t.delta[1][1]);
        for off in [-0.3, -0.05, 0.05, 0.3] {
            assert!(at(t.delta[1][1] + off) < peak);
        }
    }

    #[test]
    fn singular_bracket_flagged() {
        let mut gamma = [[0.0; 3]; 3];
        gamma[0][0] = -1.0;
        let t = CooperativeTensors { k_par: [0.0; 2], delta: [[0.0; 3]; 3], gamma, truncation: 0, error_estimate: None };
        assert!(matches!(effective_polarizability(&t, 0.0, 1.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn bisection_cases() {
        let root = bisect(|x| Ok(x * x * x), 0.125, [0.0, 1.0], 1e-12, 1e-14).unwrap();
        assert!((root - 0.5).abs() < 1e-9);
        assert_eq!(bisect(|x| Ok(2.0 * x), 0.4, [0.2, 0.9], 1e-9, 1e-9).unwrap(), 0.2);
        assert!(matches!(bisect(|x| Ok(x), 5.0, [0.0, 1.0], 1e-9, 1e-9), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn inverse_is_inverse() {
        let m = [
            [Complex64::new(1.0, 0.2), Complex64::new(0.3, 0.0), ZERO],
            [Complex64::new(0.3, 0.0), Complex64::new(-0.5, 1.0), Complex64::new(0.1, -0.1)],
            [ZERO, Complex64::new(0.1, -0.1), Complex64::new(2.0, 0.0)],
        ];
        let inv = inverse3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let p: Complex64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((p - id).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn scan_csv_columns() {
        let rows = tensor_scan(2.0, &[0.3, 0.4], 50).unwrap();
        let mut buf = Vec::new();
        write_tensor_scan(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a,delta_xx,delta_yy,delta_zz,gamma_xx,gamma_yy,gamma_zz,truncation,error_estimate\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
