//! Total field (incident plus every scattered dipole field) off the atoms.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::IncidentField;
use crate::error::{ensure_finite, Error, Result};
use crate::geometry::AtomArray;
use crate::greens::{kernel_apply, separation};
use crate::observables::stokes;
use crate::solver::DipoleSolution;
use crate::{CVec3, Point, ZERO};

/// Minimum distance between an evaluation point and any atom.
pub const FIELD_EXCLUSION: f64 = 1e-6;

/// `E(r) = E_inc(r) + Σₙ gₙ G(r, rₙ) E(rₙ)`, summed over all atoms.
pub struct TotalField<'a> {
    positions: &'a [Point],
    sources: Vec<CVec3>,
    incident: &'a dyn IncidentField,
    k: f64,
}

impl<'a> TotalField<'a> {
    pub fn new(solution: &DipoleSolution, array: &'a AtomArray, incident: &'a dyn IncidentField) -> Result<Self> {
        if solution.len() != array.len() {
            return Err(Error::DimensionMismatch { expected: array.len(), actual: solution.len() });
        }
        Ok(Self { positions: array.positions(), sources: solution.sources(), incident, k: solution.wavenumber })
    }

    /// Scattered part only. Rejects points within [`FIELD_EXCLUSION`] of an atom.
    pub fn scattered(&self, r: &Point) -> Result<CVec3> {
        let mut acc = [ZERO; 3];
        for (rn, s) in self.positions.iter().zip(&self.sources) {
            let d = separation(r, rn);
            let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if !(dist >= FIELD_EXCLUSION) {
                return Err(Error::CoincidentPoints { separation: dist, floor: FIELD_EXCLUSION });
            }
            let f = kernel_apply(d, self.k, s);
            acc[0] += f[0];
            acc[1] += f[1];
            acc[2] += f[2];
        }
        Ok(acc)
    }

    pub fn evaluate(&self, r: &Point) -> Result<CVec3> {
        let s = self.scattered(r)?;
        let e = self.incident.field_at(r);
        Ok([e[0] + s[0], e[1] + s[1], e[2] + s[2]])
    }
}

/// Unchecked evaluation; a point on an atom yields NaN components.
impl IncidentField for TotalField<'_> {
    fn field_at(&self, r: &Point) -> CVec3 {
        self.evaluate(r).unwrap_or([Complex64::new(f64::NAN, f64::NAN); 3])
    }
}

pub fn total_field(
    solution: &DipoleSolution,
    array: &AtomArray,
    incident: &dyn IncidentField,
    r: &Point,
) -> Result<CVec3> {
    TotalField::new(solution, array, incident)?.evaluate(r)
}

/// Uniform sample grid in the plane `z`. A range with one sample sits at
/// its lower end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneSpec {
    pub z: f64,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Default for PlaneSpec {
    fn default() -> Self {
        Self { z: 14.0, x_range: [-10.0, 10.0], y_range: [-10.0, 10.0], nx: 201, ny: 201 }
    }
}

fn axis(range: [f64; 2], n: usize, i: usize) -> f64 {
    if n == 1 {
        range[0]
    } else {
        range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
    }
}

impl PlaneSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("plane.z", self.z)?;
        for v in self.x_range.iter().chain(&self.y_range) {
            ensure_finite("plane range", *v)?;
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::param("plane samples", "need at least one sample per axis"));
        }
        if self.x_range[1] < self.x_range[0] || self.y_range[1] < self.y_range[0] {
            return Err(Error::param("plane range", "upper bound below lower bound"));
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        axis(self.x_range, self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        axis(self.y_range, self.ny, j)
    }
}

/// Field samples stored row-major: `values[j * nx + i]` is at `(x(i), y(j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub plane: PlaneSpec,
    pub values: Vec<CVec3>,
    /// Reference amplitude `|E₀|` for the normalized intensity.
    pub normalization: f64,
}

/// JSON header written next to a grid CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridHeader {
    pub plane_z: f64,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub normalization: f64,
    pub intensity: String,
    pub columns: Vec<String>,
}

const GRID_COLUMNS: [&str; 9] = ["x", "y", "re_ex", "im_ex", "re_ey", "im_ey", "re_ez", "im_ez", "I"];
const STOKES_COLUMNS: [&str; 6] = ["S0", "S1", "S2", "S3", "psi", "chi"];

impl FieldGrid {
    pub fn get(&self, i: usize, j: usize) -> CVec3 {
        self.values[j * self.plane.nx + i]
    }

    /// `(|E_x|² + |E_y|²)/|E₀|²`.
    pub fn intensity(&self, i: usize, j: usize) -> f64 {
        let e = self.get(i, j);
        (e[0].norm_sqr() + e[1].norm_sqr()) / (self.normalization * self.normalization)
    }

    /// `|E_z|²/|E₀|²`.
    pub fn longitudinal_intensity(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)[2].norm_sqr() / (self.normalization * self.normalization)
    }

    pub fn columns(with_stokes: bool) -> Vec<String> {
        let mut cols: Vec<String> = GRID_COLUMNS.iter().map(|s| s.to_string()).collect();
        if with_stokes {
            cols.extend(STOKES_COLUMNS.iter().map(|s| s.to_string()));
        }
        cols
    }

    pub fn header(&self, with_stokes: bool) -> GridHeader {
        GridHeader {
            plane_z: self.plane.z,
            x_range: self.plane.x_range,
            y_range: self.plane.y_range,
            nx: self.plane.nx,
            ny: self.plane.ny,
            normalization: self.normalization,
            intensity: "(|Ex|^2 + |Ey|^2) / normalization^2".into(),
            columns: Self::columns(with_stokes),
        }
    }

    /// Rows ordered by y then x. Undefined ellipse angles are left empty.
    pub fn write_csv<W: Write>(&self, writer: W, with_stokes: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::columns(with_stokes))?;
        for j in 0..self.plane.ny {
            for i in 0..self.plane.nx {
                let e = self.get(i, j);
                let mut row = vec![self.plane.x(i).to_string(), self.plane.y(j).to_string()];
                for c in e {
                    row.push(c.re.to_string());
                    row.push(c.im.to_string());
                }
                row.push(self.intensity(i, j).to_string());
                if with_stokes {
                    let s = stokes(e[0], e[1]);
                    row.extend([s.s0, s.s1, s.s2, s.s3].map(|v| v.to_string()));
                    match s.ellipse {
                        Some(el) => row.extend([el.psi.to_string(), el.chi.to_string()]),
                        None => row.extend([String::new(), String::new()]),
                    }
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_header<W: Write>(&self, writer: W, with_stokes: bool) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.header(with_stokes))?;
        Ok(())
    }
}

pub fn field_grid(
    solution: &DipoleSolution,
    array: &AtomArray,
    incident: &dyn IncidentField,
    plane: &PlaneSpec,
) -> Result<FieldGrid> {
    plane.validate()?;
    let total = TotalField::new(solution, array, incident)?;
    let values = (0..plane.nx * plane.ny)
        .into_par_iter()
        .map(|idx| total.evaluate(&[plane.x(idx % plane.nx), plane.y(idx / plane.nx), plane.z]))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldGrid { plane: *plane, values, normalization: 1.0 })
}
