//! Parameter scans: transmission curves over lattice constant or detuning,
//! transmission-zero search, zero loci and their power-law fit.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{circular_polarization, diagonal_polarization, linear_polarization, GaussianBeam, Handedness};
use crate::coupling::{Species, SpeciesParams};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::geometry::{
    build_pixel_superarray, build_single_species_rectangle, build_stripe_array_with, species_couplings, AtomArray,
    PixelLayout, StripeOrientation,
};
use crate::observables::{transmission, LensConfig, TransmissionResult, ZERO_TRANSMISSION};
use crate::solver::{CoupledSystem, SolverPolicy};
use crate::units::WAVENUMBER;
use crate::CVec3;

/// Default `c_w` in the waist rule `w₀ = c_w √N a`.
pub const DEFAULT_WAIST_FACTOR: f64 = 0.3;

/// Coarse-scan spacing required before zero refinement.
pub const MAX_COARSE_STEP: f64 = 0.01;

/// Array builders, parameterized by the lattice constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayTemplate {
    Stripe {
        nx: usize,
        ny: usize,
        #[serde(default = "default_orientation")]
        orientation: StripeOrientation,
        #[serde(default)]
        swap: bool,
    },
    /// Single species with spacings `(a, aspect·a)`.
    Rectangle {
        nx: usize,
        ny: usize,
        #[serde(default = "default_aspect")]
        aspect: f64,
        #[serde(default = "default_species")]
        species: Species,
    },
    Pixels {
        layout: PixelLayout,
    },
}

fn default_orientation() -> StripeOrientation {
    StripeOrientation::X
}

fn default_aspect() -> f64 {
    1.0
}

fn default_species() -> Species {
    Species::A
}

impl ArrayTemplate {
    pub fn build(&self, a: f64) -> Result<AtomArray> {
        match self {
            ArrayTemplate::Stripe { nx, ny, orientation, swap } => build_stripe_array_with(*nx, *ny, a, *orientation, *swap),
            ArrayTemplate::Rectangle { nx, ny, aspect, species } => {
                build_single_species_rectangle(*nx, *ny, a, aspect * a, *species)
            }
            ArrayTemplate::Pixels { layout } => build_pixel_superarray(layout, a),
        }
    }
}

/// Named transverse polarizations. `{"linear": θ}` is linear at angle θ
/// (radians) from x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    #[default]
    Diagonal,
    X,
    Y,
    Right,
    Left,
    Linear(f64),
}

impl Polarization {
    pub fn vector(self) -> CVec3 {
        match self {
            Polarization::Diagonal => diagonal_polarization(),
            Polarization::X => linear_polarization(0.0),
            Polarization::Y => linear_polarization(std::f64::consts::FRAC_PI_2),
            Polarization::Right => circular_polarization(Handedness::Right),
            Polarization::Left => circular_polarization(Handedness::Left),
            Polarization::Linear(theta) => linear_polarization(theta),
        }
    }
}

/// Gaussian drive; the waist follows the array unless fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamTemplate {
    pub waist_factor: f64,
    /// Fixed waist overriding the rule.
    pub waist: Option<f64>,
    pub polarization: Polarization,
}

impl Default for BeamTemplate {
    fn default() -> Self {
        Self { waist_factor: DEFAULT_WAIST_FACTOR, waist: None, polarization: Polarization::Diagonal }
    }
}

impl BeamTemplate {
    pub fn waist_for(&self, n_atoms: usize, a: f64) -> f64 {
        self.waist.unwrap_or(self.waist_factor * (n_atoms as f64).sqrt() * a)
    }

    pub fn build(&self, n_atoms: usize, a: f64) -> Result<GaussianBeam> {
        GaussianBeam::new(self.waist_for(n_atoms, a), self.polarization.vector())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetuningRule {
    Fixed { delta_a: f64, delta_b: f64 },
    /// `δ_A = -δ_B = δ`.
    Symmetric { delta: f64 },
}

impl DetuningRule {
    pub fn detunings(&self) -> (f64, f64) {
        match *self {
            DetuningRule::Fixed { delta_a, delta_b } => (delta_a, delta_b),
            DetuningRule::Symmetric { delta } => (delta, -delta),
        }
    }

    /// Same rule with its primary detuning (`δ_A`, or `δ`) replaced.
    pub fn with_primary(&self, value: f64) -> Self {
        match *self {
            DetuningRule::Fixed { delta_b, .. } => DetuningRule::Fixed { delta_a: value, delta_b },
            DetuningRule::Symmetric { .. } => DetuningRule::Symmetric { delta: value },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisVariable {
    #[serde(alias = "a")]
    LatticeConstant,
    #[serde(alias = "delta")]
    Detuning,
}

/// Samples `start + i·step` up to `stop`, or an explicit `values` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: AxisVariable,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Lattice constant held fixed on a detuning axis.
    #[serde(default)]
    pub lattice_constant: Option<f64>,
    /// Permit lattice constants outside (0, 1)λ.
    #[serde(default)]
    pub allow_large_a: bool,
}

impl SweepAxis {
    pub fn lattice_range(start: f64, stop: f64, step: f64) -> Self {
        Self {
            variable: AxisVariable::LatticeConstant,
            start: Some(start),
            stop: Some(stop),
            step: Some(step),
            values: None,
            lattice_constant: None,
            allow_large_a: false,
        }
    }

    pub fn lattice_values(values: Vec<f64>) -> Self {
        Self { start: None, stop: None, step: None, values: Some(values), ..Self::lattice_range(0.0, 0.0, 0.0) }
    }

    pub fn detuning_values(values: Vec<f64>, a: f64) -> Self {
        Self {
            variable: AxisVariable::Detuning,
            lattice_constant: Some(a),
            ..Self::lattice_values(values)
        }
    }

    pub fn samples(&self) -> Result<Vec<f64>> {
        let samples = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(step)) => {
                ensure_finite("axis.start", start)?;
                ensure_finite("axis.stop", stop)?;
                ensure_positive("axis.step", step)?;
                if stop < start {
                    return Err(Error::param("axis", "stop below start"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| start + i as f64 * step).collect()
            }
            _ => return Err(Error::param("axis", "give either values or start, stop and step")),
        };
        if samples.is_empty() {
            return Err(Error::param("axis", "no samples"));
        }
        for v in &samples {
            ensure_finite("axis value", *v)?;
        }
        let check_a = |a: f64| -> Result<()> {
            if a <= 0.0 || (!self.allow_large_a && a >= 1.0) {
                return Err(Error::param("lattice constant", format!("{a} outside (0, 1)λ; set allow_large_a to override")));
            }
            Ok(())
        };
        match self.variable {
            AxisVariable::LatticeConstant => {
                if self.lattice_constant.is_some() {
                    return Err(Error::param("axis.lattice_constant", "only used on a detuning axis"));
                }
                samples.iter().try_for_each(|a| check_a(*a))?;
            }
            AxisVariable::Detuning => {
                let a = self
                    .lattice_constant
                    .ok_or_else(|| Error::param("axis.lattice_constant", "required on a detuning axis"))?;
                check_a(a)?;
            }
        }
        Ok(samples)
    }
}

/// One scan: a template array and beam, a lens, an axis and a detuning rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub array: ArrayTemplate,
    #[serde(default)]
    pub beam: BeamTemplate,
    #[serde(default)]
    pub lens: LensConfig,
    pub axis: SweepAxis,
    pub detuning: DetuningRule,
    #[serde(default = "default_linewidth")]
    pub linewidth: f64,
    #[serde(default)]
    pub solver: SolverPolicy,
}

fn default_linewidth() -> f64 {
    1.0
}

/// Parameters of one axis sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub a: f64,
    pub delta_a: f64,
    pub delta_b: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.samples()?;
        self.lens.validate()?;
        ensure_positive("linewidth", self.linewidth)?;
        self.solver.validate()?;
        Ok(())
    }

    pub fn samples(&self) -> Result<Vec<SamplePoint>> {
        let values = self.axis.samples()?;
        Ok(values
            .into_iter()
            .map(|v| match self.axis.variable {
                AxisVariable::LatticeConstant => {
                    let (delta_a, delta_b) = self.detuning.detunings();
                    SamplePoint { a: v, delta_a, delta_b }
                }
                AxisVariable::Detuning => {
                    let (delta_a, delta_b) = self.detuning.with_primary(v).detunings();
                    SamplePoint { a: self.axis.lattice_constant.unwrap_or(f64::NAN), delta_a, delta_b }
                }
            })
            .collect())
    }

    /// Full solve and lens transmission at one sample.
    pub fn evaluate(&self, point: &SamplePoint) -> Result<SampleOutcome> {
        let start = Instant::now();
        let array = self.array.build(point.a)?;
        let pa = SpeciesParams::new(Species::A, point.delta_a, self.linewidth)?;
        let pb = SpeciesParams::new(Species::B, point.delta_b, self.linewidth)?;
        let g = species_couplings(&array, &pa, &pb)?;
        let beam = self.beam.build(array.len(), point.a)?;
        let solution = CoupledSystem::new(&array, &g, WAVENUMBER, self.solver)?.solve(&beam)?;
        let t = transmission(&solution, &array, &beam, &self.lens)?;
        Ok(SampleOutcome {
            transmission: t,
            residual: solution.residual,
            iterations: solution.iterations,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub transmission: TransmissionResult,
    pub residual: f64,
    pub iterations: usize,
    pub seconds: f64,
}

/// One row of a sweep table. Failed samples carry NaN values and the error
/// text in `status`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub t: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub residual: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub status: String,
}

pub const SWEEP_COLUMNS: [&str; 8] = ["axis", "T", "T_x", "T_y", "residual", "iterations", "seconds", "status"];

impl SweepRow {
    fn from_outcome(axis: f64, outcome: Result<SampleOutcome>) -> Self {
        match outcome {
            Ok(o) => Self {
                axis,
                t: o.transmission.t,
                t_x: o.transmission.t_x,
                t_y: o.transmission.t_y,
                residual: o.residual,
                iterations: o.iterations,
                seconds: o.seconds,
                status: "ok".into(),
            },
            Err(e) => Self {
                axis,
                t: f64::NAN,
                t_x: f64::NAN,
                t_y: f64::NAN,
                residual: f64::NAN,
                iterations: 0,
                seconds: 0.0,
                status: format!("error: {e}"),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> [String; 8] {
        [
            self.axis.to_string(),
            self.t.to_string(),
            self.t_x.to_string(),
            self.t_y.to_string(),
            self.residual.to_string(),
            self.iterations.to_string(),
            self.seconds.to_string(),
            self.status.clone(),
        ]
    }

    fn parse(record: &csv::StringRecord) -> Result<Self> {
        if record.len() != SWEEP_COLUMNS.len() {
            return Err(Error::Parse(format!("sweep row has {} fields, expected 8", record.len())));
        }
        let f = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| Error::Parse(format!("column {}: {e}", SWEEP_COLUMNS[i])))
        };
        Ok(Self {
            axis: f(0)?,
            t: f(1)?,
            t_x: f(2)?,
            t_y: f(3)?,
            residual: f(4)?,
            iterations: record[5].parse().map_err(|e| Error::Parse(format!("column iterations: {e}")))?,
            seconds: f(6)?,
            status: record[7].to_string(),
        })
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// CSV written row by row in axis order.
    pub output: Option<PathBuf>,
    /// Keep completed rows already in `output` and compute only the rest.
    pub resume: bool,
    /// Worker count; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
}

/// Rows of an existing sweep file that match the expected axis values, and
/// the byte length of that prefix.
fn completed_prefix(path: &Path, expected: &[f64]) -> Result<(Vec<SweepRow>, u64)> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    // A row is complete only once its newline is on disk.
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text[..complete].as_bytes());
    let mut records = reader.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(SWEEP_COLUMNS.iter().copied()) => {}
        None => return Ok((Vec::new(), 0)),
        _ => return Err(Error::Parse(format!("{} is not a sweep table", path.display()))),
    }
    let mut rows = Vec::new();
    let mut end = text.find('\n').map_or(0, |i| i + 1) as u64;
    for (rec, want) in records.zip(expected) {
        let Ok(rec) = rec else { break };
        match SweepRow::parse(&rec) {
            Ok(row) if row.axis.to_bits() == want.to_bits() => {
                rows.push(row);
                end = rec.position().map_or(end, |_| end);
            }
            _ => break,
        }
    }
    // Recompute the byte end from the kept lines.
    let line_count = rows.len() + 1;
    let end = text.match_indices('\n').nth(line_count - 1).map_or(end, |(i, _)| (i + 1) as u64);
    Ok((rows, end))
}

/// Solve and measure transmission at every axis sample. Per-sample failures
/// are recorded in their row and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec, options: &SweepOptions) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.samples()?;
    let axis_values = spec.axis.samples()?;

    let (mut done, mut file) = match &options.output {
        Some(path) => {
            let (rows, end) = if options.resume && path.exists() {
                completed_prefix(path, &axis_values)?
            } else {
                (Vec::new(), 0)
            };
            let mut f = OpenOptions::new().create(true).read(true).write(true).truncate(false).open(path)?;
            f.set_len(end)?;
            f.seek(SeekFrom::End(0))?;
            if end == 0 {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(SWEEP_COLUMNS)?;
                f.write_all(&w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
                f.flush()?;
            }
            if !rows.is_empty() {
                log::info!("resuming sweep: {} of {} rows already complete", rows.len(), points.len());
            }
            (rows, Some(f))
        }
        None => (Vec::new(), None),
    };

    let first = done.len();
    let todo: Vec<(usize, SamplePoint)> = points.iter().copied().enumerate().skip(first).collect();
    let pool = match options.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::param("threads", e.to_string()))?,
        ),
        None => None,
    };

    let (tx, rx) = mpsc::channel::<(usize, SweepRow)>();
    let mut io_error = None;
    std::thread::scope(|scope| {
        scope.spawn(move || {
            let work = || {
                todo.par_iter().for_each_with(tx, |tx, (i, p)| {
                    let row = SweepRow::from_outcome(axis_values[*i], spec.evaluate(p));
                    if !row.is_ok() {
                        log::warn!("sweep sample {i} failed: {}", row.status);
                    }
                    let _ = tx.send((*i, row));
                })
            };
            match &pool {
                Some(pool) => pool.install(work),
                None => work(),
            }
        });
        // Emit rows strictly in axis order as they become available.
        let mut pending = BTreeMap::new();
        let mut next = first;
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&next) {
                if let (Some(f), None) = (file.as_mut(), io_error.as_ref()) {
                    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                    let bytes = w.write_record(row.record()).map_err(Error::from).and_then(|_| {
                        w.into_inner().map_err(|e| Error::Io(e.into_error()))
                    });
                    if let Err(e) = bytes.and_then(|b| f.write_all(&b).and_then(|_| f.flush()).map_err(Error::from)) {
                        io_error = Some(e);
                    }
                }
                done.push(row);
                next += 1;
            }
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    Ok(done)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Total,
    X,
    Y,
}

impl Component {
    pub fn of(self, t: &TransmissionResult) -> f64 {
        match self {
            Component::Total => t.t,
            Component::X => t.t_x,
            Component::Y => t.t_y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroOptions {
    /// A refined minimum counts as a zero below this transmission.
    pub threshold: f64,
    /// Final bracket width of the golden-section search (λ).
    pub tolerance: f64,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        Self { threshold: ZERO_TRANSMISSION, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroPoint {
    pub a_star: f64,
    pub t_min: f64,
}

/// Golden-section minimization on `[lo, hi]`, returning the best point seen.
pub fn golden_section<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Local minima of a sampled curve, as interior indices.
fn coarse_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
        .collect()
}

/// Transmission zeros of component `mu` along a lattice-constant axis: each
/// interior local minimum of the coarse scan is refined by golden section
/// and kept if it falls below the threshold.
pub fn find_zeros(spec: &SweepSpec, mu: Component, options: &ZeroOptions) -> Result<Vec<ZeroPoint>> {
    spec.validate()?;
    if spec.axis.variable != AxisVariable::LatticeConstant {
        return Err(Error::param("axis", "zero search needs a lattice-constant axis"));
    }
    ensure_positive("threshold", options.threshold)?;
    ensure_positive("tolerance", options.tolerance)?;
    let points = spec.samples()?;
    if points.windows(2).any(|w| w[1].a - w[0].a > MAX_COARSE_STEP + 1e-12 || w[1].a <= w[0].a) {
        return Err(Error::param("axis", format!("coarse scan must increase in steps of at most {MAX_COARSE_STEP}λ")));
    }
    log::info!("zero threshold {:e} on T_{:?}", options.threshold, mu);
    let eval = |p: &SamplePoint| spec.evaluate(p).map(|o| mu.of(&o.transmission));
    let coarse: Vec<f64> = points.par_iter().map(eval).collect::<Result<_>>()?;
    let (delta_a, delta_b) = (points[0].delta_a, points[0].delta_b);
    let mut zeros = Vec::new();
    for i in coarse_minima(&coarse) {
        let (lo, hi) = (points[i - 1].a, points[i + 1].a);
        let (a_star, t_min) =
            golden_section(|a| eval(&SamplePoint { a, delta_a, delta_b }), lo, hi, options.tolerance)?;
        let (a_star, t_min) = if coarse[i] < t_min { (points[i].a, coarse[i]) } else { (a_star, t_min) };
        log::debug!("minimum of T_{mu:?} at a = {a_star}: {t_min:e}");
        if t_min < options.threshold {
            zeros.push(ZeroPoint { a_star, t_min });
        }
    }
    Ok(zeros)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    /// RMS residual of the fit in `ln a`.
    pub rms: f64,
}

/// Least squares `ln a = ln c + p ln δ`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::param("points", "power-law fit needs at least two points"));
    }
    if points.iter().any(|&(d, a)| !(d > 0.0 && a > 0.0 && d.is_finite() && a.is_finite())) {
        return Err(Error::param("points", "power-law fit needs positive finite data"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::param("points", "need at least two distinct detunings"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PowerLawFit { prefactor: intercept.exp(), exponent, rms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    pub delta: f64,
    /// Zero index at this detuning, ordered by increasing `a*`.
    pub branch: usize,
    pub a_star: f64,
    pub t_min: f64,
}

/// Detuning interval across which the number of zeros changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyChange {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub zeros_before: usize,
    pub zeros_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroLocus {
    pub points: Vec<LocusPoint>,
    pub topology_changes: Vec<TopologyChange>,
    /// Fit of branch 0 when at least two detunings have a zero.
    pub fit: Option<PowerLawFit>,
}

pub const LOCUS_COLUMNS: [&str; 4] = ["delta", "branch", "a_star", "T_min"];

impl ZeroLocus {
    pub fn branch(&self, id: usize) -> Vec<(f64, f64)> {
        self.points.iter().filter(|p| p.branch == id).map(|p| (p.delta, p.a_star)).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(LOCUS_COLUMNS)?;
        for p in &self.points {
            w.write_record([p.delta.to_string(), p.branch.to_string(), p.a_star.to_string(), p.t_min.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Zeros of `T_mu` at each detuning, with branch labels and the detuning
/// intervals where zeros appear or vanish.
pub fn zero_locus(spec: &SweepSpec, mu: Component, deltas: &[f64], options: &ZeroOptions) -> Result<ZeroLocus> {
    let mut points = Vec::new();
    let mut counts = Vec::new();
    for &delta in deltas {
        let slice = SweepSpec { detuning: spec.detuning.with_primary(delta), ..spec.clone() };
        let zeros = find_zeros(&slice, mu, options)?;
        counts.push(zeros.len());
        points.extend(zeros.iter().enumerate().map(|(branch, z)| LocusPoint {
            delta,
            branch,
            a_star: z.a_star,
            t_min: z.t_min,
        }));
    }
    let topology_changes = deltas
        .windows(2)
        .zip(counts.windows(2))
        .filter(|(_, c)| c[0] != c[1])
        .map(|(d, c)| TopologyChange { delta_lo: d[0], delta_hi: d[1], zeros_before: c[0], zeros_after: c[1] })
        .collect();
    let first: Vec<(f64, f64)> = points.iter().filter(|p| p.branch == 0).map(|p| (p.delta, p.a_star)).collect();
    let fit = if first.len() >= 2 { fit_power_law(&first).ok() } else { None };
    Ok(ZeroLocus { points, topology_changes, fit })
}
