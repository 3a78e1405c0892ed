//! Task execution and artifact persistence.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use coopdipole::coupling::{Species, SpeciesParams};
use coopdipole::fields::{field_grid, FieldGrid, PlaneSpec};
use coopdipole::geometry::{species_couplings, AtomArray, StripeOrientation};
use coopdipole::infinite::{crossing_finder, tensor_scan, write_tensor_scan};
use coopdipole::observables::{stokes, transmission};
use coopdipole::solver::{CoupledSystem, DipoleSolution};
use coopdipole::sweep::{
    find_zeros, run_sweep, zero_locus, ArrayTemplate, SweepOptions, SweepSpec, ZeroLocus,
};
use coopdipole::units::WAVENUMBER;
use coopdipole::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, RunConfig, Task};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Solver,
    Io,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub context: String,
    pub message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Config => exit::CONFIG,
            FailureKind::Solver => exit::SOLVER,
            FailureKind::Io => exit::IO,
        }
    }

    pub fn config(e: ConfigError) -> Self {
        Self { kind: FailureKind::Config, context: "config".into(), message: e.to_string() }
    }

    pub fn io(context: impl Into<String>, e: impl fmt::Display) -> Self {
        Self { kind: FailureKind::Io, context: context.into(), message: e.to_string() }
    }

    /// Classifies a library error raised while doing `context`.
    pub fn core(context: impl Into<String>, e: Error) -> Self {
        let kind = match &e {
            Error::Singular { .. } | Error::NotConverged { .. } | Error::MemoryCap { .. } | Error::NoBracket { .. } => {
                FailureKind::Solver
            }
            Error::Io(_) | Error::Json(_) => FailureKind::Io,
            Error::Csv(c) if c.is_io_error() => FailureKind::Io,
            _ => FailureKind::Config,
        };
        Self { kind, context: context.into(), message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            FailureKind::Config => "config",
            FailureKind::Solver => "solver",
            FailureKind::Io => "io",
        };
        write!(f, "{kind} error in {}: {}", self.context, self.message)
    }
}

impl std::error::Error for CliError {}

type Result<T> = std::result::Result<T, CliError>;

fn ctx<T>(context: &str, r: coopdipole::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::core(context, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub parse_seconds: f64,
    pub run_seconds: f64,
    pub write_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub cli_version: &'static str,
    pub core_version: &'static str,
    pub task: &'static str,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub resolved_config_sha256: String,
    pub artifacts: Vec<FileDigest>,
    pub timings: Timings,
}

/// Collects artifacts in an output directory.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Streams one file through `fill`.
    pub fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> coopdipole::Result<()>) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        fill(&mut w).map_err(|e| CliError::core(format!("writing {name}"), e))?;
        w.flush().map_err(|e| CliError::io(format!("writing {name}"), e))?;
        self.record(name);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Registers a file some other routine wrote.
    pub fn record(&mut self, name: &str) {
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
    }

    pub fn digests(&self) -> Result<Vec<FileDigest>> {
        self.written
            .iter()
            .map(|name| {
                let path = self.path(name);
                let bytes = fs::read(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
                Ok(FileDigest { path: name.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) })
            })
            .collect()
    }
}

pub struct RunRequest<'a> {
    pub config: RunConfig,
    /// Raw bytes of the config file, for the manifest hash.
    pub config_bytes: &'a [u8],
    pub config_path: &'a Path,
    pub out: PathBuf,
    pub threads: usize,
    pub parse_seconds: f64,
}

/// Executes the task and writes artifacts, the resolved config and the
/// manifest into `request.out`.
pub fn run(request: RunRequest<'_>) -> Result<Manifest> {
    let RunRequest { mut config, config_bytes, config_path, out, threads, parse_seconds } = request;
    let mut artifacts = Artifacts::new(&out)?;

    // The resolved config is self-contained: absolute paths, every default.
    config.output = Some(absolute(&out));
    if let Some(csv) = config.geometry.as_mut().and_then(|g| g.csv.as_mut()) {
        *csv = absolute(csv);
    }
    config.solver.threads = Some(threads);

    let mut inputs = vec![FileDigest {
        path: config_path.display().to_string(),
        bytes: config_bytes.len() as u64,
        sha256: sha256_hex(config_bytes),
    }];
    if let Some(csv) = config.geometry.as_ref().and_then(|g| g.csv.as_ref()) {
        let bytes = fs::read(csv).map_err(|e| CliError::io(format!("reading {}", csv.display()), e))?;
        inputs.push(FileDigest { path: csv.display().to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
    }

    let resolved = serde_json::to_vec_pretty(&config).map_err(|e| CliError::io("serializing resolved config", e))?;
    artifacts.write("resolved_config.json", |w| {
        w.write_all(&resolved)?;
        w.write_all(b"\n")?;
        Ok(())
    })?;

    let start = Instant::now();
    execute(&config, &mut artifacts)?;
    let run_seconds = start.elapsed().as_secs_f64();

    let write_start = Instant::now();
    let mut manifest = Manifest {
        tool: "coopdipole",
        cli_version: env!("CARGO_PKG_VERSION"),
        core_version: coopdipole::VERSION,
        task: config.task.name(),
        threads,
        inputs,
        resolved_config_sha256: sha256_hex(&resolved),
        artifacts: artifacts.digests()?,
        timings: Timings { parse_seconds, run_seconds, write_seconds: 0.0 },
    };
    manifest.timings.write_seconds = write_start.elapsed().as_secs_f64();
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io("serializing manifest", e))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}

struct Solved {
    array: AtomArray,
    beam: coopdipole::beam::GaussianBeam,
    solution: DipoleSolution,
}

fn solve(config: &RunConfig, artifacts: &mut Artifacts) -> Result<Solved> {
    let array = ctx("geometry", config.build_array())?;
    artifacts.write("atoms.csv", |w| array.write_csv(w))?;
    let sp = &config.species;
    let pa = ctx("species", SpeciesParams::new(Species::A, sp.delta_a, sp.linewidth))?;
    let pb = ctx("species", SpeciesParams::new(Species::B, sp.delta_b, sp.linewidth))?;
    let couplings = ctx("species", species_couplings(&array, &pa, &pb))?;
    let a = config.geometry.as_ref().and_then(|g| g.lattice_constant).unwrap_or(array.lattice_constant());
    let beam = ctx("beam", config.beam.build(array.len(), a))?;
    let solution = if array.is_empty() {
        DipoleSolution::empty(WAVENUMBER)
    } else {
        let system = ctx("solver", CoupledSystem::new(&array, &couplings, WAVENUMBER, config.solver.policy()))?;
        ctx("solver", system.solve(&beam))?
    };
    log::info!(
        "solved {} atoms: residual {:e} after {} iterations",
        array.len(),
        solution.residual,
        solution.iterations
    );
    artifacts.write("local_fields.csv", |w| solution.write_csv(&array, w))?;
    artifacts.write("solution.json", |w| solution.write_summary(w))?;
    Ok(Solved { array, beam, solution })
}

fn write_transmission(config: &RunConfig, s: &Solved, artifacts: &mut Artifacts) -> Result<()> {
    let t = ctx("transmission", transmission(&s.solution, &s.array, &s.beam, &config.lens))?;
    log::info!("T = {}, T_x = {}, T_y = {}", t.t, t.t_x, t.t_y);
    artifacts.json("transmission.json", &t)
}

fn plane_name(p: &PlaneSpec) -> String {
    format!("field_z{}", p.z)
}

fn write_planes(s: &Solved, planes: &[PlaneSpec], with_stokes: bool, artifacts: &mut Artifacts) -> Result<Vec<FieldGrid>> {
    let mut grids = Vec::new();
    for plane in planes {
        let grid = ctx("field grid", field_grid(&s.solution, &s.array, &s.beam, plane))?;
        let name = plane_name(plane);
        artifacts.write(&format!("{name}.csv"), |w| grid.write_csv(w, with_stokes))?;
        artifacts.write(&format!("{name}.json"), |w| grid.write_header(w, with_stokes))?;
        grids.push(grid);
    }
    Ok(grids)
}

fn sweep_spec(config: &RunConfig, axis: &coopdipole::sweep::SweepAxis, rule: coopdipole::sweep::DetuningRule) -> Result<SweepSpec> {
    let template = config.template().map_err(CliError::config)?.clone();
    Ok(SweepSpec {
        array: template,
        beam: config.beam,
        lens: config.lens,
        axis: config.resolved_axis(axis),
        detuning: rule,
        linewidth: config.species.linewidth,
        solver: config.solver.policy(),
    })
}

#[derive(Serialize)]
struct SeriesEntry {
    file: String,
    rule: coopdipole::sweep::DetuningRule,
    failed_samples: usize,
}

#[derive(Serialize)]
struct PixelReport {
    row: usize,
    col: usize,
    orientation: StripeOrientation,
    swap: bool,
    centre: [f64; 2],
    plane_z: f64,
    /// Orientation of the window-integrated Stokes vector (degrees).
    psi_degrees: f64,
    /// Angle the stripe orientation is expected to transmit (degrees).
    designed_degrees: f64,
    deviation_degrees: f64,
    degree_of_polarization: f64,
}

fn execute(config: &RunConfig, artifacts: &mut Artifacts) -> Result<()> {
    match &config.task {
        Task::Solve => {
            solve(config, artifacts)?;
        }
        Task::Transmit => {
            let s = solve(config, artifacts)?;
            write_transmission(config, &s, artifacts)?;
        }
        Task::Fieldmap { planes, stokes, transmission } => {
            let s = solve(config, artifacts)?;
            write_planes(&s, planes, *stokes, artifacts)?;
            if *transmission {
                write_transmission(config, &s, artifacts)?;
            }
        }
        Task::PixelsDemo { planes, window } => {
            let s = solve(config, artifacts)?;
            write_planes(&s, planes, true, artifacts)?;
            let Some(ArrayTemplate::Pixels { layout }) = config.template().ok() else {
                return Err(CliError::config(ConfigError::at("/geometry/array", "pixels-demo needs a pixels builder")));
            };
            let side = ctx("geometry", layout.side())?;
            let mut report = Vec::new();
            for region in ctx("geometry", layout.regions())? {
                let (mut cx, mut cy, mut n) = (0.0, 0.0, 0.0);
                for j in region.y_sites.clone() {
                    for i in region.x_sites.clone() {
                        let p = s.array.positions()[j * side + i];
                        cx += p[0];
                        cy += p[1];
                        n += 1.0;
                    }
                }
                let centre = [cx / n, cy / n];
                for plane in planes {
                    let h = window / 2.0;
                    let spec = PlaneSpec {
                        z: plane.z,
                        x_range: [centre[0] - h, centre[0] + h],
                        y_range: [centre[1] - h, centre[1] + h],
                        nx: 21,
                        ny: 21,
                    };
                    let grid = ctx("pixel window", field_grid(&s.solution, &s.array, &s.beam, &spec))?;
                    let [s0, s1, s2, s3] = grid.values.iter().fold([0.0; 4], |acc, v| {
                        let st = stokes(v[0], v[1]);
                        [acc[0] + st.s0, acc[1] + st.s1, acc[2] + st.s2, acc[3] + st.s3]
                    });
                    let psi = (0.5 * s2.atan2(s1)).to_degrees();
                    let designed = match region.spec.orientation {
                        StripeOrientation::X => 0.0,
                        StripeOrientation::Y => 90.0,
                    };
                    let deviation = ((psi - designed).rem_euclid(180.0) + 90.0).rem_euclid(180.0) - 90.0;
                    report.push(PixelReport {
                        row: region.row,
                        col: region.col,
                        orientation: region.spec.orientation,
                        swap: region.spec.swap,
                        centre,
                        plane_z: plane.z,
                        psi_degrees: psi,
                        designed_degrees: designed,
                        deviation_degrees: deviation,
                        degree_of_polarization: if s0 > 0.0 { (s1 * s1 + s2 * s2 + s3 * s3).sqrt() / s0 } else { f64::NAN },
                    });
                }
            }
            artifacts.json("pixels.json", &report)?;
        }
        Task::Sweep { axis, series, resume } => {
            let rules = if series.is_empty() { vec![config.species.rule()] } else { series.clone() };
            let mut index = Vec::new();
            for (i, rule) in rules.iter().enumerate() {
                let name = if rules.len() == 1 { "sweep.csv".to_string() } else { format!("sweep_{i}.csv") };
                let spec = sweep_spec(config, axis, *rule)?;
                let options = SweepOptions { output: Some(artifacts.path(&name)), resume: *resume, threads: None };
                let rows = ctx("sweep", run_sweep(&spec, &options))?;
                artifacts.record(&name);
                let failed = rows.iter().filter(|r| !r.is_ok()).count();
                if failed > 0 {
                    log::warn!("{name}: {failed} of {} samples failed", rows.len());
                }
                index.push(SeriesEntry { file: name, rule: *rule, failed_samples: failed });
            }
            artifacts.json("series.json", &index)?;
        }
        Task::Zeros { axis, component, rule, deltas, options } => {
            let rule = rule.unwrap_or_else(|| config.species.rule());
            let spec = sweep_spec(config, axis, rule)?;
            let locus = if deltas.is_empty() {
                let zeros = ctx("zero search", find_zeros(&spec, *component, options))?;
                let delta = rule.detunings().0;
                ZeroLocus {
                    points: zeros
                        .iter()
                        .enumerate()
                        .map(|(branch, z)| coopdipole::sweep::LocusPoint { delta, branch, a_star: z.a_star, t_min: z.t_min })
                        .collect(),
                    topology_changes: Vec::new(),
                    fit: None,
                }
            } else {
                ctx("zero locus", zero_locus(&spec, *component, deltas, options))?
            };
            artifacts.write("zeros.csv", |w| locus.write_csv(w))?;
            artifacts.json("fit.json", &locus.fit)?;
            artifacts.json("topology.json", &locus.topology_changes)?;
        }
        Task::Latticesum { aspect, axis, truncation, crossing } => {
            let a_values = ctx("lattice axis", axis.samples())?;
            let rows = ctx("lattice sum", tensor_scan(*aspect, &a_values, *truncation))?;
            artifacts.write("lattice_sum.csv", |w| write_tensor_scan(&rows, w))?;
            if let Some(c) = crossing {
                let a_star = ctx(
                    "crossing",
                    crossing_finder(*aspect, (c.component[0], c.component[1]), c.target, c.bracket, *truncation),
                )?;
                log::info!("Δ[{}][{}] = {} at a = {a_star}", c.component[0], c.component[1], c.target);
                #[derive(Serialize)]
                struct Crossing {
                    aspect: f64,
                    component: [usize; 2],
                    target: f64,
                    truncation: usize,
                    a_star: f64,
                }
                artifacts.json(
                    "crossing.json",
                    &Crossing { aspect: *aspect, component: c.component, target: c.target, truncation: *truncation, a_star },
                )?;
            }
        }
    }
    Ok(())
}
