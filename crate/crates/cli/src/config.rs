//! Run configuration: one JSON document per invocation.
//!
//! Every section rejects unknown keys, and parse errors carry a JSON pointer
//! to the offending value.

use std::fmt;
use std::path::{Path, PathBuf};

use coopdipole::fields::PlaneSpec;
use coopdipole::geometry::AtomArray;
use coopdipole::observables::LensConfig;
use coopdipole::solver::{OperatorKind, SolverMethod, SolverPolicy};
use coopdipole::sweep::{ArrayTemplate, AxisVariable, BeamTemplate, Component, DetuningRule, SweepAxis, ZeroOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub species: SpeciesSection,
    #[serde(default)]
    pub beam: BeamTemplate,
    #[serde(default)]
    pub lens: LensConfig,
    #[serde(default)]
    pub solver: SolverSection,
    pub task: Task,
    /// Output directory, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Either a builder template or an imported atom table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArrayTemplate>,
    /// `x,y,z,species` table, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Lattice constant (λ) for the template; sweeps supply their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_constant: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesSection {
    pub delta_a: f64,
    pub delta_b: f64,
    pub linewidth: f64,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        Self { delta_a: 0.0, delta_b: 0.0, linewidth: 1.0 }
    }
}

impl SpeciesSection {
    pub fn rule(&self) -> DetuningRule {
        DetuningRule::Fixed { delta_a: self.delta_a, delta_b: self.delta_b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub method: SolverMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub memory_cap_bytes: u64,
    pub operator: OperatorKind,
    /// Worker threads; a `--threads` flag overrides this, and this
    /// overrides the `COOPDIPOLE_THREADS` environment variable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let p = SolverPolicy::default();
        Self {
            method: p.method,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
            restart: p.restart,
            memory_cap_bytes: p.memory_cap_bytes,
            operator: p.operator,
            threads: None,
        }
    }
}

impl SolverSection {
    pub fn policy(&self) -> SolverPolicy {
        SolverPolicy {
            method: self.method,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            restart: self.restart,
            memory_cap_bytes: self.memory_cap_bytes,
            operator: self.operator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossingSpec {
    /// Tensor element `(i, j)` of Δ.
    pub component: [usize; 2],
    /// Target value in units of γ.
    pub target: f64,
    pub bracket: [f64; 2],
}

impl Default for CrossingSpec {
    fn default() -> Self {
        Self { component: [1, 1], target: 1.0, bracket: [0.2, 0.35] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// Local fields only.
    Solve,
    Transmit,
    Fieldmap {
        #[serde(default = "default_planes")]
        planes: Vec<PlaneSpec>,
        #[serde(default = "yes")]
        stokes: bool,
        /// Also write the lens transmission of the same solve.
        #[serde(default = "yes")]
        transmission: bool,
    },
    Sweep {
        axis: SweepAxis,
        /// One output table per rule; empty means the species detunings.
        #[serde(default)]
        series: Vec<DetuningRule>,
        #[serde(default)]
        resume: bool,
    },
    Zeros {
        axis: SweepAxis,
        #[serde(default = "default_component")]
        component: Component,
        /// Rule whose primary detuning is replaced by each entry of
        /// `deltas`; defaults to the species detunings.
        #[serde(default)]
        rule: Option<DetuningRule>,
        #[serde(default)]
        deltas: Vec<f64>,
        #[serde(default)]
        options: ZeroOptions,
    },
    Latticesum {
        #[serde(default = "default_aspect")]
        aspect: f64,
        axis: SweepAxis,
        #[serde(default = "default_truncation")]
        truncation: usize,
        #[serde(default)]
        crossing: Option<CrossingSpec>,
    },
    PixelsDemo {
        #[serde(default = "default_planes")]
        planes: Vec<PlaneSpec>,
        /// Side (λ) of the window centred on each pixel for the
        /// polarization summary.
        #[serde(default = "default_window")]
        window: f64,
    },
}

fn yes() -> bool {
    true
}

fn default_planes() -> Vec<PlaneSpec> {
    vec![PlaneSpec::default()]
}

fn default_component() -> Component {
    Component::X
}

fn default_aspect() -> f64 {
    2.0
}

fn default_truncation() -> usize {
    coopdipole::infinite::DEFAULT_TRUNCATION
}

fn default_window() -> f64 {
    5.0
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Transmit => "transmit",
            Task::Fieldmap { .. } => "fieldmap",
            Task::Sweep { .. } => "sweep",
            Task::Zeros { .. } => "zeros",
            Task::Latticesum { .. } => "latticesum",
            Task::PixelsDemo { .. } => "pixels-demo",
        }
    }
}

/// A rejected config, with the JSON pointer of the offending value when
/// one is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self { pointer: pointer.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pointer.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at {}: {}", self.pointer, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        let token = match seg {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => key.replace('~', "~0").replace('/', "~1"),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => continue,
        };
        out.push('/');
        out.push_str(&token);
    }
    out
}

/// Parses and validates config text. Relative paths stay unresolved.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: RunConfig =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ConfigError::at(pointer(e.path()), e.inner().to_string()))?;
    de.end().map_err(|e| ConfigError::at("", e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads a config file. Relative geometry and output paths are resolved
/// against the file's directory.
pub fn parse_config(path: &Path) -> Result<(RunConfig, Vec<u8>), ParseFailure> {
    let bytes = std::fs::read(path).map_err(ParseFailure::Io)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| ParseFailure::Config(ConfigError::at("", e.to_string())))?;
    let mut config = parse_config_str(text).map_err(ParseFailure::Config)?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if let Some(csv) = config.geometry.as_mut().and_then(|g| g.csv.as_mut()) {
        if csv.is_relative() {
            *csv = base.join(&*csv);
        }
    }
    if let Some(out) = config.output.as_mut() {
        if out.is_relative() {
            *out = base.join(&*out);
        }
    }
    Ok((config, bytes))
}

#[derive(Debug)]
pub enum ParseFailure {
    Io(std::io::Error),
    Config(ConfigError),
}

fn check(ok: bool, ptr: &str, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::at(ptr, message))
    }
}

fn core(ptr: &str) -> impl Fn(coopdipole::Error) -> ConfigError + '_ {
    move |e| ConfigError::at(ptr, e.to_string())
}

impl RunConfig {
    /// Semantic checks that need no heavy computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sp = &self.species;
        check(sp.delta_a.is_finite(), "/species/delta_a", "must be finite")?;
        check(sp.delta_b.is_finite(), "/species/delta_b", "must be finite")?;
        check(sp.linewidth.is_finite() && sp.linewidth > 0.0, "/species/linewidth", "must be positive")?;
        self.lens.validate().map_err(core("/lens"))?;
        self.solver.policy().validate().map_err(core("/solver"))?;
        check(self.solver.threads != Some(0), "/solver/threads", "must be at least 1")?;
        if let Some(w) = self.beam.waist {
            check(w.is_finite() && w > 0.0, "/beam/waist", "must be positive")?;
        }
        check(
            self.beam.waist_factor.is_finite() && self.beam.waist_factor > 0.0,
            "/beam/waist_factor",
            "must be positive",
        )?;

        if let Some(g) = &self.geometry {
            check(
                g.array.is_some() != g.csv.is_some(),
                "/geometry",
                "give exactly one of `array` and `csv`",
            )?;
            if let Some(a) = g.lattice_constant {
                check(a.is_finite() && a > 0.0, "/geometry/lattice_constant", "must be positive")?;
            }
        }

        match &self.task {
            Task::Solve | Task::Transmit => {
                self.fixed_geometry()?;
            }
            Task::Fieldmap { planes, .. } => {
                self.fixed_geometry()?;
                validate_planes(planes)?;
            }
            Task::PixelsDemo { planes, window } => {
                let template = self.fixed_geometry()?;
                check(
                    matches!(template, Some(ArrayTemplate::Pixels { .. })),
                    "/geometry/array",
                    "pixels-demo needs a `pixels` array builder",
                )?;
                validate_planes(planes)?;
                check(window.is_finite() && *window > 0.0, "/task/window", "must be positive")?;
            }
            Task::Sweep { axis, series, .. } => {
                self.template()?;
                let rules = if series.is_empty() { vec![sp.rule()] } else { series.clone() };
                for (i, rule) in rules.iter().enumerate() {
                    let ptr = format!("/task/series/{i}");
                    let (a, b) = rule.detunings();
                    check(a.is_finite() && b.is_finite(), &ptr, "detunings must be finite")?;
                }
                let axis = self.resolved_axis(axis);
                axis.samples().map_err(core("/task/axis"))?;
            }
            Task::Zeros { axis, deltas, options, .. } => {
                self.template()?;
                let axis = self.resolved_axis(axis);
                axis.samples().map_err(core("/task/axis"))?;
                check(
                    deltas.iter().all(|d| d.is_finite()),
                    "/task/deltas",
                    "must be finite",
                )?;
                check(options.threshold > 0.0, "/task/options/threshold", "must be positive")?;
                check(options.tolerance > 0.0, "/task/options/tolerance", "must be positive")?;
            }
            Task::Latticesum { aspect, axis, truncation, crossing } => {
                check(aspect.is_finite() && *aspect > 0.0, "/task/aspect", "must be positive")?;
                axis.samples().map_err(core("/task/axis"))?;
                check(
                    *truncation >= coopdipole::infinite::MIN_TRUNCATION,
                    "/task/truncation",
                    format!("must be at least {}", coopdipole::infinite::MIN_TRUNCATION),
                )?;
                if let Some(c) = crossing {
                    check(c.component.iter().all(|&i| i < 3), "/task/crossing/component", "indices must be 0, 1 or 2")?;
                    check(c.bracket[0] < c.bracket[1] && c.bracket[0] > 0.0, "/task/crossing/bracket", "must be an increasing positive pair")?;
                }
            }
        }
        Ok(())
    }

    /// The template of tasks that scan the lattice constant.
    pub fn template(&self) -> Result<&ArrayTemplate, ConfigError> {
        let g = self.geometry.as_ref().ok_or_else(|| {
            ConfigError::at("/geometry", format!("task `{}` needs a geometry section", self.task.name()))
        })?;
        g.array.as_ref().ok_or_else(|| {
            ConfigError::at("/geometry/array", format!("task `{}` needs an array builder, not a CSV import", self.task.name()))
        })
    }

    /// For single-geometry tasks: checks there is a geometry, and that a
    /// template comes with its lattice constant.
    fn fixed_geometry(&self) -> Result<Option<&ArrayTemplate>, ConfigError> {
        let g = self.geometry.as_ref().ok_or_else(|| {
            ConfigError::at("/geometry", format!("task `{}` needs a geometry section", self.task.name()))
        })?;
        if let Some(t) = &g.array {
            check(
                g.lattice_constant.is_some(),
                "/geometry/lattice_constant",
                "an array builder needs a lattice constant for this task",
            )?;
            return Ok(Some(t));
        }
        Ok(None)
    }

    /// A detuning axis without its own lattice constant takes the
    /// geometry's.
    pub fn resolved_axis(&self, axis: &SweepAxis) -> SweepAxis {
        let mut axis = axis.clone();
        if axis.variable == AxisVariable::Detuning && axis.lattice_constant.is_none() {
            axis.lattice_constant = self.geometry.as_ref().and_then(|g| g.lattice_constant);
        }
        axis
    }

    /// Builds the array of a single-geometry task.
    pub fn build_array(&self) -> coopdipole::Result<AtomArray> {
        let g = self.geometry.as_ref().ok_or_else(|| coopdipole::Error::Geometry("no geometry section".into()))?;
        match (&g.array, &g.csv) {
            (Some(t), _) => t.build(g.lattice_constant.unwrap_or(f64::NAN)),
            (None, Some(path)) => AtomArray::read_csv(std::fs::File::open(path)?),
            (None, None) => Err(coopdipole::Error::Geometry("geometry has neither array nor csv".into())),
        }
    }
}

fn validate_planes(planes: &[PlaneSpec]) -> Result<(), ConfigError> {
    check(!planes.is_empty(), "/task/planes", "need at least one plane")?;
    for (i, p) in planes.iter().enumerate() {
        p.validate().map_err(|e| ConfigError::at(format!("/task/planes/{i}"), e.to_string()))?;
    }
    Ok(())
}
