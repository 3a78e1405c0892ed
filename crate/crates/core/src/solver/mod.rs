//! The self-consistent coupled-dipole system `(I - M) E = E_inc`.
//!
//! Unknowns are ordered atom-major, component-minor: `E[3n + c]` is component
//! `c` of the local field at atom `n`, atoms in the array's order.

mod gmres;
mod operator;

use std::io::Write;
use std::time::{Duration, Instant};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve as lu_solve};
use faer::{Mat, MatMut, MatRef};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::IncidentField;
use crate::coupling::Coupling;
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::AtomArray;
use crate::greens::{kernel, separation};
use crate::{CVec3, ZERO};

use self::gmres::{gmres, GmresOptions};
pub(crate) use self::operator::{DirectOperator, LinearOperator};
use self::operator::LatticeFftOperator;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;
pub const DEFAULT_RESTART: usize = 200;
pub const DEFAULT_MEMORY_CAP: u64 = 8 * 1024 * 1024 * 1024;

/// Largest tolerance accepted for the iterative path.
pub const MAX_ITERATIVE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Dense,
    Iterative,
}

/// Matvec used by the iterative path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// FFT convolution when the array sits on a planar grid, direct otherwise.
    #[default]
    Auto,
    Direct,
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverPolicy {
    pub method: SolverMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub memory_cap_bytes: u64,
    pub operator: OperatorKind,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        Self {
            method: SolverMethod::Dense,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            restart: DEFAULT_RESTART,
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
            operator: OperatorKind::Auto,
        }
    }
}

impl SolverPolicy {
    pub fn dense() -> Self {
        Self::default()
    }

    pub fn iterative(tolerance: f64) -> Self {
        Self { method: SolverMethod::Iterative, tolerance, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("tolerance", self.tolerance)?;
        if self.method == SolverMethod::Iterative && self.tolerance > MAX_ITERATIVE_TOLERANCE {
            return Err(Error::param(
                "tolerance",
                format!("iterative tolerance must be at most {MAX_ITERATIVE_TOLERANCE:e}, got {:e}", self.tolerance),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        if self.restart == 0 {
            return Err(Error::param("restart", "must be at least 1"));
        }
        Ok(())
    }
}

/// Bytes needed to store the dense `3N × 3N` complex matrix.
pub fn dense_bytes(n_atoms: usize) -> u64 {
    let dim = 3 * n_atoms as u64;
    16 * dim * dim
}

/// An atom array with its couplings, ready to solve. Immutable once built.
#[derive(Debug, Clone)]
pub struct CoupledSystem<'a> {
    array: &'a AtomArray,
    couplings: Vec<Complex64>,
    k: f64,
    policy: SolverPolicy,
}

impl<'a> CoupledSystem<'a> {
    pub fn new(array: &'a AtomArray, couplings: &[Coupling], k: f64, policy: SolverPolicy) -> Result<Self> {
        if array.is_empty() {
            return Err(Error::Geometry("coupled system needs at least one atom".into()));
        }
        if couplings.len() != array.len() {
            return Err(Error::DimensionMismatch { expected: array.len(), actual: couplings.len() });
        }
        ensure_positive("k", k)?;
        if couplings.iter().any(|g| !g.0.re.is_finite() || !g.0.im.is_finite()) {
            return Err(Error::param("couplings", "must be finite"));
        }
        policy.validate()?;
        Ok(Self { array, couplings: couplings.iter().map(|g| g.0).collect(), k, policy })
    }

    pub fn array(&self) -> &'a AtomArray {
        self.array
    }

    pub fn couplings(&self) -> &[Complex64] {
        &self.couplings
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn policy(&self) -> &SolverPolicy {
        &self.policy
    }

    pub fn dim(&self) -> usize {
        3 * self.array.len()
    }

    /// Incident field stacked in canonical order.
    pub fn rhs(&self, incident: &dyn IncidentField) -> Vec<Complex64> {
        self.array.positions().par_iter().flat_map_iter(|r| incident.field_at(r)).collect()
    }

    fn check_memory(&self) -> Result<()> {
        let required = dense_bytes(self.array.len());
        if required > self.policy.memory_cap_bytes {
            return Err(Error::MemoryCap { required, cap: self.policy.memory_cap_bytes });
        }
        Ok(())
    }

    /// Column-major `(I - M)`.
    fn assemble_raw(&self) -> Vec<Complex64> {
        let dim = self.dim();
        let positions = self.array.positions();
        let mut data = vec![ZERO; dim * dim];
        // Three columns per source atom n.
        data.par_chunks_mut(3 * dim).enumerate().for_each(|(n, block)| {
            let g = self.couplings[n];
            let rn = &positions[n];
            for (m, rm) in positions.iter().enumerate() {
                if m == n {
                    continue;
                }
                let d = separation(rm, rn);
                let (diag, dyad) = kernel(d, self.k);
                for c in 0..3 {
                    for r in 0..3 {
                        let mut v = dyad * (d[r] * d[c]);
                        if r == c {
                            v += diag;
                        }
                        block[c * dim + 3 * m + r] = -g * v;
                    }
                }
            }
            for c in 0..3 {
                block[c * dim + 3 * n + c] = Complex64::new(1.0, 0.0);
            }
        });
        data
    }

    /// Dense matrix `I - M` and the stacked incident field.
    pub fn assemble_dense(&self, incident: &dyn IncidentField) -> Result<(Mat<Complex64>, Vec<Complex64>)> {
        self.check_memory()?;
        let dim = self.dim();
        let data = self.assemble_raw();
        let mat = Mat::from_fn(dim, dim, |i, j| data[j * dim + i]);
        Ok((mat, self.rhs(incident)))
    }

    /// Matrix-free `(I - M) v`.
    pub fn apply_operator(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: v.len() });
        }
        let mut out = vec![ZERO; v.len()];
        self.direct().apply(v, &mut out);
        Ok(out)
    }

    fn direct(&self) -> DirectOperator<'_> {
        DirectOperator { positions: self.array.positions(), couplings: &self.couplings, k: self.k }
    }

    /// Relative residual `‖(I - M) x - b‖ / ‖b‖`, recomputed with the direct sum.
    pub fn relative_residual(&self, x: &[Complex64], b: &[Complex64]) -> Result<f64> {
        let ax = self.apply_operator(x)?;
        let num: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        Ok(if den == 0.0 { num } else { num / den })
    }

    pub fn solve(&self, incident: &dyn IncidentField) -> Result<DipoleSolution> {
        let start = Instant::now();
        let b = self.rhs(incident);
        let method = match self.policy.method {
            SolverMethod::Dense if self.check_memory().is_err() => {
                log::info!(
                    "dense system for {} atoms needs {} bytes, above the {} byte cap; switching to the iterative solver",
                    self.array.len(),
                    dense_bytes(self.array.len()),
                    self.policy.memory_cap_bytes
                );
                SolverMethod::Iterative
            }
            m => m,
        };
        let (x, iterations, condition) = match method {
            SolverMethod::Dense => {
                let (x, condition) = self.solve_dense(&b)?;
                (x, 0, condition)
            }
            SolverMethod::Iterative => {
                let (x, iterations) = self.solve_iterative(&b)?;
                (x, iterations, f64::NAN)
            }
        };
        // Independent re-verification with the direct pair sum.
        let residual = self.relative_residual(&x, &b)?;
        if !(residual <= self.policy.tolerance) {
            return Err(match method {
                SolverMethod::Dense => Error::Singular { condition, residual },
                SolverMethod::Iterative => Error::NotConverged { iterations, best_residual: residual },
            });
        }
        let local_fields = x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(DipoleSolution {
            local_fields,
            couplings: self.couplings.clone(),
            residual,
            iterations,
            wall_time: start.elapsed(),
            method,
            wavenumber: self.k,
        })
    }

    fn solve_dense(&self, b: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
        let dim = self.dim();
        let mut data = self.assemble_raw();
        let par = faer::get_global_parallelism();
        let mut perm = vec![0usize; dim];
        let mut perm_inv = vec![0usize; dim];
        let mut x = b.to_vec();
        let scratch = factor::lu_in_place_scratch::<usize, Complex64>(dim, dim, par, Default::default())
            .or(lu_solve::solve_in_place_scratch::<usize, Complex64>(dim, 1, par));
        let mut buf = MemBuffer::new(scratch);
        let stack = MemStack::new(&mut buf);
        let mut lu = MatMut::from_column_major_slice_mut(&mut data, dim, dim);
        let (_, row_perm) = factor::lu_in_place(lu.as_mut(), &mut perm, &mut perm_inv, par, stack, Default::default());
        let lu = lu.as_ref();
        let condition = diagonal_condition(lu);
        if !condition.is_finite() || condition > 1e15 {
            return Err(Error::Singular { condition, residual: f64::NAN });
        }
        let rhs = MatMut::from_column_major_slice_mut(&mut x, dim, 1);
        lu_solve::solve_in_place(lu, lu, row_perm, rhs, par, stack);
        Ok((x, condition))
    }

    fn solve_iterative(&self, b: &[Complex64]) -> Result<(Vec<Complex64>, usize)> {
        // Half the target leaves room for the independent recheck.
        let opts = GmresOptions {
            tolerance: 0.5 * self.policy.tolerance,
            max_iterations: self.policy.max_iterations,
            restart: self.policy.restart,
        };
        let lattice = match (self.policy.operator, self.array.grid()) {
            (OperatorKind::Direct, _) => None,
            (OperatorKind::Auto, Some(grid)) => LatticeFftOperator::new(grid, &self.couplings, self.k),
            (OperatorKind::Auto, None) => None,
            (OperatorKind::Lattice, Some(grid)) => Some(
                LatticeFftOperator::new(grid, &self.couplings, self.k)
                    .ok_or_else(|| Error::param("operator", "grid too sparse for the lattice operator"))?,
            ),
            (OperatorKind::Lattice, None) => {
                return Err(Error::param("operator", "lattice operator needs atoms on a planar grid"))
            }
        };
        let direct = self.direct();
        let op: &dyn LinearOperator = match &lattice {
            Some(l) => l,
            None => &direct,
        };
        log::debug!("gmres on {} unknowns, lattice operator: {}", self.dim(), lattice.is_some());
        let out = gmres(op, b, opts);
        if !out.converged {
            return Err(Error::NotConverged { iterations: out.iterations, best_residual: out.residual });
        }
        Ok((out.x, out.iterations))
    }
}

/// Ratio of the largest to smallest pivot magnitude: a cheap lower bound on
/// the condition number.
fn diagonal_condition(lu: MatRef<'_, Complex64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..lu.nrows() {
        let v = lu[(i, i)].norm();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Local fields at every atom. The source driving the scattered field of
/// atom `n` is `gₙ E(rₙ)`.
#[derive(Debug, Clone)]
pub struct DipoleSolution {
    pub local_fields: Vec<CVec3>,
    pub couplings: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub method: SolverMethod,
    pub wavenumber: f64,
}

/// JSON sidecar for an exported solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub atoms: usize,
    pub method: SolverMethod,
    pub residual: f64,
    pub iterations: usize,
    pub wall_time_seconds: f64,
}

impl DipoleSolution {
    /// Solution for an array with no atoms: every field is the incident one.
    pub fn empty(wavenumber: f64) -> Self {
        Self {
            local_fields: Vec::new(),
            couplings: Vec::new(),
            residual: 0.0,
            iterations: 0,
            wall_time: Duration::ZERO,
            method: SolverMethod::Dense,
            wavenumber,
        }
    }

    pub fn len(&self) -> usize {
        self.local_fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_fields.is_empty()
    }

    /// `gₙ E(rₙ)` per atom.
    pub fn sources(&self) -> Vec<CVec3> {
        self.local_fields
            .iter()
            .zip(&self.couplings)
            .map(|(e, g)| [g * e[0], g * e[1], g * e[2]])
            .collect()
    }

    /// `pₙ = αₙ E(rₙ)` in natural units (ε₀ = λ = 1).
    pub fn dipole_moments(&self) -> Vec<CVec3> {
        self.local_fields
            .iter()
            .zip(&self.couplings)
            .map(|(e, g)| {
                let alpha = Coupling(*g).polarizability();
                [alpha * e[0], alpha * e[1], alpha * e[2]]
            })
            .collect()
    }

    /// Local fields stacked in canonical order.
    pub fn stacked(&self) -> Vec<Complex64> {
        self.local_fields.iter().flatten().copied().collect()
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            atoms: self.len(),
            method: self.method,
            residual: self.residual,
            iterations: self.iterations,
            wall_time_seconds: self.wall_time.as_secs_f64(),
        }
    }

    /// Columns: n, x, y, z, species, then real and imaginary parts of
    /// Ex, Ey, Ez.
    pub fn write_csv<W: Write>(&self, array: &AtomArray, writer: W) -> Result<()> {
        if array.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: array.len() });
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "x", "y", "z", "species", "re_ex", "im_ex", "re_ey", "im_ey", "re_ez", "im_ez"])?;
        for (n, ((r, s), e)) in array.positions().iter().zip(array.species()).zip(&self.local_fields).enumerate() {
            let mut row = vec![n.to_string(), r[0].to_string(), r[1].to_string(), r[2].to_string(), s.to_string()];
            for c in e {
                row.push(c.re.to_string());
                row.push(c.im.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.summary())?;
        Ok(())
    }
}
