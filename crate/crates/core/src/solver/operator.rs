//! Applications of the coupled-dipole operator `(I - M)`, where
//! `(M v)_m = Σ_{n≠m} G(r_m, r_n) gₙ vₙ`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::geometry::GridIndex;
use crate::greens::{kernel, kernel_apply, separation};
use crate::{CVec3, Point, ZERO};

pub(crate) trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = (I - M) x`.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

fn sources(couplings: &[Complex64], x: &[Complex64]) -> Vec<CVec3> {
    couplings
        .iter()
        .zip(x.chunks_exact(3))
        .map(|(g, v)| [g * v[0], g * v[1], g * v[2]])
        .collect()
}

/// Recomputes every Green tensor on the fly: O(N²) work, O(N) memory.
pub(crate) struct DirectOperator<'a> {
    pub positions: &'a [Point],
    pub couplings: &'a [Complex64],
    pub k: f64,
}

impl LinearOperator for DirectOperator<'_> {
    fn dim(&self) -> usize {
        3 * self.positions.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let src = sources(self.couplings, x);
        let positions = self.positions;
        let k = self.k;
        y.par_chunks_mut(3).enumerate().for_each(|(m, out)| {
            let rm = &positions[m];
            let mut acc = [ZERO; 3];
            for (n, (rn, s)) in positions.iter().zip(&src).enumerate() {
                if n == m {
                    continue;
                }
                let f = kernel_apply(separation(rm, rn), k, s);
                acc[0] += f[0];
                acc[1] += f[1];
                acc[2] += f[2];
            }
            for c in 0..3 {
                out[c] = x[3 * m + c] - acc[c];
            }
        });
    }
}

/// Column-major dense matrix `(I - M)` as produced by the assembler.
#[cfg(test)]
pub(crate) struct DenseOperator<'a> {
    pub data: &'a [Complex64],
    pub dim: usize,
}

#[cfg(test)]
impl LinearOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.fill(ZERO);
        for (col, xj) in self.data.chunks_exact(self.dim).zip(x) {
            for (yi, a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
    }
}

/// Smallest 2^a·3^b·5^c that is at least `n`.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Pair sum as a 2D convolution for atoms on a planar rectangular grid.
///
/// The Green tensor between two grid sites depends only on their integer
/// offset, so `M v` is a discrete convolution evaluated by zero-padded FFTs
/// in O(N log N). With all atoms in one plane, `G_xz = G_yz = 0` and the z
/// component decouples.
pub(crate) struct LatticeFftOperator<'a> {
    grid: &'a GridIndex,
    couplings: &'a [Complex64],
    px: usize,
    py: usize,
    forward_x: Arc<dyn Fft<f64>>,
    forward_y: Arc<dyn Fft<f64>>,
    inverse_x: Arc<dyn Fft<f64>>,
    inverse_y: Arc<dyn Fft<f64>>,
    /// Spectra of the xx, xy, yy and zz kernels, in transposed layout.
    spectra: [Vec<Complex64>; 4],
}

impl<'a> LatticeFftOperator<'a> {
    /// Returns `None` when the padded grid would be far larger than the
    /// number of atoms (a sparse occupancy where the direct sum is cheaper).
    pub fn new(grid: &'a GridIndex, couplings: &'a [Complex64], k: f64) -> Option<Self> {
        let [nx, ny] = grid.dims;
        let px = smooth_size(2 * nx - 1);
        let py = smooth_size(2 * ny - 1);
        if px * py > 64 * couplings.len() + 4096 {
            return None;
        }
        let mut planner = FftPlanner::new();
        let forward_x = planner.plan_fft_forward(px);
        let forward_y = planner.plan_fft_forward(py);
        let inverse_x = planner.plan_fft_inverse(px);
        let inverse_y = planner.plan_fft_inverse(py);
        let mut spectra: [Vec<Complex64>; 4] = std::array::from_fn(|_| vec![ZERO; px * py]);
        let [sx, sy] = grid.spacing;
        for dj in -(ny as i64 - 1)..=(ny as i64 - 1) {
            for di in -(nx as i64 - 1)..=(nx as i64 - 1) {
                if di == 0 && dj == 0 {
                    continue;
                }
                let d = [di as f64 * sx, dj as f64 * sy, 0.0];
                let (diag, dyad) = kernel(d, k);
                let idx = (dj.rem_euclid(py as i64) as usize) * px + di.rem_euclid(px as i64) as usize;
                spectra[0][idx] = diag + dyad * (d[0] * d[0]);
                spectra[1][idx] = dyad * (d[0] * d[1]);
                spectra[2][idx] = diag + dyad * (d[1] * d[1]);
                spectra[3][idx] = diag;
            }
        }
        let mut op = Self { grid, couplings, px, py, forward_x, forward_y, inverse_x, inverse_y, spectra };
        let mut spectra = std::mem::take(&mut op.spectra);
        for s in spectra.iter_mut() {
            *s = op.forward(std::mem::take(s));
        }
        op.spectra = spectra;
        Some(op)
    }

    fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; src.len()];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = src[r * cols + c];
            }
        }
        out
    }

    /// Row-major `py × px` grid to its spectrum stored as `px × py`.
    fn forward(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.forward_x.process(&mut data);
        let mut t = Self::transpose(&data, self.py, self.px);
        self.forward_y.process(&mut t);
        t
    }

    fn inverse(&self, mut spectrum: Vec<Complex64>) -> Vec<Complex64> {
        self.inverse_y.process(&mut spectrum);
        let mut data = Self::transpose(&spectrum, self.px, self.py);
        self.inverse_x.process(&mut data);
        let scale = 1.0 / (self.px * self.py) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }
}

impl LinearOperator for LatticeFftOperator<'_> {
    fn dim(&self) -> usize {
        3 * self.couplings.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let size = self.px * self.py;
        let src = sources(self.couplings, x);
        let mut planes: Vec<Vec<Complex64>> = (0..3).map(|_| vec![ZERO; size]).collect();
        for (cell, s) in self.grid.cells.iter().zip(&src) {
            let idx = cell[1] * self.px + cell[0];
            for c in 0..3 {
                planes[c][idx] = s[c];
            }
        }
        let hat: Vec<Vec<Complex64>> = planes.into_par_iter().map(|p| self.forward(p)).collect();
        let [kxx, kxy, kyy, kzz] = &self.spectra;
        let mut out_x = vec![ZERO; size];
        let mut out_y = vec![ZERO; size];
        let mut out_z = vec![ZERO; size];
        for i in 0..size {
            out_x[i] = kxx[i] * hat[0][i] + kxy[i] * hat[1][i];
            out_y[i] = kxy[i] * hat[0][i] + kyy[i] * hat[1][i];
            out_z[i] = kzz[i] * hat[2][i];
        }
        let fields: Vec<Vec<Complex64>> = vec![out_x, out_y, out_z].into_par_iter().map(|s| self.inverse(s)).collect();
        for (n, cell) in self.grid.cells.iter().enumerate() {
            let idx = cell[1] * self.px + cell[0];
            for c in 0..3 {
                y[3 * n + c] = x[3 * n + c] - fields[c][idx];
            }
        }
    }
}
