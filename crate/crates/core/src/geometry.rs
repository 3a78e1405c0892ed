//! Atom-array builders.
//!
//! Atoms are indexed row-major from the bottom: index `n = j·n_x + i` for
//! column `i` (along x) and row `j` (along y). Every downstream vector uses
//! this order. All builders centre the lattice on the beam axis in the
//! `z = 0` plane.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::coupling::{Coupling, Species, SpeciesParams};
use crate::error::{ensure_positive, Error, Result};
use crate::Point;

/// Integer lattice coordinates of each atom on a regular planar grid.
///
/// When present, atom `n` sits at `origin + cells[n] ⊙ spacing` in the plane
/// `z = plane_z`. The fast lattice operator uses this to turn the pair sum
/// into a convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GridIndex {
    pub spacing: [f64; 2],
    pub dims: [usize; 2],
    pub cells: Vec<[usize; 2]>,
    pub plane_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomArray {
    positions: Vec<Point>,
    species: Vec<Species>,
    lattice_constant: f64,
    descriptor: String,
    grid: Option<GridIndex>,
}

impl AtomArray {
    /// Array from explicit positions. Rejects mismatched lengths, non-finite
    /// coordinates and coincident atoms. No grid index is attached.
    pub fn from_parts(
        positions: Vec<Point>,
        species: Vec<Species>,
        lattice_constant: f64,
        descriptor: impl Into<String>,
    ) -> Result<Self> {
        if positions.len() != species.len() {
            return Err(Error::Geometry(format!(
                "{} positions but {} species labels",
                positions.len(),
                species.len()
            )));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Geometry("non-finite atom coordinate".into()));
        }
        if !(lattice_constant.is_finite() && lattice_constant >= 0.0) {
            return Err(Error::Geometry(format!("bad lattice constant {lattice_constant}")));
        }
        let mut seen = HashSet::with_capacity(positions.len());
        for p in &positions {
            let key = p.map(|x| (x * 1e9).round() as i64);
            if !seen.insert(key) {
                return Err(Error::Geometry(format!("duplicate atom position {p:?}")));
            }
        }
        Ok(Self {
            positions,
            species,
            lattice_constant,
            descriptor: descriptor.into(),
            grid: None,
        })
    }

    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            species: Vec::new(),
            lattice_constant: 0.0,
            descriptor: "empty".into(),
            grid: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn lattice_constant(&self) -> f64 {
        self.lattice_constant
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn grid(&self) -> Option<&GridIndex> {
        self.grid.as_ref()
    }

    pub fn count(&self, species: Species) -> usize {
        self.species.iter().filter(|&&s| s == species).count()
    }

    pub fn centroid(&self) -> Point {
        if self.is_empty() {
            return [0.0; 3];
        }
        let n = self.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi;
            }
        }
        c.map(|x| x / n)
    }

    /// Atoms of one species, as a new array (grid index dropped).
    pub fn sublattice(&self, species: Species) -> AtomArray {
        let (positions, labels): (Vec<_>, Vec<_>) = self
            .positions
            .iter()
            .zip(&self.species)
            .filter(|(_, &s)| s == species)
            .map(|(p, s)| (*p, *s))
            .unzip();
        AtomArray {
            positions,
            species: labels,
            lattice_constant: self.lattice_constant,
            descriptor: format!("{} sublattice {species}", self.descriptor),
            grid: None,
        }
    }

    /// Smallest pairwise distance (brute force, O(N²)).
    pub fn min_pair_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, p) in self.positions.iter().enumerate() {
            for q in &self.positions[i + 1..] {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    /// Writes `x,y,z,species` with a header line, one atom per row in
    /// canonical order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "z", "species"])?;
        for (p, s) in self.positions.iter().zip(&self.species) {
            w.write_record([p[0].to_string(), p[1].to_string(), p[2].to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`AtomArray::write_csv`].
    ///
    /// The lattice constant is taken as the smallest pairwise distance; a
    /// grid index is recovered when the atoms sit on a regular planar grid.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["x", "y", "z", "species"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse(format!("expected header x,y,z,species, got {:?}", headers.iter().collect::<Vec<_>>())));
        }
        let mut positions = Vec::new();
        let mut species = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Parse(format!("row {}: expected 4 fields", line + 1)));
            }
            let mut p = [0.0; 3];
            for (c, slot) in p.iter_mut().enumerate() {
                *slot = record[c]
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {}: bad coordinate `{}`: {e}", line + 1, &record[c])))?;
            }
            positions.push(p);
            species.push(record[3].parse()?);
        }
        let mut array = AtomArray::from_parts(positions, species, 0.0, "csv import")?;
        if array.len() <= 4096 {
            array.lattice_constant = array.min_pair_distance().unwrap_or(0.0);
        }
        array.grid = detect_grid(&array.positions);
        if let (Some(grid), 0.0) = (&array.grid, array.lattice_constant) {
            array.lattice_constant = grid.spacing[0].min(grid.spacing[1]);
        }
        Ok(array)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }
}

/// Recovers a [`GridIndex`] when all atoms share one z and sit on a
/// rectangular grid whose spacings are the smallest nonzero coordinate gaps.
pub fn detect_grid(positions: &[Point]) -> Option<GridIndex> {
    let first = positions.first()?;
    let plane_z = first[2];
    if positions.iter().any(|p| p[2] != plane_z) {
        return None;
    }
    let axis = |c: usize| -> Option<(f64, f64, usize)> {
        let mut xs: Vec<f64> = positions.iter().map(|p| p[c]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let lo = xs[0];
        if xs.len() == 1 {
            return Some((lo, 1.0, 1));
        }
        let step = xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let span = xs[xs.len() - 1] - lo;
        let count = (span / step).round() as usize + 1;
        if count > 1 << 16 {
            return None;
        }
        Some((lo, step, count))
    };
    let (x0, sx, nx) = axis(0)?;
    let (y0, sy, ny) = axis(1)?;
    let mut cells = Vec::with_capacity(positions.len());
    for p in positions {
        let fi = (p[0] - x0) / sx;
        let fj = (p[1] - y0) / sy;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 {
            return None;
        }
        cells.push([i as usize, j as usize]);
    }
    Some(GridIndex { spacing: [sx, sy], dims: [nx, ny], cells, plane_z })
}

fn ensure_dims(n_x: usize, n_y: usize) -> Result<()> {
    if n_x == 0 || n_y == 0 {
        return Err(Error::param("dimensions", format!("array dimensions must be ≥ 1, got {n_x}×{n_y}")));
    }
    Ok(())
}

fn centred(index: usize, count: usize, spacing: f64) -> f64 {
    (index as f64 - (count as f64 - 1.0) / 2.0) * spacing
}

fn regular_grid(
    n_x: usize,
    n_y: usize,
    a_x: f64,
    a_y: f64,
    label: impl Fn(usize, usize) -> Species,
    lattice_constant: f64,
    descriptor: String,
) -> AtomArray {
    let mut positions = Vec::with_capacity(n_x * n_y);
    let mut species = Vec::with_capacity(n_x * n_y);
    let mut cells = Vec::with_capacity(n_x * n_y);
    for j in 0..n_y {
        for i in 0..n_x {
            positions.push([centred(i, n_x, a_x), centred(j, n_y, a_y), 0.0]);
            species.push(label(i, j));
            cells.push([i, j]);
        }
    }
    AtomArray {
        positions,
        species,
        lattice_constant,
        descriptor,
        grid: Some(GridIndex { spacing: [a_x, a_y], dims: [n_x, n_y], cells, plane_z: 0.0 }),
    }
}

/// Direction along which the species stripes of a pixel run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StripeOrientation {
    /// Rows of constant y alternate species; stripes run along x.
    #[serde(alias = "rows-along-x")]
    X,
    /// Columns of constant x alternate species; stripes run along y.
    #[serde(alias = "rows-along-y")]
    Y,
}

impl StripeOrientation {
    fn label(self, i: usize, j: usize, swap: bool) -> Species {
        let line = match self {
            StripeOrientation::X => j,
            StripeOrientation::Y => i,
        };
        let even = if swap { Species::B } else { Species::A };
        if line % 2 == 0 {
            even
        } else {
            even.other()
        }
    }
}

/// Square lattice of `n_x × n_y` sites, spacing `a`, with rows of constant y
/// alternating A (even rows from the bottom) and B (odd rows).
pub fn build_stripe_array(n_x: usize, n_y: usize, a: f64) -> Result<AtomArray> {
    build_stripe_array_with(n_x, n_y, a, StripeOrientation::X, false)
}

/// Stripe array with a chosen orientation; `swap` makes even lines species B.
pub fn build_stripe_array_with(
    n_x: usize,
    n_y: usize,
    a: f64,
    orientation: StripeOrientation,
    swap: bool,
) -> Result<AtomArray> {
    ensure_dims(n_x, n_y)?;
    ensure_positive("a", a)?;
    Ok(regular_grid(
        n_x,
        n_y,
        a,
        a,
        |i, j| orientation.label(i, j, swap),
        a,
        format!("stripe {n_x}x{n_y} a={a} orientation={orientation:?} swap={swap}"),
    ))
}

/// Centred rectangular lattice of a single species.
pub fn build_single_species_rectangle(
    n_x: usize,
    n_y: usize,
    a_x: f64,
    a_y: f64,
    species: Species,
) -> Result<AtomArray> {
    ensure_dims(n_x, n_y)?;
    ensure_positive("a_x", a_x)?;
    ensure_positive("a_y", a_y)?;
    Ok(regular_grid(
        n_x,
        n_y,
        a_x,
        a_y,
        |_, _| species,
        a_x.min(a_y),
        format!("rectangle {n_x}x{n_y} a_x={a_x} a_y={a_y} species={species}"),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelSpec {
    /// Side length in lattice sites.
    pub side: usize,
    pub orientation: StripeOrientation,
    #[serde(default)]
    pub swap: bool,
}

/// Grid of square pixels separated by isolation bands of a single species.
///
/// `pixels[r][c]` is the pixel in row `r` (from the bottom) and column `c`.
/// Isolation bands sit only between neighbouring pixels, so the global side
/// is the sum of the pixel sides plus the isolation widths between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelLayout {
    pub pixels: Vec<Vec<PixelSpec>>,
    pub isolation: usize,
    #[serde(default = "default_fill")]
    pub fill: Species,
}

fn default_fill() -> Species {
    Species::A
}

/// Site range occupied by one pixel of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRegion {
    pub row: usize,
    pub col: usize,
    pub x_sites: std::ops::Range<usize>,
    pub y_sites: std::ops::Range<usize>,
    pub spec: PixelSpec,
}

impl PixelLayout {
    /// The 2×2 demonstration layout: 30-site pixels, 11-site isolation,
    /// stripe orientations alternating like a checkerboard.
    pub fn demo() -> Self {
        let p = |orientation| PixelSpec { side: 30, orientation, swap: false };
        PixelLayout {
            pixels: vec![
                vec![p(StripeOrientation::X), p(StripeOrientation::Y)],
                vec![p(StripeOrientation::Y), p(StripeOrientation::X)],
            ],
            isolation: 11,
            fill: Species::A,
        }
    }

    /// Column widths and row heights after validating the layout.
    fn extents(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let rows = self.pixels.len();
        if rows == 0 || self.pixels[0].is_empty() {
            return Err(Error::Geometry("pixel layout is empty".into()));
        }
        let cols = self.pixels[0].len();
        if self.pixels.iter().any(|r| r.len() != cols) {
            return Err(Error::Geometry("pixel layout rows have different lengths".into()));
        }
        let widths: Vec<usize> = self.pixels[0].iter().map(|p| p.side).collect();
        let heights: Vec<usize> = self.pixels.iter().map(|r| r[0].side).collect();
        for (r, row) in self.pixels.iter().enumerate() {
            for (c, p) in row.iter().enumerate() {
                if p.side == 0 {
                    return Err(Error::Geometry(format!("pixel ({r},{c}) has zero side")));
                }
                if p.side != widths[c] || p.side != heights[r] {
                    return Err(Error::Geometry(format!(
                        "pixel ({r},{c}) side {} does not fit column width {} / row height {}",
                        p.side, widths[c], heights[r]
                    )));
                }
            }
        }
        Ok((widths, heights))
    }

    /// Global side length in sites.
    pub fn side(&self) -> Result<usize> {
        let (widths, heights) = self.extents()?;
        let w = widths.iter().sum::<usize>() + self.isolation * (widths.len() - 1);
        let h = heights.iter().sum::<usize>() + self.isolation * (heights.len() - 1);
        if w != h {
            return Err(Error::Geometry(format!("layout is {w}×{h} sites, not square")));
        }
        Ok(w)
    }

    pub fn regions(&self) -> Result<Vec<PixelRegion>> {
        let (widths, heights) = self.extents()?;
        let starts = |sizes: &[usize]| {
            let mut acc = 0;
            sizes
                .iter()
                .map(|s| {
                    let start = acc;
                    acc += s + self.isolation;
                    start..start + s
                })
                .collect::<Vec<_>>()
        };
        let xs = starts(&widths);
        let ys = starts(&heights);
        let mut out = Vec::new();
        for (r, row) in self.pixels.iter().enumerate() {
            for (c, spec) in row.iter().enumerate() {
                out.push(PixelRegion {
                    row: r,
                    col: c,
                    x_sites: xs[c].clone(),
                    y_sites: ys[r].clone(),
                    spec: *spec,
                });
            }
        }
        Ok(out)
    }
}

/// Square superarray realising `layout` with spacing `a`.
///
/// Inside a pixel, stripe parity is counted from the pixel's own bottom-left
/// site. Isolation sites hold `layout.fill`.
pub fn build_pixel_superarray(layout: &PixelLayout, a: f64) -> Result<AtomArray> {
    ensure_positive("a", a)?;
    let side = layout.side()?;
    let regions = layout.regions()?;
    let mut labels = vec![layout.fill; side * side];
    for region in &regions {
        for j in region.y_sites.clone() {
            for i in region.x_sites.clone() {
                let li = i - region.x_sites.start;
                let lj = j - region.y_sites.start;
                labels[j * side + i] = region.spec.orientation.label(li, lj, region.spec.swap);
            }
        }
    }
    Ok(regular_grid(
        side,
        side,
        a,
        a,
        |i, j| labels[j * side + i],
        a,
        format!("pixel superarray {side}x{side} a={a} pixels={} isolation={}", regions.len(), layout.isolation),
    ))
}

/// Per-atom couplings, chosen by species label.
pub fn species_couplings(array: &AtomArray, params_a: &SpeciesParams, params_b: &SpeciesParams) -> Result<Vec<Coupling>> {
    let ga = params_a.coupling()?;
    let gb = params_b.coupling()?;
    Ok(array
        .species()
        .iter()
        .map(|s| match s {
            Species::A => ga,
            Species::B => gb,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn key(p: &Point) -> [i64; 3] {
        p.map(|x| (x * 1e9).round() as i64)
    }

    fn point_set(points: impl IntoIterator<Item = Point>) -> HashSet<[i64; 3]> {
        points.into_iter().map(|p| key(&p)).collect()
    }

    fn shifted(array: &AtomArray, by: Point) -> Vec<Point> {
        array.positions().iter().map(|p| [p[0] + by[0], p[1] + by[1], p[2] + by[2]]).collect()
    }

    #[test]
    fn two_by_two_stripe() {
        let arr = build_stripe_array(2, 2, 0.4).unwrap();
        assert_eq!(arr.species(), &[Species::A, Species::A, Species::B, Species::B]);
        let expect = [[-0.2, -0.2, 0.0], [0.2, -0.2, 0.0], [-0.2, 0.2, 0.0], [0.2, 0.2, 0.0]];
        for (p, e) in arr.positions().iter().zip(expect) {
            assert!(p.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-15));
        }
    }

    #[test]
    fn figure_sized_stripe() {
        let arr = build_stripe_array(26, 26, 0.4).unwrap();
        assert_eq!(arr.len(), 676);
        assert_eq!(arr.count(Species::A), 338);
        assert_eq!(arr.count(Species::B), 338);
        assert!(arr.min_pair_distance().unwrap() >= 0.4 - 1e-9);
    }

    #[test]
    fn sublattices_are_translates() {
        let arr = build_stripe_array(7, 6, 0.3).unwrap();
        let a = arr.sublattice(Species::A);
        let b = arr.sublattice(Species::B);
        assert_eq!(point_set(shifted(&a, [0.0, 0.3, 0.0])), point_set(b.positions().iter().copied()));
    }

    #[test]
    fn rectangle_is_a_sublattice() {
        let a = 0.27;
        let stripe = build_stripe_array(26, 26, a).unwrap().sublattice(Species::A);
        let rect = build_single_species_rectangle(26, 13, a, 2.0 * a, Species::A).unwrap();
        // The A rows of the stripe array are offset by -a/2 from the centre.
        let c = stripe.centroid();
        let recentred = shifted(&stripe, [-c[0], -c[1], -c[2]]);
        assert_eq!(point_set(recentred), point_set(rect.positions().iter().copied()));
    }

    #[test]
    fn tiny_rectangles() {
        let one = build_single_species_rectangle(1, 1, 0.3, 0.5, Species::B).unwrap();
        assert_eq!(one.positions(), &[[0.0, 0.0, 0.0]]);
        let sq = build_single_species_rectangle(3, 3, 0.5, 0.5, Species::A).unwrap();
        assert_eq!(sq.len(), 9);
        assert_eq!(sq.positions()[0], [-0.5, -0.5, 0.0]);
        assert_eq!(sq.positions()[8], [0.5, 0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(build_stripe_array(0, 3, 0.4).is_err());
        assert!(build_stripe_array(3, 3, -0.4).is_err());
        assert!(build_single_species_rectangle(2, 2, 0.4, 0.0, Species::A).is_err());
    }

    #[test]
    fn demo_layout() {
        let layout = PixelLayout::demo();
        assert_eq!(layout.side().unwrap(), 71);
        let arr = build_pixel_superarray(&layout, 0.4).unwrap();
        assert_eq!(arr.len(), 5041);
        let isolation = 5041 - 4 * 900;
        // 30-row pixels hold 15 lines of each species.
        assert_eq!(arr.count(Species::A) as i64 - arr.count(Species::B) as i64, isolation as i64);
        let direct = arr.species().iter().map(|s| if *s == Species::A { 1 } else { -1 }).sum::<i64>();
        assert_eq!(direct, isolation as i64);
    }

    #[test]
    fn single_pixel_is_stripe_array() {
        let layout = PixelLayout {
            pixels: vec![vec![PixelSpec { side: 9, orientation: StripeOrientation::X, swap: false }]],
            isolation: 0,
            fill: Species::A,
        };
        let pix = build_pixel_superarray(&layout, 0.35).unwrap();
        let stripe = build_stripe_array(9, 9, 0.35).unwrap();
        assert_eq!(pix.positions(), stripe.positions());
        assert_eq!(pix.species(), stripe.species());
    }

    #[test]
    fn swapped_pixels_are_complementary() {
        let mut layout = PixelLayout::demo();
        let plain = build_pixel_superarray(&layout, 0.4).unwrap();
        layout.pixels.iter_mut().flatten().for_each(|p| p.swap = true);
        let swapped = build_pixel_superarray(&layout, 0.4).unwrap();
        for region in layout.regions().unwrap() {
            for j in region.y_sites.clone() {
                for i in region.x_sites.clone() {
                    let n = j * 71 + i;
                    assert_eq!(plain.species()[n], swapped.species()[n].other());
                }
            }
        }
        // Isolation untouched.
        assert_eq!(plain.species()[30], Species::A);
        assert_eq!(swapped.species()[30], Species::A);
    }

    #[test]
    fn pixel_orientation_y_alternates_columns() {
        let arr = build_pixel_superarray(&PixelLayout::demo(), 0.4).unwrap();
        // Bottom-right pixel (row 0, col 1) starts at x-site 41.
        assert_eq!(arr.species()[41], Species::A);
        assert_eq!(arr.species()[42], Species::B);
        assert_eq!(arr.species()[71 + 41], Species::A);
        // Bottom-left pixel stripes along x.
        assert_eq!(arr.species()[1], Species::A);
        assert_eq!(arr.species()[71], Species::B);
    }

    #[test]
    fn rejects_ill_sized_layouts() {
        let p = |side| PixelSpec { side, orientation: StripeOrientation::X, swap: false };
        let ragged = PixelLayout { pixels: vec![vec![p(3), p(3)], vec![p(3)]], isolation: 1, fill: Species::A };
        assert!(build_pixel_superarray(&ragged, 0.4).is_err());
        let mismatched = PixelLayout { pixels: vec![vec![p(3), p(4)], vec![p(3), p(3)]], isolation: 1, fill: Species::A };
        assert!(build_pixel_superarray(&mismatched, 0.4).is_err());
        let empty = PixelLayout { pixels: vec![], isolation: 1, fill: Species::A };
        assert!(build_pixel_superarray(&empty, 0.4).is_err());
        let not_square = PixelLayout { pixels: vec![vec![p(3), p(3)]], isolation: 1, fill: Species::A };
        assert!(not_square.side().is_err());
    }

    #[test]
    fn couplings_follow_labels() {
        let arr = build_single_species_rectangle(3, 3, 0.3, 0.3, Species::A).unwrap();
        let pa = SpeciesParams::new(Species::A, 0.0, 1.0).unwrap();
        let pb = SpeciesParams::new(Species::B, 5.0, 1.0).unwrap();
        let g = species_couplings(&arr, &pa, &pb).unwrap();
        assert!(g.iter().all(|c| c.value() == Complex64::new(0.0, 3.0)));

        let arr = build_stripe_array(4, 4, 0.3).unwrap();
        let pa = SpeciesParams::new(Species::A, 0.7, 1.0).unwrap();
        let pb = SpeciesParams::new(Species::B, -0.7, 1.0).unwrap();
        let g = species_couplings(&arr, &pa, &pb).unwrap();
        assert_eq!(g[0].value(), -g[4].value().conj());

        let far = SpeciesParams::new(Species::B, -1e6, 1.0).unwrap();
        let g = species_couplings(&arr, &pa, &far).unwrap();
        for (c, s) in g.iter().zip(arr.species()) {
            if *s == Species::B {
                assert!(c.value().norm() < 3e-6);
            }
        }
    }

    #[test]
    fn csv_round_trip_and_grid_recovery() {
        let arr = build_pixel_superarray(
            &PixelLayout {
                pixels: vec![vec![PixelSpec { side: 4, orientation: StripeOrientation::Y, swap: true }; 2]; 2],
                isolation: 2,
                fill: Species::B,
            },
            0.4,
        )
        .unwrap();
        let mut buf = Vec::new();
        arr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,z,species\n"));
        let back = AtomArray::from_csv_str(&text).unwrap();
        assert_eq!(back.positions(), arr.positions());
        assert_eq!(back.species(), arr.species());
        assert!((back.lattice_constant() - 0.4).abs() < 1e-12);
        let grid = back.grid().unwrap();
        assert_eq!(grid.dims, [10, 10]);
        assert_eq!(grid.cells, arr.grid().unwrap().cells);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(AtomArray::from_csv_str("a,b,c,d\n1,2,3,A\n").is_err());
        assert!(AtomArray::from_csv_str("x,y,z,species\n1,2,nope,A\n").is_err());
        assert!(AtomArray::from_csv_str("x,y,z,species\n1,2,3,Q\n").is_err());
        assert!(AtomArray::from_csv_str("x,y,z,species\n1,2,3,A\n1,2,3,B\n").is_err());
        assert!(AtomArray::from_csv_str("x,y,z,species\n1,2,3\n").is_err());
        assert!(AtomArray::from_csv_str("x,y,z,species\ninf,2,3,A\n").is_err());
        let empty = AtomArray::from_csv_str("x,y,z,species\n").unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn off_grid_points_get_no_index() {
        let pts = vec![[0.0, 0.0, 0.0], [0.4, 0.0, 0.0], [0.93, 0.1, 0.0]];
        assert!(detect_grid(&pts).is_none());
        let pts = vec![[0.0, 0.0, 0.0], [0.4, 0.0, 0.1]];
        assert!(detect_grid(&pts).is_none());
    }

    proptest! {
        #[test]
        fn centred_and_planar(nx in 1usize..30, ny in 1usize..30, a in 0.05f64..1.0) {
            let arr = build_stripe_array(nx, ny, a).unwrap();
            let c = arr.centroid();
            prop_assert!(c.iter().all(|x| x.abs() < 1e-12));
            prop_assert!(arr.positions().iter().all(|p| p[2] == 0.0));
            prop_assert_eq!(arr.len(), nx * ny);
            let plain = build_single_species_rectangle(nx, ny, a, a, Species::A).unwrap();
            prop_assert_eq!(arr.positions(), plain.positions());
        }
    }
}
