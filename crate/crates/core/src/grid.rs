//! Uniform tensor grids on an interval or a rectangle, and the grid functions
//! that live on them.
//!
//! Nodes are numbered x-fastest: node `(i, j)` has index `i + nx * j`. Cells are
//! numbered the same way over `(nx - 1) x (ny - 1)`. In 2D every cell is split
//! along its `(i, j) -> (i + 1, j + 1)` diagonal into two triangles, each of
//! which carries one constant gradient sample; in 1D a cell carries a single
//! sample. Zeroth-order integrands are evaluated once per cell at the midpoint,
//! using the average of the cell's corner values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A uniform grid over `Ω = Π [lo_k, hi_k]`, with Dirichlet nodes on `∂Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    dimension: usize,
    extents: Vec<(T, T)>,
    node_counts: Vec<usize>,
    spacing: Vec<T>,
}

/// Build a uniform grid. `extents` and `node_counts` must have `dimension` entries.
pub fn build_grid<T: Scalar>(
    dimension: usize,
    extents: &[(T, T)],
    node_counts: &[usize],
) -> Result<GridSpec<T>> {
    if dimension != 1 && dimension != 2 {
        return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dimension}")));
    }
    if extents.len() != dimension || node_counts.len() != dimension {
        return Err(Error::InvalidGrid(format!(
            "expected {dimension} extents and node counts, got {} and {}",
            extents.len(),
            node_counts.len()
        )));
    }
    let mut spacing = Vec::with_capacity(dimension);
    for (axis, (&(lo, hi), &n)) in extents.iter().zip(node_counts).enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || hi - lo <= T::zero() {
            return Err(Error::InvalidGrid(format!(
                "axis {axis}: extent [{lo}, {hi}] has non-positive length"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("axis {axis}: node count {n} < 3")));
        }
        spacing.push((hi - lo) / T::from_usize_lossy(n - 1));
    }
    Ok(GridSpec {
        dimension,
        extents: extents.to_vec(),
        node_counts: node_counts.to_vec(),
        spacing,
    })
}

impl<T: Scalar> GridSpec<T> {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extents(&self) -> &[(T, T)] {
        &self.extents
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.node_counts
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> T {
        self.spacing.iter().copied().fold(T::infinity(), T::min)
    }

    /// Node counts padded to two axes (`ny = 1` in 1D).
    #[inline]
    pub fn nx_ny(&self) -> (usize, usize) {
        (self.node_counts[0], if self.dimension == 2 { self.node_counts[1] } else { 1 })
    }

    pub fn node_count(&self) -> usize {
        self.node_counts.iter().product()
    }

    pub fn cell_counts(&self) -> (usize, usize) {
        let (nx, ny) = self.nx_ny();
        (nx - 1, if self.dimension == 2 { ny - 1 } else { 1 })
    }

    pub fn cell_count(&self) -> usize {
        let (cx, cy) = self.cell_counts();
        cx * cy
    }

    /// Volume of one cell, `Π h_k`. Also the measure attached to one node in
    /// level-set and ball computations.
    pub fn cell_volume(&self) -> T {
        self.spacing.iter().copied().fold(T::one(), |acc, h| acc * h)
    }

    pub fn domain_measure(&self) -> T {
        self.extents.iter().fold(T::one(), |acc, &(lo, hi)| acc * (hi - lo))
    }

    /// Gradient samples per cell: one in 1D, two triangles in 2D.
    #[inline]
    pub fn samples_per_cell(&self) -> usize {
        self.dimension
    }

    /// Quadrature weight of a single gradient sample.
    pub fn sample_weight(&self) -> T {
        self.cell_volume() / T::from_usize_lossy(self.samples_per_cell())
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + self.node_counts[0] * j
    }

    #[inline]
    pub fn node_ij(&self, idx: usize) -> (usize, usize) {
        let nx = self.node_counts[0];
        (idx % nx, idx / nx)
    }

    /// Coordinates of a node; the second entry is zero in 1D.
    pub fn node_coords(&self, idx: usize) -> [T; 2] {
        let (i, j) = self.node_ij(idx);
        let x = self.extents[0].0 + T::from_usize_lossy(i) * self.spacing[0];
        let y = if self.dimension == 2 {
            self.extents[1].0 + T::from_usize_lossy(j) * self.spacing[1]
        } else {
            T::zero()
        };
        [x, y]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (nx, ny) = self.nx_ny();
        let (i, j) = self.node_ij(idx);
        i == 0 || i == nx - 1 || (self.dimension == 2 && (j == 0 || j == ny - 1))
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.node_count()).map(|k| self.is_boundary(k)).collect()
    }

    pub fn boundary_count(&self) -> usize {
        (0..self.node_count()).filter(|&k| self.is_boundary(k)).count()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| !self.is_boundary(k)).collect()
    }

    #[inline]
    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        let (cx, _) = self.cell_counts();
        (cell % cx, cell / cx)
    }

    /// Corner nodes of a cell: 2 in 1D, `[n00, n10, n01, n11]` in 2D.
    pub fn cell_nodes(&self, cell: usize) -> CellNodes {
        let (i, j) = self.cell_ij(cell);
        if self.dimension == 1 {
            CellNodes::Segment([i, i + 1])
        } else {
            let n00 = self.node_index(i, j);
            let n10 = self.node_index(i + 1, j);
            let n01 = self.node_index(i, j + 1);
            let n11 = self.node_index(i + 1, j + 1);
            CellNodes::Quad([n00, n10, n01, n11])
        }
    }

    pub fn cell_midpoint(&self, cell: usize) -> [T; 2] {
        let (i, j) = self.cell_ij(cell);
        let half = T::lit(0.5);
        let x = self.extents[0].0 + (T::from_usize_lossy(i) + half) * self.spacing[0];
        let y = if self.dimension == 2 {
            self.extents[1].0 + (T::from_usize_lossy(j) + half) * self.spacing[1]
        } else {
            T::zero()
        };
        [x, y]
    }

    /// Node pairs `(from, to)` per axis for gradient sample `s` of `cell`, so that
    /// `∂u/∂x_k ≈ (u[to] - u[from]) / h_k`.
    pub fn gradient_pairs(&self, cell: usize, s: usize) -> [(usize, usize); 2] {
        match self.cell_nodes(cell) {
            CellNodes::Segment([a, b]) => [(a, b), (a, b)],
            CellNodes::Quad([n00, n10, n01, n11]) => {
                if s == 0 {
                    // lower triangle (n00, n10, n11)
                    [(n00, n10), (n10, n11)]
                } else {
                    // upper triangle (n00, n01, n11)
                    [(n01, n11), (n00, n01)]
                }
            }
        }
    }

    /// Euclidean distance from a node to `center`.
    pub fn distance(&self, idx: usize, center: &[T]) -> T {
        let c = self.node_coords(idx);
        self.distance_point(c, center)
    }

    pub fn distance_point(&self, point: [T; 2], center: &[T]) -> T {
        let mut d2 = T::zero();
        for axis in 0..self.dimension {
            let d = point[axis] - center[axis];
            d2 = d2 + d * d;
        }
        d2.sqrt()
    }

    /// True when the closed ball `B_R(center)` lies inside the closed domain.
    pub fn contains_ball(&self, center: &[T], radius: T) -> bool {
        if center.len() != self.dimension || !(radius > T::zero()) {
            return false;
        }
        let slack = T::lit(1e-12) * self.domain_scale();
        self.extents
            .iter()
            .zip(center)
            .all(|(&(lo, hi), &c)| c - radius >= lo - slack && c + radius <= hi + slack)
    }

    pub(crate) fn domain_scale(&self) -> T {
        self.extents
            .iter()
            .map(|&(lo, hi)| hi.abs().max(lo.abs()).max(hi - lo))
            .fold(T::one(), T::max)
    }

    pub(crate) fn check_ball(&self, center: &[T], radius: T) -> Result<()> {
        if self.contains_ball(center, radius) {
            Ok(())
        } else {
            Err(Error::BallOutsideDomain {
                center: center.iter().map(|c| c.to_f64_lossy()).collect(),
                radius: radius.to_f64_lossy(),
            })
        }
    }

    /// Grid with half the spacing over the same domain (`n -> 2n - 1` nodes per axis).
    pub fn refined(&self) -> GridSpec<T> {
        let counts: Vec<usize> = self.node_counts.iter().map(|&n| 2 * n - 1).collect();
        build_grid(self.dimension, &self.extents, &counts).expect("refinement of a valid grid")
    }

    pub fn same_as(&self, other: &GridSpec<T>) -> bool {
        self == other
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec<T>) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} vs {:?} nodes",
                self.node_counts, other.node_counts
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellNodes {
    Segment([usize; 2]),
    Quad([usize; 4]),
}

impl CellNodes {
    pub fn as_slice(&self) -> &[usize] {
        match self {
            CellNodes::Segment(n) => n,
            CellNodes::Quad(n) => n,
        }
    }
}

/// Values attached to grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &GridSpec<T>) -> Self {
        Self { values: vec![T::zero(); grid.node_count()], grid: grid.clone() }
    }

    pub fn from_fn(grid: &GridSpec<T>, f: impl Fn([T; 2]) -> T) -> Result<Self> {
        let values = (0..grid.node_count()).map(|k| f(grid.node_coords(k))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Same grid, new values. Panics on length mismatch.
    pub fn with_values(&self, values: Vec<T>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self { grid: self.grid.clone(), values }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, t: T) -> Self {
        self.map(|v| v * t)
    }

    /// Value at the midpoint of `cell`: mean of the corner values.
    pub fn cell_mean(&self, cell: usize) -> T {
        let nodes = self.grid.cell_nodes(cell);
        let nodes = nodes.as_slice();
        let sum: T = nodes.iter().map(|&n| self.values[n]).sum();
        sum / T::from_usize_lossy(nodes.len())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_boundary(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.grid.is_boundary(*k))
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    /// Write one row per node: coordinates then value, with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
        if self.grid.dimension() == 1 {
            w.write_record(["x", "value"]).map_err(io)?;
        } else {
            w.write_record(["x", "y", "value"]).map_err(io)?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let c = self.grid.node_coords(k);
            let mut row = vec![c[0].to_string()];
            if self.grid.dimension() == 2 {
                row.push(c[1].to_string());
            }
            row.push(v.to_string());
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Gradient samples: `samples_per_cell` samples per cell, each with `dimension`
/// components, stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField<T> {
    grid: GridSpec<T>,
    components: Vec<T>,
}

impl<T: Scalar> VectorField<T> {
    pub(crate) fn from_components(grid: GridSpec<T>, components: Vec<T>) -> Self {
        debug_assert_eq!(
            components.len(),
            grid.cell_count() * grid.samples_per_cell() * grid.dimension()
        );
        Self { grid, components }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn sample_count(&self) -> usize {
        self.grid.cell_count() * self.grid.samples_per_cell()
    }

    /// Components of sample `s` in `cell`.
    pub fn sample(&self, cell: usize, s: usize) -> &[T] {
        let d = self.grid.dimension();
        let start = (cell * self.grid.samples_per_cell() + s) * d;
        &self.components[start..start + d]
    }

    pub fn magnitude(&self, cell: usize, s: usize) -> T {
        self.sample(cell, s).iter().fold(T::zero(), |acc, &g| acc + g * g).sqrt()
    }

    /// One axis component across all samples, in storage order.
    pub fn axis(&self, axis: usize) -> Vec<T> {
        self.components
            .chunks(self.grid.dimension())
            .map(|c| c[axis])
            .collect()
    }

    pub fn components(&self) -> &[T] {
        &self.components
    }

    pub fn max_abs(&self) -> T {
        self.components.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_five_nodes() {
        let g = build_grid(1, &[(0.0f64, 1.0)], &[5]).unwrap();
        assert_eq!(g.spacing()[0], 0.25);
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.boundary_count(), 2);
        assert_eq!(g.cell_count(), 4);
    }

    #[test]
    fn square_three_by_three() {
        let g = build_grid(2, &[(0.0f64, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.boundary_count(), 8);
        assert_eq!(g.interior_nodes(), vec![4]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(build_grid(1, &[(0.0f64, 1.0)], &[2]).is_err());
        assert!(build_grid(1, &[(1.0f64, 1.0)], &[5]).is_err());
        assert!(build_grid(1, &[(1.0f64, 0.0)], &[5]).is_err());
        assert!(build_grid(3, &[(0.0, 1.0); 3], &[5; 3]).is_err());
        assert!(build_grid(2, &[(0.0f64, 1.0)], &[5]).is_err());
    }

    #[test]
    fn ball_containment() {
        let g = build_grid(1, &[(0.0f64, 1.0)], &[9]).unwrap();
        assert!(g.contains_ball(&[0.5], 0.5));
        assert!(!g.contains_ball(&[0.5], 0.6));
        assert!(!g.contains_ball(&[0.5], 0.0));
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = build_grid(2, &[(0.0f64, 2.0), (0.0, 1.0)], &[5, 3]).unwrap();
        let r = g.refined();
        assert_eq!(r.node_counts(), &[9, 5]);
        assert_eq!(r.spacing()[0], g.spacing()[0] / 2.0);
    }

    #[test]
    fn csv_has_header_and_one_row_per_node() {
        let g = build_grid(2, &[(0.0f64, 1.0), (0.0, 1.0)], &[3, 4]).unwrap();
        let f = ScalarField::from_fn(&g, |c| c[0] + c[1]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,value");
        assert_eq!(lines.len(), 13);
    }

    #[test]
    fn field_rejects_nan_and_wrong_length() {
        let g = build_grid(1, &[(0.0f64, 1.0)], &[3]).unwrap();
        assert!(ScalarField::new(g.clone(), vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(ScalarField::new(g, vec![0.0; 4]).is_err());
    }
}
