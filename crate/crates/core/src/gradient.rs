use crate::grid::{ScalarField, VectorField};
use crate::scalar::Scalar;

/// Cell-based first differences, one sample per cell in 1D and one per
/// triangle in 2D. Exact for affine fields.
pub fn discrete_gradient<T: Scalar>(u: &ScalarField<T>) -> VectorField<T> {
    let grid = u.grid();
    let d = grid.dimension();
    let spc = grid.samples_per_cell();
    let inv_h: Vec<T> = grid.spacing().iter().map(|&h| T::one() / h).collect();
    let v = u.values();
    let mut components = Vec::with_capacity(grid.cell_count() * spc * d);
    for cell in 0..grid.cell_count() {
        for s in 0..spc {
            let pairs = grid.gradient_pairs(cell, s);
            for axis in 0..d {
                let (from, to) = pairs[axis];
                components.push((v[to] - v[from]) * inv_h[axis]);
            }
        }
    }
    VectorField::from_components(grid.clone(), components)
}
