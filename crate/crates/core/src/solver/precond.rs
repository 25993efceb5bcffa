use crate::energy::{cell_mean, gradient_sample, norm2, ProblemSpec};
use crate::error::Result;
use crate::scalar::Scalar;

use super::linalg::{BandedSpd, CholeskyFactor, InteriorMap};

/// Relative floor on `|∇u|` and `|u|` in the curvature weights, so the
/// approximation stays positive definite where `p > 2` and bounded where `p < 2`.
const CURVATURE_FLOOR: f64 = 1e-8;

/// Symmetric positive definite approximation of the Hessian of
/// `∫ |∇u|^p + Σ vol · Φ(cell, u_mid)` on interior unknowns, where
/// `mass_curvature(cell, |m|, p)` returns `Φ''` (non-negative).
pub(crate) fn curvature_matrix<T: Scalar>(
    values: &[T],
    spec: &ProblemSpec<T>,
    map: &InteriorMap,
    mass_curvature: impl Fn(usize, T, T) -> T,
) -> Result<CholeskyFactor<T>> {
    let grid = spec.grid();
    let dim = grid.dimension();
    let w = grid.sample_weight();
    let vol = grid.cell_volume();
    let two = T::lit(2.0);

    let mut gmax = T::zero();
    let mut mmax = T::zero();
    for cell in 0..grid.cell_count() {
        for s in 0..grid.samples_per_cell() {
            gmax = gmax.max(norm2(&gradient_sample(grid, values, cell, s)));
        }
        mmax = mmax.max(cell_mean(grid, values, cell).abs());
    }
    let gfloor = if gmax > T::zero() { gmax * T::lit(CURVATURE_FLOOR) } else { T::one() };
    let mfloor = if mmax > T::zero() { mmax * T::lit(CURVATURE_FLOOR) } else { T::one() };

    let mut mat = BandedSpd::zeros(map.len(), map.bandwidth);
    for cell in 0..grid.cell_count() {
        let p = spec.p().at(cell);
        for s in 0..grid.samples_per_cell() {
            let g = gradient_sample(grid, values, cell, s);
            let mag = norm2(&g);
            let eff = mag.max(gfloor);
            let scale = w * p * eff.powf(p - two);
            // H_g = scale · (I + (p - 2) ĝ ĝᵀ) for p ≥ 2. For p < 2 the radial
            // term is dropped: scale · I majorizes |g|^p, and the exact Hessian
            // makes Newton steps flip g ↦ -g near critical points.
            let mut hg = [[T::zero(); 2]; 2];
            for k in 0..dim {
                hg[k][k] = scale;
            }
            if mag >= gfloor && p >= two {
                for k in 0..dim {
                    for l in 0..dim {
                        hg[k][l] = hg[k][l] + scale * (p - two) * g[k] * g[l] / (mag * mag);
                    }
                }
            }
            let pairs = grid.gradient_pairs(cell, s);
            let h = grid.spacing();
            for k in 0..dim {
                let (fk, tk) = pairs[k];
                for l in 0..dim {
                    let (fl, tl) = pairs[l];
                    let c = hg[k][l] / (h[k] * h[l]);
                    for (nk, sk) in [(tk, T::one()), (fk, -T::one())] {
                        for (nl, sl) in [(tl, T::one()), (fl, -T::one())] {
                            if let (Some(i), Some(j)) = (map.to_unknown[nk], map.to_unknown[nl]) {
                                // (j, i) lands in the same symmetric slot
                                if i >= j {
                                    mat.add(i, j, c * sk * sl);
                                }
                            }
                        }
                    }
                }
            }
        }
        let nodes = grid.cell_nodes(cell);
        let nodes = nodes.as_slice();
        let m = cell_mean(grid, values, cell).abs().max(mfloor);
        let curv = mass_curvature(cell, m, p);
        if curv > T::zero() {
            let nc = T::from_usize_lossy(nodes.len());
            let c = vol * curv / (nc * nc);
            for &a in nodes {
                for &b in nodes {
                    if let (Some(i), Some(j)) = (map.to_unknown[a], map.to_unknown[b]) {
                        if i >= j {
                            mat.add(i, j, c);
                        }
                    }
                }
            }
        }
    }
    mat.cholesky()
}
