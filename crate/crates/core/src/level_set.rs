//! Balls, super-level sets `A(k, R) = {x ∈ B_R : u(x) > k}` and oscillation.
//!
//! A ball is the set of grid nodes within Euclidean distance `R` of its center
//! and its measure is `cell_volume × member count`. Integrals over balls use the
//! cells whose midpoint lies in the ball.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetData<T> {
    pub level: T,
    pub center: Vec<T>,
    pub radius: T,
    pub member_mask: Vec<bool>,
    /// `|A(k, R)|`
    pub measure: T,
    /// Discrete measure of the ball itself.
    pub ball_measure: T,
    /// `M(u, R)`
    pub sup_on_ball: T,
    /// `m(u, R)`
    pub inf_on_ball: T,
    /// `osc(u, R) = M - m`
    pub oscillation: T,
}

impl<T: Scalar> LevelSetData<T> {
    pub fn member_count(&self) -> usize {
        self.member_mask.iter().filter(|&&m| m).count()
    }
}

#[inline]
fn radius_with_slack<T: Scalar>(grid: &GridSpec<T>, radius: T) -> T {
    radius + T::lit(1e-10) * grid.min_spacing()
}

/// Nodes of the discrete ball `B_R(center)`.
pub fn ball_nodes<T: Scalar>(grid: &GridSpec<T>, center: &[T], radius: T) -> Vec<usize> {
    let r = radius_with_slack(grid, radius);
    (0..grid.node_count()).filter(|&k| grid.distance(k, center) <= r).collect()
}

/// Cells whose midpoint lies in `B_R(center)`.
pub fn ball_cells<T: Scalar>(grid: &GridSpec<T>, center: &[T], radius: T) -> Vec<usize> {
    let r = radius_with_slack(grid, radius);
    (0..grid.cell_count())
        .filter(|&c| grid.distance_point(grid.cell_midpoint(c), center) <= r)
        .collect()
}

pub fn level_set<T: Scalar>(
    u: &ScalarField<T>,
    level: T,
    center: &[T],
    radius: T,
) -> Result<LevelSetData<T>> {
    let grid = u.grid();
    grid.check_ball(center, radius)?;
    let nodes = ball_nodes(grid, center, radius);
    let vol = grid.cell_volume();
    let mut member_mask = vec![false; grid.node_count()];
    let mut sup = T::neg_infinity();
    let mut inf = T::infinity();
    let mut members = 0usize;
    for &k in &nodes {
        let v = u.values()[k];
        sup = sup.max(v);
        inf = inf.min(v);
        if v > level {
            member_mask[k] = true;
            members += 1;
        }
    }
    if nodes.is_empty() {
        sup = T::zero();
        inf = T::zero();
    }
    Ok(LevelSetData {
        level,
        center: center.to_vec(),
        radius,
        member_mask,
        measure: vol * T::from_usize_lossy(members),
        ball_measure: vol * T::from_usize_lossy(nodes.len()),
        sup_on_ball: sup,
        inf_on_ball: inf,
        oscillation: sup - inf,
    })
}

/// `osc(u, R)` over the discrete ball.
pub fn oscillation<T: Scalar>(u: &ScalarField<T>, center: &[T], radius: T) -> Result<T> {
    Ok(level_set(u, T::zero(), center, radius)?.oscillation)
}
