//! Numerical checks of the regularity estimates and the qualitative principles.
//!
//! The constants in the estimates are not explicit, so the estimate checks
//! measure them (`lhs / rhs` over a family of witnesses) and compare the result
//! between two resolutions. The principle checks return a [`PrincipleVerdict`].

mod estimates;
mod moser;
mod principles;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub use estimates::{
    caccioppoli_constant, harnack_beta, harnack_bound_check, oscillation_profile, sp_inequality_check,
    OscillationProfile, RadiusTriple,
};
pub use moser::{moser_limit_check, moser_random_family, moser_threshold, MoserOutcome, MoserParams};
pub use principles::{
    collinearity, comparison_check, hopf_boundary_check, nonexistence_check, simplicity_check,
    solve_monotone_problem, ComparisonOutcome, HopfProfile, MonotoneMap, MonotoneSolve, NonexistenceOutcome,
};

/// Default factor for resolution stability of measured constants.
pub const STABILITY_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness<T> {
    pub parameters: Vec<T>,
    pub lhs: T,
    /// The term multiplied by the constant.
    pub rhs: T,
    /// Additive term not multiplied by the constant (zero unless stated).
    pub remainder: T,
}

impl<T: Scalar> Witness<T> {
    /// `(lhs - remainder)⁺ / rhs`; zero when both sides vanish, infinite when only `rhs` does.
    pub fn ratio(&self) -> T {
        let num = (self.lhs - self.remainder).max(T::zero());
        if num == T::zero() {
            T::zero()
        } else if self.rhs > T::zero() {
            num / self.rhs
        } else {
            T::infinity()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate<T> {
    pub estimated_c: T,
    pub parameter_names: Vec<String>,
    pub witnesses: Vec<Witness<T>>,
    /// `None` until compared against a refined grid.
    pub stable_across_resolutions: Option<bool>,
    /// Second constant for two-constant inequalities.
    pub chi: Option<T>,
}

impl<T: Scalar> ConstantEstimate<T> {
    pub(crate) fn from_witnesses(names: &[&str], witnesses: Vec<Witness<T>>) -> Self {
        let estimated_c = witnesses.iter().map(Witness::ratio).fold(T::zero(), T::max);
        Self {
            estimated_c,
            parameter_names: names.iter().map(|s| s.to_string()).collect(),
            witnesses,
            stable_across_resolutions: None,
            chi: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.estimated_c.is_finite() && self.chi.map_or(true, |c| c.is_finite())
    }

    /// Record whether this estimate and one measured on a refined grid agree
    /// within `factor`.
    pub fn with_stability(mut self, fine: &ConstantEstimate<T>, factor: T) -> Self {
        self.stable_across_resolutions = Some(resolution_stable(self.estimated_c, fine.estimated_c, factor));
        self
    }
}

/// Two measured constants are stable when both are finite and their ratio is
/// below `factor` (two zeros count as stable).
pub fn resolution_stable<T: Scalar>(coarse: T, fine: T, factor: T) -> bool {
    if !(coarse.is_finite() && fine.is_finite()) {
        return false;
    }
    let (lo, hi) = if coarse <= fine { (coarse, fine) } else { (fine, coarse) };
    if hi == T::zero() {
        return true;
    }
    lo > T::zero() && hi / lo < factor
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipleVerdict<T> {
    pub holds: bool,
    pub worst_violation: T,
    /// Coordinates of the worst node.
    pub location: Vec<T>,
}
