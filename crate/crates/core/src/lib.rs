//! First eigenvalue of the `p(x)`-Laplacian with Dirichlet data on intervals
//! and rectangles.
//!
//! Everything is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the aliases below fix `f64`, with `*32` variants for `f32`.

pub mod analysis;
pub mod energy;
pub mod error;
pub mod expr;
pub mod fields;
pub mod gradient;
pub mod grid;
pub mod level_set;
pub mod modular;
pub mod scalar;
pub mod solver;

pub use energy::{
    energy_a, energy_b, energy_breakdown, functional_j, rayleigh, weak_residual, EnergyBreakdown, WeakResidual,
};
pub use error::{Error, Result};
pub use expr::{sample_field, Expression, SampleLocus};
pub use fields::validate_exponent;
pub use gradient::discrete_gradient;
pub use grid::build_grid;
pub use level_set::{level_set, oscillation, LevelSetData};
pub use modular::{luxemburg_norm, modular, poincare_constant_estimate, sobolev_norm};
pub use scalar::Scalar;
pub use solver::{
    constant_p_oracle, refine_eigenpair, solve_first_eigenvalue, SolveStatus, SolverOptions, StepRule,
};

pub type GridSpec = grid::GridSpec<f64>;
pub type ScalarField = grid::ScalarField<f64>;
pub type VectorField = grid::VectorField<f64>;
pub type CellField = expr::CellField<f64>;
pub type ExponentField = fields::ExponentField<f64>;
pub type CoefficientFields = fields::CoefficientFields<f64>;
pub type ProblemSpec = energy::ProblemSpec<f64>;
pub type EigenResult = solver::EigenResult<f64>;
pub type ConstantEstimate = analysis::ConstantEstimate<f64>;
pub type PrincipleVerdict = analysis::PrincipleVerdict<f64>;

pub type GridSpec32 = grid::GridSpec<f32>;
pub type ScalarField32 = grid::ScalarField<f32>;
pub type ExponentField32 = fields::ExponentField<f32>;
pub type CoefficientFields32 = fields::CoefficientFields<f32>;
pub type ProblemSpec32 = energy::ProblemSpec<f32>;
pub type EigenResult32 = solver::EigenResult<f32>;
