//! Closed-form field expressions.
//!
//! Grammar (parsed by `meval`): numbers, `+ - * / ^` (also `%`), parentheses,
//! unary minus, constants `pi` and `e`, the coordinate `x` (and `y` in 2D),
//! and the functions `sqrt exp ln log abs sin cos tan asin acos atan atan2
//! sinh cosh tanh floor ceil round signum min max step`. `log` is the natural
//! logarithm and `step(s)` is 1 for `s >= 0`, else 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Scalar;

/// Where an expression is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLocus {
    Nodes,
    QuadraturePoints,
}

/// Samples attached to quadrature points (cell midpoints), one per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Scalar> CellField<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &GridSpec<T>, value: T) -> Self {
        Self { grid: grid.clone(), values: vec![value; grid.cell_count()] }
    }

    pub fn from_fn(grid: &GridSpec<T>, f: impl Fn([T; 2]) -> T) -> Result<Self> {
        let values = (0..grid.cell_count()).map(|c| f(grid.cell_midpoint(c))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scaled(&self, t: T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| v * t).collect() }
    }

    pub fn shifted(&self, c: T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| v + c).collect() }
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// Result of [`sample_field`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sampled<T> {
    Nodes(ScalarField<T>),
    Cells(CellField<T>),
}

/// A parsed expression in `x` (and `y`).
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    expr: meval::Expr,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let expr: meval::Expr = source.parse().map_err(|e: meval::Error| Error::Expression {
            expr: source.to_string(),
            reason: e.to_string(),
        })?;
        Ok(Self { source: source.to_string(), expr })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn context() -> meval::Context<'static> {
        let mut ctx = meval::Context::new();
        ctx.func("log", f64::ln);
        ctx.func("step", |s| if s >= 0.0 { 1.0 } else { 0.0 });
        ctx
    }

    fn bind(&self, dimension: usize) -> Result<Box<dyn Fn(f64, f64) -> f64>> {
        let err = |e: meval::Error| Error::Expression {
            expr: self.source.clone(),
            reason: e.to_string(),
        };
        if dimension == 1 {
            let f = self.expr.clone().bind_with_context(Self::context(), "x").map_err(err)?;
            Ok(Box::new(move |x, _| f(x)))
        } else {
            let f = self
                .expr
                .clone()
                .bind2_with_context(Self::context(), "x", "y")
                .map_err(err)?;
            Ok(Box::new(f))
        }
    }

    fn eval_points<T: Scalar>(
        &self,
        dimension: usize,
        points: impl Iterator<Item = [T; 2]>,
    ) -> Result<Vec<T>> {
        let f = self.bind(dimension)?;
        points
            .map(|[x, y]| {
                let (xf, yf) = (x.to_f64_lossy(), y.to_f64_lossy());
                let v = f(xf, yf);
                if v.is_finite() {
                    Ok(T::lit(v))
                } else {
                    Err(Error::NonFiniteSample { expr: self.source.clone(), x: xf, y: yf })
                }
            })
            .collect()
    }

    pub fn on_nodes<T: Scalar>(&self, grid: &GridSpec<T>) -> Result<ScalarField<T>> {
        let values =
            self.eval_points(grid.dimension(), (0..grid.node_count()).map(|k| grid.node_coords(k)))?;
        ScalarField::new(grid.clone(), values)
    }

    pub fn on_cells<T: Scalar>(&self, grid: &GridSpec<T>) -> Result<CellField<T>> {
        let values = self
            .eval_points(grid.dimension(), (0..grid.cell_count()).map(|c| grid.cell_midpoint(c)))?;
        CellField::new(grid.clone(), values)
    }
}

pub fn sample_field<T: Scalar>(
    expression: &str,
    grid: &GridSpec<T>,
    locus: SampleLocus,
) -> Result<Sampled<T>> {
    let e = Expression::parse(expression)?;
    Ok(match locus {
        SampleLocus::Nodes => Sampled::Nodes(e.on_nodes(grid)?),
        SampleLocus::QuadraturePoints => Sampled::Cells(e.on_cells(grid)?),
    })
}
