//! Exponent and coefficient fields of the eigenvalue problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::CellField;
use crate::grid::GridSpec;
use crate::scalar::Scalar;

/// A variable exponent sampled at quadrature points with certified bounds
/// `1 < p_minus <= p(x) <= p_plus < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentField<T> {
    samples: CellField<T>,
    p_minus: T,
    p_plus: T,
    lipschitz_estimate: T,
}

/// Checks `p > 1` and finiteness at every quadrature sample, then records
/// `p⁻`, `p⁺` and the largest finite-difference slope between neighbouring
/// quadrature points.
pub fn validate_exponent<T: Scalar>(raw: CellField<T>) -> Result<ExponentField<T>> {
    for (index, &v) in raw.values().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if v <= T::one() {
            return Err(Error::ExponentBound { index, value: v.to_f64_lossy() });
        }
    }
    let p_minus = raw.min();
    let p_plus = raw.max();
    let lipschitz_estimate = max_slope(&raw);
    Ok(ExponentField { samples: raw, p_minus, p_plus, lipschitz_estimate })
}

fn max_slope<T: Scalar>(f: &CellField<T>) -> T {
    let grid = f.grid();
    let (cx, cy) = grid.cell_counts();
    let v = f.values();
    let h = grid.spacing();
    let mut slope = T::zero();
    for j in 0..cy {
        for i in 0..cx {
            let c = i + cx * j;
            if i + 1 < cx {
                slope = slope.max((v[c + 1] - v[c]).abs() / h[0]);
            }
            if grid.dimension() == 2 && j + 1 < cy {
                slope = slope.max((v[c + cx] - v[c]).abs() / h[1]);
            }
        }
    }
    slope
}

impl<T: Scalar> ExponentField<T> {
    /// Constant exponent on every quadrature point.
    pub fn constant(grid: &GridSpec<T>, p: T) -> Result<Self> {
        validate_exponent(CellField::constant(grid, p))
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.samples.grid()
    }

    pub fn samples(&self) -> &CellField<T> {
        &self.samples
    }

    #[inline]
    pub fn at(&self, cell: usize) -> T {
        self.samples.values()[cell]
    }

    pub fn p_minus(&self) -> T {
        self.p_minus
    }

    pub fn p_plus(&self) -> T {
        self.p_plus
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    pub fn lipschitz_estimate(&self) -> T {
        self.lipschitz_estimate
    }

    /// True when the exponent changes by at least 1/2 between neighbouring
    /// quadrature points, i.e. the grid does not resolve its variation.
    pub fn is_resolution_limited(&self) -> bool {
        self.lipschitz_estimate * self.grid().min_spacing() >= T::lit(0.5)
    }

    /// Conjugate exponent `p'(x) = p / (p - 1)` at a cell.
    pub fn conjugate(&self, cell: usize) -> T {
        let p = self.at(cell);
        p / (p - T::one())
    }

    /// Sobolev conjugate `n p / (n - p)` at a cell, `None` when `p >= n`.
    pub fn sobolev_conjugate(&self, cell: usize) -> Option<T> {
        let n = T::from_usize_lossy(self.grid().dimension());
        let p = self.at(cell);
        (p < n).then(|| n * p / (n - p))
    }
}

/// Coefficients `a ≥ 0` and `b` with `b⁺ ≢ 0`, sampled at quadrature points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFields<T> {
    a: CellField<T>,
    b: CellField<T>,
}

impl<T: Scalar> CoefficientFields<T> {
    pub fn new(a: CellField<T>, b: CellField<T>) -> Result<Self> {
        a.grid().ensure_same(b.grid())?;
        if let Some(k) = a.values().iter().position(|&v| v < T::zero()) {
            return Err(Error::InvalidCoefficients(format!(
                "a < 0 at quadrature point {k} (a = {})",
                a.values()[k]
            )));
        }
        if b.values().iter().all(|&v| v <= T::zero()) {
            return Err(Error::InvalidCoefficients("max(b, 0) is identically zero".into()));
        }
        Ok(Self { a, b })
    }

    pub fn constant(grid: &GridSpec<T>, a: T, b: T) -> Result<Self> {
        Self::new(CellField::constant(grid, a), CellField::constant(grid, b))
    }

    pub fn a(&self) -> &CellField<T> {
        &self.a
    }

    pub fn b(&self) -> &CellField<T> {
        &self.b
    }

    pub fn b_plus(&self, cell: usize) -> T {
        self.b.values()[cell].max(T::zero())
    }

    pub fn b_minus(&self, cell: usize) -> T {
        (-self.b.values()[cell]).max(T::zero())
    }

    /// `‖b‖_∞` over quadrature points.
    pub fn b_sup(&self) -> T {
        self.b.values().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn with_b(&self, b: CellField<T>) -> Result<Self> {
        Self::new(self.a.clone(), b)
    }

    pub fn with_a(&self, a: CellField<T>) -> Result<Self> {
        Self::new(a, self.b.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::grid::build_grid;

    #[test]
    fn affine_exponent_bounds() {
        // midpoints of a fine grid approach the endpoint values 2 and 3
        let g = build_grid(1, &[(0.0f64, 1.0)], &[1025]).unwrap();
        let p = validate_exponent(Expression::parse("2+x").unwrap().on_cells(&g).unwrap()).unwrap();
        let h = g.spacing()[0];
        assert!((p.p_minus() - (2.0 + h / 2.0)).abs() < 1e-14);
        assert!((p.p_plus() - (3.0 - h / 2.0)).abs() < 1e-14);
        assert!((p.lipschitz_estimate() - 1.0).abs() < 1e-9);
        assert!(!p.is_resolution_limited());
    }

    #[test]
    fn affine_exponent_bounds_at_nodes_locus() {
        // the quadrature locus never reaches the endpoints; the bound values are
        // exact for the sampled set
        let g = build_grid(1, &[(0.0f64, 1.0)], &[5]).unwrap();
        let p = validate_exponent(Expression::parse("2+x").unwrap().on_cells(&g).unwrap()).unwrap();
        assert_eq!(p.p_minus(), 2.125);
        assert_eq!(p.p_plus(), 2.875);
    }

    #[test]
    fn p_equal_one_rejected() {
        let g = build_grid(1, &[(0.0f64, 1.0)], &[5]).unwrap();
        let err = validate_exponent(CellField::constant(&g, 1.0)).unwrap_err();
        assert!(matches!(err, Error::ExponentBound { .. }));
        assert!(err.to_string().contains("p > 1"));
    }

    #[test]
    fn jump_is_flagged() {
        // 129 nodes -> h = 1/128; unit jump between the two middle midpoints
        let g = build_grid(1, &[(0.0f64, 1.0)], &[129]).unwrap();
        let p = validate_exponent(Expression::parse("2+step(x-0.5)").unwrap().on_cells(&g).unwrap())
            .unwrap();
        assert!(p.lipschitz_estimate() >= 128.0 - 1e-9);
        assert!(p.is_resolution_limited());
    }

    #[test]
    fn conjugates() {
        let g = build_grid(2, &[(0.0f64, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        let p = ExponentField::constant(&g, 1.5).unwrap();
        assert!((p.conjugate(0) - 3.0).abs() < 1e-15);
        assert!((p.sobolev_conjugate(0).unwrap() - 6.0).abs() < 1e-14);
        let q = ExponentField::constant(&g, 2.5).unwrap();
        assert!(q.sobolev_conjugate(0).is_none());
    }

    #[test]
    fn coefficient_invariants() {
        let g = build_grid(1, &[(0.0f64, 1.0)], &[5]).unwrap();
        assert!(CoefficientFields::constant(&g, -1.0, 1.0).is_err());
        assert!(CoefficientFields::constant(&g, 0.0, 0.0).is_err());
        assert!(CoefficientFields::constant(&g, 0.0, -1.0).is_err());
        let b = Expression::parse("x-0.5").unwrap().on_cells(&g).unwrap();
        let c = CoefficientFields::new(CellField::constant(&g, 0.0), b).unwrap();
        assert_eq!(c.b_plus(0), 0.0);
        assert_eq!(c.b_minus(0), 0.375);
        assert_eq!(c.b_plus(3), 0.375);
    }
}
