use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Scalar;

/// Numbering of the interior (free) nodes of a grid.
#[derive(Debug, Clone)]
pub(crate) struct InteriorMap {
    /// node index -> unknown index
    pub to_unknown: Vec<Option<usize>>,
    /// unknown index -> node index
    pub nodes: Vec<usize>,
    pub bandwidth: usize,
}

impl InteriorMap {
    pub fn new<T: Scalar>(grid: &GridSpec<T>) -> Self {
        let mut to_unknown = vec![None; grid.node_count()];
        let mut nodes = Vec::new();
        for k in 0..grid.node_count() {
            if !grid.is_boundary(k) {
                to_unknown[k] = Some(nodes.len());
                nodes.push(k);
            }
        }
        let bandwidth = if grid.dimension() == 1 { 1 } else { grid.node_counts()[0] - 2 + 1 };
        Self { to_unknown, nodes, bandwidth }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn gather<T: Scalar>(&self, full: &[T]) -> Vec<T> {
        self.nodes.iter().map(|&n| full[n]).collect()
    }

    pub fn scatter_add<T: Scalar>(&self, full: &mut [T], reduced: &[T], scale: T) {
        for (&n, &v) in self.nodes.iter().zip(reduced) {
            full[n] = full[n] + scale * v;
        }
    }
}

/// Symmetric banded matrix (lower band stored row-wise) with an in-place
/// Cholesky factorization.
#[derive(Debug, Clone)]
pub(crate) struct BandedSpd<T> {
    n: usize,
    bw: usize,
    // data[i * (bw + 1) + k] = A[i][i - k]
    data: Vec<T>,
}

impl<T: Scalar> BandedSpd<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![T::zero(); n * (bw + 1)] }
    }

    /// Add `v` to `A[i][j]` (and implicitly `A[j][i]`). Entries outside the
    /// band are a logic error.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        assert!(k <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let idx = r * (self.bw + 1) + k;
        self.data[idx] = self.data[idx] + v;
    }

    #[cfg(test)]
    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.data[i * (self.bw + 1) + (i - j)];
                y[i] = y[i] + a * x[j];
                y[j] = y[j] + a * x[i];
            }
            y[i] = y[i] + self.data[i * (self.bw + 1)] * x[i];
        }
        y
    }

    /// Factor `A = L Lᵀ` in place.
    pub fn cholesky(mut self) -> Result<CholeskyFactor<T>> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for k in lo..=i {
                let mut s = self.data[i * w + (i - k)];
                let jlo = lo.max(k.saturating_sub(self.bw));
                for j in jlo..k {
                    s = s - self.data[i * w + (i - j)] * self.data[k * w + (k - j)];
                }
                if k == i {
                    if !(s > T::zero()) {
                        return Err(Error::Singular(format!("pivot {i} is {s}")));
                    }
                    self.data[i * w] = s.sqrt();
                } else {
                    self.data[i * w + (i - k)] = s / self.data[k * w];
                }
            }
        }
        Ok(CholeskyFactor { n: self.n, bw: self.bw, data: self.data })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CholeskyFactor<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Scalar> CholeskyFactor<T> {
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let w = self.bw + 1;
        let mut y = rhs.to_vec();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = y[i];
            for j in lo..i {
                s = s - self.data[i * w + (i - j)] * y[j];
            }
            y[i] = s / self.data[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            let hi = (i + self.bw).min(self.n - 1);
            for j in (i + 1)..=hi {
                s = s - self.data[j * w + (j - i)] * y[j];
            }
            y[i] = s / self.data[i * w];
        }
        y
    }
}
