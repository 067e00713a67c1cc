//! Polynomial side-information basis.
//!
//! For a coordinate grid `s₁ … s_m` and degree `l`, the basis matrix has
//! `l+1` rows: row `p` holds `s_j^p`, so the first row is all ones and
//! the last holds the l-th powers. Powers are evaluated by successive
//! multiplication, row by row.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sampling::{sample_columns, ColumnSampler};

#[derive(Debug, Clone)]
pub struct PolyBasis {
    grid: Vec<f64>,
    degree: usize,
    matrix: DenseMatrix,
}

impl PolyBasis {
    /// Build the (degree+1)×m basis for the given grid.
    pub fn new(grid: Vec<f64>, degree: usize) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Argument("grid must be non-empty".into()));
        }
        if !grid.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "PolyBasis grid".into(),
            });
        }
        let m = grid.len();
        let mut data = vec![0.0; (degree + 1) * m];
        data[..m].fill(1.0);
        for p in 1..=degree {
            for j in 0..m {
                data[p * m + j] = data[(p - 1) * m + j] * grid[j];
            }
        }
        // from_vec rejects overflow to infinity in high powers
        let matrix = DenseMatrix::from_vec(degree + 1, m, data).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite {
                context: format!("polynomial basis overflowed at degree {degree}"),
            },
            other => other,
        })?;
        let basis = Self {
            grid,
            degree,
            matrix,
        };
        if degree >= 1 {
            if let Ok(cond) = basis.gram_condition() {
                log::debug!("polynomial basis gram condition: {cond:.3e}");
            }
        }
        Ok(basis)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of grid points (columns of the basis matrix).
    pub fn points(&self) -> usize {
        self.grid.len()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// The column-sampled basis `SΨ`.
    pub fn sampled(&self, sampler: &ColumnSampler) -> Result<DenseMatrix> {
        sample_columns(&self.matrix, sampler)
    }

    /// Condition number of `S·S^T`.
    pub fn gram_condition(&self) -> Result<f64> {
        let gram = self.matrix.matmul(&self.matrix.transpose());
        let sv = gram.singular_values()?;
        let smin = sv.last().copied().unwrap_or(0.0);
        if smin == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(sv[0] / smin)
    }

    /// Per-row Euclidean norms, used to precondition ill-scaled bases.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.matrix.rows())
            .map(|p| self.matrix.row(p).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// The default coordinate grid `[1.01, 1.02, …, 1 + 0.01·m]`.
pub fn default_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|j| 1.0 + 0.01 * j as f64).collect()
}
