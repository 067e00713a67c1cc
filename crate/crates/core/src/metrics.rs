//! Evaluation metrics shared by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::tol;

/// Normalized error: `‖M − M̂‖_F / ‖M‖_F`. Despite the customary "mean
/// squared" name this is a ratio of norms, not of squares.
pub fn nmse(m_hat: &DenseMatrix, m_true: &DenseMatrix) -> Result<f64> {
    check_shapes(m_hat, m_true, "nmse")?;
    let denom = m_true.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::DegenerateMetric(
            "reference matrix has zero Frobenius norm".into(),
        ));
    }
    Ok(m_true.sub(m_hat).frobenius_norm() / denom)
}

/// Squared spectral error `‖M − M̂‖₂²`.
pub fn spectral_sq_error(m_hat: &DenseMatrix, m_true: &DenseMatrix) -> Result<f64> {
    check_shapes(m_hat, m_true, "spectral_sq_error")?;
    let top = m_true.sub(m_hat).spectral_norm()?;
    Ok(top * top)
}

fn check_shapes(a: &DenseMatrix, b: &DenseMatrix, context: &str) -> Result<()> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::Shape {
            context: context.into(),
            expected: format!("{}x{}", b.rows(), b.cols()),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub nmse: f64,
    pub sq_spectral_err: f64,
    pub sq_frobenius_err: f64,
    pub rank_of_estimate: usize,
}

impl EvalResult {
    pub fn evaluate(m_hat: &DenseMatrix, m_true: &DenseMatrix) -> Result<Self> {
        let nm = nmse(m_hat, m_true)?;
        let sq_spectral = spectral_sq_error(m_hat, m_true)?;
        let fro = m_true.sub(m_hat).frobenius_norm();
        let rank = m_hat.svd_full()?.rank(tol::RANK_TOL.max(1e-10));
        Ok(EvalResult {
            nmse: nm,
            sq_spectral_err: sq_spectral,
            sq_frobenius_err: fro * fro,
            rank_of_estimate: rank,
        })
    }
}
