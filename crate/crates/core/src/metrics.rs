//! Reconstruction fidelity metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{DenseMatrix, MatrixError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("reference matrix has zero norm")]
    ZeroReference,
    #[error("max_value must be positive, got {0}")]
    InvalidPeak(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub relative_error: f64,
    pub mse: f64,
    /// `+inf` for a perfect reconstruction.
    pub psnr_db: f64,
    pub max_value: f64,
}

impl MetricReport {
    pub fn compute(reference: &DenseMatrix, estimate: &DenseMatrix, max_value: f64) -> Result<Self, MetricError> {
        let mse = mse(reference, estimate)?;
        Ok(Self {
            relative_error: relative_error(reference, estimate)?,
            mse,
            psnr_db: psnr_from_mse(mse, max_value)?,
            max_value,
        })
    }
}

/// `||m - l||_F / ||m||_F`.
pub fn relative_error(m: &DenseMatrix, l: &DenseMatrix) -> Result<f64, MetricError> {
    let diff = m.lincomb(1.0, l, -1.0)?;
    let denom = m.frobenius_norm();
    if denom == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    Ok(diff.frobenius_norm() / denom)
}

/// Mean squared entrywise difference.
pub fn mse(reference: &DenseMatrix, estimate: &DenseMatrix) -> Result<f64, MetricError> {
    let diff = reference.lincomb(1.0, estimate, -1.0)?;
    let n = diff.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    Ok(diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n as f64)
}

/// `10 log10(max^2 / mse)` in decibels.
pub fn psnr(reference: &DenseMatrix, estimate: &DenseMatrix, max_value: f64) -> Result<f64, MetricError> {
    psnr_from_mse(mse(reference, estimate)?, max_value)
}

pub fn psnr_from_mse(mse: f64, max_value: f64) -> Result<f64, MetricError> {
    if !(max_value > 0.0) {
        return Err(MetricError::InvalidPeak(max_value));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}
