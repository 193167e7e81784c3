//! Proximal operators, the proximal gradient map and Moreau-envelope helpers.
//!
//! `prox(z, nu) = argmin_p  q(p) + ||p - z||_F^2 / (2 nu)` for a regularizer `q`.

use std::fmt::Debug;

use crate::matrix::{nuclear_norm, svd, DenseMatrix, MatrixError};

/// A regularizer together with its proximal map.
pub trait ProxOperator: Debug + Send + Sync {
    /// Proximal map with stepsize `nu > 0`.
    fn prox(&self, point: &DenseMatrix, nu: f64) -> Result<DenseMatrix, MatrixError>;

    /// Regularizer value; `+inf` outside its domain.
    fn value(&self, point: &DenseMatrix) -> Result<f64, MatrixError>;
}

/// `q = 0`; prox is the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRegularizer;

impl ProxOperator for ZeroRegularizer {
    fn prox(&self, point: &DenseMatrix, _nu: f64) -> Result<DenseMatrix, MatrixError> {
        Ok(point.clone())
    }

    fn value(&self, _point: &DenseMatrix) -> Result<f64, MatrixError> {
        Ok(0.0)
    }
}

/// `q = weight * ||.||_1` (entrywise).
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub weight: f64,
}

impl ProxOperator for L1Norm {
    fn prox(&self, point: &DenseMatrix, nu: f64) -> Result<DenseMatrix, MatrixError> {
        Ok(soft_threshold(point, nu * self.weight))
    }

    fn value(&self, point: &DenseMatrix) -> Result<f64, MatrixError> {
        Ok(self.weight * point.l1_norm())
    }
}

/// `q = weight * ||.||_*` (sum of singular values).
#[derive(Debug, Clone, Copy)]
pub struct NuclearNorm {
    pub weight: f64,
}

impl ProxOperator for NuclearNorm {
    fn prox(&self, point: &DenseMatrix, nu: f64) -> Result<DenseMatrix, MatrixError> {
        svt(point, nu * self.weight)
    }

    fn value(&self, point: &DenseMatrix) -> Result<f64, MatrixError> {
        if self.weight == 0.0 {
            return Ok(0.0);
        }
        Ok(self.weight * nuclear_norm(point)?)
    }
}

/// Indicator of the nonnegative orthant; prox is the projection.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonNegative;

impl ProxOperator for NonNegative {
    fn prox(&self, point: &DenseMatrix, _nu: f64) -> Result<DenseMatrix, MatrixError> {
        Ok(point.map(|v| v.max(0.0)))
    }

    fn value(&self, point: &DenseMatrix) -> Result<f64, MatrixError> {
        if point.as_slice().iter().all(|&v| v >= 0.0) {
            Ok(0.0)
        } else {
            Ok(f64::INFINITY)
        }
    }
}

/// Entrywise `sign(a) * max(|a| - tau, 0)`, the prox of `tau * ||.||_1`.
pub fn soft_threshold(a: &DenseMatrix, tau: f64) -> DenseMatrix {
    debug_assert!(tau >= 0.0, "threshold must be nonnegative");
    a.map(|v| {
        let mag = v.abs() - tau;
        if mag > 0.0 {
            mag.copysign(v)
        } else {
            0.0
        }
    })
}

/// Singular value thresholding, the prox of `tau * ||.||_*`.
pub fn svt(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix, MatrixError> {
    debug_assert!(tau >= 0.0, "threshold must be nonnegative");
    let f = svd(a)?;
    let shrunk: Vec<f64> = f.sigma.iter().map(|&s| (s - tau).max(0.0)).collect();
    Ok(f.recompose_with(&shrunk))
}

/// `G = (x - prox(x - nu * grad, nu)) / nu`.
///
/// `point` keeps the prox output itself so that the induced update
/// `x - nu * G` is available without round-off.
#[derive(Debug, Clone)]
pub struct GradientMap {
    pub value: DenseMatrix,
    pub point: DenseMatrix,
    pub nu: f64,
}

impl GradientMap {
    pub fn norm(&self) -> f64 {
        self.value.frobenius_norm()
    }
}

pub fn prox_gradient_map(
    x: &DenseMatrix,
    grad: &DenseMatrix,
    prox: &dyn ProxOperator,
    nu: f64,
) -> Result<GradientMap, MatrixError> {
    let forward = x.lincomb(1.0, grad, -nu)?;
    let point = prox.prox(&forward, nu)?;
    let value = x.lincomb(1.0 / nu, &point, -1.0 / nu)?;
    Ok(GradientMap { value, point, nu })
}

/// Moreau envelope `q(p) + ||p - x||^2 / (2 nu)` at `p = prox(x, nu)`.
pub fn moreau_envelope_value(prox: &dyn ProxOperator, x: &DenseMatrix, nu: f64) -> Result<f64, MatrixError> {
    let p = prox.prox(x, nu)?;
    let d = (&p - x).frobenius_norm();
    Ok(prox.value(&p)? + d * d / (2.0 * nu))
}

/// Gradient of the Moreau envelope, `(x - prox(x, nu)) / nu`.
pub fn moreau_gradient(prox: &dyn ProxOperator, x: &DenseMatrix, nu: f64) -> Result<DenseMatrix, MatrixError> {
    let p = prox.prox(x, nu)?;
    x.lincomb(1.0 / nu, &p, -1.0 / nu)
}
