//! Reference solvers: two-block PALM and Lee-Seung NMF.

use std::time::Instant;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bilevel::{within_descent, BilevelProblem, SolverConfig, SolverError};
use crate::matrix::{spectral_norm, DenseMatrix, MatrixError};
use crate::metrics::MetricReport;
use crate::prox::{prox_gradient_map, L1Norm, ProxOperator};
use crate::report::{RunReport, Termination};

/// Composite objective `f(x) + g(y) + H(x, y)` for alternating prox-gradient sweeps.
pub trait PalmProblem {
    fn prox_f(&self) -> &dyn ProxOperator;
    fn prox_g(&self) -> &dyn ProxOperator;

    fn coupling_value(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError>;
    fn coupling_grad_x(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError>;
    fn coupling_grad_y(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError>;

    /// Initial `(nu_x, nu_y)` for the sweep starting at `(x, y)`.
    fn stepsizes(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<(f64, f64), SolverError>;

    fn objective(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        Ok(self.prox_f().value(x)? + self.prox_g().value(y)? + self.coupling_value(x, y)?)
    }
}

#[derive(Debug, Clone)]
pub struct PalmOutcome {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub report: RunReport,
}

pub fn palm_solve<P: PalmProblem + ?Sized>(
    problem: &P,
    init_x: DenseMatrix,
    init_y: DenseMatrix,
    config: &SolverConfig,
) -> Result<PalmOutcome, SolverError> {
    palm_solve_observed(problem, init_x, init_y, config, &mut |_, _| {})
}

fn sweep<P: PalmProblem + ?Sized>(
    problem: &P,
    x: &DenseMatrix,
    y: &DenseMatrix,
    nu_x: f64,
    nu_y: f64,
) -> Result<Option<(DenseMatrix, DenseMatrix, f64)>, SolverError> {
    let gx = problem.coupling_grad_x(x, y)?;
    let x_next = match prox_gradient_map(x, &gx, problem.prox_f(), nu_x) {
        Ok(map) => map.point,
        Err(MatrixError::NonFinite { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let gy = problem.coupling_grad_y(&x_next, y)?;
    let y_next = match prox_gradient_map(y, &gy, problem.prox_g(), nu_y) {
        Ok(map) => map.point,
        Err(MatrixError::NonFinite { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if !x_next.is_finite() || !y_next.is_finite() {
        return Ok(None);
    }
    let obj = problem.objective(&x_next, &y_next)?;
    if !obj.is_finite() {
        return Ok(None);
    }
    Ok(Some((x_next, y_next, obj)))
}

/// PALM with backtracking: both stepsizes are halved until the objective does
/// not increase. Uses the same stopping rule as the bi-level solver.
pub fn palm_solve_observed<P: PalmProblem + ?Sized>(
    problem: &P,
    init_x: DenseMatrix,
    init_y: DenseMatrix,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&DenseMatrix, &DenseMatrix),
) -> Result<PalmOutcome, SolverError> {
    config.validate()?;
    init_x.check_finite()?;
    init_y.check_finite()?;
    let start = Instant::now();
    let mut report = RunReport::new("palm");
    let mut x = init_x;
    let mut y = init_y;
    let mut obj = problem.objective(&x, &y)?;

    for it in 0..config.max_iters {
        let (mut nu_x, mut nu_y) = problem.stepsizes(&x, &y)?;
        if !(nu_x > 0.0 && nu_y > 0.0) || !nu_x.is_finite() || !nu_y.is_finite() {
            return Err(SolverError::InvalidArgument(format!("stepsizes ({nu_x}, {nu_y})")));
        }
        let accepted = loop {
            if nu_x < config.nu_min {
                break None;
            }
            if let Some(next) = sweep(problem, &x, &y, nu_x, nu_y)? {
                if within_descent(next.2, obj) {
                    break Some(next);
                }
            }
            nu_x *= 0.5;
            nu_y *= 0.5;
        };
        let Some((x_next, y_next, obj_next)) = accepted else {
            debug!("palm stalled at sweep {}", it + 1);
            report.termination = Termination::StalledStepsize;
            break;
        };
        let dx = (&x_next - &x).frobenius_norm();
        let dy = (&y_next - &y).frobenius_norm();
        let scale = 1.0 + x.frobenius_norm() + y.frobenius_norm();
        x = x_next;
        y = y_next;
        obj = obj_next;
        report.iterations += 1;
        report.psi1_trace.push(obj);
        report.nu_trace.push(nu_x);
        observer(&x, &y);
        if dx.max(dy) <= config.tol * scale {
            report.termination = Termination::Converged;
            break;
        }
    }
    report.converged = report.termination == Termination::Converged;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(PalmOutcome { x, y, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PalmStepsize {
    /// `1 / ||Y Y^T||_2` and `1 / ||X^T X||_2`.
    Lipschitz,
    /// One stepsize for both blocks, `1 / max(||Y Y^T||_2, ||X^T X||_2)`.
    Shared,
}

/// `lambda_x ||X||_1 + lambda_y ||Y||_1 + ||XY - M||_F^2 / 2`.
#[derive(Debug, Clone)]
pub struct SlrfPalm {
    data: DenseMatrix,
    f: L1Norm,
    g: L1Norm,
    policy: PalmStepsize,
}

impl SlrfPalm {
    pub fn new(data: DenseMatrix, lambda_x: f64, lambda_y: f64, policy: PalmStepsize) -> Self {
        Self {
            data,
            f: L1Norm { weight: lambda_x },
            g: L1Norm { weight: lambda_y },
            policy,
        }
    }

    fn residual(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        x.matmul(y)?.lincomb(1.0, &self.data, -1.0)
    }

    fn smoothness(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<(f64, f64), MatrixError> {
        let lx = spectral_norm(&y.matmul(&y.transpose())?)?;
        let ly = spectral_norm(&x.transpose().matmul(x)?)?;
        Ok((lx, ly))
    }
}

fn inverse_or_one(l: f64) -> f64 {
    if l > 0.0 {
        1.0 / l
    } else {
        1.0
    }
}

impl PalmProblem for SlrfPalm {
    fn prox_f(&self) -> &dyn ProxOperator {
        &self.f
    }

    fn prox_g(&self) -> &dyn ProxOperator {
        &self.g
    }

    fn coupling_value(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        let r = self.residual(x, y)?.frobenius_norm();
        Ok(0.5 * r * r)
    }

    fn coupling_grad_x(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        self.residual(x, y)?.matmul(&y.transpose())
    }

    fn coupling_grad_y(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        x.transpose().matmul(&self.residual(x, y)?)
    }

    fn stepsizes(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<(f64, f64), SolverError> {
        let (lx, ly) = self.smoothness(x, y)?;
        Ok(match self.policy {
            PalmStepsize::Lipschitz => (inverse_or_one(lx), inverse_or_one(ly)),
            PalmStepsize::Shared => {
                let nu = inverse_or_one(lx.max(ly));
                (nu, nu)
            }
        })
    }
}

/// A PALM problem viewed as a bi-level problem whose two levels coincide.
///
/// Requires equal block stepsizes; the bi-level iterates then reproduce the
/// PALM sweeps exactly.
#[derive(Debug, Clone)]
pub struct EquivalentLevels<P> {
    pub inner: P,
}

impl<P: PalmProblem> BilevelProblem for EquivalentLevels<P> {
    fn f1(&self) -> &dyn ProxOperator {
        self.inner.prox_f()
    }

    fn f2(&self) -> &dyn ProxOperator {
        self.inner.prox_f()
    }

    fn g1(&self) -> &dyn ProxOperator {
        self.inner.prox_g()
    }

    fn g2(&self) -> &dyn ProxOperator {
        self.inner.prox_g()
    }

    fn coupling_value(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        self.inner.coupling_value(x, y)
    }

    fn coupling_grad_x(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        self.inner.coupling_grad_x(x, y)
    }

    fn coupling_grad_y(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        self.inner.coupling_grad_y(x, y)
    }

    fn smoothness_x(&self, y: &DenseMatrix) -> Result<f64, MatrixError> {
        spectral_norm(&y.matmul(&y.transpose())?)
    }

    fn smoothness_y(&self, x: &DenseMatrix) -> Result<f64, MatrixError> {
        spectral_norm(&x.transpose().matmul(x)?)
    }

    fn subgradient_bounds(&self) -> [f64; 4] {
        [0.0; 4]
    }

    fn stepsize(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, SolverError> {
        let (nu_x, nu_y) = self.inner.stepsizes(x, y)?;
        if nu_x != nu_y {
            return Err(SolverError::InvalidArgument(format!(
                "equivalent levels need equal stepsizes, got ({nu_x}, {nu_y})"
            )));
        }
        Ok(nu_x)
    }

    fn upper_objective(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        self.inner.objective(x, y)
    }

    fn lower_objective(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        self.inner.objective(x, y)
    }
}

/// Runs PALM on the l1-regularized factorization and attaches metrics.
pub fn palm_slrf(
    m: &DenseMatrix,
    lambda_x: f64,
    lambda_y: f64,
    init_x: DenseMatrix,
    init_y: DenseMatrix,
    config: &SolverConfig,
) -> Result<PalmOutcome, SolverError> {
    m.check_finite()?;
    let problem = SlrfPalm::new(m.clone(), lambda_x, lambda_y, PalmStepsize::Lipschitz);
    let mut out = palm_solve(&problem, init_x, init_y, config)?;
    let estimate = out.x.matmul(&out.y)?;
    out.report.metrics = MetricReport::compute(m, &estimate, m.max_abs()).ok();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmfConfig {
    pub max_iters: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-9,
            epsilon: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmfOutcome {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub report: RunReport,
}

/// Uniform `[0, 1)` factors scaled to match the mean of `m`.
pub fn nmf_initial_factors(m: &DenseMatrix, rank: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    let (rows, cols) = m.shape();
    let n = (rows * cols).max(1) as f64;
    let mean = m.as_slice().iter().map(|v| v.max(0.0)).sum::<f64>() / n;
    let scale = (mean.max(f64::MIN_POSITIVE) / rank as f64).sqrt() * 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DenseMatrix::from_fn(rows, rank, |_, _| scale * rng.random::<f64>());
    let h = DenseMatrix::from_fn(rank, cols, |_, _| scale * rng.random::<f64>());
    (w, h)
}

/// Lee-Seung multiplicative updates for `min ||M - WH||_F^2`, `W, H >= 0`.
///
/// Negative entries of `m` are clipped to zero before factorizing. Metrics
/// are computed against the original, unclipped `m`.
pub fn nmf_lee_seung(m: &DenseMatrix, rank: usize, config: &NmfConfig) -> Result<NmfOutcome, SolverError> {
    let (w, h) = nmf_initial_factors(m, rank, config.seed);
    nmf_lee_seung_from(m, w, h, config)
}

pub fn nmf_lee_seung_from(
    m: &DenseMatrix,
    mut w: DenseMatrix,
    mut h: DenseMatrix,
    config: &NmfConfig,
) -> Result<NmfOutcome, SolverError> {
    m.check_finite()?;
    if config.max_iters < 1 || !(config.epsilon > 0.0) {
        return Err(SolverError::InvalidArgument(
            "nmf needs max_iters >= 1 and epsilon > 0".into(),
        ));
    }
    if w.shape().1 != h.shape().0 || w.rows() != m.rows() || h.cols() != m.cols() {
        return Err(SolverError::InvalidArgument(format!(
            "factor shapes {:?}, {:?} do not fit {:?}",
            w.shape(),
            h.shape(),
            m.shape()
        )));
    }
    if w.as_slice().iter().chain(h.as_slice()).any(|v| *v < 0.0) {
        return Err(SolverError::InvalidArgument("nmf factors must be nonnegative".into()));
    }
    let negatives = m.as_slice().iter().filter(|v| **v < 0.0).count();
    let target = if negatives > 0 {
        warn!("nmf: clipping {negatives} negative data entries to zero");
        m.map(|v| v.max(0.0))
    } else {
        m.clone()
    };

    let start = Instant::now();
    let mut report = RunReport::new("nmf");
    let eps = config.epsilon;
    let mut obj = nmf_objective(&target, &w, &h)?;
    for _ in 0..config.max_iters {
        let num = w.transpose().matmul(&target)?;
        let den = w.transpose().matmul(&w)?.matmul(&h)?;
        multiplicative_update(&mut h, &num, &den, eps);
        let num = target.matmul(&h.transpose())?;
        let den = w.matmul(&h.matmul(&h.transpose())?)?;
        multiplicative_update(&mut w, &num, &den, eps);

        let next = nmf_objective(&target, &w, &h)?;
        report.iterations += 1;
        report.psi1_trace.push(next);
        let decrease = obj - next;
        obj = next;
        if decrease.abs() <= config.tol * obj.max(f64::MIN_POSITIVE) {
            report.termination = Termination::Converged;
            break;
        }
    }
    report.converged = report.termination == Termination::Converged;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    let estimate = w.matmul(&h)?;
    report.metrics = MetricReport::compute(m, &estimate, m.max_abs()).ok();
    Ok(NmfOutcome { w, h, report })
}

fn multiplicative_update(a: &mut DenseMatrix, num: &DenseMatrix, den: &DenseMatrix, eps: f64) {
    for ((v, n), d) in a.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
        *v *= n / (d + eps);
    }
}

/// `||M - WH||_F^2`.
pub fn nmf_objective(m: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<f64, MatrixError> {
    let r = m.lincomb(1.0, &w.matmul(h)?, -1.0)?.frobenius_norm();
    Ok(r * r)
}
