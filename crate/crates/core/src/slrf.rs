//! Sparse low-rank factorization as a bi-level problem.
//!
//! ```text
//! upper:  lambda1 ||X||_1 + lambda2 ||Y||_1 + H(X, Y)
//! lower:  gamma1  ||X||_* + gamma2  ||Y||_* + H(X, Y)
//! H(X, Y) = ||XY - M||_F^2 / 2,   X: m x r,  Y: r x n
//! ```
//!
//! The lower level on X uses `gamma1`; the combination weights come from the
//! closed-form intervals below, and the stepsize from the smallest `nu` for
//! which both intervals are nonempty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bilevel::{self, BilevelProblem, DescentConstants, Interval, SolverConfig, SolverError};
use crate::matrix::{spectral_norm, DenseMatrix, MatrixError};
use crate::metrics::MetricReport;
use crate::prox::{L1Norm, NuclearNorm, ProxOperator};
use crate::report::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlrfParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rank: usize,
}

impl Default for SlrfParams {
    /// Implementation defaults for the synthetic experiment.
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.1,
            gamma1: 0.1,
            gamma2: 0.1,
            rank: 5,
        }
    }
}

impl SlrfParams {
    pub fn validate(&self, rows: usize, cols: usize) -> Result<(), SolverError> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SolverError::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.rank == 0 || self.rank > rows.min(cols) {
            return Err(SolverError::InvalidArgument(format!(
                "rank {} outside 1..={}",
                self.rank,
                rows.min(cols)
            )));
        }
        Ok(())
    }

    /// `lambda1 * sqrt(m r)`: bound on the l1 subgradient of X.
    pub fn c1(&self, rows: usize) -> f64 {
        self.lambda1 * ((rows * self.rank) as f64).sqrt()
    }

    /// `2 gamma1`: bound on the nuclear subgradient of X.
    pub fn c2(&self) -> f64 {
        2.0 * self.gamma1
    }

    /// `lambda2 * sqrt(r n)`.
    pub fn c3(&self, cols: usize) -> f64 {
        self.lambda2 * ((self.rank * cols) as f64).sqrt()
    }

    pub fn c4(&self) -> f64 {
        2.0 * self.gamma2
    }
}

/// Per-iteration constants of the factorization problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlrfConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `||Y Y^T||_2`.
    pub l1: f64,
    /// `||X_u^T X_u||_2`.
    pub l2_u: f64,
    /// `||X_l^T X_l||_2`.
    pub l2_l: f64,
}

impl SlrfConstants {
    pub fn compute(
        params: &SlrfParams,
        rows: usize,
        cols: usize,
        y: &DenseMatrix,
        x_u: &DenseMatrix,
        x_l: &DenseMatrix,
    ) -> Result<Self, MatrixError> {
        Ok(Self {
            c1: params.c1(rows),
            c2: params.c2(),
            c3: params.c3(cols),
            c4: params.c4(),
            l1: gram_norm_rows(y)?,
            l2_u: gram_norm_cols(x_u)?,
            l2_l: gram_norm_cols(x_l)?,
        })
    }
}

/// `||A A^T||_2`.
fn gram_norm_rows(a: &DenseMatrix) -> Result<f64, MatrixError> {
    spectral_norm(&a.matmul(&a.transpose())?)
}

/// `||A^T A||_2`.
fn gram_norm_cols(a: &DenseMatrix) -> Result<f64, MatrixError> {
    spectral_norm(&a.transpose().matmul(a)?)
}

/// Admissible alpha range without the emptiness check.
pub fn alpha_bounds(params: &SlrfParams, rows: usize, l1: f64, nu: f64) -> Interval {
    let inv = 1.0 / nu;
    Interval::new(
        (inv + l1) / (params.c1(rows) + inv + 2.0 * l1),
        (params.gamma1 + l1) / (params.gamma1 + inv + 2.0 * l1),
    )
}

/// Admissible beta range without the emptiness check.
pub fn beta_bounds(params: &SlrfParams, cols: usize, l2_u: f64, l2_l: f64, nu: f64) -> Interval {
    let inv = 1.0 / nu;
    Interval::new(
        (inv + l2_u) / (params.c3(cols) + inv + 2.0 * l2_u),
        (params.gamma2 + l2_l) / (params.gamma2 + inv + 2.0 * l2_l),
    )
}

pub fn alpha_interval(params: &SlrfParams, rows: usize, l1: f64, nu: f64) -> Result<Interval, SolverError> {
    nonempty("alpha", alpha_bounds(params, rows, l1, nu))
}

pub fn beta_interval(params: &SlrfParams, cols: usize, l2_u: f64, l2_l: f64, nu: f64) -> Result<Interval, SolverError> {
    nonempty("beta", beta_bounds(params, cols, l2_u, l2_l, nu))
}

/// Relative width below which a crossed interval counts as a single point.
const ROUNDING_SLACK: f64 = 8.0 * f64::EPSILON;

fn nonempty(which: &'static str, i: Interval) -> Result<Interval, SolverError> {
    if i.is_empty() && i.lo - i.hi <= ROUNDING_SLACK * i.hi.abs().max(i.lo.abs()) {
        let m = 0.5 * (i.lo + i.hi);
        Ok(Interval { lo: m, hi: m })
    } else if i.is_empty() {
        Err(SolverError::EmptyInterval {
            which,
            lo: i.lo,
            hi: i.hi,
        })
    } else {
        Ok(i)
    }
}

/// Smallest `nu` for which the alpha range is nonempty.
///
/// Evaluated as `(sqrt((a+c)(a+b)) + a) / (ab + ac + bc)` with
/// `a = L1`, `b = lambda1 sqrt(m r)`, `c = gamma1`, which avoids the
/// cancellation in `1 / (sqrt((a+c)(a+b)) - a)`.
pub fn nu_min_alpha(params: &SlrfParams, rows: usize, l1: f64) -> Result<f64, SolverError> {
    let a = l1;
    let b = params.c1(rows);
    let c = params.gamma1;
    let den = a * b + a * c + b * c;
    if !(den > 0.0) {
        return Err(SolverError::DegenerateDenominator);
    }
    Ok((((a + c) * (a + b)).sqrt() + a) / den)
}

/// Smallest `nu` for which the beta range is nonempty.
///
/// With `N = L2_u + L2_l` and `c = lambda2 gamma2 sqrt(r n) + gamma2 L2_u + L2_l lambda2 sqrt(r n)`,
/// `2 / (sqrt(N^2 + 4c) - N)` is rationalized to `(sqrt(N^2 + 4c) + N) / (2c)`.
pub fn nu_min_beta(params: &SlrfParams, cols: usize, l2_u: f64, l2_l: f64) -> Result<f64, SolverError> {
    let b = params.c3(cols);
    let n_sum = l2_u + l2_l;
    let c = b * params.gamma2 + params.gamma2 * l2_u + l2_l * b;
    if !(c > 0.0) {
        return Err(SolverError::DegenerateDenominator);
    }
    Ok(((n_sum * n_sum + 4.0 * c).sqrt() + n_sum) / (2.0 * c))
}

/// `safety * max(nu_min_alpha, nu_min_beta)`.
pub fn stepsize_rule(
    params: &SlrfParams,
    rows: usize,
    cols: usize,
    consts: (f64, f64, f64),
    safety_factor: f64,
) -> Result<f64, SolverError> {
    let (l1, l2_u, l2_l) = consts;
    let a = nu_min_alpha(params, rows, l1)?;
    let b = nu_min_beta(params, cols, l2_u, l2_l)?;
    Ok(safety_factor * a.max(b))
}

/// The factorization problem bound to a data matrix.
#[derive(Debug, Clone)]
pub struct SlrfProblem {
    data: DenseMatrix,
    params: SlrfParams,
    safety_factor: f64,
    f1: L1Norm,
    f2: NuclearNorm,
    g1: L1Norm,
    g2: NuclearNorm,
}

pub fn build_problem(m: &DenseMatrix, params: SlrfParams) -> Result<SlrfProblem, SolverError> {
    m.check_finite()?;
    params.validate(m.rows(), m.cols())?;
    Ok(SlrfProblem {
        data: m.clone(),
        params,
        safety_factor: 1.0,
        f1: L1Norm { weight: params.lambda1 },
        f2: NuclearNorm { weight: params.gamma1 },
        g1: L1Norm { weight: params.lambda2 },
        g2: NuclearNorm { weight: params.gamma2 },
    })
}

impl SlrfProblem {
    pub fn with_safety_factor(mut self, safety_factor: f64) -> Self {
        self.safety_factor = safety_factor;
        self
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn params(&self) -> &SlrfParams {
        &self.params
    }

    pub fn residual(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        x.matmul(y)?.lincomb(1.0, &self.data, -1.0)
    }

    /// `||XY - M||_F ||Y||_2`, an upper bound on `||grad_X H||_F`.
    pub fn gradient_bound_x(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        Ok(self.residual(x, y)?.frobenius_norm() * spectral_norm(y)?)
    }

    /// `||X||_2 ||XY - M||_F`, an upper bound on `||grad_Y H||_F`.
    pub fn gradient_bound_y(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        Ok(spectral_norm(x)? * self.residual(x, y)?.frobenius_norm())
    }

    pub fn constants(
        &self,
        y: &DenseMatrix,
        x_u: &DenseMatrix,
        x_l: &DenseMatrix,
    ) -> Result<SlrfConstants, MatrixError> {
        SlrfConstants::compute(&self.params, self.data.rows(), self.data.cols(), y, x_u, x_l)
    }
}

impl BilevelProblem for SlrfProblem {
    fn f1(&self) -> &dyn ProxOperator {
        &self.f1
    }

    fn f2(&self) -> &dyn ProxOperator {
        &self.f2
    }

    fn g1(&self) -> &dyn ProxOperator {
        &self.g1
    }

    fn g2(&self) -> &dyn ProxOperator {
        &self.g2
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

    fn smoothness_x(&self, y: &DenseMatrix) -> Result<f64, MatrixError> {
        gram_norm_rows(y)
    }

    fn smoothness_y(&self, x: &DenseMatrix) -> Result<f64, MatrixError> {
        gram_norm_cols(x)
    }

    fn subgradient_bounds(&self) -> [f64; 4] {
        let (m, n) = self.data.shape();
        [self.params.c1(m), self.params.c2(), self.params.c3(n), self.params.c4()]
    }

    fn stepsize(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, SolverError> {
        let l1 = self.smoothness_x(y)?;
        let l2 = self.smoothness_y(x)?;
        let (m, n) = self.data.shape();
        stepsize_rule(&self.params, m, n, (l1, l2, l2), self.safety_factor)
    }

    fn weight_intervals(
        &self,
        constants: &DescentConstants,
        nu: f64,
    ) -> Result<Option<(Interval, Interval)>, SolverError> {
        let (m, n) = self.data.shape();
        Ok(Some((
            alpha_bounds(&self.params, m, constants.smooth_x, nu),
            beta_bounds(
                &self.params,
                n,
                constants.smooth_y_upper,
                constants.smooth_y_lower,
                self.y_stepsize(nu),
            ),
        )))
    }
}

/// Entrywise standard normal factors scaled so that `||X0 Y0||_F` is of the
/// order of `||M||_F`, split evenly between the two factors.
pub fn initial_factors(m: &DenseMatrix, rank: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    let (rows, cols) = m.shape();
    let scale = (m.frobenius_norm() / ((rows * cols * rank) as f64).sqrt()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) };
    let x = DenseMatrix::from_fn(rows, rank, |_, _| draw());
    let y = DenseMatrix::from_fn(rank, cols, |_, _| draw());
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlrfConfig {
    pub solver: SolverConfig,
    pub safety_factor: f64,
    pub seed: u64,
}

impl Default for SlrfConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            safety_factor: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlrfSolution {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub report: RunReport,
}

/// Factorizes `m` with the bi-level solver from seeded initial factors.
pub fn solve_slrf(m: &DenseMatrix, params: SlrfParams, config: &SlrfConfig) -> Result<SlrfSolution, SolverError> {
    let (x0, y0) = initial_factors(m, params.rank, config.seed);
    solve_slrf_from(m, params, config, x0, y0)
}

pub fn solve_slrf_from(
    m: &DenseMatrix,
    params: SlrfParams,
    config: &SlrfConfig,
    x0: DenseMatrix,
    y0: DenseMatrix,
) -> Result<SlrfSolution, SolverError> {
    if !(config.safety_factor > 0.0) {
        return Err(SolverError::InvalidArgument("safety_factor must be positive".into()));
    }
    let problem = build_problem(m, params)?.with_safety_factor(config.safety_factor);
    let out = bilevel::solve(&problem, x0, y0, &config.solver)?;
    let mut report = out.report;
    let estimate = out.x.matmul(&out.y)?;
    report.metrics = MetricReport::compute(m, &estimate, m.max_abs()).ok();
    Ok(SlrfSolution {
        x: out.x,
        y: out.y,
        report,
    })
}
