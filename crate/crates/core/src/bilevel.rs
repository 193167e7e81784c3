//! Generic bi-level iteration.
//!
//! Each iteration takes a proximal gradient step on both blocks for the upper
//! objective `psi1 = f1(x) + g1(y) + H(x, y)` and for the lower objective
//! `psi2 = f2(x) + g2(y) + H(x, y)`, then combines the two tentative iterates
//!
//! ```text
//! x+ = alpha * x_u + (1 - alpha) * x_l
//! y+ = beta  * y_u + (1 - beta)  * y_l
//! ```
//!
//! with weights drawn from the admissible intervals and certified by direct
//! evaluation of both objectives. The y-steps use the gradient at the freshly
//! updated x of their own level.

use std::time::Instant;

use log::{debug, trace};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{DenseMatrix, MatrixError};
use crate::prox::{prox_gradient_map, GradientMap, ProxOperator};
use crate::report::{RunReport, Termination};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("empty {which} interval [{lo}, {hi}]")]
    EmptyInterval { which: &'static str, lo: f64, hi: f64 },
    #[error("no weight pair on the search grid certifies descent")]
    NoDescentWeight,
    #[error("stepsize fell below {nu_min:e} without certified descent")]
    StalledStepsize { nu_min: f64 },
    #[error("stepsize denominator vanishes; supply the stepsize explicitly")]
    DegenerateDenominator,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Relative slack allowed in the descent test.
pub const DESCENT_RTOL: f64 = 1e-12;

/// Number of equally spaced grid points searched inside a weight interval.
pub const WEIGHT_GRID_POINTS: usize = 11;

/// Closed interval `[lo, hi]`; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    /// Point at relative position `t` in `[0, 1]`.
    pub fn at(&self, t: f64) -> f64 {
        (self.lo + t * (self.hi - self.lo)).clamp(self.lo, self.hi)
    }

    pub fn clamp_unit(self) -> Self {
        Self {
            lo: self.lo.clamp(0.0, 1.0),
            hi: self.hi.clamp(0.0, 1.0),
        }
    }
}

/// A two-block problem with an upper and a lower level sharing the coupling `H`.
///
/// Implementations must be pure: the solver may evaluate any method in any
/// order and more than once per iteration.
pub trait BilevelProblem {
    fn f1(&self) -> &dyn ProxOperator;
    fn f2(&self) -> &dyn ProxOperator;
    fn g1(&self) -> &dyn ProxOperator;
    fn g2(&self) -> &dyn ProxOperator;

    fn coupling_value(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError>;
    fn coupling_grad_x(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError>;
    fn coupling_grad_y(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix, MatrixError>;

    /// Block Lipschitz constant of `grad_x H(., y)`.
    fn smoothness_x(&self, y: &DenseMatrix) -> Result<f64, MatrixError>;
    /// Block Lipschitz constant of `grad_y H(x, .)`.
    fn smoothness_y(&self, x: &DenseMatrix) -> Result<f64, MatrixError>;

    /// Bounds `c1..c4` on the subgradients of `f1, f2, g1, g2`.
    fn subgradient_bounds(&self) -> [f64; 4];

    /// Initial stepsize for the iteration starting at `(x, y)`.
    fn stepsize(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, SolverError>;

    /// Stepsize for the y-block given the shared one. Defaults to sharing.
    fn y_stepsize(&self, nu: f64) -> f64 {
        nu
    }

    /// Problem-specific weight intervals. `None` selects the generic intervals
    /// built from [`DescentConstants`].
    fn weight_intervals(
        &self,
        _constants: &DescentConstants,
        _nu: f64,
    ) -> Result<Option<(Interval, Interval)>, SolverError> {
        Ok(None)
    }

    fn upper_objective(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        Ok(self.f1().value(x)? + self.g1().value(y)? + self.coupling_value(x, y)?)
    }

    fn lower_objective(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, MatrixError> {
        Ok(self.f2().value(x)? + self.g2().value(y)? + self.coupling_value(x, y)?)
    }
}

/// Scalars feeding the weight intervals.
///
/// Index `i` of each array corresponds to `f1, f2, g1, g2` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentConstants {
    pub c: [f64; 4],
    /// `L1`, smoothness in x at `y_k`.
    pub smooth_x: f64,
    /// `L2` evaluated at `x_u`.
    pub smooth_y_upper: f64,
    /// `L2` evaluated at `x_l`.
    pub smooth_y_lower: f64,
    pub k: [f64; 4],
    /// `|q_i|`.
    pub ell: [f64; 4],
    pub q: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_interval: Interval,
    pub beta_interval: Interval,
}

/// Tentative iterates of one iteration and the gradient maps that produced them.
#[derive(Debug, Clone)]
pub struct TentativeIterates {
    pub grad_x: DenseMatrix,
    pub grad_y_upper: DenseMatrix,
    pub grad_y_lower: DenseMatrix,
    pub map_x_upper: GradientMap,
    pub map_x_lower: GradientMap,
    pub map_y_upper: GradientMap,
    pub map_y_lower: GradientMap,
}

impl TentativeIterates {
    pub fn x_u(&self) -> &DenseMatrix {
        &self.map_x_upper.point
    }

    pub fn x_l(&self) -> &DenseMatrix {
        &self.map_x_lower.point
    }

    pub fn y_u(&self) -> &DenseMatrix {
        &self.map_y_upper.point
    }

    pub fn y_l(&self) -> &DenseMatrix {
        &self.map_y_lower.point
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub nu: f64,
    pub tentative: Option<TentativeIterates>,
    pub weights: Option<CombinationWeights>,
    /// Objective values, starting with the initial point.
    pub psi1_history: Vec<f64>,
    pub psi2_history: Vec<f64>,
    pub iteration: usize,
}

impl SolverState {
    pub fn new<P: BilevelProblem + ?Sized>(
        problem: &P,
        x: DenseMatrix,
        y: DenseMatrix,
        nu: f64,
    ) -> Result<Self, SolverError> {
        let psi1 = problem.upper_objective(&x, &y)?;
        let psi2 = problem.lower_objective(&x, &y)?;
        Ok(Self {
            x,
            y,
            nu,
            tentative: None,
            weights: None,
            psi1_history: vec![psi1],
            psi2_history: vec![psi2],
            iteration: 0,
        })
    }

    pub fn psi1(&self) -> f64 {
        *self.psi1_history.last().expect("history starts non-empty")
    }

    pub fn psi2(&self) -> f64 {
        *self.psi2_history.last().expect("history starts non-empty")
    }

    fn tentative(&self) -> Result<&TentativeIterates, SolverError> {
        self.tentative
            .as_ref()
            .ok_or_else(|| SolverError::InvalidArgument("tentative iterates not computed".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub nu_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-6,
            nu_min: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters < 1 {
            return Err(SolverError::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidArgument("tol must be positive".into()));
        }
        if !(self.nu_min > 0.0) {
            return Err(SolverError::InvalidArgument("nu_min must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub report: RunReport,
}

fn x_gradient<P: BilevelProblem + ?Sized>(state: &SolverState, problem: &P) -> Result<DenseMatrix, MatrixError> {
    problem.coupling_grad_x(&state.x, &state.y)
}

/// `prox_f1(x_k - nu * grad_x H(x_k, y_k))`.
pub fn upper_x_step<P: BilevelProblem + ?Sized>(state: &SolverState, problem: &P) -> Result<DenseMatrix, SolverError> {
    let g = x_gradient(state, problem)?;
    Ok(prox_gradient_map(&state.x, &g, problem.f1(), state.nu)?.point)
}

/// `prox_g1(y_k - nu * grad_y H(x_u, y_k))`.
pub fn upper_y_step<P: BilevelProblem + ?Sized>(
    state: &SolverState,
    problem: &P,
    x_u: &DenseMatrix,
) -> Result<DenseMatrix, SolverError> {
    let g = problem.coupling_grad_y(x_u, &state.y)?;
    Ok(prox_gradient_map(&state.y, &g, problem.g1(), problem.y_stepsize(state.nu))?.point)
}

/// `prox_f2(x_k - nu * grad_x H(x_k, y_k))`.
pub fn lower_x_step<P: BilevelProblem + ?Sized>(state: &SolverState, problem: &P) -> Result<DenseMatrix, SolverError> {
    let g = x_gradient(state, problem)?;
    Ok(prox_gradient_map(&state.x, &g, problem.f2(), state.nu)?.point)
}

/// `prox_g2(y_k - nu * grad_y H(x_l, y_k))`.
pub fn lower_y_step<P: BilevelProblem + ?Sized>(
    state: &SolverState,
    problem: &P,
    x_l: &DenseMatrix,
) -> Result<DenseMatrix, SolverError> {
    let g = problem.coupling_grad_y(x_l, &state.y)?;
    Ok(prox_gradient_map(&state.y, &g, problem.g2(), problem.y_stepsize(state.nu))?.point)
}

/// All four tentative steps, sharing the x-gradient between levels.
pub fn tentative_steps<P: BilevelProblem + ?Sized>(
    state: &SolverState,
    problem: &P,
) -> Result<TentativeIterates, SolverError> {
    let nu = state.nu;
    let nu_y = problem.y_stepsize(nu);
    let grad_x = x_gradient(state, problem)?;
    let map_x_upper = prox_gradient_map(&state.x, &grad_x, problem.f1(), nu)?;
    let map_x_lower = prox_gradient_map(&state.x, &grad_x, problem.f2(), nu)?;
    let grad_y_upper = problem.coupling_grad_y(&map_x_upper.point, &state.y)?;
    let map_y_upper = prox_gradient_map(&state.y, &grad_y_upper, problem.g1(), nu_y)?;
    let grad_y_lower = problem.coupling_grad_y(&map_x_lower.point, &state.y)?;
    let map_y_lower = prox_gradient_map(&state.y, &grad_y_lower, problem.g2(), nu_y)?;
    Ok(TentativeIterates {
        grad_x,
        grad_y_upper,
        grad_y_lower,
        map_x_upper,
        map_x_lower,
        map_y_upper,
        map_y_lower,
    })
}

// <s + grad, G> where s = G - grad is the subgradient certified by the prox step.
fn realized_inner(map: &GradientMap, grad: &DenseMatrix) -> Result<f64, MatrixError> {
    let subgrad = map.value.lincomb(1.0, grad, -1.0)?;
    (&subgrad + grad).dot(&map.value)
}

/// Constants `c_i, L, k_i, q_i, l_i` for the current tentative iterates.
///
/// `q_i` uses the subgradient realized by the corresponding prox step,
/// `s = G - grad H`, which lies in the subdifferential at the prox output.
pub fn compute_descent_constants<P: BilevelProblem + ?Sized>(
    state: &SolverState,
    problem: &P,
) -> Result<DescentConstants, SolverError> {
    let t = state.tentative()?;
    let c = problem.subgradient_bounds();
    let smooth_x = problem.smoothness_x(&state.y)?;
    let smooth_y_upper = problem.smoothness_y(t.x_u())?;
    let smooth_y_lower = problem.smoothness_y(t.x_l())?;
    let inv_x = 1.0 / state.nu;
    let inv_y = 1.0 / problem.y_stepsize(state.nu);
    let k = [
        (c[0] + smooth_x) * (inv_x + smooth_x),
        (c[1] + smooth_x) * (inv_x + smooth_x),
        (c[2] + smooth_y_upper) * (inv_y + smooth_y_upper),
        (c[3] + smooth_y_lower) * (inv_y + smooth_y_lower),
    ];
    let q = [
        realized_inner(&t.map_x_upper, &t.grad_x)?,
        realized_inner(&t.map_x_lower, &t.grad_x)?,
        realized_inner(&t.map_y_upper, &t.grad_y_upper)?,
        realized_inner(&t.map_y_lower, &t.grad_y_lower)?,
    ];
    Ok(DescentConstants {
        c,
        smooth_x,
        smooth_y_upper,
        smooth_y_lower,
        k,
        ell: q.map(f64::abs),
        q,
    })
}

fn ratio_or(num: f64, den: f64, degenerate: f64) -> f64 {
    if den == 0.0 {
        degenerate
    } else {
        num / den
    }
}

/// `[k1/(l1+k1), l2/(l2+k2)]` and `[k3/(l3+k3), l4/(l4+k4)]`, intersected with `[0, 1]`.
///
/// A vanishing denominator leaves the corresponding side unconstrained.
pub fn generic_intervals(constants: &DescentConstants) -> (Interval, Interval) {
    let DescentConstants { k, ell, .. } = constants;
    let alpha = Interval::new(ratio_or(k[0], ell[0] + k[0], 0.0), ratio_or(ell[1], ell[1] + k[1], 1.0));
    let beta = Interval::new(ratio_or(k[2], ell[2] + k[2], 0.0), ratio_or(ell[3], ell[3] + k[3], 1.0));
    (alpha.clamp_unit(), beta.clamp_unit())
}

/// Convex combination of the tentative iterates.
pub fn combine(state: &SolverState, weights: &CombinationWeights) -> Result<(DenseMatrix, DenseMatrix), SolverError> {
    let t = state.tentative()?;
    combine_with(t, weights.alpha, weights.beta)
}

fn combine_with(t: &TentativeIterates, alpha: f64, beta: f64) -> Result<(DenseMatrix, DenseMatrix), SolverError> {
    let x = t.x_u().lincomb(alpha, t.x_l(), 1.0 - alpha)?;
    let y = t.y_u().lincomb(beta, t.y_l(), 1.0 - beta)?;
    Ok((x, y))
}

/// `new <= old (1 + DESCENT_RTOL)` for nonnegative `old`.
pub fn within_descent(new: f64, old: f64) -> bool {
    new <= old + DESCENT_RTOL * old.abs()
}

struct Candidate {
    psi1: f64,
    psi2: f64,
}

// Objective values at the combined iterate, or None when it is not finite.
fn evaluate<P: BilevelProblem + ?Sized>(
    state: &SolverState,
    problem: &P,
    alpha: f64,
    beta: f64,
) -> Result<Option<Candidate>, SolverError> {
    let (x, y) = combine_with(state.tentative()?, alpha, beta)?;
    if !x.is_finite() || !y.is_finite() {
        return Ok(None);
    }
    let psi1 = problem.upper_objective(&x, &y)?;
    let psi2 = problem.lower_objective(&x, &y)?;
    if !psi1.is_finite() || !psi2.is_finite() {
        return Ok(None);
    }
    Ok(Some(Candidate { psi1, psi2 }))
}

fn certifies(state: &SolverState, c: &Candidate) -> bool {
    within_descent(c.psi1, state.psi1()) && within_descent(c.psi2, state.psi2())
}

fn weight_intervals<P: BilevelProblem + ?Sized>(
    constants: &DescentConstants,
    state: &SolverState,
    problem: &P,
) -> Result<(Interval, Interval), SolverError> {
    Ok(match problem.weight_intervals(constants, state.nu)? {
        Some(pair) => pair,
        None => generic_intervals(constants),
    })
}

/// Picks `(alpha, beta)` inside the admissible intervals.
///
/// The interval midpoints are tried first, then an equally spaced grid walked
/// jointly through both intervals. The first pair under which neither
/// objective increases is returned.
pub fn select_weights<P: BilevelProblem + ?Sized>(
    constants: &DescentConstants,
    state: &SolverState,
    problem: &P,
) -> Result<CombinationWeights, SolverError> {
    let (alpha_interval, beta_interval) = weight_intervals(constants, state, problem)?;
    for (which, i) in [("alpha", alpha_interval), ("beta", beta_interval)] {
        if i.is_empty() {
            return Err(SolverError::EmptyInterval {
                which,
                lo: i.lo,
                hi: i.hi,
            });
        }
    }
    let grid = (0..WEIGHT_GRID_POINTS).map(|i| i as f64 / (WEIGHT_GRID_POINTS - 1) as f64);
    for t in std::iter::once(0.5).chain(grid) {
        let alpha = alpha_interval.at(t);
        let beta = beta_interval.at(t);
        if let Some(c) = evaluate(state, problem, alpha, beta)? {
            if certifies(state, &c) {
                return Ok(CombinationWeights {
                    alpha,
                    beta,
                    alpha_interval,
                    beta_interval,
                });
            }
        }
    }
    Err(SolverError::NoDescentWeight)
}

/// Fallback used when the intervals are empty or their grid fails: the pair
/// from `{0, 1/2, 1}^2` minimizing the larger of the two objective changes,
/// among pairs that certify descent on both.
pub fn fallback_weights<P: BilevelProblem + ?Sized>(
    constants: &DescentConstants,
    state: &SolverState,
    problem: &P,
) -> Result<Option<CombinationWeights>, SolverError> {
    let (alpha_interval, beta_interval) = weight_intervals(constants, state, problem)?;
    let levels = [0.0, 0.5, 1.0];
    let mut best: Option<(f64, f64, f64)> = None;
    for &alpha in &levels {
        for &beta in &levels {
            let Some(c) = evaluate(state, problem, alpha, beta)? else {
                continue;
            };
            if !certifies(state, &c) {
                continue;
            }
            let worst = (c.psi1 - state.psi1()).max(c.psi2 - state.psi2());
            if best.is_none_or(|(w, _, _)| worst < w) {
                best = Some((worst, alpha, beta));
            }
        }
    }
    Ok(best.map(|(_, alpha, beta)| CombinationWeights {
        alpha,
        beta,
        alpha_interval,
        beta_interval,
    }))
}

fn is_non_finite(e: &SolverError) -> bool {
    matches!(e, SolverError::Matrix(MatrixError::NonFinite { .. }))
}

// One trial at the current stepsize. Ok(None) asks the caller to shrink it.
fn attempt<P: BilevelProblem + ?Sized>(
    state: &mut SolverState,
    problem: &P,
) -> Result<Option<CombinationWeights>, SolverError> {
    state.tentative = match tentative_steps(state, problem) {
        Ok(t) => Some(t),
        Err(e) if is_non_finite(&e) => return Ok(None),
        Err(e) => return Err(e),
    };
    let constants = match compute_descent_constants(state, problem) {
        Ok(c) => c,
        Err(e) if is_non_finite(&e) => return Ok(None),
        Err(e) => return Err(e),
    };
    trace!("nu={:e} constants={:?}", state.nu, constants);
    match select_weights(&constants, state, problem) {
        Ok(w) => Ok(Some(w)),
        Err(SolverError::EmptyInterval { .. } | SolverError::NoDescentWeight) => {
            fallback_weights(&constants, state, problem)
        }
        Err(e) if is_non_finite(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_shapes<P: BilevelProblem + ?Sized>(problem: &P, x: &DenseMatrix, y: &DenseMatrix) -> Result<(), SolverError> {
    let gx = problem.coupling_grad_x(x, y)?;
    let gy = problem.coupling_grad_y(x, y)?;
    if gx.shape() != x.shape() || gy.shape() != y.shape() {
        return Err(SolverError::InvalidArgument(format!(
            "gradient shapes {:?}/{:?} do not match blocks {:?}/{:?}",
            gx.shape(),
            gy.shape(),
            x.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// Runs the bi-level iteration from `(init_x, init_y)`.
pub fn solve<P: BilevelProblem + ?Sized>(
    problem: &P,
    init_x: DenseMatrix,
    init_y: DenseMatrix,
    config: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    solve_observed(problem, init_x, init_y, config, &mut |_| {})
}

/// As [`solve`], calling `observer` after every accepted iteration.
pub fn solve_observed<P: BilevelProblem + ?Sized>(
    problem: &P,
    init_x: DenseMatrix,
    init_y: DenseMatrix,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&SolverState),
) -> Result<SolveOutcome, SolverError> {
    config.validate()?;
    init_x.check_finite()?;
    init_y.check_finite()?;
    check_shapes(problem, &init_x, &init_y)?;

    let start = Instant::now();
    let mut state = SolverState::new(problem, init_x, init_y, 0.0)?;
    let mut report = RunReport::new("binno");

    for _ in 0..config.max_iters {
        let mut nu = problem.stepsize(&state.x, &state.y)?;
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(SolverError::InvalidArgument(format!("stepsize rule returned {nu}")));
        }
        let weights = loop {
            if nu < config.nu_min {
                break None;
            }
            state.nu = nu;
            if let Some(w) = attempt(&mut state, problem)? {
                break Some(w);
            }
            nu *= 0.5;
        };
        let Some(weights) = weights else {
            debug!("stalled at iteration {}", state.iteration + 1);
            report.termination = Termination::StalledStepsize;
            break;
        };

        let (x_next, y_next) = combine(&state, &weights)?;
        let psi1 = problem.upper_objective(&x_next, &y_next)?;
        let psi2 = problem.lower_objective(&x_next, &y_next)?;
        let dx = (&x_next - &state.x).frobenius_norm();
        let dy = (&y_next - &state.y).frobenius_norm();
        let scale = 1.0 + state.x.frobenius_norm() + state.y.frobenius_norm();

        state.x = x_next;
        state.y = y_next;
        state.iteration += 1;
        state.psi1_history.push(psi1);
        state.psi2_history.push(psi2);
        report.psi1_trace.push(psi1);
        report.psi2_trace.push(psi2);
        report.alpha_trace.push(weights.alpha);
        report.beta_trace.push(weights.beta);
        report.nu_trace.push(state.nu);
        state.weights = Some(weights);
        observer(&state);

        if dx.max(dy) <= config.tol * scale {
            report.termination = Termination::Converged;
            break;
        }
    }

    report.iterations = state.iteration;
    report.converged = report.termination == Termination::Converged;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(SolveOutcome {
        x: state.x,
        y: state.y,
        report,
    })
}
