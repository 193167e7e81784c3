use binno::bilevel::{self, BilevelProblem, SolverConfig, SolverState};
use binno::data::{generate, SyntheticSpec};
use binno::matrix::{spectral_norm, DenseMatrix};
use binno::slrf::{
    alpha_bounds, alpha_interval, beta_bounds, beta_interval, build_problem, initial_factors, nu_min_alpha,
    nu_min_beta, solve_slrf, stepsize_rule, SlrfConfig, SlrfParams, SlrfProblem,
};
use binno::Termination;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_params(rng: &mut ChaCha8Rng, rank: usize) -> SlrfParams {
    SlrfParams {
        lambda1: rng.random_range(0.01..0.5),
        lambda2: rng.random_range(0.01..0.5),
        gamma1: rng.random_range(0.01..0.5),
        gamma2: rng.random_range(0.01..0.5),
        rank,
    }
}

/// Per-iterate quantities seen by the solver: realized subgradients, gradients
/// and gradient-map norms for the four blocks.
struct Sample {
    subgrads: [DenseMatrix; 4],
    grads: [DenseMatrix; 4],
    q: [f64; 4],
    l1: f64,
}

fn collect_samples(count: usize, seed: u64) -> Vec<(SlrfProblem, Sample)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut case = 0;
    while out.len() < count {
        case += 1;
        let (m, n, r) = (rng.random_range(6..30), rng.random_range(6..25), rng.random_range(1..5));
        let data = random(m, n, &mut rng).scale(3.0);
        let problem = build_problem(&data, random_params(&mut rng, r)).unwrap();
        let (x0, y0) = initial_factors(&data, r, case);
        let config = SolverConfig {
            max_iters: 10,
            ..Default::default()
        };
        let mut samples = Vec::new();
        let mut prev_y = y0.clone();
        bilevel::solve_observed(&problem, x0, y0, &config, &mut |s: &SolverState| {
            let t = s.tentative.as_ref().unwrap();
            let maps = [&t.map_x_upper, &t.map_x_lower, &t.map_y_upper, &t.map_y_lower];
            let grads = [&t.grad_x, &t.grad_x, &t.grad_y_upper, &t.grad_y_lower];
            let c = problem.constants(&prev_y, t.x_u(), t.x_l()).unwrap();
            samples.push(Sample {
                subgrads: std::array::from_fn(|i| maps[i].value.lincomb(1.0, grads[i], -1.0).unwrap()),
                grads: grads.map(|g| g.clone()),
                q: maps.map(|g| g.value.dot(&g.value).unwrap()),
                l1: c.l1,
            });
            prev_y = s.y.clone();
        })
        .unwrap();
        out.extend(samples.into_iter().map(|s| (problem.clone(), s)));
    }
    out.truncate(count);
    out
}

#[test]
fn closed_form_intervals_match_generic_k_l_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let (m, n, r) = (
            rng.random_range(2..100),
            rng.random_range(2..100),
            rng.random_range(1..6),
        );
        let p = random_params(&mut rng, r);
        let l1 = rng.random_range(0.01..50.0);
        let l2u = rng.random_range(0.01..50.0);
        let l2l = rng.random_range(0.01..50.0);
        let nu = rng.random_range(1e-3..2.0);
        let inv = 1.0 / nu;
        let (c1, c2, c3, c4) = (p.c1(m), p.c2(), p.c3(n), p.c4());
        let (k1, ell1) = ((c1 + l1) * (inv + l1), (c1 + l1).powi(2));
        let (k2, ell2) = ((c2 + l1) * (inv + l1), (p.gamma1 + l1) * (2.0 * p.gamma1 + l1));
        let (k3, ell3) = ((c3 + l2u) * (inv + l2u), (c3 + l2u).powi(2));
        let (k4, ell4) = ((c4 + l2l) * (inv + l2l), (2.0 * p.gamma2 + l2l) * (p.gamma2 + l2l));
        let a = alpha_bounds(&p, m, l1, nu);
        let b = beta_bounds(&p, n, l2u, l2l, nu);
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
        assert!(close(a.lo, k1 / (ell1 + k1)));
        assert!(close(a.hi, ell2 / (ell2 + k2)));
        assert!(close(b.lo, k3 / (ell3 + k3)));
        assert!(close(b.hi, ell4 / (ell4 + k4)));

        // Every grid point inside the interval satisfies both inequalities.
        if !a.is_empty() {
            for j in 0..=10 {
                let alpha = a.at(j as f64 / 10.0);
                assert!(k1 / (ell1 + k1) <= alpha + 1e-12);
                assert!(alpha <= ell2 / (ell2 + k2) + 1e-12);
            }
        }
    }
}

#[test]
fn intervals_nonempty_above_stepsize_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (m, n, r) = (
            rng.random_range(2..200),
            rng.random_range(2..200),
            rng.random_range(1..8),
        );
        let p = random_params(&mut rng, r);
        let ls = (
            rng.random_range(0.0..100.0),
            rng.random_range(0.0..100.0),
            rng.random_range(0.0..100.0),
        );
        let nu0 = stepsize_rule(&p, m, n, ls, 1.0).unwrap();
        for factor in [1.0, 1.5, 10.0, 1e3] {
            let nu = nu0 * factor;
            let a = alpha_interval(&p, m, ls.0, nu).unwrap();
            let b = beta_interval(&p, n, ls.1, ls.2, nu).unwrap();
            assert!(0.0 <= a.lo && a.lo <= a.hi && a.hi <= 1.0);
            assert!(0.0 <= b.lo && b.lo <= b.hi && b.hi <= 1.0);
        }
        assert!(nu0 >= nu_min_alpha(&p, m, ls.0).unwrap());
        assert!(nu0 >= nu_min_beta(&p, n, ls.1, ls.2).unwrap());
    }
}

#[test]
fn stepsize_keeps_intervals_nonempty_through_a_long_run() {
    let inst = generate(&SyntheticSpec::default()).unwrap();
    let params = SlrfParams::default();
    let problem = build_problem(&inst.m_observed, params).unwrap();
    let (m, n) = inst.m_observed.shape();
    let (x0, y0) = initial_factors(&inst.m_observed, params.rank, 0);
    let config = SolverConfig {
        max_iters: 200,
        tol: 1e-300,
        nu_min: 1e-14,
    };
    let mut prev = (x0.clone(), y0.clone());
    let mut seen = 0;
    let out = bilevel::solve_observed(&problem, x0, y0, &config, &mut |s| {
        let (x, y) = &prev;
        let nu = problem.stepsize(x, y).unwrap();
        let probe = SolverState::new(&problem, x.clone(), y.clone(), nu).unwrap();
        let t = bilevel::tentative_steps(&probe, &problem).unwrap();
        let c = problem.constants(y, t.x_u(), t.x_l()).unwrap();
        alpha_interval(&params, m, c.l1, nu).unwrap();
        beta_interval(&params, n, c.l2_u, c.l2_l, nu).unwrap();
        seen += 1;
        prev = (s.x.clone(), s.y.clone());
    })
    .unwrap();
    assert_eq!(seen, out.report.iterations);
    assert!(seen >= 50, "only {seen} iterations");
}

#[test]
fn realized_subgradients_respect_spectral_bounds() {
    for (problem, s) in collect_samples(100, 11) {
        let p = problem.params();
        let (m, n) = problem.data().shape();
        let norms: Vec<f64> = s.subgrads.iter().map(|g| spectral_norm(g).unwrap()).collect();
        assert!(norms[0] <= p.c1(m) * (1.0 + 1e-9), "{} > {}", norms[0], p.c1(m));
        assert!(norms[1] <= p.c2() * (1.0 + 1e-9), "{} > {}", norms[1], p.c2());
        assert!(norms[2] <= p.c3(n) * (1.0 + 1e-9));
        assert!(norms[3] <= p.c4() * (1.0 + 1e-9));
        // The nuclear subgradient in fact stays within gamma.
        assert!(norms[1] <= p.gamma1 * (1.0 + 1e-9));
        assert!(norms[3] <= p.gamma2 * (1.0 + 1e-9));
        // Entries of the l1 subgradient lie in [-lambda, lambda].
        assert!(s.subgrads[0].max_abs() <= p.lambda1 * (1.0 + 1e-9));
        assert!(s.subgrads[2].max_abs() <= p.lambda2 * (1.0 + 1e-9));
    }
}

#[test]
fn inner_products_bounded_by_subgradient_plus_gradient_norms() {
    for (problem, s) in collect_samples(100, 12) {
        let p = problem.params();
        let (m, n) = problem.data().shape();
        let r = p.rank as f64;
        let sub_frob = [p.c1(m), p.gamma1 * r.sqrt(), p.c3(n), p.gamma2 * r.sqrt()];
        for (i, (c, g)) in sub_frob.iter().zip(&s.grads).enumerate() {
            let bound = (c + g.frobenius_norm()).powi(2);
            assert!(s.q[i] >= 0.0);
            assert!(s.q[i] <= bound * (1.0 + 1e-9), "q{} = {} > {}", i + 1, s.q[i], bound);
        }
    }
}

#[test]
fn smoothness_only_inner_product_bounds_fail_with_large_residual() {
    // Bounds of the form (c + ||YY^T||_2)^2 ignore the residual in the
    // gradient, so they fail far from a solution.
    let samples = collect_samples(100, 13);
    let violations = samples
        .iter()
        .filter(|(problem, s)| {
            let p = problem.params();
            let (m, _) = problem.data().shape();
            s.q[0] > (p.c1(m) + s.l1).powi(2) || s.q[1] > (p.gamma1 + s.l1) * (2.0 * p.gamma1 + s.l1)
        })
        .count();
    assert!(violations > 0);
}

#[test]
fn noiseless_rank_one_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let u = DenseMatrix::from_fn(30, 1, |_, _| rng.random_range(0.5..1.5));
    let v = DenseMatrix::from_fn(1, 20, |_, _| rng.random_range(0.5..1.5));
    let m = u.matmul(&v).unwrap();
    let params = SlrfParams {
        lambda1: 1e-4,
        lambda2: 1e-4,
        gamma1: 1e-4,
        gamma2: 1e-4,
        rank: 1,
    };
    let config = SlrfConfig {
        solver: SolverConfig {
            max_iters: 500,
            ..Default::default()
        },
        ..Default::default()
    };
    let sol = solve_slrf(&m, params, &config).unwrap();
    let err = sol.report.metrics.unwrap().relative_error;
    assert!(err <= 1e-2, "relative error {err}");
    assert!(sol.report.iterations <= 500);
    assert_eq!(sol.x.shape(), (30, 1));
    assert_eq!(sol.y.shape(), (1, 20));
}

#[test]
fn traces_are_monotone_and_lengths_agree() {
    let inst = generate(&SyntheticSpec {
        m: 40,
        n: 30,
        r: 3,
        ..Default::default()
    })
    .unwrap();
    let sol = solve_slrf(
        &inst.m_observed,
        SlrfParams {
            rank: 3,
            ..Default::default()
        },
        &SlrfConfig::default(),
    )
    .unwrap();
    let rep = &sol.report;
    for trace in [
        &rep.psi1_trace,
        &rep.psi2_trace,
        &rep.alpha_trace,
        &rep.beta_trace,
        &rep.nu_trace,
    ] {
        assert_eq!(trace.len(), rep.iterations);
    }
    for t in [&rep.psi1_trace, &rep.psi2_trace] {
        assert!(t.windows(2).all(|w| bilevel::within_descent(w[1], w[0])));
    }
    assert!(rep
        .alpha_trace
        .iter()
        .chain(&rep.beta_trace)
        .all(|w| (0.0..=1.0).contains(w)));
    assert_ne!(rep.termination, Termination::StalledStepsize);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interval_is_empty_exactly_below_nu_min(
        lambda1 in 1e-3f64..5.0,
        gamma1 in 1e-3f64..5.0,
        rows in 1usize..300,
        l1 in 1e-3f64..100.0,
        factor in 0.05f64..20.0,
    ) {
        let p = SlrfParams { lambda1, gamma1, rank: 1, ..Default::default() };
        let nu_min = nu_min_alpha(&p, rows, l1).unwrap();
        let i = alpha_bounds(&p, rows, l1, nu_min * factor);
        if factor < 0.999 {
            prop_assert!(i.is_empty());
        } else if factor > 1.001 {
            prop_assert!(!i.is_empty());
        }
    }
}
