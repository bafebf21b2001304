mod common;

use std::sync::Arc;

use rstgam_core::bpst::BivariateBasis;
use rstgam_core::glm::{Coefficients, FitProblem, SpatialModel, UnivariateSpec, WindowDesign};
use rstgam_core::simulate::single_triangle_mesh;

use common::{random_panel, random_point, small_random_problem, square_mesh};

fn max_rel_fd_error(problem: &FitProblem, c: &Coefficients) -> f64 {
    let g = problem.gradient_f(c);
    let mut worst = 0.0f64;
    for j in 0..c.len() {
        let h = 1e-6 * c[j].abs().max(1.0);
        let (mut a, mut b) = (c.clone(), c.clone());
        a[j] += h;
        b[j] -= h;
        let fd = (problem.objective_f(&a) - problem.objective_f(&b)) / (2.0 * h);
        let scale = g[j].abs().max(fd.abs()).max(1.0);
        worst = worst.max((g[j] - fd).abs() / scale);
    }
    worst
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..20 {
        let p = small_random_problem(seed);
        let c = random_point(&p, seed + 100, 0.5);
        let e = max_rel_fd_error(&p, &c);
        assert!(e < 1e-5, "seed {seed}: {e}");
    }
}

#[test]
fn gradient_is_exact_past_the_cap() {
    let mut p = small_random_problem(4);
    p.eta_max = 1.0;
    let c = random_point(&p, 9, 1.0);
    assert!(p.eval(&c).cap_hits > 0);
    assert!(max_rel_fd_error(&p, &c) < 1e-5);
}

/// Direct sum over locations and window days, evaluating every basis from scratch.
#[test]
fn objective_matches_naive_sum() {
    let (tn, t0) = (4, 2);
    let panel = random_panel(&square_mesh(2), 30, tn, 2, 11);
    let spatial = Arc::new(SpatialModel::new(BivariateBasis::new(square_mesh(2), 2, 1).unwrap()));
    let design = Arc::new(WindowDesign::assemble(&panel, spatial.clone(), tn - 1, t0, UnivariateSpec::default()).unwrap());
    let problem = FitProblem::new(design.clone()).with_lambdas(0.7, 1.3);
    let c = random_point(&problem, 5, 0.4);
    let gamma = spatial.constraints.expand(c.gamma_star());
    let ps = spatial.constraints.reduced_penalty();
    let mut f = 0.5 * 0.7 * ps.quad_form(c.gamma_star());
    for i in 0..panel.n_locations() {
        let beta = spatial.basis.evaluate(&gamma, panel.locations()[i]).unwrap();
        for s in (tn - 1 - t0)..tn {
            let mut eta = beta + c.xi()[i];
            for k in 0..2 {
                let r = design.theta_range(k);
                eta += design.univariate_bases()[k].evaluate(&c.theta()[r], panel.covariate(i, s, k));
            }
            f += eta.exp() - panel.count(i, s) * eta;
        }
    }
    let got = problem.objective_f(&c);
    assert!((got - f).abs() < 1e-10 * f.abs().max(1.0), "{got} vs {f}");
    let g = problem.objective_g(&c);
    let want: f64 = c.xi().iter().sum::<f64>() * 1.3;
    assert!((g - want).abs() < 1e-12 * want.max(1.0));
}

#[test]
fn objective_is_midpoint_convex() {
    for seed in 0..10 {
        let p = small_random_problem(seed);
        let a = random_point(&p, 2 * seed, 1.0);
        let b = random_point(&p, 2 * seed + 1, 1.0);
        let m = a.with_data(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| 0.5 * (x + y)).collect());
        let (fa, fb, fm) = (p.objective_f(&a), p.objective_f(&b), p.objective_f(&m));
        assert!(fm <= 0.5 * (fa + fb) + 1e-9 * fa.abs().max(fb.abs()));
    }
}

/// With `λ₀ = 0` a two-day window's loss is the sum of its per-day losses.
#[test]
fn window_loss_adds_over_days() {
    let panel = random_panel(&single_triangle_mesh(), 25, 3, 1, 8);
    let spatial = Arc::new(SpatialModel::new(BivariateBasis::new(single_triangle_mesh(), 2, 1).unwrap()));
    let design = Arc::new(WindowDesign::assemble(&panel, spatial, 2, 1, UnivariateSpec::default()).unwrap());
    let problem = FitProblem::new(design.clone());
    let c = random_point(&problem, 3, 0.5);
    let (eta, _) = problem.linear_predictor(&c);
    let mut per_day = [0.0; 2];
    for i in 0..25 {
        for s in 0..2 {
            let e = eta[i * 2 + s];
            per_day[s] += e.exp() - panel.count(i, 1 + s) * e;
        }
    }
    let f = problem.objective_f(&c);
    assert!((f - per_day[0] - per_day[1]).abs() < 1e-10 * f.abs());
}

#[test]
fn unpenalized_slack_only_gradient() {
    let p = small_random_problem(3);
    let c = p.zero_coefficients();
    let g = p.gradient_f(&c);
    let w = p.design().window_len();
    for (i, gx) in g.xi().iter().enumerate() {
        let want: f64 = p.counts()[i * w..(i + 1) * w].iter().map(|y| 1.0 - y).sum();
        assert!((gx - want).abs() < 1e-12);
    }
}
