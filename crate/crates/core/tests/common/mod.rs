#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rstgam_core::bpst::BivariateBasis;
use rstgam_core::glm::{Coefficients, FitProblem, PanelData, SpatialModel, UnivariateSpec, WindowDesign};
use rstgam_core::mesh::TriMesh;
use rstgam_core::simulate::{sample_locations, single_triangle_mesh};

pub fn two_triangle_mesh() -> TriMesh {
    TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.2, 0.9]], vec![[0, 1, 2], [1, 3, 2]]).unwrap()
}

pub fn square_mesh(k: usize) -> TriMesh {
    let mut v = Vec::new();
    for j in 0..=k {
        for i in 0..=k {
            let jit = if i > 0 && i < k && j > 0 && j < k { 0.15 * ((i * 7 + j * 3) % 5) as f64 / 5.0 } else { 0.0 };
            v.push([i as f64 / k as f64 + jit / k as f64, j as f64 / k as f64 - jit / k as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (k + 1) + i;
    let mut t = Vec::new();
    for j in 0..k {
        for i in 0..k {
            t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(v, t).unwrap()
}

/// Random panel on `mesh` with `p` uniform covariates and moderate counts.
pub fn random_panel(mesh: &TriMesh, n: usize, tn: usize, p: usize, seed: u64) -> PanelData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations = sample_locations(mesh, n, &mut rng);
    let mut counts = Vec::new();
    let mut covariates = Vec::new();
    for u in &locations {
        for _ in 0..tn {
            let mut eta = 1.0 + 0.5 * u[0] - 0.3 * u[1];
            for k in 0..p {
                let x: f64 = rng.random();
                eta += 0.4 * (x - 0.5) * (k as f64 + 1.0);
                covariates.push(x);
            }
            counts.push(Poisson::new(eta.exp()).unwrap().sample(&mut rng));
        }
    }
    PanelData::new(locations, tn, p, counts, covariates).unwrap()
}

pub fn problem_on(mesh: TriMesh, n: usize, tn: usize, p: usize, t0: usize, seed: u64) -> FitProblem {
    let panel = random_panel(&mesh, n, tn, p, seed);
    let spatial = Arc::new(SpatialModel::new(BivariateBasis::new(mesh, 2, 1).unwrap()));
    let design = WindowDesign::assemble(&panel, spatial, tn - 1, t0, UnivariateSpec::default()).unwrap();
    FitProblem::new(Arc::new(design))
}

pub fn small_random_problem(seed: u64) -> FitProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.random_range(20..40);
    let p = rng.random_range(1..3);
    let tn = rng.random_range(2..4);
    let mesh = if seed % 2 == 0 { single_triangle_mesh() } else { two_triangle_mesh() };
    let prob = problem_on(mesh, n, tn, p, tn - 1, seed);
    let l0 = rng.random_range(0.0..2.0);
    let l1 = rng.random_range(0.0..3.0);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    prob.with_lambdas(l0, l1).with_weights(w).unwrap()
}

/// Random coefficients with modest linear predictor and nonnegative slacks.
pub fn random_point(problem: &FitProblem, seed: u64, scale: f64) -> Coefficients {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = problem.zero_coefficients();
    for v in c.gamma_star_mut() {
        *v = rng.random_range(-scale..scale);
    }
    for v in c.theta_mut() {
        *v = rng.random_range(-scale..scale) * 0.3;
    }
    for v in c.xi_mut() {
        *v = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..scale) };
    }
    c
}
