mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstgam_core::bpst::{BivariateBasis, ConstraintSystem};
use rstgam_core::linalg::Matrix;
use rstgam_core::mesh::{Point, TriMesh};
use rstgam_core::simulate::{fine_horseshoe_mesh, sample_locations};

use common::{square_mesh, two_triangle_mesh};

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn min_eigen(m: &Matrix) -> (f64, f64) {
    let e = SymmetricEigen::new(to_na(m)).eigenvalues;
    (e.min(), e.max())
}

/// Degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1).
fn quadrature_rule() -> Vec<([f64; 3], f64)> {
    let (a1, b1, w1) = (0.059715871789770, 0.470142064105115, 0.132394152788506);
    let (a2, b2, w2) = (0.797426985353087, 0.101286507323456, 0.125939180544827);
    let mut r = vec![([1.0 / 3.0; 3], 0.225)];
    for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
        r.push(([a, b, b], w));
        r.push(([b, a, b], w));
        r.push(([b, b, a], w));
    }
    r
}

fn local_gradient(basis: &BivariateBasis, gamma: &[f64], t: usize, u: Point) -> [f64; 2] {
    let b = basis.mesh().barycentric(t, u);
    let off = t * basis.n_local();
    basis.gradient_local(t, b).iter().zip(&gamma[off..]).fold([0.0; 2], |acc, (g, c)| [acc[0] + g[0] * c, acc[1] + g[1] * c])
}

/// Thin-plate energy by quadrature, second derivatives by central differences of the
/// analytic gradient (exact for degree ≤ 3).
fn energy_by_quadrature(basis: &BivariateBasis, gamma: &[f64]) -> f64 {
    let h = 1e-3;
    let mesh = basis.mesh();
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        let area = mesh.triangle_area(t);
        for (b, w) in quadrature_rule() {
            let u = mesh.from_barycentric(t, b);
            let gx1 = local_gradient(basis, gamma, t, [u[0] + h, u[1]]);
            let gx0 = local_gradient(basis, gamma, t, [u[0] - h, u[1]]);
            let gy1 = local_gradient(basis, gamma, t, [u[0], u[1] + h]);
            let gy0 = local_gradient(basis, gamma, t, [u[0], u[1] - h]);
            let fxx = (gx1[0] - gx0[0]) / (2.0 * h);
            let fxy = (gy1[0] - gy0[0]) / (2.0 * h);
            let fyy = (gy1[1] - gy0[1]) / (2.0 * h);
            total += w * area * (fxx * fxx + 2.0 * fxy * fxy + fyy * fyy);
        }
    }
    total
}

#[test]
fn energy_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (mesh, d) in [(two_triangle_mesh(), 2), (square_mesh(3), 2), (square_mesh(2), 3), (two_triangle_mesh(), 3)] {
        let basis = BivariateBasis::new(mesh, d, 1).unwrap();
        let p = basis.build_energy_penalty();
        for _ in 0..5 {
            let g: Vec<f64> = (0..basis.n_basis()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exact = p.quad_form(&g);
            let quad = energy_by_quadrature(&basis, &g);
            assert!((exact - quad).abs() <= 1e-6 * quad.abs().max(1e-12), "d={d}: {exact} vs {quad}");
        }
    }
}

#[test]
fn partition_of_unity_on_horseshoe() {
    let mesh = fine_horseshoe_mesh();
    let basis = BivariateBasis::new(mesh.clone(), 2, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for u in sample_locations(&mesh, 1000, &mut rng) {
        let s: f64 = basis.eval_basis(u).unwrap().values.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn null_space_map_is_orthonormal_and_annihilated() {
    for (mesh, d, r) in [(square_mesh(3), 2, 1), (fine_horseshoe_mesh(), 2, 1), (square_mesh(2), 3, 1), (square_mesh(2), 4, 2)] {
        let basis = BivariateBasis::new(mesh, d, r).unwrap();
        let cs = ConstraintSystem::build(&basis);
        let pq = cs.psi.mul_dense(&cs.q2);
        assert!(pq.max_abs() < 1e-10, "Ψ Q₂ = {}", pq.max_abs());
        let qtq = cs.q2.transpose().matmul(&cs.q2);
        for i in 0..qtq.rows() {
            for j in 0..qtq.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - want).abs() < 1e-10);
            }
        }
        // null(Ψ) has dimension cols − rank, cross-checked with an SVD
        let svd = to_na(&cs.psi.to_dense()).svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-9 * smax).count();
        assert_eq!(rank, cs.rank);
        assert_eq!(cs.n_free(), basis.n_basis() - rank);
    }
}

#[test]
fn penalties_are_positive_semidefinite() {
    let basis = BivariateBasis::new(fine_horseshoe_mesh(), 2, 1).unwrap();
    let cs = ConstraintSystem::build(&basis);
    let p = cs.penalty.to_dense();
    let (lo, hi) = min_eigen(&p);
    assert!(lo > -1e-9 * hi, "min eigenvalue {lo}");
    let (lo, hi) = min_eigen(&cs.reduced_penalty());
    assert!(lo > -1e-9 * hi, "min eigenvalue {lo}");
}

/// The reduced penalty vanishes exactly on the linear functions, which lie in the spline space.
#[test]
fn reduced_penalty_kernel_is_linear_functions() {
    let basis = BivariateBasis::new(square_mesh(3), 2, 1).unwrap();
    let cs = ConstraintSystem::build(&basis);
    let ps = cs.reduced_penalty();
    let e = SymmetricEigen::new(to_na(&ps)).eigenvalues;
    let hi = e.max();
    assert_eq!(e.iter().filter(|&&v| v < 1e-9 * hi).count(), 3);
}

fn continuity_error(mesh: TriMesh, points: usize, seed: u64) -> (f64, f64) {
    let basis = BivariateBasis::new(mesh, 2, 1).unwrap();
    let cs = ConstraintSystem::build(&basis);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gs: Vec<f64> = (0..cs.n_free()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = cs.expand(&gs);
    let interior: Vec<_> = basis.mesh().interior_edges().copied().collect();
    let (mut ev, mut eg) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let e = interior[rng.random_range(0..interior.len())];
        let s: f64 = rng.random();
        let [a, b] = e.vertices.map(|v| basis.mesh().vertices()[v]);
        let u = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let (t1, t2) = (e.first, e.second.unwrap());
        let v1 = basis.eval_local(t1, basis.mesh().barycentric(t1, u)).dot(&g);
        let v2 = basis.eval_local(t2, basis.mesh().barycentric(t2, u)).dot(&g);
        let g1 = local_gradient(&basis, &g, t1, u);
        let g2 = local_gradient(&basis, &g, t2, u);
        ev = ev.max((v1 - v2).abs());
        eg = eg.max((g1[0] - g2[0]).abs()).max((g1[1] - g2[1]).abs());
    }
    (ev, eg)
}

#[test]
fn c1_across_edges() {
    for (mesh, seed) in [(fine_horseshoe_mesh(), 5), (square_mesh(4), 6)] {
        let (ev, eg) = continuity_error(mesh, 200, seed);
        assert!(ev < 1e-8 && eg < 1e-8, "value jump {ev}, gradient jump {eg}");
    }
}
