use proptest::prelude::*;
use rstgam_core::bpst::BivariateBasis;
use rstgam_core::optim::{adaptive_step, prox_g, step_from_lipschitz};
use rstgam_core::robust::{thin, weights_from_pilot};
use rstgam_core::simulate::fine_horseshoe_mesh;
use rstgam_core::usplines::SplineBasis1D;

fn bary() -> impl Strategy<Value = [f64; 3]> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| {
        let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        [1.0 - a - b, a, b]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn locate_round_trips(t in 0usize..112, b in bary()) {
        let mesh = fine_horseshoe_mesh();
        let u = mesh.from_barycentric(t, b);
        let loc = mesh.locate(u).unwrap();
        let back = mesh.from_barycentric(loc.triangle, loc.b);
        prop_assert!((back[0] - u[0]).abs() < 1e-12 && (back[1] - u[1]).abs() < 1e-12);
        prop_assert!(loc.b.iter().all(|&x| x >= -1e-10));
    }

    #[test]
    fn bernstein_partition_of_unity(t in 0usize..112, b in bary(), d in 1u32..5) {
        let basis = BivariateBasis::new(fine_horseshoe_mesh(), d, 0).unwrap();
        let row = basis.eval_local(t, b);
        prop_assert!((row.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(row.values.iter().all(|&v| v >= -1e-15));
    }

    #[test]
    fn prox_is_nonexpansive(a in -10.0..10.0f64, b in -10.0..10.0f64, eta in 1e-3..10.0f64, l1 in 0.0..5.0f64, w in 0.0..5.0f64) {
        let pa = prox_g(&[a], eta, l1, &[w])[0];
        let pb = prox_g(&[b], eta, l1, &[w])[0];
        prop_assert!((pa - pb).abs() <= (a - b).abs() + 1e-15);
        prop_assert!(pa >= 0.0);
    }

    #[test]
    fn prox_minimizes_its_objective(x in -10.0..10.0f64, eta in 1e-3..10.0f64, l1 in 0.0..5.0f64, w in 0.0..5.0f64, d in -1.0..1.0f64) {
        let p = prox_g(&[x], eta, l1, &[w])[0];
        let obj = |z: f64| l1 * w * z + (z - x) * (z - x) / (2.0 * eta);
        let other = (p + d).max(0.0);
        prop_assert!(obj(p) <= obj(other) + 1e-12);
    }

    #[test]
    fn thinning_preserves_counts(ys in prop::collection::vec(0u32..500, 1..200), q in 2usize..6, seed in any::<u64>()) {
        let y: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
        let f = thin(&y, q, seed).unwrap();
        for j in 0..y.len() {
            prop_assert_eq!(f.folds.iter().map(|v| v[j]).sum::<f64>(), y[j]);
            prop_assert!(f.folds.iter().all(|v| v[j] >= 0.0));
        }
    }

    #[test]
    fn step_respects_both_bounds(eta in 1e-4..10.0f64, ups in 0.0..3.0f64, l in 0.0..100.0f64) {
        let e = step_from_lipschitz(eta, ups, l);
        prop_assert!(e > 0.0);
        prop_assert!(e <= (2.0 / 3.0 + ups).sqrt() * eta * (1.0 + 1e-12));
        let bracket = 2.0 * eta * eta * l * l - 1.0;
        if bracket > 0.0 {
            prop_assert!(e <= eta / bracket.sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn step_ratio_is_reported(eta in 1e-3..1.0f64, s in 0.1..10.0f64) {
        // gradient difference s·Δz gives L = s
        let z0 = [0.0, 0.0];
        let z1 = [0.3, -0.4];
        let g0 = [1.0, 1.0];
        let g1 = [1.0 + s * 0.3, 1.0 - s * 0.4];
        let r = adaptive_step(eta, 1.0 / 3.0, &g1, &g0, &z1, &z0);
        prop_assert!((r.lipschitz - s).abs() < 1e-9 * s);
        prop_assert!((r.upsilon - r.eta / eta).abs() < 1e-12);
    }

    #[test]
    fn weights_decrease_with_pilot_slack(a in 0.0..10.0f64, b in 0.0..10.0f64, eps in 1e-3..1.0f64) {
        let w = weights_from_pilot(&[a, b], eps, 1.0);
        prop_assert_eq!(a <= b, w[0] >= w[1]);
    }

    #[test]
    fn raw_bsplines_sum_to_one(x in 0.0..1.0f64, knots in 1usize..8) {
        let data: Vec<f64> = (0..200).map(|j| ((j * 61) % 200) as f64 / 199.0).collect();
        let b = SplineBasis1D::fit(&data, 4, knots).unwrap();
        let v = b.raw_values(x);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
