//! Library results against independent reference computations.

mod common;

use hetflow::linear::{hinf_chain, hinf_second_order, mimo_sigma_max};
use hetflow::model::{linearize, IdmParams};
use hetflow::ring::{homogeneous_ring_roots, ring_matrix, ring_spectrum, STRUCTURAL_TOL};
use proptest::prelude::*;

fn idm_point() -> impl Strategy<Value = (IdmParams, f64)> {
    (
        0.3f64..3.0,
        0.3f64..3.0,
        0.3f64..3.0,
        0.5f64..3.5,
        0.05f64..0.95,
    )
        .prop_map(|(a, b, t, s0, r)| {
            let p = IdmParams::new(a, b, t, s0);
            (p, r * p.v_max)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearization_matches_finite_differences((p, v) in idm_point()) {
        let c = linearize(&p, v).unwrap();
        let fd = common::fd_linearize(&p, v);
        prop_assert!((c.f1 - fd.f1).abs() <= 1e-5 * fd.f1.abs());
        prop_assert!((c.f2 - fd.f2).abs() <= 1e-5 * fd.f2.abs());
        prop_assert!((c.f3 - fd.f3).abs() <= 1e-5 * fd.f3.abs());
    }

    #[test]
    fn single_gain_matches_sweep((p, v) in idm_point()) {
        let c = linearize(&p, v).unwrap();
        let swept = common::sweep_product_max(&[c], 200_000);
        prop_assert!((hinf_second_order(c).0 - swept).abs() <= 1e-6 * swept);
    }

    #[test]
    fn chain_gain_matches_sweep(points in prop::collection::vec(idm_point(), 2..5)) {
        let coeffs: Vec<_> = points.iter().map(|(p, v)| linearize(p, *v).unwrap()).collect();
        let exact = hinf_chain(&coeffs).unwrap().gamma;
        let swept = common::sweep_product_max(&coeffs, 200_000);
        prop_assert!(exact >= swept * (1.0 - 1e-9));
        prop_assert!((exact - swept).abs() <= 1e-6 * swept);
    }

    #[test]
    fn mimo_gain_matches_matrix_oracle((p, v) in idm_point(), lw in -3.0f64..2.0) {
        let c = linearize(&p, v).unwrap();
        let w = 10f64.powf(lw);
        let oracle = common::mimo_sigma_oracle(c, w);
        prop_assert!((mimo_sigma_max(c, w) - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn ring_spectrum_matches_quadratic_factors((p, v) in idm_point(), m in 2usize..=8) {
        let c = linearize(&p, v).unwrap();
        let spec = ring_spectrum(&ring_matrix(&vec![c; m]).unwrap(), STRUCTURAL_TOL).unwrap();
        let mut eig = spec.eigenvalues.clone();
        eig.extend(&spec.structural);
        let oracle = common::ring_roots(c, m);
        prop_assert!(common::max_root_mismatch(&eig, &oracle) <= 1e-8);
        let closed = homogeneous_ring_roots(c, m).unwrap();
        prop_assert!(common::max_root_mismatch(&closed, &oracle) <= 1e-10);
    }
}
