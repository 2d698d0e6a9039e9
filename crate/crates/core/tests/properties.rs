//! Property tests for the pointwise nonlinearities, norms, support detection
//! and the gauge transform.

use num_complex::Complex64;
use proptest::prelude::*;
use satnls_core::gauge::{gauge_forward, gauge_inverse};
use satnls_core::mesh::{duality, norms, poincare_constant, BoundaryCondition, ComplexGridFn, Mesh};
use satnls_core::saturation::{g_n, h_n, Threshold, TruncationIntegrals};
use satnls_core::solver::dual_norms;
use satnls_core::support::{support_report, CompactSet};

fn complex() -> impl Strategy<Value = Complex64> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn level() -> impl Strategy<Value = f64> {
    (0u32..30).prop_map(|k| 2f64.powi(k as i32))
}

fn field(cells: usize) -> impl Strategy<Value = (Mesh, ComplexGridFn)> {
    let mesh = Mesh::interval(-1.0, 1.0, cells, BoundaryCondition::Dirichlet).unwrap();
    proptest::collection::vec(complex(), mesh.num_dofs()).prop_map(move |v| {
        let f = ComplexGridFn::from_values(&mesh, v).unwrap();
        (mesh, f)
    })
}

proptest! {
    #[test]
    fn g_n_is_a_unit_disk_valued_multiple_of_z(z in complex(), n in level()) {
        let g = g_n(z, n);
        prop_assert!(g.norm() <= 1.0 + 1e-14);
        // g_n(z) = s z with s > 0
        prop_assert!((g * z.conj()).im.abs() <= 1e-12 * z.norm_sqr().max(1.0));
        prop_assert!((g * z.conj()).re >= 0.0);
        if z.norm() > n {
            prop_assert!((g - z / z.norm()).norm() <= 1e-14);
        }
    }

    #[test]
    fn h_n_clamps_to_the_disk(z in complex(), n in level()) {
        let h = h_n(z, n);
        prop_assert!(h.norm() <= z.norm().min(n) * (1.0 + 1e-14));
        if z.norm() <= n {
            prop_assert_eq!(h, z);
        }
    }

    #[test]
    fn g_n_approaches_the_saturated_map(z in complex().prop_filter("nonzero", |z| z.norm() > 1e-3)) {
        let err = |n: f64| (g_n(z, n) - z / z.norm()).norm();
        prop_assert!(err(1e6) <= err(1e3) + 1e-15);
        prop_assert!(err(1e6) <= 1e-5);
    }

    #[test]
    fn truncation_integrals_are_dominated((_, w) in field(24), n in level()) {
        let t = TruncationIntegrals::compute(&w, n);
        let nr = norms(&w);
        prop_assert!(t.l1_side() <= nr.l1 * (1.0 + 1e-12));
        prop_assert!(t.clamp_energy <= nr.l2 * nr.l2 * (1.0 + 1e-12));
        prop_assert!(t.saturated_below >= 0.0 && t.l1_above >= 0.0);
    }

    #[test]
    fn poincare_inequalities_hold((mesh, w) in field(32)) {
        let p = poincare_constant(&mesh).unwrap();
        let nr = norms(&w);
        prop_assert!(nr.l2 <= p.c_p * nr.h1_seminorm * (1.0 + 1e-10));
        prop_assert!(nr.l1 <= p.l1_grad * nr.h1_seminorm * (1.0 + 1e-10));
        prop_assert!(nr.h1() <= p.h1 * nr.h1_seminorm * (1.0 + 1e-10));
    }

    #[test]
    fn dual_norm_bounds_every_pairing((_, f) in field(20), v in proptest::collection::vec(complex(), 19)) {
        let v = ComplexGridFn::from_values(f.mesh(), v).unwrap();
        let d = dual_norms(&f, 8, 3).unwrap();
        let pair = duality(&f, &v).unwrap().abs();
        prop_assert!(pair <= d.riesz * norms(&v).h1() * (1.0 + 1e-10) + 1e-12);
        prop_assert!(d.riesz <= d.l2_bound * (1.0 + 1e-12));
    }

    #[test]
    fn support_is_scale_invariant((_, u) in field(40), re in -5.0..5.0f64, im in -5.0..5.0f64) {
        let alpha = Complex64::new(re, im);
        prop_assume!(alpha.norm() > 1e-3);
        let k = CompactSet::interval(-0.5, 0.5).unwrap();
        let a = support_report(&u, Threshold::default(), &k, 0.1).unwrap();
        let b = support_report(&u.scale(alpha), Threshold::default(), &k, 0.1).unwrap();
        prop_assert_eq!(a.components, b.components);
        prop_assert_eq!(a.rho_support, b.rho_support);
        prop_assert_eq!(a.contained_in_k_eps, b.contained_in_k_eps);
    }

    #[test]
    fn gauge_round_trip((_, phi) in field(30)) {
        let back = gauge_inverse(&gauge_forward(&phi));
        let err = back.sub(&phi).unwrap().max_abs();
        prop_assert!(err <= 1e-13 * phi.max_abs().max(1.0));
        // the gauge is unimodular
        let g = gauge_forward(&phi);
        for (x, y) in g.values().iter().zip(phi.values()) {
            prop_assert!((x.norm() - y.norm()).abs() <= 1e-13 * y.norm().max(1.0));
        }
    }
}
