//! End-to-end behaviour of the saturated solver.

mod common;

use common::{c, gaussian_core, manufactured_line};
use satnls_core::audit::{symmetry_audit, Symmetry};
use satnls_core::mesh::{norms, BoundaryCondition, ComplexGridFn, Mesh};
use satnls_core::saturation::Threshold;
use satnls_core::solver::{
    geometric_schedule, nodal_residual, solve_saturated, weak_residual, ProblemSpec, SolveConfig,
};
use satnls_core::support::{support_report, CompactSet};

#[test]
fn manufactured_solution_converges_at_second_order() {
    let mut errors = Vec::new();
    let mut weak = Vec::new();
    for cells in [40, 80, 160] {
        let (spec, exact, section) = manufactured_line(cells);
        let rep = solve_saturated(&spec, &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        errors.push(rep.u.sub(&exact).unwrap().max_abs());
        weak.push(weak_residual(&spec, &exact, &section, 32, 1).unwrap());
    }
    for w in errors.windows(2).chain(weak.windows(2)) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio} from {errors:?} / {weak:?}");
    }
}

#[test]
fn schedules_agree_within_tolerance() {
    let mesh = Mesh::interval(-2.0, 2.0, 200, BoundaryCondition::Dirichlet).unwrap();
    let f = gaussian_core(&mesh, c(3.0, 1.0), 0.3, 1.0);
    let spec = ProblemSpec::new(c(1.0, -0.2), c(0.5, -1.0), ComplexGridFn::zeros(&mesh), f).unwrap();
    let mut twos = SolveConfig::default();
    twos.polish = false;
    let mut threes = twos.clone();
    threes.n_schedule = geometric_schedule(3, 30);
    let a = solve_saturated(&spec, &twos).unwrap();
    let b = solve_saturated(&spec, &threes).unwrap();
    assert!(a.continuation_converged && b.continuation_converged);
    let gap = norms(&a.u.sub(&b.u).unwrap()).h1() / norms(&a.u).h1();
    assert!(gap <= 2.0 * twos.continuation_tol, "gap {gap:e}");
}

#[test]
fn section_is_the_phase_on_the_support_and_bounded_elsewhere() {
    let mesh = Mesh::interval(-2.0, 2.0, 300, BoundaryCondition::Dirichlet).unwrap();
    let f = gaussian_core(&mesh, c(4.0, -2.0), 0.3, 1.0);
    let spec = ProblemSpec::new(c(1.0, 0.0), c(0.0, 1.0), ComplexGridFn::zeros(&mesh), f).unwrap();
    let rep = solve_saturated(&spec, &SolveConfig::default()).unwrap();
    assert!(rep.converged);
    let mut dead = 0;
    for (z, s) in rep.u.values().iter().zip(rep.section.values()) {
        assert!(s.norm() <= 1.0 + 1e-12);
        if z.norm() > 0.0 {
            assert!((s - z / z.norm()).norm() <= 1e-12);
        } else {
            dead += 1;
        }
    }
    assert!(dead > 0, "expected a dead core");
    // the nodal residual vanishes with the reported section
    let r = nodal_residual(&spec, &rep.u, &rep.section).unwrap();
    let h = mesh.h();
    assert!(r.iter().all(|z| z.norm() / h <= 1e-9 * (1.0 + spec.forcing.max_abs())));
}

#[test]
fn radial_problems_in_two_and_three_dimensions() {
    for dim in [2, 3] {
        let mesh = Mesh::radial(dim, 2.0, 200, BoundaryCondition::Dirichlet).unwrap();
        let f = gaussian_core(&mesh, c(6.0, 0.0), 0.3, 1.0);
        let spec = ProblemSpec::new(c(1.0, 0.0), c(0.0, -1.0), ComplexGridFn::zeros(&mesh), f).unwrap();
        let rep = solve_saturated(&spec, &SolveConfig::default()).unwrap();
        assert!(rep.converged, "N = {dim}");
        assert!(rep.bound_audit.ok);
        let k = CompactSet::interval(0.0, 1.0).unwrap();
        let s = support_report(&rep.u, Threshold::default(), &k, 0.5).unwrap();
        assert!(s.rho_support > 0.0 && s.contained_in_k_eps, "N = {dim}: {s:?}");
        let sym = symmetry_audit(&rep.u, &spec, Symmetry::Radial, 0.0).unwrap();
        assert!(sym.satisfied && sym.evaluated());
    }
}

#[test]
fn solution_depends_continuously_on_small_forcing() {
    // below the null threshold the forcing is absorbed by the section
    let mesh = Mesh::interval(-1.0, 1.0, 100, BoundaryCondition::Dirichlet).unwrap();
    for amp in [0.05, 0.2, 0.45] {
        let f = ComplexGridFn::from_fn(&mesh, |x| c(amp * (1.0 - x * x), 0.0));
        let spec = ProblemSpec::new(c(1.0, 0.0), c(0.0, 1.0), ComplexGridFn::zeros(&mesh), f.clone()).unwrap();
        let rep = solve_saturated(&spec, &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.u.max_abs(), 0.0);
        assert!(rep.section.sub(&f).unwrap().max_abs() <= 1e-14);
    }
}

#[test]
fn inadmissible_data_are_rejected() {
    let mesh = Mesh::interval(-1.0, 1.0, 20, BoundaryCondition::Dirichlet).unwrap();
    let f = ComplexGridFn::zeros(&mesh);
    // a on the negative real axis, b far below -1/C_P^2 and real
    let spec = ProblemSpec::new(c(-1.0, 0.0), c(-10.0, 0.0), ComplexGridFn::zeros(&mesh), f).unwrap();
    assert!(solve_saturated(&spec, &SolveConfig::default()).is_err());
}
