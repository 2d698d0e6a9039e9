//! Support detection, local energies, scans and the expansion law on
//! solved profiles.

mod common;

use common::{c, manufactured_line, reference_forcing, reference_params};
use satnls_core::gauge::{gauge_forward, profile_spec, solve_profile};
use satnls_core::mesh::ComplexGridFn;
use satnls_core::saturation::Threshold;
use satnls_core::solver::{solve_saturated, SolveConfig};
use satnls_core::support::{
    dead_core_scan, local_energy_with, multi_bump, support_expansion, support_report, CompactSet, ScanForcing,
};

fn scan_forcing(cells: usize) -> ScanForcing {
    let core = reference_forcing(cells);
    let tail = ComplexGridFn::from_fn(core.mesh(), |x| if x.abs() > 1.0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    // the profile problem is posed for the gauged, sign-flipped forcing
    let gauged = |f: &ComplexGridFn| gauge_forward(f).scale(c(-1.0, 0.0));
    ScanForcing {
        core: gauged(&core),
        tail: gauged(&tail),
    }
}

#[test]
fn scan_region_is_downward_closed_with_a_negative_control() {
    let forcing = scan_forcing(200);
    let base = profile_spec(reference_params(), &reference_forcing(200), c(1.0, 0.0)).unwrap();
    let k = CompactSet::interval(-1.0, 1.0).unwrap();
    let scan = dead_core_scan(
        &base,
        &forcing,
        &k,
        0.5,
        &[0.1, 1.0, 3.0, 1000.0],
        &[0.0, 0.1, 0.5, 3.0],
        Threshold::default(),
        &SolveConfig::default(),
    )
    .unwrap();
    assert!(scan.downward_closed, "{:?}", scan.cells);
    assert!(scan.cell(0, 0).contained);
    assert!(scan.cell(1, 0).contained);
    assert!(!scan.cell(3, 0).contained, "x1000 core must spill out of K(eps)");
    for cell in &scan.cells {
        assert!(cell.error.is_none(), "{cell:?}");
    }
}

#[test]
fn scan_output_is_independent_of_grid_order() {
    let forcing = scan_forcing(100);
    let base = profile_spec(reference_params(), &reference_forcing(100), c(1.0, 0.0)).unwrap();
    let k = CompactSet::interval(-1.0, 1.0).unwrap();
    let cfg = SolveConfig::default();
    let a = dead_core_scan(&base, &forcing, &k, 0.5, &[1.0, 0.1], &[0.2, 0.0], Threshold::default(), &cfg).unwrap();
    let b = dead_core_scan(&base, &forcing, &k, 0.5, &[0.1, 1.0], &[0.0, 0.2], Threshold::default(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_scan_grid_is_an_error() {
    let forcing = scan_forcing(50);
    let base = profile_spec(reference_params(), &reference_forcing(50), c(1.0, 0.0)).unwrap();
    let k = CompactSet::interval(-1.0, 1.0).unwrap();
    let cfg = SolveConfig::default();
    assert!(dead_core_scan(&base, &forcing, &k, 0.5, &[], &[0.0], Threshold::default(), &cfg).is_err());
}

#[test]
fn support_radius_follows_sqrt_t() {
    let (profile, _, rep) =
        solve_profile(reference_params(), &reference_forcing(400), c(1.0, 0.0), &SolveConfig::default()).unwrap();
    assert!(rep.converged);
    let table = support_expansion(&profile.phi, reference_params(), &[1.0, 4.0, 9.0], Threshold::default()).unwrap();
    let rho1 = table.rows[0].1;
    let h = profile.mesh().h();
    assert!((table.rows[1].1 - 2.0 * rho1).abs() <= 2.0 * h);
    assert!((table.rows[2].1 - 3.0 * rho1).abs() <= 3.0 * h);
    assert!(table.within_one_cell);
}

#[test]
fn one_loaded_piece_gives_one_component() {
    let mesh = satnls_core::mesh::Mesh::interval(-3.3, 3.3, 330, satnls_core::mesh::BoundaryCondition::Dirichlet).unwrap();
    let f = ComplexGridFn::from_fn(&mesh, |x| {
        if (x - 2.0).abs() <= 0.5 {
            c(3.0 * (-(x - 2.0).powi(2) / 0.08).exp(), 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let spec = profile_spec(reference_params(), &f, c(1.0, 0.0)).unwrap();
    let k = CompactSet::new(vec![(-2.5, -1.5), (1.5, 2.5)]).unwrap();
    let r = multi_bump(&spec, &k, 0.4, Threshold::default(), &SolveConfig::default()).unwrap();
    assert_eq!(r.support.components.len(), 1);
    assert!(r.support.contained_in_k_eps);
    assert!(!r.separated);
}

#[test]
fn dead_region_balls_carry_no_energy() {
    let f = reference_forcing(400);
    let spec = profile_spec(reference_params(), &f, c(1.0, 0.0)).unwrap();
    let rep = solve_saturated(&spec, &SolveConfig::default()).unwrap();
    let s = support_report(&rep.u, Threshold::default(), &CompactSet::interval(-1.0, 1.0).unwrap(), 0.5).unwrap();
    let edge = s.rho_support + 0.05;
    let p = local_energy_with(&rep.u, &rep.section, &spec, (2.0 + edge) / 2.0, (2.0 - edge) / 2.0).unwrap();
    assert_eq!(p.l1 + p.l2_sq + p.grad_sq, 0.0);
    assert_eq!(p.flux.norm(), 0.0);
}

#[test]
fn local_identities_are_second_order_on_a_manufactured_solution() {
    let mut res = Vec::new();
    for cells in [40, 80, 160] {
        let (spec, exact, section) = manufactured_line(cells);
        let p = local_energy_with(&exact, &section, &spec, 0.0, 0.5).unwrap();
        res.push(p.real_residual.abs() + p.imag_residual.abs());
    }
    for w in res.windows(2) {
        let r = w[0] / w[1];
        assert!((3.0..5.0).contains(&r), "{res:?}");
    }
}
