//! Support detection, containment in `K(eps)`, local ball energies, and
//! parameter scans for the dead-core regime.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{FieldKind, SelfSimilarParams, SpaceTimeField};
use crate::mesh::{ComplexGridFn, MeshKind};
use crate::saturation::Threshold;
use crate::solver::{solve_saturated, ProblemSpec, SolveConfig};

/// Finite union of closed intervals (in `x`, or in `r` on radial meshes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    intervals: Vec<(f64, f64)>,
}

impl CompactSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::param("K", "needs at least one interval"));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param("K", format!("bad interval [{lo}, {hi}]")));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { intervals })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// `K(eps) = {x : dist(x, K) <= eps}`, kept as one interval per piece of
    /// `K` (pieces may overlap once dilated).
    pub fn dilate(&self, eps: f64) -> Self {
        Self {
            intervals: self
                .intervals
                .iter()
                .map(|&(lo, hi)| (lo - eps, hi + eps))
                .collect(),
        }
    }

    /// Index of the first piece containing `x`.
    pub fn piece_of(&self, x: f64) -> Option<usize> {
        // tolerance for coordinates that sit on the boundary up to roundoff
        let slack = 1e-12 * (1.0 + x.abs());
        self.intervals
            .iter()
            .position(|&(lo, hi)| x >= lo - slack && x <= hi + slack)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.piece_of(x).is_some()
    }

    /// Smallest gap between consecutive pieces.
    pub fn min_gap(&self) -> f64 {
        self.intervals
            .windows(2)
            .map(|w| w[1].0 - w[0].1)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub tau: f64,
    /// Largest `|x|` at which `|u| > tau`.
    pub rho_support: f64,
    /// Extents `[first, last]` of maximal runs of nodes with `|u| > tau`.
    pub components: Vec<(f64, f64)>,
    pub k: CompactSet,
    pub epsilon: f64,
    pub contained_in_k_eps: bool,
    /// Piece of `K(eps)` holding each component, when it lies in one.
    pub component_pieces: Vec<Option<usize>>,
    /// `max |u|` over nodes outside `K(eps)`.
    pub dead_region_max: f64,
    pub u_max: f64,
}

pub fn support_report(
    u: &ComplexGridFn,
    tau: Threshold,
    k: &CompactSet,
    epsilon: f64,
) -> Result<SupportReport> {
    if !u.is_finite() {
        return Err(Error::param("u", "non-finite field"));
    }
    let mesh = u.mesh();
    let tau = tau.resolve(u);
    let keps = k.dilate(epsilon);
    let coords = mesh.coords();
    let mut components = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    let mut rho: f64 = 0.0;
    let mut dead_max: f64 = 0.0;
    for (x, z) in coords.iter().zip(u.values()) {
        let m = z.norm();
        if !keps.contains(*x) {
            dead_max = dead_max.max(m);
        }
        if m > tau {
            rho = rho.max(x.abs());
            run = Some(match run {
                Some((lo, _)) => (lo, *x),
                None => (*x, *x),
            });
        } else if let Some(r) = run.take() {
            components.push(r);
        }
    }
    components.extend(run);
    let component_pieces: Vec<Option<usize>> = components
        .iter()
        .map(|&(lo, hi)| {
            let p = keps.piece_of(lo)?;
            (keps.intervals[p].1 >= hi - 1e-12 * (1.0 + hi.abs())).then_some(p)
        })
        .collect();
    Ok(SupportReport {
        tau,
        rho_support: rho,
        contained_in_k_eps: component_pieces.iter().all(Option::is_some),
        components,
        k: k.clone(),
        epsilon,
        component_pieces,
        dead_region_max: dead_max,
        u_max: u.max_abs(),
    })
}

/// Terms of the local energy identities on a ball `B(x0, rho)`.
///
/// With `S` the nodes in the ball, summation by parts gives exactly
/// `sum_S conj(g) K g = |grad g|^2_B - s_h`, where `s_h` is the discrete
/// flux `int_{dB} conj(g) d_nu g`. The real and imaginary parts of the
/// tested equation then read
///
/// ```text
/// |grad g|^2 + Re(a)|g|_1 + Re(b)|g|^2 + int Re(V)|g|^2 - Re int F conj(g) - Re s_h = 0
///              Im(a)|g|_1 + Im(b)|g|^2 + int Im(V)|g|^2 - Im int F conj(g) - Im s_h = 0
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEnergyProbe {
    pub x0: f64,
    pub rho: f64,
    pub nodes: usize,
    pub grad_sq: f64,
    pub l1: f64,
    pub l2_sq: f64,
    /// `int |x|^2 |g|^2 / 16`
    pub quadratic_potential: f64,
    pub re_v: f64,
    pub im_v: f64,
    /// `int_B F conj(g)`
    pub forcing: Complex64,
    pub flux: Complex64,
    pub real_residual: f64,
    pub imag_residual: f64,
    /// `|g|^2_{H^1(B)} + |g|_{L^1(B)}`
    pub smallness_lhs: f64,
    /// `M (|s_h| + |int_B F conj(g)|)`
    pub smallness_rhs: f64,
    pub m: Option<f64>,
}

impl LocalEnergyProbe {
    pub fn scale(&self) -> f64 {
        self.grad_sq + self.l1 + self.l2_sq + self.re_v.abs() + self.im_v.abs()
            + self.forcing.norm()
            + self.flux.norm()
    }
}

/// Smallness constant for the ball: with `C` chosen as for the null
/// solution but with `|V|` taken over the ball, `M = (1 + C) max(1, 1/kappa)`.
fn local_threshold(spec: &ProblemSpec, v_sup: f64) -> Option<f64> {
    let (a, b) = (spec.a, spec.b);
    if b.im == 0.0 || a.im * b.im < 0.0 {
        return None;
    }
    let mut c = (1.0 + v_sup + b.re.abs()) / b.im.abs();
    if a.im != 0.0 {
        c = c.max((1.0 + a.re.abs()) / a.im.abs());
    }
    let kappa = a.re + c * a.im.abs();
    (kappa > 0.0).then(|| (1.0 + c) * (1.0f64).max(1.0 / kappa))
}

pub fn local_energy(g: &ComplexGridFn, spec: &ProblemSpec, x0: f64, rho: f64) -> Result<LocalEnergyProbe> {
    spec.check_field(g)?;
    let section = crate::saturation::saturated_section(g, &Default::default(), spec)?;
    local_energy_with(g, &section.field, spec, x0, rho)
}

/// As [`local_energy`], with an explicit section.
pub fn local_energy_with(
    g: &ComplexGridFn,
    section: &ComplexGridFn,
    spec: &ProblemSpec,
    x0: f64,
    rho: f64,
) -> Result<LocalEnergyProbe> {
    spec.check_field(g)?;
    spec.check_field(section)?;
    let mesh = spec.mesh();
    let (lo, hi) = mesh.extent();
    if !(rho >= 0.0) {
        return Err(Error::param("rho", "must be nonnegative"));
    }
    match mesh.kind() {
        MeshKind::Interval => {
            if x0 - rho < lo || x0 + rho > hi {
                return Err(Error::BallEscapesMesh(format!(
                    "B({x0}, {rho}) not inside [{lo}, {hi}]"
                )));
            }
        }
        MeshKind::Radial => {
            if x0 != 0.0 {
                return Err(Error::Precondition(
                    "radial meshes only carry balls centered at the origin".into(),
                ));
            }
            if rho > hi {
                return Err(Error::BallEscapesMesh(format!("radius {rho} exceeds R = {hi}")));
            }
        }
    }
    let coords = mesh.coords();
    let inside: Vec<bool> = coords.iter().map(|x| (x - x0).abs() <= rho).collect();
    let w = mesh.weights();
    let vals = g.values();
    let zero = Complex64::new(0.0, 0.0);

    let mut probe = LocalEnergyProbe {
        x0,
        rho,
        nodes: inside.iter().filter(|&&b| b).count(),
        grad_sq: 0.0,
        l1: 0.0,
        l2_sq: 0.0,
        quadratic_potential: 0.0,
        re_v: 0.0,
        im_v: 0.0,
        forcing: zero,
        flux: zero,
        real_residual: 0.0,
        imag_residual: 0.0,
        smallness_lhs: 0.0,
        smallness_rhs: 0.0,
        m: None,
    };
    let mut sat = zero;
    let mut v_sup: f64 = 0.0;
    for i in 0..vals.len() {
        if !inside[i] {
            continue;
        }
        let z = vals[i];
        let v = spec.potential.values()[i];
        let m2 = z.norm_sqr();
        probe.l1 += w[i] * z.norm();
        probe.l2_sq += w[i] * m2;
        probe.quadratic_potential += w[i] * coords[i] * coords[i] * m2 / 16.0;
        probe.re_v += w[i] * v.re * m2;
        probe.im_v += w[i] * v.im * m2;
        probe.forcing += w[i] * spec.forcing.values()[i] * z.conj();
        sat += w[i] * section.values()[i] * z.conj();
        v_sup = v_sup.max(v.norm());
    }
    for e in mesh.edges() {
        let gl = e.left.map_or(zero, |k| vals[k]);
        let gr = e.right.map_or(zero, |k| vals[k]);
        let il = e.left.is_some_and(|k| inside[k]);
        let ir = e.right.is_some_and(|k| inside[k]);
        match (il, ir) {
            (true, true) => probe.grad_sq += e.conductance * (gr - gl).norm_sqr(),
            (true, false) => probe.flux += e.conductance * gl.conj() * (gr - gl),
            (false, true) => probe.flux += e.conductance * gr.conj() * (gl - gr),
            (false, false) => {}
        }
    }
    // `sat` equals |g|_1 where the section is u/|u|; using it keeps the
    // identity exact when a fill is present at nonzero nodes
    let (a, b) = (spec.a, spec.b);
    let sat_a = a * sat;
    probe.real_residual =
        probe.grad_sq + sat_a.re + b.re * probe.l2_sq + probe.re_v - probe.forcing.re - probe.flux.re;
    probe.imag_residual = sat_a.im + b.im * probe.l2_sq + probe.im_v - probe.forcing.im - probe.flux.im;
    probe.smallness_lhs = probe.grad_sq + probe.l2_sq + probe.l1;
    probe.m = local_threshold(spec, v_sup);
    probe.smallness_rhs = probe
        .m
        .map_or(f64::INFINITY, |m| m * (probe.flux.norm() + probe.forcing.norm()));
    Ok(probe)
}

/// One grid point of a dead-core scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub l2_scale: f64,
    pub tail_scale: f64,
    pub contained: bool,
    pub rho_support: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Row-major in `(l2_scale, tail_scale)`, both ascending.
    pub cells: Vec<ScanCell>,
    pub l2_scales: Vec<f64>,
    pub tail_scales: Vec<f64>,
    /// For each tail scale, the largest contained `l2_scale` below the
    /// first failure (`None` if the smallest already fails).
    pub frontier: Vec<(f64, Option<f64>)>,
    pub downward_closed: bool,
}

impl ScanResult {
    pub fn cell(&self, i: usize, j: usize) -> &ScanCell {
        &self.cells[i * self.tail_scales.len() + j]
    }
}

/// Forcing split for scans: `F = l2_scale * core + tail_scale * tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanForcing {
    pub core: ComplexGridFn,
    pub tail: ComplexGridFn,
}

fn sorted_scales(name: &'static str, s: &[f64]) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Err(Error::param(name, "scan grid is empty"));
    }
    if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param(name, "scales must be finite and nonnegative"));
    }
    let mut v = s.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Solves on every grid point and records containment in `K(eps)`.
/// Solves run in parallel; the result order depends only on the grid.
#[allow(clippy::too_many_arguments)]
pub fn dead_core_scan(
    base: &ProblemSpec,
    forcing: &ScanForcing,
    k: &CompactSet,
    epsilon: f64,
    l2_scales: &[f64],
    tail_scales: &[f64],
    tau: Threshold,
    config: &SolveConfig,
) -> Result<ScanResult> {
    base.check_field(&forcing.core)?;
    base.check_field(&forcing.tail)?;
    let l2s = sorted_scales("l2_scales", l2_scales)?;
    let tails = sorted_scales("tail_scales", tail_scales)?;
    let grid: Vec<(f64, f64)> = l2s
        .iter()
        .flat_map(|&l| tails.iter().map(move |&t| (l, t)))
        .collect();
    let cells: Vec<ScanCell> = grid
        .par_iter()
        .map(|&(l, t)| {
            let f = forcing
                .core
                .scale(Complex64::new(l, 0.0))
                .add(&forcing.tail.scale(Complex64::new(t, 0.0)))
                .expect("same mesh");
            let outcome = base
                .with_forcing(f)
                .and_then(|spec| solve_saturated(&spec, config))
                .and_then(|rep| {
                    let s = support_report(&rep.u, tau, k, epsilon)?;
                    Ok((rep, s))
                });
            match outcome {
                Ok((rep, s)) => ScanCell {
                    l2_scale: l,
                    tail_scale: t,
                    contained: s.contained_in_k_eps,
                    rho_support: s.rho_support,
                    iterations: rep.total_iterations(),
                    converged: rep.converged,
                    error: None,
                },
                Err(e) => ScanCell {
                    l2_scale: l,
                    tail_scale: t,
                    contained: false,
                    rho_support: f64::NAN,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let nt = tails.len();
    let at = |i: usize, j: usize| cells[i * nt + j].contained;
    let mut downward_closed = true;
    for i in 0..l2s.len() {
        for j in 0..nt {
            if at(i, j) && ((i > 0 && !at(i - 1, j)) || (j > 0 && !at(i, j - 1))) {
                downward_closed = false;
            }
        }
    }
    let frontier = (0..nt)
        .map(|j| {
            let last = (0..l2s.len()).take_while(|&i| at(i, j)).last();
            (tails[j], last.map(|i| l2s[i]))
        })
        .collect();
    Ok(ScanResult {
        cells,
        l2_scales: l2s,
        tail_scales: tails,
        frontier,
        downward_closed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBumpReport {
    pub support: SupportReport,
    pub converged: bool,
    /// Every component lies in a single piece and every piece of `K`
    /// carries a component.
    pub separated: bool,
}

/// Solves with `K = K_1 u K_2 u ...` and checks that the support splits
/// along the pieces.
pub fn multi_bump(
    spec: &ProblemSpec,
    k: &CompactSet,
    epsilon: f64,
    tau: Threshold,
    config: &SolveConfig,
) -> Result<MultiBumpReport> {
    if k.intervals().len() < 2 {
        return Err(Error::param("K", "needs at least two pieces"));
    }
    if !(2.0 * epsilon < k.min_gap()) {
        return Err(Error::Precondition(format!(
            "eps = {epsilon} must be below half the gap {}",
            k.min_gap()
        )));
    }
    let rep = solve_saturated(spec, config)?;
    let support = support_report(&rep.u, tau, k, epsilon)?;
    let mut seen = vec![0usize; k.intervals().len()];
    for p in support.component_pieces.iter().flatten() {
        seen[*p] += 1;
    }
    let separated = support.contained_in_k_eps && seen.iter().all(|&c| c == 1);
    Ok(MultiBumpReport {
        support,
        converged: rep.converged,
        separated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTable {
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `ln rho` against `ln t`.
    pub slope: f64,
    /// `|rho(t) - sqrt(t) rho(1)| <= h(t)` on every row, with `h(t)` the
    /// cell size of the sampling mesh at time `t`.
    pub within_one_cell: bool,
}

/// Support radius of `u(t)` for each `t`, sampled on the profile mesh
/// dilated by `sqrt t`.
pub fn support_expansion(
    phi: &ComplexGridFn,
    params: SelfSimilarParams,
    times: &[f64],
    tau: Threshold,
) -> Result<ExpansionTable> {
    if times.is_empty() {
        return Err(Error::param("times", "empty list"));
    }
    let field = SpaceTimeField::new(phi.clone(), params, FieldKind::Solution);
    let k = CompactSet::interval(0.0, 0.0)?;
    let rho1 = support_report(phi, tau, &k, 0.0)?.rho_support;
    let mut rows = Vec::with_capacity(times.len());
    let mut within = true;
    for &t in times {
        let u = field.sample_dilated(t)?;
        let rho = support_report(&u, tau, &k, 0.0)?.rho_support;
        if (rho - t.sqrt() * rho1).abs() > u.mesh().h() * (1.0 + 1e-9) {
            within = false;
        }
        rows.push((t, rho));
    }
    Ok(ExpansionTable {
        slope: loglog_slope(&rows),
        rows,
        within_one_cell: within,
    })
}

fn loglog_slope(rows: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(t, r)| *t > 0.0 && *r > 0.0)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryCondition, Mesh};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_field_has_empty_support() {
        let m = Mesh::interval(-2.0, 2.0, 40, BoundaryCondition::Dirichlet).unwrap();
        let k = CompactSet::interval(-1.0, 1.0).unwrap();
        let r = support_report(&ComplexGridFn::zeros(&m), Threshold::default(), &k, 0.5).unwrap();
        assert_eq!(r.rho_support, 0.0);
        assert!(r.components.is_empty());
        assert!(r.contained_in_k_eps);
    }

    #[test]
    fn bump_is_contained() {
        let m = Mesh::interval(-2.0, 2.0, 40, BoundaryCondition::Dirichlet).unwrap();
        let u = ComplexGridFn::from_fn(&m, |x| c((1.0 - x * x).max(0.0), 0.0));
        let k = CompactSet::interval(-1.0, 1.0).unwrap();
        let r = support_report(&u, Threshold::default(), &k, 0.5).unwrap();
        assert!(r.contained_in_k_eps);
        assert_eq!(r.components.len(), 1);
        assert!((r.rho_support - 0.9).abs() < 1e-12);
        let narrow = CompactSet::interval(-0.2, 0.2).unwrap();
        assert!(!support_report(&u, Threshold::default(), &narrow, 0.1).unwrap().contained_in_k_eps);
    }

    #[test]
    fn two_components() {
        let m = Mesh::interval(-3.0, 3.0, 60, BoundaryCondition::Dirichlet).unwrap();
        let u = ComplexGridFn::from_fn(&m, |x| c((0.25 - (x.abs() - 2.0).powi(2)).max(0.0), 0.0));
        let k = CompactSet::new(vec![(1.5, 2.5), (-2.5, -1.5)]).unwrap();
        let r = support_report(&u, Threshold::default(), &k, 0.3).unwrap();
        assert_eq!(r.components.len(), 2);
        assert_eq!(r.component_pieces, vec![Some(0), Some(1)]);
    }

    #[test]
    fn zero_probe_is_exact() {
        let m = Mesh::interval(-2.0, 2.0, 40, BoundaryCondition::Dirichlet).unwrap();
        let spec = ProblemSpec::new(
            c(1.0, -1.0),
            c(0.0, -1.25),
            ComplexGridFn::zeros(&m),
            ComplexGridFn::zeros(&m),
        )
        .unwrap();
        let p = local_energy(&ComplexGridFn::zeros(&m), &spec, 0.3, 0.5).unwrap();
        assert_eq!(p.real_residual, 0.0);
        assert_eq!(p.imag_residual, 0.0);
        assert_eq!(p.smallness_lhs, 0.0);
        assert!(matches!(
            local_energy(&ComplexGridFn::zeros(&m), &spec, 1.8, 0.5),
            Err(Error::BallEscapesMesh(_))
        ));
    }

    #[test]
    fn slope_of_square_root() {
        let rows: Vec<(f64, f64)> = [0.25, 1.0, 4.0, 16.0].iter().map(|&t| (t, 3.0 * f64::sqrt(t))).collect();
        assert!((loglog_slope(&rows) - 0.5).abs() < 1e-12);
    }
}
