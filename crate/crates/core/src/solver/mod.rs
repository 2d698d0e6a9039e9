//! Stationary saturated problem
//! `-Delta u + a U + b u + V u = F`, `U = u/|u|` on `{u != 0}`,
//! with Dirichlet or Neumann conditions.
//!
//! Solutions are computed by continuation in the regularization level `n`:
//! each level solves the Lipschitz problem with `g_n`, `h_n` by a damped
//! lagged-coefficient Picard iteration, warm-started from the previous
//! level. Once successive levels agree, an active-set Newton step solves
//! the exact saturated system on the detected support, and the section is
//! filled from the equation residual where `u` vanishes.

mod bounds;
mod picard;
mod polish;
mod residual;

pub use bounds::{
    apriori_audit, energy_terms, identity_tolerance, estimate_constants, null_threshold,
    AprioriAudit, BoundCheck, EnergyTerms, EstimateConstants, NullThreshold,
};
pub use picard::{regularized_residual, solve_regularized, RegularizedSolve};
pub use polish::{polish_active_set, PolishOutcome};
pub use residual::{
    dual_norms, nodal_residual, test_family, weak_residual, weak_residual_of, DualNorms,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::SelfSimilarParams;
use crate::mesh::{norms, poincare_constant, BoundaryCondition, ComplexGridFn, Mesh};
use crate::saturation::{saturated_section, RegLevel, SectionPolicy, TruncationIntegrals};

/// Data `(a, b, V, F)` on a mesh, plus optional self-similar parameters
/// when the problem is a gauge-transformed profile equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub a: Complex64,
    pub b: Complex64,
    pub potential: ComplexGridFn,
    pub forcing: ComplexGridFn,
    pub selfsim: Option<SelfSimilarParams>,
}

impl ProblemSpec {
    pub fn new(
        a: Complex64,
        b: Complex64,
        potential: ComplexGridFn,
        forcing: ComplexGridFn,
    ) -> Result<Self> {
        potential.check_same_mesh(&forcing)?;
        if !potential.is_finite() || !forcing.is_finite() {
            return Err(Error::param("data", "potential and forcing must be finite"));
        }
        if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::param("a/b", "coefficients must be finite"));
        }
        Ok(Self {
            a,
            b,
            potential,
            forcing,
            selfsim: None,
        })
    }

    pub fn with_selfsim(mut self, params: SelfSimilarParams) -> Self {
        self.selfsim = Some(params);
        self
    }

    pub fn mesh(&self) -> &Mesh {
        self.forcing.mesh()
    }

    pub(crate) fn check_field(&self, u: &ComplexGridFn) -> Result<()> {
        if u.mesh() != self.mesh() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    pub fn with_forcing(&self, forcing: ComplexGridFn) -> Result<Self> {
        self.forcing.check_same_mesh(&forcing)?;
        Ok(Self {
            forcing,
            ..self.clone()
        })
    }

    /// `sup |V|`.
    pub fn potential_sup(&self) -> f64 {
        self.potential.max_abs()
    }

    /// `sup |Re V|`.
    pub fn potential_re_sup(&self) -> f64 {
        self.potential
            .values()
            .iter()
            .fold(0.0, |m, v| m.max(v.re.abs()))
    }
}

/// `A = C \ (-inf, 0]`.
pub fn in_set_a(z: Complex64) -> bool {
    !(z.re <= 0.0 && z.im == 0.0)
}

/// `B = C \ (-inf, -1/C_P^2]`.
pub fn in_set_b(z: Complex64, c_p: f64) -> bool {
    !(z.re <= -1.0 / (c_p * c_p) && z.im == 0.0)
}

/// Which existence result covers a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExistenceCase {
    /// Dirichlet, finite measure, `b in B`, real `V >= 0`.
    NonnegativePotential,
    /// `a in A`, `Im b != 0`, `Im a Im b >= 0`, `Im b Im V >= 0`.
    AbsorbingShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub a_in_a: bool,
    pub b_in_b: bool,
    pub c_p: Option<f64>,
    pub nonnegative_potential: bool,
    pub absorbing_shift: bool,
    pub reasons: Vec<String>,
}

impl AdmissibilityReport {
    /// The absorbing-shift case is preferred when both apply: it carries the
    /// stronger a priori bound.
    pub fn case(&self) -> Option<ExistenceCase> {
        if self.absorbing_shift {
            Some(ExistenceCase::AbsorbingShift)
        } else if self.nonnegative_potential {
            Some(ExistenceCase::NonnegativePotential)
        } else {
            None
        }
    }
}

pub fn check_admissibility(spec: &ProblemSpec) -> AdmissibilityReport {
    let mut reasons = Vec::new();
    let mesh = spec.mesh();
    let a = spec.a;
    let b = spec.b;
    let a_in_a = in_set_a(a);
    if !a_in_a {
        reasons.push(format!("a = {a} lies on the closed negative real axis"));
    }
    let c_p = poincare_constant(mesh).ok().map(|p| p.c_p);
    let b_in_b = match c_p {
        Some(c) => in_set_b(b, c),
        None => false,
    };

    let dirichlet = mesh.bc() == BoundaryCondition::Dirichlet;
    let v_real = spec.potential.values().iter().all(|v| v.im == 0.0);
    let v_nonneg = v_real && spec.potential.values().iter().all(|v| v.re >= 0.0);
    let mut nonnegative_potential = true;
    if !dirichlet {
        nonnegative_potential = false;
        reasons.push("nonnegative-potential case needs a Dirichlet condition".into());
    }
    if !b_in_b {
        nonnegative_potential = false;
        reasons.push(match c_p {
            Some(c) => format!("b = {b} is not in B (-1/C_P^2 = {})", -1.0 / (c * c)),
            None => "B is undefined without a Poincare constant".into(),
        });
    }
    if !v_nonneg {
        nonnegative_potential = false;
        reasons.push("V is not real and nonnegative".into());
    }

    let mut absorbing_shift = true;
    if !a_in_a {
        absorbing_shift = false;
    }
    if b.im == 0.0 {
        absorbing_shift = false;
        reasons.push("Im(b) = 0".into());
    }
    if a.im * b.im < 0.0 {
        absorbing_shift = false;
        reasons.push(format!("Im(a) Im(b) = {} < 0", a.im * b.im));
    }
    if spec.potential.values().iter().any(|v| b.im * v.im < 0.0) {
        absorbing_shift = false;
        reasons.push("Im(b) Im(V) < 0 somewhere".into());
    }
    AdmissibilityReport {
        a_in_a,
        b_in_b,
        c_p,
        nonnegative_potential,
        absorbing_shift,
        reasons,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub n_schedule: Vec<u64>,
    pub damping: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub continuation_tol: f64,
    pub section: SectionPolicy,
    /// Finish with an active-set Newton solve of the saturated system.
    pub polish: bool,
    pub weak_tests: usize,
    pub weak_residual_tol: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            n_schedule: geometric_schedule(2, 48),
            damping: 0.5,
            picard_tol: 1e-10,
            picard_max_iters: 400,
            continuation_tol: 1e-6,
            section: SectionPolicy::default(),
            polish: true,
            weak_tests: 32,
            weak_residual_tol: 1e-7,
            seed: 0x5eed,
        }
    }
}

/// `1, base, base^2, ...` up to `base^max_power`.
pub fn geometric_schedule(base: u64, max_power: u32) -> Vec<u64> {
    (0..=max_power)
        .map_while(|k| base.checked_pow(k))
        .collect()
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_schedule.is_empty() {
            return Err(Error::param("n_schedule", "must not be empty"));
        }
        if self.n_schedule[0] == 0 || self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "n_schedule",
                "must be strictly increasing positive integers",
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param("damping", "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("picard_tol", self.picard_tol),
            ("continuation_tol", self.continuation_tol),
            ("weak_residual_tol", self.weak_residual_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, "tolerances must be positive"));
            }
        }
        if self.picard_max_iters == 0 {
            return Err(Error::param("picard_max_iters", "must be positive"));
        }
        Ok(())
    }
}

/// Diagnostics of one continuation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub n: u64,
    pub delta: u8,
    pub iterations: usize,
    pub converged: bool,
    pub residual_trace: Vec<f64>,
    /// `|u_n - u_prev|_{H^1}` relative to `|u_n|_{H^1} + |F|_2`.
    pub change: Option<f64>,
    pub h1_norm: f64,
    /// Weak residual of the regularized equation at this level.
    pub weak_residual: f64,
    /// Energy identity of the regularized problem tested with `u_n`.
    pub identity_real: f64,
    /// Same, tested with `i u_n`.
    pub identity_imag: f64,
    pub identity_tolerance: f64,
    pub truncation: TruncationIntegrals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub u: ComplexGridFn,
    pub section: ComplexGridFn,
    pub converged: bool,
    pub continuation_converged: bool,
    pub polished: bool,
    pub levels: Vec<LevelTrace>,
    pub weak_residual: f64,
    pub clamped_nodes: usize,
    pub tau: f64,
    pub bound_audit: AprioriAudit,
}

impl SolveReport {
    pub fn total_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.iterations).sum()
    }
}

/// Regularization variant: `delta = 1` under the absorbing-shift case.
pub fn regularization_delta(spec: &ProblemSpec) -> u8 {
    match check_admissibility(spec).case() {
        Some(ExistenceCase::NonnegativePotential) => 0,
        _ => 1,
    }
}

pub fn solve_saturated(spec: &ProblemSpec, config: &SolveConfig) -> Result<SolveReport> {
    solve_saturated_from(spec, config, &ComplexGridFn::zeros(spec.mesh()))
}

pub fn solve_saturated_from(
    spec: &ProblemSpec,
    config: &SolveConfig,
    u0: &ComplexGridFn,
) -> Result<SolveReport> {
    config.validate()?;
    spec.check_field(u0)?;
    let adm = check_admissibility(spec);
    if adm.case().is_none() {
        return Err(Error::Hypothesis(format!(
            "no existence result covers this problem: {}",
            adm.reasons.join("; ")
        )));
    }
    let delta = regularization_delta(spec);
    let f_l2 = norms(&spec.forcing).l2;
    let tests = test_family(spec.mesh(), config.weak_tests, config.seed);

    let mut u = u0.clone();
    let mut prev: Option<ComplexGridFn> = None;
    let mut levels = Vec::with_capacity(config.n_schedule.len());
    let mut continuation_converged = false;
    for &n in &config.n_schedule {
        let reg = RegLevel::new(n, delta)?;
        let sol = solve_regularized(spec, reg, config, &u)?;
        u = sol.u;
        let h1 = norms(&u).h1();
        let change = prev.as_ref().map(|p| {
            let d = norms(&u.sub(p).expect("same mesh")).h1();
            let scale = h1 + f_l2;
            if scale == 0.0 {
                0.0
            } else {
                d / scale
            }
        });
        let trace = level_trace(spec, reg, &u, &tests, sol.iterations, sol.converged, sol.trace, change);
        let done = sol.converged && change.is_some_and(|c| c < config.continuation_tol);
        levels.push(trace);
        prev = Some(u.clone());
        if done {
            continuation_converged = true;
            break;
        }
    }

    // below |u| ~ 1/n the regularized field is the linear response of the
    // saturated core, not part of the support
    let n_last = levels.last().map_or(1.0, |l| l.n as f64);
    let tau_cont = config.section.tau.resolve(&u).max(10.0 / n_last);
    let mut polished = false;
    if config.polish {
        match polish_active_set(spec, &u, tau_cont) {
            Ok(PolishOutcome::Converged(p)) => {
                u = p;
                polished = true;
            }
            Ok(PolishOutcome::Failed(_)) | Err(_) => {}
        }
    }

    let section = saturated_section(&u, &config.section, spec)?;
    let weak = weak_residual_of(spec, &u, &section.field, &tests)?;
    let bound_audit = apriori_audit(spec, &u, &section.field, weak)?;
    // a polished field is checked directly against the saturated system,
    // so it no longer depends on how far the continuation got
    let converged = (if config.polish { polished } else { continuation_converged })
        && weak <= config.weak_residual_tol
        && section.clamped_nodes == 0;
    Ok(SolveReport {
        u,
        section: section.field,
        converged,
        continuation_converged,
        polished,
        levels,
        weak_residual: weak,
        clamped_nodes: section.clamped_nodes,
        tau: section.tau,
        bound_audit,
    })
}

#[allow(clippy::too_many_arguments)]
fn level_trace(
    spec: &ProblemSpec,
    reg: RegLevel,
    u: &ComplexGridFn,
    tests: &[ComplexGridFn],
    iterations: usize,
    converged: bool,
    residual_trace: Vec<f64>,
    change: Option<f64>,
) -> LevelTrace {
    let n = reg.n_f64();
    let mesh = spec.mesh();
    let r = regularized_residual(spec, reg, u);
    let nrm = norms(u);
    let weak = tests
        .iter()
        .map(|v| residual::pair_residual(mesh, &r, v.values()))
        .fold(0.0, f64::max);
    let trunc = TruncationIntegrals::compute(u, n);
    let w = mesh.weights();
    // potential terms split at |u| = n
    let (mut vre, mut vim) = (0.0, 0.0);
    for ((z, v), q) in u.values().iter().zip(spec.potential.values()).zip(&w) {
        let m = z.norm();
        let s = if m <= n { m * m } else { n * m };
        vre += q * v.re * s;
        vim += q * v.im * s;
    }
    let delta = reg.delta_f64();
    let f_u = crate::mesh::duality(&spec.forcing, u).expect("same mesh");
    let iu = u.scale(Complex64::i());
    let f_iu = crate::mesh::duality(&spec.forcing, &iu).expect("same mesh");
    // delta (|u|_2^2 - clamp energy) vanishes unless the clamp is active
    let delta_term = delta * (nrm.l2 * nrm.l2 - trunc.clamp_energy);
    let identity_real = nrm.h1_seminorm * nrm.h1_seminorm
        + delta_term
        + spec.a.re * trunc.l1_side()
        + spec.b.re * trunc.clamp_energy
        + vre
        - f_u;
    let identity_imag =
        spec.a.im * trunc.l1_side() + spec.b.im * trunc.clamp_energy + vim - f_iu;
    let magnitude = nrm.h1_seminorm.powi(2)
        + spec.a.norm() * trunc.l1_side()
        + (spec.b.norm() + 1.0) * trunc.clamp_energy
        + vre.abs()
        + vim.abs()
        + f_u.abs()
        + f_iu.abs();
    LevelTrace {
        n: reg.n(),
        delta: reg.delta(),
        iterations,
        converged,
        residual_trace,
        change,
        h1_norm: nrm.h1(),
        weak_residual: weak,
        identity_real,
        identity_imag,
        identity_tolerance: identity_tolerance(weak, nrm.h1(), magnitude),
        truncation: trunc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshKind;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn set_membership() {
        assert!(!in_set_a(c(-1.0, 0.0)));
        assert!(!in_set_a(c(0.0, 0.0)));
        assert!(in_set_a(c(-1.0, 1e-12)));
        assert!(in_set_a(c(0.1, 0.0)));
        assert!(in_set_b(c(-0.5, 0.0), 1.0));
        assert!(!in_set_b(c(-1.0, 0.0), 1.0));
    }

    fn selfsim_like(a: Complex64) -> ProblemSpec {
        let m = Mesh::new(MeshKind::Interval, 1, (-2.0, 2.0), 32, BoundaryCondition::Dirichlet)
            .unwrap();
        // N = 1, p = 2: b = -i (N + 2p)/4 = -5i/4, V = -x^2/16
        let v = ComplexGridFn::from_fn(&m, |x| c(-x * x / 16.0, 0.0));
        ProblemSpec::new(a, c(0.0, -1.25), v, ComplexGridFn::zeros(&m)).unwrap()
    }

    #[test]
    fn admissibility_sign_checks() {
        let r = check_admissibility(&selfsim_like(c(-1.0, 0.0)));
        assert!(!r.a_in_a);
        let r = check_admissibility(&selfsim_like(c(0.0, 1.0)));
        assert!(!r.absorbing_shift, "Im(a) Im(b) = -5/4 < 0");
        let r = check_admissibility(&selfsim_like(c(0.0, -1.0)));
        assert!(r.absorbing_shift);
        assert_eq!(r.case(), Some(ExistenceCase::AbsorbingShift));
        assert!(!r.nonnegative_potential);
    }

    #[test]
    fn admissibility_nonnegative_potential() {
        let m = Mesh::interval(0.0, 1.0, 32, BoundaryCondition::Dirichlet).unwrap();
        let v = ComplexGridFn::from_fn(&m, |x| c(x, 0.0));
        let spec = ProblemSpec::new(c(1.0, 0.0), c(-2.0, 0.0), v, ComplexGridFn::zeros(&m)).unwrap();
        let r = check_admissibility(&spec);
        // -1/C_P^2 ~ -pi^2, so b = -2 is admissible
        assert!(r.b_in_b && r.nonnegative_potential && !r.absorbing_shift);
        assert_eq!(r.case(), Some(ExistenceCase::NonnegativePotential));
        let neu = ProblemSpec::new(
            c(1.0, 0.0),
            c(-2.0, 0.0),
            ComplexGridFn::zeros(&m.with_bc(BoundaryCondition::Neumann)),
            ComplexGridFn::zeros(&m.with_bc(BoundaryCondition::Neumann)),
        )
        .unwrap();
        assert!(!check_admissibility(&neu).nonnegative_potential);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolveConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n_schedule = vec![1, 4, 2];
        assert!(cfg.validate().is_err());
        cfg = SolveConfig {
            damping: 0.0,
            ..SolveConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(geometric_schedule(3, 3), vec![1, 3, 9, 27]);
    }
}
