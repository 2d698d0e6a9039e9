//! Energy identities and the a priori bounds assembled from them.
//!
//! Testing the equation with `u` and `i u` and using `U conj(u) = |u|`:
//!
//! ```text
//! |grad u|^2 + Re(a)|u|_1 + Re(b)|u|^2 + int Re(V)|u|^2 = <F, u>
//!            Im(a)|u|_1 + Im(b)|u|^2 + int Im(V)|u|^2 = <F, iu>
//! ```
//!
//! Every bound below is a consequence of these two lines plus Poincare and
//! Cauchy-Schwarz, with `|u|_X = (|grad u|^2 + |u|^2)^{1/2}` and `|F|_*` its
//! dual norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::residual::dual_norms;
use super::{check_admissibility, DualNorms, ProblemSpec};
use crate::error::{Error, Result};
use crate::mesh::{duality, norms, poincare_constant, ComplexGridFn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub grad_sq: f64,
    pub l1: f64,
    pub l2_sq: f64,
    /// `int Re(V) |u|^2`
    pub re_v: f64,
    /// `int Im(V) |u|^2`
    pub im_v: f64,
    /// `int |Im V| |u|^2`
    pub abs_im_v: f64,
    /// `<F, u>`
    pub f_u: f64,
    /// `<F, iu>`
    pub f_iu: f64,
}

impl EnergyTerms {
    pub fn h1(&self) -> f64 {
        (self.grad_sq + self.l2_sq).sqrt()
    }

    /// Left minus right side of the identity tested with `u`.
    pub fn real_identity(&self, a: Complex64, b: Complex64) -> f64 {
        self.grad_sq + a.re * self.l1 + b.re * self.l2_sq + self.re_v - self.f_u
    }

    /// Left minus right side of the identity tested with `i u`.
    pub fn imag_identity(&self, a: Complex64, b: Complex64) -> f64 {
        a.im * self.l1 + b.im * self.l2_sq + self.im_v - self.f_iu
    }

    /// Size of the largest term, for roundoff floors.
    pub fn magnitude(&self, a: Complex64, b: Complex64) -> f64 {
        self.grad_sq
            + a.norm() * self.l1
            + b.norm() * self.l2_sq
            + self.re_v.abs()
            + self.im_v.abs()
            + self.f_u.abs()
            + self.f_iu.abs()
    }
}

pub fn energy_terms(spec: &ProblemSpec, u: &ComplexGridFn) -> Result<EnergyTerms> {
    spec.check_field(u)?;
    let nrm = norms(u);
    let w = spec.mesh().weights();
    let (mut re_v, mut im_v, mut abs_im_v) = (0.0, 0.0, 0.0);
    for ((z, v), q) in u.values().iter().zip(spec.potential.values()).zip(&w) {
        let s = q * z.norm_sqr();
        re_v += v.re * s;
        im_v += v.im * s;
        abs_im_v += v.im.abs() * s;
    }
    Ok(EnergyTerms {
        grad_sq: nrm.h1_seminorm * nrm.h1_seminorm,
        l1: nrm.l1,
        l2_sq: nrm.l2 * nrm.l2,
        re_v,
        im_v,
        abs_im_v,
        f_u: duality(&spec.forcing, u)?,
        f_iu: duality(&spec.forcing, &u.scale(Complex64::i()))?,
    })
}

/// Allowed defect of a discrete identity: the weak residual times the size
/// of the test function, plus a relative roundoff floor.
pub fn identity_tolerance(weak_residual: f64, h1: f64, magnitude: f64) -> f64 {
    10.0 * weak_residual * h1 + 1e-11 * magnitude
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl BoundCheck {
    pub fn new(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            lhs,
            rhs,
            satisfied: lhs <= rhs + slack,
        }
    }
}

/// Constants of the a priori estimates. Entries are `None` when the
/// hypotheses behind them fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConstants {
    pub c_p: Option<f64>,
    pub measure: f64,
    /// `|F|_*` (Riesz representer).
    pub dual_norm: f64,
    /// `|Re a| C_P |Omega|^{1/2} + (1 + C_P)|F|_*`
    pub c0: Option<f64>,
    /// `|Im a| C_P |Omega|^{1/2} + (1 + C_P)|F|_*`
    pub c2: Option<f64>,
    /// `C` with `|u|_X^2 + |u|_1 + int |Im V||u|^2 <= C(|<F,iu>| + |<F,u>|)`.
    pub pairing: Option<f64>,
}

/// Absorbing-shift hypotheses: `a in A`, `Im b != 0`, `Im a Im b >= 0`,
/// `Im b Im V >= 0`.
fn absorbing(spec: &ProblemSpec) -> bool {
    check_admissibility(spec).absorbing_shift
}

pub fn estimate_constants(spec: &ProblemSpec, dual_norm: f64) -> EstimateConstants {
    let mesh = spec.mesh();
    let measure = mesh.measure();
    let c_p = poincare_constant(mesh).ok().map(|p| p.c_p);
    let a = spec.a;
    let b = spec.b;
    let c0 = c_p.map(|c| a.re.abs() * c * measure.sqrt() + (1.0 + c) * dual_norm);
    let c2 = c_p.map(|c| a.im.abs() * c * measure.sqrt() + (1.0 + c) * dual_norm);
    let pairing = absorbing(spec).then(|| {
        let k0 = (b.re.abs() + 1.0 + spec.potential_re_sup()) / b.im.abs();
        if a.re > 0.0 {
            let m = a.re.min(1.0);
            (k0 / m + 1.0).max(1.0 / m)
        } else {
            k0 + (a.re.abs() + 1.0) / a.im.abs() + 1.0
        }
    });
    EstimateConstants {
        c_p,
        measure,
        dual_norm,
        c0,
        c2,
        pairing,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriAudit {
    pub terms: EnergyTerms,
    pub real_identity: f64,
    pub imag_identity: f64,
    pub tolerance: f64,
    pub identities_hold: bool,
    pub dual: DualNorms,
    pub constants: EstimateConstants,
    /// `LHS <= C(|<F,iu>| + |<F,u>|)`.
    pub pairing_bound: Option<BoundCheck>,
    /// `LHS <= 4 C^2 |F|_*^2`.
    pub energy_bound: Option<BoundCheck>,
    pub ok: bool,
}

pub fn apriori_audit(
    spec: &ProblemSpec,
    u: &ComplexGridFn,
    section: &ComplexGridFn,
    weak_residual: f64,
) -> Result<AprioriAudit> {
    spec.check_field(section)?;
    let terms = energy_terms(spec, u)?;
    let real_identity = terms.real_identity(spec.a, spec.b);
    let imag_identity = terms.imag_identity(spec.a, spec.b);
    let magnitude = terms.magnitude(spec.a, spec.b);
    let tolerance = identity_tolerance(weak_residual, terms.h1(), magnitude);
    let identities_hold = real_identity.abs() <= tolerance && imag_identity.abs() <= tolerance;
    let dual = dual_norms(&spec.forcing, 32, 0)?;
    let constants = estimate_constants(spec, dual.riesz);
    let lhs = terms.grad_sq + terms.l2_sq + terms.l1 + terms.abs_im_v;
    let slack = tolerance + 1e-12 * lhs;
    let pairing_bound = constants
        .pairing
        .map(|c| BoundCheck::new(lhs, c * (terms.f_iu.abs() + terms.f_u.abs()), slack));
    let energy_bound = constants
        .pairing
        .map(|c| BoundCheck::new(lhs, 4.0 * c * c * dual.riesz * dual.riesz, slack));
    let ok = identities_hold
        && pairing_bound.map_or(true, |b| b.satisfied)
        && energy_bound.map_or(true, |b| b.satisfied);
    Ok(AprioriAudit {
        terms,
        real_identity,
        imag_identity,
        tolerance,
        identities_hold,
        dual,
        constants,
        pairing_bound,
        energy_bound,
        ok,
    })
}

/// Smallness constant `M` such that `|u|_X^2 + |u|_1 <= M |<F, u>|`-type
/// control forces `u = 0` once `|F|_inf` is small against `|a|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullThreshold {
    pub c: f64,
    pub kappa: f64,
    pub m: f64,
}

pub fn null_threshold(spec: &ProblemSpec) -> Result<NullThreshold> {
    let a = spec.a;
    let b = spec.b;
    if !absorbing(spec) {
        return Err(Error::Hypothesis(
            "null threshold needs a in A, Im b != 0, Im a Im b >= 0, Im b Im V >= 0".into(),
        ));
    }
    let v_sup = spec.potential_sup();
    let mut c = (1.0 + v_sup + b.re.abs()) / b.im.abs();
    if a.im != 0.0 {
        c = c.max((1.0 + a.re.abs()) / a.im.abs());
    }
    let kappa = a.re + c * a.im.abs();
    if kappa <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "Re a + C |Im a| = {kappa} is not positive"
        )));
    }
    if b.re - v_sup + c * b.im.abs() < 1.0 {
        return Err(Error::Hypothesis(
            "Re b - |V|_inf + C |Im b| < 1".into(),
        ));
    }
    Ok(NullThreshold {
        c,
        kappa,
        m: (1.0 + c) / kappa,
    })
}
