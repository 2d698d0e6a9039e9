//! Self-similar solutions `u(t,x) = t^{p/2} phi(x/sqrt(t))`, `Re p = 2`.
//!
//! The profile satisfies
//! `-Delta phi + a Phi - (ip/2) phi + (i/2) x.grad phi = -F`, and the gauge
//! `g = phi e^{-i|x|^2/8}` removes the drift: `g` solves the stationary
//! problem with `b = -i(N + 2p)/4`, `V = -|x|^2/16` and
//! `F_1 = -F e^{-i|x|^2/8}`. This module moves between the two pictures,
//! rebuilds space-time fields from profiles, and checks the evolution
//! equation and the scaling laws on the rebuilt fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{
    gradient_lq_norm, laplacian, lq_norm, norms, second_derivative_lq_norm, BoundaryCondition,
    ComplexGridFn, Mesh,
};
use crate::saturation::saturated_section;
use crate::solver::{solve_saturated, ProblemSpec, SolveConfig, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarParams {
    p: Complex64,
    dim: usize,
}

impl SelfSimilarParams {
    pub fn new(p: Complex64, dim: usize) -> Result<Self> {
        if p.re != 2.0 {
            return Err(Error::param("p", format!("Re(p) must equal 2, got {}", p.re)));
        }
        if !p.im.is_finite() {
            return Err(Error::param("p", "Im(p) must be finite"));
        }
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        Ok(Self { p, dim })
    }

    pub fn p(&self) -> Complex64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `b = -i(N + 2p)/4 = Im(p)/2 - i(N + 4)/4`.
    pub fn b(&self) -> Complex64 {
        -Complex64::i() * (self.dim as f64 + 2.0 * self.p) / 4.0
    }

    /// `V(x) = -|x|^2/16`.
    pub fn potential(&self, r: f64) -> f64 {
        -r * r / 16.0
    }
}

/// `e^{-i|x|^2/8}`
fn gauge_factor(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -x * x / 8.0)
}

pub fn gauge_forward(phi: &ComplexGridFn) -> ComplexGridFn {
    phi.map_with_coord(|x, z| z * gauge_factor(x))
}

pub fn gauge_inverse(g: &ComplexGridFn) -> ComplexGridFn {
    g.map_with_coord(|x, z| z * gauge_factor(x).conj())
}

/// Stationary problem for `g` on the profile mesh.
pub fn profile_spec(
    params: SelfSimilarParams,
    forcing: &ComplexGridFn,
    a: Complex64,
) -> Result<ProblemSpec> {
    let mesh = forcing.mesh();
    if mesh.bc() != BoundaryCondition::Dirichlet {
        return Err(Error::param("mesh", "profile problems are posed with Dirichlet data"));
    }
    if mesh.dim() != params.dim() {
        return Err(Error::param(
            "dim",
            format!("mesh dimension {} differs from N = {}", mesh.dim(), params.dim()),
        ));
    }
    if a.im > 0.0 {
        return Err(Error::Hypothesis(format!(
            "Im(a) = {} > 0 while Im(b) = -(N+4)/4 < 0",
            a.im
        )));
    }
    if a.re <= 0.0 && a.im == 0.0 {
        return Err(Error::Hypothesis(format!("a = {a} is on the closed negative axis")));
    }
    let v = ComplexGridFn::from_fn(mesh, |x| Complex64::new(params.potential(x.abs()), 0.0));
    let f1 = gauge_forward(forcing).scale(Complex64::new(-1.0, 0.0));
    Ok(ProblemSpec::new(a, params.b(), v, f1)?.with_selfsim(params))
}

/// A solved profile: `phi`, its section `Phi`, the profile forcing `F` and `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub params: SelfSimilarParams,
    pub a: Complex64,
    pub phi: ComplexGridFn,
    pub section: ComplexGridFn,
    pub forcing: ComplexGridFn,
}

impl SelfSimilarProfile {
    pub fn mesh(&self) -> &Mesh {
        self.phi.mesh()
    }

    pub fn solution(&self) -> SpaceTimeField {
        SpaceTimeField::new(self.phi.clone(), self.params, FieldKind::Solution)
    }

    pub fn section_field(&self) -> SpaceTimeField {
        SpaceTimeField::new(self.section.clone(), self.params, FieldKind::Section)
    }

    pub fn forcing_field(&self) -> SpaceTimeField {
        SpaceTimeField::new(self.forcing.clone(), self.params, FieldKind::Section)
    }
}

/// Solves the gauged problem and maps the result back to profile variables.
pub fn solve_profile(
    params: SelfSimilarParams,
    forcing: &ComplexGridFn,
    a: Complex64,
    config: &SolveConfig,
) -> Result<(SelfSimilarProfile, ProblemSpec, SolveReport)> {
    let spec = profile_spec(params, forcing, a)?;
    let report = solve_saturated(&spec, config)?;
    let profile = SelfSimilarProfile {
        params,
        a,
        phi: gauge_inverse(&report.u),
        section: gauge_inverse(&report.section),
        forcing: forcing.clone(),
    };
    Ok((profile, spec, report))
}

/// Rebuilds the profile section from a gauged solution `g`.
pub fn profile_section(spec: &ProblemSpec, g: &ComplexGridFn, config: &SolveConfig) -> Result<ComplexGridFn> {
    Ok(gauge_inverse(&saturated_section(g, &config.section, spec)?.field))
}

/// Which power of `t` a field carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// `u = t^{p/2} phi(x/sqrt t)`.
    Solution,
    /// `U` and `f`: `t^{(p-2)/2} Phi(x/sqrt t)`.
    Section,
}

/// Profile plus the rule that evaluates it at any `t > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub profile: ComplexGridFn,
    pub params: SelfSimilarParams,
    pub kind: FieldKind,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::param("t", format!("must be positive, got {t}")))
    }
}

/// `s^z` for real `s > 0` via the principal logarithm.
fn real_pow(s: f64, z: Complex64) -> Complex64 {
    (z * s.ln()).exp()
}

impl SpaceTimeField {
    pub fn new(profile: ComplexGridFn, params: SelfSimilarParams, kind: FieldKind) -> Self {
        Self {
            profile,
            params,
            kind,
        }
    }

    /// `p/2` or `(p - 2)/2`.
    pub fn time_exponent(&self) -> Complex64 {
        match self.kind {
            FieldKind::Solution => self.params.p / 2.0,
            FieldKind::Section => (self.params.p - 2.0) / 2.0,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<Complex64> {
        check_time(t)?;
        Ok(real_pow(t, self.time_exponent()) * self.profile.interpolate(x / t.sqrt()))
    }

    /// Samples the field at time `t` on `target`.
    pub fn sample(&self, t: f64, target: &Mesh) -> Result<ComplexGridFn> {
        check_time(t)?;
        let c = real_pow(t, self.time_exponent());
        let s = t.sqrt();
        let nodes = self.profile.node_values();
        let mesh = *self.profile.mesh();
        Ok(ComplexGridFn::from_fn(target, |x| {
            c * crate::mesh::interpolate_nodes(&mesh, &nodes, x / s)
        }))
    }

    /// Samples at time `t` on the profile mesh dilated by `sqrt t`, where
    /// every node maps onto a profile node.
    pub fn sample_dilated(&self, t: f64) -> Result<ComplexGridFn> {
        check_time(t)?;
        let target = self.profile.mesh().dilated(t.sqrt())?;
        self.sample(t, &target)
    }

    /// `w_lambda(t,x) = lambda^{-2e} w(lambda^2 t, lambda x)` with `e` the
    /// time exponent, applied to the profile: the new profile is
    /// `lambda^{-2e} (lambda^2)^e` times the old one.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
        }
        let e = self.time_exponent();
        let c = real_pow(lambda, -2.0 * e) * real_pow(lambda * lambda, e);
        Ok(Self {
            profile: self.profile.scale(c),
            ..self.clone()
        })
    }

    /// `lambda^{-2e} w(lambda^2 t, lambda x)` evaluated directly on `target`.
    pub fn rescaled_sample(&self, lambda: f64, t: f64, target: &Mesh) -> Result<ComplexGridFn> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
        }
        check_time(t)?;
        let e = self.time_exponent();
        let pre = real_pow(lambda, -2.0 * e);
        let tt = lambda * lambda * t;
        let c = real_pow(tt, e);
        let s = tt.sqrt();
        let nodes = self.profile.node_values();
        let mesh = *self.profile.mesh();
        Ok(ComplexGridFn::from_fn(target, |x| {
            pre * c * crate::mesh::interpolate_nodes(&mesh, &nodes, lambda * x / s)
        }))
    }
}

pub fn reconstruct(
    phi: &ComplexGridFn,
    params: SelfSimilarParams,
    t: f64,
    target: &Mesh,
) -> Result<ComplexGridFn> {
    SpaceTimeField::new(phi.clone(), params, FieldKind::Solution).sample(t, target)
}

pub fn reconstruct_section(
    section: &ComplexGridFn,
    params: SelfSimilarParams,
    t: f64,
    target: &Mesh,
) -> Result<ComplexGridFn> {
    SpaceTimeField::new(section.clone(), params, FieldKind::Section).sample(t, target)
}

/// `f(t) = t^{(p-2)/2} F(x/sqrt t)`.
pub fn forcing_at(
    forcing: &ComplexGridFn,
    params: SelfSimilarParams,
    t: f64,
    target: &Mesh,
) -> Result<ComplexGridFn> {
    reconstruct_section(forcing, params, t, target)
}

/// `T_lambda v = lambda^{-p} v(lambda .)` sampled on the mesh of `v`.
pub fn scale_transform(v: &ComplexGridFn, params: SelfSimilarParams, lambda: f64) -> Result<ComplexGridFn> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    let c = real_pow(lambda, -params.p);
    let nodes = v.node_values();
    let mesh = *v.mesh();
    Ok(ComplexGridFn::from_fn(v.mesh(), |x| {
        c * crate::mesh::interpolate_nodes(&mesh, &nodes, lambda * x)
    }))
}

/// Exponent `k` in `|T_lambda v|_q = lambda^k |v|_q`, namely `-(2 + N/q)`.
pub fn scale_transform_exponent(params: SelfSimilarParams, q: f64) -> f64 {
    -(2.0 + params.dim as f64 / q)
}

/// One scaling law `measured = t^k profile_norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    pub measured: f64,
    pub predicted: f64,
    pub exponent: f64,
}

impl ScalingLaw {
    fn new(measured: f64, profile: f64, t: f64, exponent: f64) -> Self {
        Self {
            measured,
            predicted: t.powf(exponent) * profile,
            exponent,
        }
    }

    pub fn relative_error(&self) -> f64 {
        let d = (self.measured - self.predicted).abs();
        if self.predicted == 0.0 {
            d
        } else {
            d / self.predicted.abs()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaws {
    pub t: f64,
    pub q: f64,
    pub value: ScalingLaw,
    pub gradient: ScalingLaw,
    pub hessian: ScalingLaw,
}

impl ScalingLaws {
    pub fn max_relative_error(&self) -> f64 {
        self.value
            .relative_error()
            .max(self.gradient.relative_error())
            .max(self.hessian.relative_error())
    }
}

/// Compares `|u(t)|_q`, `|grad u(t)|_q`, `|D^2 u(t)|_q` with
/// `t^{1+N/2q}`, `t^{1/2+N/2q}`, `t^{N/2q}` times the profile norms. On
/// `target = None` the field is sampled on the dilated profile mesh, where
/// the laws hold up to roundoff.
pub fn scaling_laws(
    phi: &ComplexGridFn,
    params: SelfSimilarParams,
    t: f64,
    q: f64,
    target: Option<&Mesh>,
) -> Result<ScalingLaws> {
    let field = SpaceTimeField::new(phi.clone(), params, FieldKind::Solution);
    let u = match target {
        Some(m) => field.sample(t, m)?,
        None => field.sample_dilated(t)?,
    };
    let nq = params.dim as f64 / (2.0 * q);
    Ok(ScalingLaws {
        t,
        q,
        value: ScalingLaw::new(lq_norm(&u, q), lq_norm(phi, q), t, 1.0 + nq),
        gradient: ScalingLaw::new(gradient_lq_norm(&u, q), gradient_lq_norm(phi, q), t, 0.5 + nq),
        hessian: ScalingLaw::new(
            second_derivative_lq_norm(&u, q),
            second_derivative_lq_norm(phi, q),
            t,
            nq,
        ),
    })
}

/// `|u(t_k) - u(t)|_{W^{m,q}}` for each `t_k`, all sampled on the mesh
/// dilated to time `t`.
pub fn time_continuity_check(
    phi: &ComplexGridFn,
    params: SelfSimilarParams,
    q: f64,
    m: usize,
    t: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    if m > 2 {
        return Err(Error::param("m", "only m <= 2 is supported"));
    }
    let field = SpaceTimeField::new(phi.clone(), params, FieldKind::Solution);
    let target = phi.mesh().dilated(t.sqrt())?;
    let base = field.sample(t, &target)?;
    times
        .iter()
        .map(|&tk| {
            let d = field.sample(tk, &target)?.sub(&base)?;
            let mut s = lq_norm(&d, q);
            if m >= 1 {
                s += gradient_lq_norm(&d, q);
            }
            if m >= 2 {
                s += second_derivative_lq_norm(&d, q);
            }
            Ok(s)
        })
        .collect()
}

/// Nodal evolution residual `i u_t + Delta_h u - a U - f` at time `t` on
/// the dilated profile mesh, with `u_t` a central difference of
/// reconstructions at `t +- dt`.
pub fn evolution_residual_field(profile: &SelfSimilarProfile, t: f64, dt: f64) -> Result<ComplexGridFn> {
    check_time(t)?;
    if !(dt > 0.0) || t - dt <= 0.0 {
        return Err(Error::param("dt", format!("need 0 < dt < t, got dt = {dt}")));
    }
    let target = profile.mesh().dilated(t.sqrt())?;
    let u = profile.solution();
    let now = u.sample(t, &target)?;
    let fwd = u.sample(t + dt, &target)?;
    let bwd = u.sample(t - dt, &target)?;
    let sec = profile.section_field().sample(t, &target)?;
    let f = profile.forcing_field().sample(t, &target)?;
    let lap = laplacian(&target).apply(&now)?;
    let vals = (0..now.len())
        .map(|k| {
            let ut = (fwd.values()[k] - bwd.values()[k]) / (2.0 * dt);
            Complex64::i() * ut - lap.values()[k] - profile.a * sec.values()[k] - f.values()[k]
        })
        .collect();
    ComplexGridFn::from_values(&target, vals)
}

/// `L^2` norm of [`evolution_residual_field`].
pub fn evolution_residual(profile: &SelfSimilarProfile, t: f64, dt: f64) -> Result<f64> {
    Ok(norms(&evolution_residual_field(profile, t, dt)?).l2)
}

/// The evolution equation split into real equations for `u_R`, `u_I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentResiduals {
    /// `d_t u_I - Delta u_R + Re(a U) + f_R`
    pub res_r: Vec<f64>,
    /// `-d_t u_R - Delta u_I + Im(a U) + f_I`
    pub res_i: Vec<f64>,
    /// The complex residual `i u_t + Delta u - a U - f`.
    pub complex: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl ComponentResiduals {
    fn l2(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * f(k).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn res_r_l2(&self) -> f64 {
        self.l2(|k| self.res_r[k])
    }

    pub fn res_i_l2(&self) -> f64 {
        self.l2(|k| self.res_i[k])
    }

    pub fn complex_l2(&self) -> f64 {
        self.l2(|k| self.complex[k].norm())
    }

    /// `max_k |complex_k + res_r_k + i res_i_k|`.
    pub fn recombination_defect(&self) -> f64 {
        (0..self.complex.len())
            .map(|k| (self.complex[k] + Complex64::new(self.res_r[k], self.res_i[k])).norm())
            .fold(0.0, f64::max)
    }
}

/// With `a = lambda - i mu` the saturation term reads
/// `Re(aU) = (lambda u_R + mu u_I)/|u|`, `Im(aU) = (lambda u_I - mu u_R)/|u|`
/// wherever `u != 0`.
pub fn componentwise_residual(profile: &SelfSimilarProfile, t: f64, dt: f64) -> Result<ComponentResiduals> {
    let complex = evolution_residual_field(profile, t, dt)?;
    let target = *complex.mesh();
    let u = profile.solution();
    let fwd = u.sample(t + dt, &target)?;
    let bwd = u.sample(t - dt, &target)?;
    let now = u.sample(t, &target)?;
    let lap = laplacian(&target).apply(&now)?;
    let sec = profile.section_field().sample(t, &target)?;
    let f = profile.forcing_field().sample(t, &target)?;
    let lambda = profile.a.re;
    let mu = -profile.a.im;
    let n = now.len();
    let mut res_r = Vec::with_capacity(n);
    let mut res_i = Vec::with_capacity(n);
    for k in 0..n {
        let ut = (fwd.values()[k] - bwd.values()[k]) / (2.0 * dt);
        let z = now.values()[k];
        let s = sec.values()[k];
        let (sat_r, sat_i) = if z.norm() > 0.0 && (s - z / z.norm()).norm() < 1e-12 {
            let r = z.norm();
            ((lambda * z.re + mu * z.im) / r, (lambda * z.im - mu * z.re) / r)
        } else {
            let az = profile.a * s;
            (az.re, az.im)
        };
        // -Delta u is what the discrete operator returns
        res_r.push(ut.im + lap.values()[k].re + sat_r + f.values()[k].re);
        res_i.push(-ut.re + lap.values()[k].im + sat_i + f.values()[k].im);
    }
    Ok(ComponentResiduals {
        res_r,
        res_i,
        complex: complex.into_values(),
        weights: target.weights(),
    })
}
