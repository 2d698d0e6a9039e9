//! The saturated nonlinearity `u/|u|`, its regularizations `g_n`, `h_n`,
//! `f_{n,delta}`, and the construction of saturated sections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{laplacian, ComplexGridFn};
use crate::solver::ProblemSpec;

/// Regularization level `(n, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegLevel {
    n: u64,
    delta: u8,
}

impl RegLevel {
    pub fn new(n: u64, delta: u8) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "regularization level must be >= 1"));
        }
        if delta > 1 {
            return Err(Error::param("delta", format!("must be 0 or 1, got {delta}")));
        }
        Ok(Self { n, delta })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    pub fn delta(&self) -> u8 {
        self.delta
    }

    pub fn delta_f64(&self) -> f64 {
        self.delta as f64
    }
}

/// `g_n(z) = z / (|z| + (n - |z|)/n^2)` for `|z| <= n`, `z/|z|` beyond.
pub fn g_n(z: Complex64, n: f64) -> Complex64 {
    z * g_n_coefficient(z.norm(), n)
}

/// Scalar `s` with `g_n(z) = s(|z|) z`.
pub fn g_n_coefficient(r: f64, n: f64) -> f64 {
    if r <= n {
        1.0 / (r + (n - r) / (n * n))
    } else {
        1.0 / r
    }
}

/// Radial clamp onto the disk of radius `n`.
pub fn h_n(z: Complex64, n: f64) -> Complex64 {
    z * h_n_coefficient(z.norm(), n)
}

/// Scalar `sigma = min(1, n/|z|)` with `h_n(z) = sigma z` (`sigma = 1` at 0).
pub fn h_n_coefficient(r: f64, n: f64) -> f64 {
    if r <= n {
        1.0
    } else {
        n / r
    }
}

/// Pointwise `a g_n(u) + (b - delta + V) h_n(u)`.
pub fn f_reg(u: &ComplexGridFn, spec: &ProblemSpec, reg: RegLevel) -> Result<ComplexGridFn> {
    spec.check_field(u)?;
    let n = reg.n_f64();
    let shift = spec.b - reg.delta_f64();
    let vals = u
        .values()
        .iter()
        .zip(spec.potential.values())
        .map(|(&z, &v)| spec.a * g_n(z, n) + (shift + v) * h_n(z, n))
        .collect();
    ComplexGridFn::from_values(u.mesh(), vals)
}

/// Integrals of the truncation identities, split at `|w| = n`:
/// `(int_{|w|<=n} |w|^2/(|w| + (n-|w|)/n^2), |w|_{L1(|w|>n)},
///   |w|^2_{L2(|w|<=n)}, int_{|w|<=n} |w|^2 V + n int_{|w|>n} |w| V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationIntegrals {
    pub saturated_below: f64,
    pub l1_above: f64,
    pub l2sq_below: f64,
    /// `int_{|w|<=n} |w|^2 dx + n int_{|w|>n} |w| dx`
    pub clamp_energy: f64,
}

impl TruncationIntegrals {
    pub fn compute(w: &ComplexGridFn, n: f64) -> Self {
        let weights = w.mesh().weights();
        let mut out = Self {
            saturated_below: 0.0,
            l1_above: 0.0,
            l2sq_below: 0.0,
            clamp_energy: 0.0,
        };
        for (z, q) in w.values().iter().zip(&weights) {
            let r = z.norm();
            if r <= n {
                out.saturated_below += q * r * r * g_n_coefficient(r, n);
                out.l2sq_below += q * r * r;
            } else {
                out.l1_above += q * r;
            }
        }
        out.clamp_energy = out.l2sq_below + n * out.l1_above;
        out
    }

    /// Left side of the `L^1` truncation inequality.
    pub fn l1_side(&self) -> f64 {
        self.saturated_below + self.l1_above
    }
}

/// How a section is filled where `u` vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionFill {
    ZeroFill,
    /// `U = (F - (-Delta u + b u + V u)) / a`, clamped to the unit disk.
    ForcingContinuation,
}

/// Threshold below which `|u|` counts as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Threshold {
    /// Multiple of `max |u|`.
    Relative(f64),
    Absolute(f64),
}

impl Threshold {
    pub fn resolve(&self, u: &ComplexGridFn) -> f64 {
        match *self {
            Threshold::Relative(r) => r * u.max_abs(),
            Threshold::Absolute(t) => t,
        }
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Relative(1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPolicy {
    pub fill: SectionFill,
    pub tau: Threshold,
}

impl SectionPolicy {
    pub fn new(fill: SectionFill, tau: Threshold) -> Result<Self> {
        let v = match tau {
            Threshold::Relative(v) | Threshold::Absolute(v) => v,
        };
        if !(v > 0.0) {
            return Err(Error::param("tau_supp", "threshold must be positive"));
        }
        Ok(Self { fill, tau })
    }
}

impl Default for SectionPolicy {
    fn default() -> Self {
        Self {
            fill: SectionFill::ForcingContinuation,
            tau: Threshold::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub field: ComplexGridFn,
    /// Nodes where the continuation value exceeded the unit disk.
    pub clamped_nodes: usize,
    /// Largest continuation modulus before clamping.
    pub max_fill_modulus: f64,
    pub tau: f64,
}

pub fn saturated_section(
    u: &ComplexGridFn,
    policy: &SectionPolicy,
    spec: &ProblemSpec,
) -> Result<Section> {
    spec.check_field(u)?;
    if !u.is_finite() {
        return Err(Error::param("u", "non-finite field"));
    }
    let tau = policy.tau.resolve(u);
    let fill: Option<Vec<Complex64>> = match policy.fill {
        SectionFill::ZeroFill => None,
        SectionFill::ForcingContinuation => {
            if spec.a == Complex64::new(0.0, 0.0) {
                return Err(Error::param("a", "forcing continuation needs a != 0"));
            }
            let lap = laplacian(u.mesh()).apply(u)?;
            Some(
                u.values()
                    .iter()
                    .zip(lap.values())
                    .zip(spec.potential.values())
                    .zip(spec.forcing.values())
                    .map(|(((&z, &l), &v), &f)| (f - l - (spec.b + v) * z) / spec.a)
                    .collect(),
            )
        }
    };
    let mut clamped = 0;
    let mut max_fill: f64 = 0.0;
    let vals = u
        .values()
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let r = z.norm();
            if r > tau {
                z / r
            } else if let Some(fill) = &fill {
                let c = fill[k];
                let m = c.norm();
                max_fill = max_fill.max(m);
                if m > 1.0 {
                    clamped += 1;
                    c / m
                } else {
                    c
                }
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(Section {
        field: ComplexGridFn::from_values(u.mesh(), vals)?,
        clamped_nodes: clamped,
        max_fill_modulus: max_fill,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryCondition, Mesh};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn g_n_examples() {
        for z in [c(0.3, -0.4), c(1.0, 0.0), c(0.0, 0.999), c(-0.2, 0.1)] {
            assert!((g_n(z, 1.0) - z).norm() < 1e-15);
        }
        assert!((g_n(c(0.0, 2.0), 2.0) - c(0.0, 1.0)).norm() < 1e-15);
        for n in [1.0, 5.0, 1e9] {
            assert_eq!(g_n(c(0.0, 0.0), n), c(0.0, 0.0));
        }
    }

    #[test]
    fn g_n_continuous_at_n() {
        let n = 7.0;
        let dir = c(0.6, 0.8);
        let below = g_n(dir * (n - 1e-9), n);
        let above = g_n(dir * (n + 1e-9), n);
        assert!((below - above).norm() < 1e-9);
    }

    #[test]
    fn h_n_examples() {
        assert_eq!(h_n(c(4.0, 0.0), 2.0), c(2.0, 0.0));
        assert_eq!(h_n(c(0.5, -1.0), 2.0), c(0.5, -1.0));
        assert_eq!(h_n(c(0.0, 0.0), 2.0), c(0.0, 0.0));
    }

    #[test]
    fn reg_level_validation() {
        assert!(RegLevel::new(0, 0).is_err());
        assert!(RegLevel::new(3, 2).is_err());
        assert!(RegLevel::new(3, 1).is_ok());
    }

    fn spec_on(mesh: &Mesh, a: Complex64, b: Complex64) -> ProblemSpec {
        ProblemSpec::new(
            a,
            b,
            ComplexGridFn::zeros(mesh),
            ComplexGridFn::zeros(mesh),
        )
        .unwrap()
    }

    #[test]
    fn f_reg_examples() {
        let m = Mesh::interval(0.0, 1.0, 8, BoundaryCondition::Dirichlet).unwrap();
        let spec = spec_on(&m, c(0.0, 1.0), c(1.0, 0.0));
        let zero = f_reg(&ComplexGridFn::zeros(&m), &spec, RegLevel::new(2, 1).unwrap()).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        // a = i, b = 1, delta = 1, n = 2, u = 4  ->  i
        let u = ComplexGridFn::constant(&m, c(4.0, 0.0));
        let f = f_reg(&u, &spec, RegLevel::new(2, 1).unwrap()).unwrap();
        for z in f.values() {
            assert!((z - c(0.0, 1.0)).norm() < 1e-15);
        }
        // a = 1, b = delta = 0, V = 0, |u| <= n  ->  g_n(u)
        let spec = spec_on(&m, c(1.0, 0.0), c(0.0, 0.0));
        let u = ComplexGridFn::from_fn(&m, |x| c(x, -x * x));
        let f = f_reg(&u, &spec, RegLevel::new(3, 0).unwrap()).unwrap();
        for (z, w) in f.values().iter().zip(u.values()) {
            assert!((z - g_n(*w, 3.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn section_examples() {
        let m = Mesh::interval(0.0, 1.0, 8, BoundaryCondition::Dirichlet).unwrap();
        let a = c(2.0, -1.0);
        let mut spec = spec_on(&m, a, c(0.0, -1.0));
        let policy = SectionPolicy::default();
        let u = ComplexGridFn::constant(&m, c(0.0, 0.3));
        let s = saturated_section(&u, &policy, &spec).unwrap();
        assert!(s.field.values().iter().all(|z| (z - c(0.0, 1.0)).norm() < 1e-15));

        let zero = ComplexGridFn::zeros(&m);
        let zf = SectionPolicy::new(SectionFill::ZeroFill, Threshold::Absolute(1e-12)).unwrap();
        assert_eq!(saturated_section(&zero, &zf, &spec).unwrap().field.max_abs(), 0.0);

        // u = 0, F = a/2  ->  U = F/a = 1/2 from the residual
        spec.forcing = ComplexGridFn::constant(&m, a * 0.5);
        let s = saturated_section(&zero, &policy, &spec).unwrap();
        assert!(s.field.values().iter().all(|z| (z - c(0.5, 0.0)).norm() < 1e-15));
        assert_eq!(s.clamped_nodes, 0);

        // oversize forcing is clamped onto the unit circle and reported
        spec.forcing = ComplexGridFn::constant(&m, a * 3.0);
        let s = saturated_section(&zero, &policy, &spec).unwrap();
        assert_eq!(s.clamped_nodes, m.num_dofs());
        assert!(s.field.max_abs() <= 1.0 + 1e-15);

        spec.a = c(0.0, 0.0);
        assert!(saturated_section(&zero, &policy, &spec).is_err());
    }
}
