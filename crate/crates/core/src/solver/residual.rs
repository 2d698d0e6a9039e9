use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ProblemSpec;
use crate::error::Result;
use crate::mesh::{laplacian, norms, weighted_pairing, ComplexGridFn, Mesh, MeshKind};

/// Seeded family of smooth compactly supported bumps with random centers,
/// widths and complex phases. Radial meshes also get bumps centered at the
/// origin, which are smooth as functions on the ball.
pub fn test_family(mesh: &Mesh, count: usize, seed: u64) -> Vec<ComplexGridFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = mesh.extent();
    let len = hi - lo;
    let rmin = (4.0 * mesh.h()).max(len / 40.0).min(len / 4.0);
    let rmax = (len / 4.0).max(rmin);
    (0..count)
        .map(|_| {
            let rho = rng.gen_range(rmin..=rmax);
            let center = match mesh.kind() {
                MeshKind::Interval => rng.gen_range(lo + rho..=hi - rho),
                MeshKind::Radial => {
                    let c = rng.gen_range(0.0..=hi - rho);
                    if c < rho {
                        0.0
                    } else {
                        c
                    }
                }
            };
            let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
            ComplexGridFn::from_fn(mesh, |x| phase * bump((x - center) / rho))
        })
        .filter(|v| v.max_abs() > 0.0)
        .collect()
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// `K u + W (a U + (b + V) u - F)`: the saturated equation tested against
/// each nodal hat function.
pub fn nodal_residual(
    spec: &ProblemSpec,
    u: &ComplexGridFn,
    section: &ComplexGridFn,
) -> Result<Vec<Complex64>> {
    spec.check_field(u)?;
    spec.check_field(section)?;
    let op = laplacian(spec.mesh());
    Ok(op
        .stiffness_apply(u.values())
        .into_iter()
        .zip(u.values())
        .zip(section.values())
        .zip(spec.potential.values())
        .zip(spec.forcing.values())
        .zip(op.weights())
        .map(|(((((ku, &z), &s), &v), &f), &q)| ku + (spec.a * s + (spec.b + v) * z - f) * q)
        .collect())
}

/// `|Re sum_i R_i conj(v_i)| / |v|_{H^1}`.
pub(crate) fn pair_residual(mesh: &Mesh, r: &[Complex64], v: &[Complex64]) -> f64 {
    let vf = ComplexGridFn::from_values(mesh, v.to_vec()).expect("test field on mesh");
    let h1 = norms(&vf).h1();
    if h1 == 0.0 {
        return 0.0;
    }
    let num: f64 = r.iter().zip(v).map(|(a, b)| (a * b.conj()).re).sum();
    num.abs() / h1
}

/// Largest normalized weak residual over the given test fields.
pub fn weak_residual_of(
    spec: &ProblemSpec,
    u: &ComplexGridFn,
    section: &ComplexGridFn,
    tests: &[ComplexGridFn],
) -> Result<f64> {
    let r = nodal_residual(spec, u, section)?;
    Ok(tests
        .iter()
        .map(|v| pair_residual(spec.mesh(), &r, v.values()))
        .fold(0.0, f64::max))
}

/// Weak residual over a fresh seeded family of `count` test fields.
pub fn weak_residual(
    spec: &ProblemSpec,
    u: &ComplexGridFn,
    section: &ComplexGridFn,
    count: usize,
    seed: u64,
) -> Result<f64> {
    weak_residual_of(spec, u, section, &test_family(spec.mesh(), count, seed))
}

/// Three estimates of `|F|_{X*}` with `X` normed by the full `H^1` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualNorms {
    /// Exact discrete value through the Riesz representer `(K + W) z = W F`.
    pub riesz: f64,
    /// Supremum over the seeded bump family (a lower bound).
    pub sampled: f64,
    /// `|F|_2`, an upper bound.
    pub l2_bound: f64,
}

pub fn dual_norms(f: &ComplexGridFn, count: usize, seed: u64) -> Result<DualNorms> {
    let mesh = f.mesh();
    let op = laplacian(mesh);
    let w = op.weights();
    let wf: Vec<Complex64> = f.values().iter().zip(w).map(|(z, q)| z * q).collect();
    let ones = vec![Complex64::new(1.0, 0.0); f.len()];
    let z = op.shifted_system(&ones).solve(&wf)?;
    let riesz = wf
        .iter()
        .zip(&z)
        .map(|(a, b)| (a * b.conj()).re)
        .sum::<f64>()
        .max(0.0)
        .sqrt();
    let sampled = test_family(mesh, count, seed)
        .iter()
        .map(|v| weighted_pairing(mesh, f.values(), v.values()).abs() / norms(v).h1())
        .fold(0.0, f64::max);
    Ok(DualNorms {
        riesz,
        sampled,
        l2_bound: norms(f).l2,
    })
}
