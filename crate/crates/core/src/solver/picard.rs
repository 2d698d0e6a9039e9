use num_complex::Complex64;

use super::{ProblemSpec, SolveConfig};
use crate::error::Result;
use crate::mesh::{laplacian, ComplexGridFn};
use crate::saturation::{g_n, g_n_coefficient, h_n, h_n_coefficient, RegLevel};

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedSolve {
    pub u: ComplexGridFn,
    pub iterations: usize,
    pub converged: bool,
    /// Relative update `|u_{k+1} - u_k|_2 / |u_{k+1}|_2` per iteration.
    pub trace: Vec<f64>,
}

/// Solves `-Delta u + delta u + f_{n,delta}(u) = F` by damped Picard
/// iteration with lagged coefficients: `g_n(u) = s(|u|) u` and
/// `h_n(u) = sigma(|u|) u`, and each step solves the linear system with
/// `s`, `sigma` frozen at the current iterate.
pub fn solve_regularized(
    spec: &ProblemSpec,
    reg: RegLevel,
    config: &SolveConfig,
    u0: &ComplexGridFn,
) -> Result<RegularizedSolve> {
    spec.check_field(u0)?;
    let mesh = spec.mesh();
    let op = laplacian(mesh);
    let w = op.weights().to_vec();
    let n = reg.n_f64();
    let delta = reg.delta_f64();
    let shift = spec.b - delta;
    let rhs: Vec<Complex64> = spec
        .forcing
        .values()
        .iter()
        .zip(&w)
        .map(|(f, q)| f * q)
        .collect();
    let l2 = |v: &[Complex64]| -> f64 {
        v.iter()
            .zip(&w)
            .map(|(z, q)| q * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    };

    let mut u = u0.values().to_vec();
    let mut omega = config.damping;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut stalls = 0;
    for _ in 0..config.picard_max_iters {
        let diag: Vec<Complex64> = u
            .iter()
            .zip(spec.potential.values())
            .map(|(z, v)| {
                let r = z.norm();
                delta + spec.a * g_n_coefficient(r, n) + (shift + v) * h_n_coefficient(r, n)
            })
            .collect();
        let next = op.shifted_system(&diag).solve(&rhs)?;
        let step: Vec<Complex64> = next.iter().zip(&u).map(|(a, b)| (a - b) * omega).collect();
        for (z, d) in u.iter_mut().zip(&step) {
            *z += d;
        }
        let size = l2(&u);
        let rel = if size > 0.0 { l2(&step) / size } else { 0.0 };
        // a growing update signals oscillation: damp harder
        if let Some(&prev) = trace.last() {
            if rel > prev {
                stalls += 1;
                if stalls >= 3 && omega > 0.05 {
                    omega *= 0.5;
                    stalls = 0;
                }
            } else {
                stalls = 0;
            }
        }
        trace.push(rel);
        if rel < config.picard_tol {
            converged = true;
            break;
        }
    }
    Ok(RegularizedSolve {
        u: ComplexGridFn::from_values(mesh, u)?,
        iterations: trace.len(),
        converged,
        trace,
    })
}

/// Nodal weak residual `K u + W (delta u + f_{n,delta}(u) - F)` of the
/// regularized equation.
pub fn regularized_residual(spec: &ProblemSpec, reg: RegLevel, u: &ComplexGridFn) -> Vec<Complex64> {
    let op = laplacian(spec.mesh());
    let n = reg.n_f64();
    let delta = reg.delta_f64();
    let shift = spec.b - delta;
    op.stiffness_apply(u.values())
        .into_iter()
        .zip(u.values())
        .zip(spec.potential.values())
        .zip(spec.forcing.values())
        .zip(op.weights())
        .map(|((((ku, &z), &v), &f), &q)| {
            ku + (z * delta + spec.a * g_n(z, n) + (shift + v) * h_n(z, n) - f) * q
        })
        .collect()
}

