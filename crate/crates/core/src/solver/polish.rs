//! Active-set Newton solve of the exact saturated system.
//!
//! The regularized solutions never vanish exactly, so their dead cores are
//! only approximately dead. Given a support guess `S`, this solves
//! `K u + W (a u/|u| + (b + V) u - F) = 0` on `S` with `u = 0` off `S`, then
//! checks the two sign conditions that make the result a genuine saturated
//! solution: `u != 0` on `S`, and the residual-derived section satisfies
//! `|U| <= 1` off `S`. Violations move nodes in or out of `S`.

use num_complex::Complex64;

use super::ProblemSpec;
use crate::error::Result;
use crate::linalg::BandMatrix;
use crate::mesh::{laplacian, ComplexGridFn, DiscreteOperator};

const MAX_ROUNDS: usize = 30;
const MAX_NEWTON: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub enum PolishOutcome {
    Converged(ComplexGridFn),
    Failed(String),
}

pub fn polish_active_set(spec: &ProblemSpec, u: &ComplexGridFn, tau: f64) -> Result<PolishOutcome> {
    spec.check_field(u)?;
    let op = laplacian(spec.mesh());
    let umax = u.max_abs();
    // Nodes barely above the threshold are often outside the true support,
    // and Newton cannot drive them to zero. Retry with coarser guesses; the
    // activation sweep adds back whatever is really needed.
    let mut last = String::from("empty schedule");
    for k in 0..8 {
        let t = tau * 10f64.powi(k);
        // the first threshold above max |u| tries the zero field; larger
        // ones would repeat it
        if k > 0 && tau * 10f64.powi(k - 1) >= umax {
            break;
        }
        match active_set_loop(spec, &op, u, t) {
            Ok(x) => return Ok(PolishOutcome::Converged(ComplexGridFn::from_values(spec.mesh(), x)?)),
            Err(msg) => last = msg,
        }
    }
    Ok(PolishOutcome::Failed(last))
}

fn active_set_loop(
    spec: &ProblemSpec,
    op: &DiscreteOperator,
    u: &ComplexGridFn,
    tau: f64,
) -> std::result::Result<Vec<Complex64>, String> {
    let n = u.len();
    let mut x: Vec<Complex64> = u.values().to_vec();
    let mut active: Vec<bool> = x.iter().map(|z| z.norm() > tau).collect();
    for (z, &on) in x.iter_mut().zip(&active) {
        if !on {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    let scale = spec.forcing.max_abs() + spec.a.norm();
    let tol_fill = 1e-9;

    for _ in 0..MAX_ROUNDS {
        if active.iter().any(|&s| s) {
            newton(spec, op, &active, &mut x, scale)?;
        }
        let umax = x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let ku = op.stiffness_apply(&x);
        let w = op.weights();
        let mut changed = false;
        for i in 0..n {
            if active[i] {
                if x[i].norm() <= 1e-13 * umax.max(f64::MIN_POSITIVE) {
                    active[i] = false;
                    x[i] = Complex64::new(0.0, 0.0);
                    changed = true;
                }
            } else {
                let v = spec.potential.values()[i];
                let fill = (spec.forcing.values()[i] - ku[i] / w[i] - (spec.b + v) * x[i]) / spec.a;
                let m = fill.norm();
                if m > 1.0 + tol_fill {
                    // linearized magnitude of the node once it switches on
                    let k = op.stiffness_diag()[i];
                    let r = w[i] * spec.a.norm() * (m - 1.0) / k;
                    x[i] = fill / m * r.max(1e-12 * umax.max(1.0));
                    active[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(x);
        }
    }
    Err("active set did not settle".into())
}

fn residual(
    spec: &ProblemSpec,
    op: &DiscreteOperator,
    active: &[bool],
    x: &[Complex64],
) -> Vec<Complex64> {
    let ku = op.stiffness_apply(x);
    let w = op.weights();
    (0..x.len())
        .map(|i| {
            if !active[i] {
                return Complex64::new(0.0, 0.0);
            }
            let z = x[i];
            let sat = z / z.norm();
            let v = spec.potential.values()[i];
            ku[i] + (spec.a * sat + (spec.b + v) * z - spec.forcing.values()[i]) * w[i]
        })
        .collect()
}

/// Largest nodal residual in forcing units (`R_i / w_i`).
fn residual_size(r: &[Complex64], w: &[f64]) -> f64 {
    r.iter().zip(w).fold(0.0, |m, (z, q)| m.max(z.norm() / q))
}

fn newton(
    spec: &ProblemSpec,
    op: &DiscreteOperator,
    active: &[bool],
    x: &mut [Complex64],
    scale: f64,
) -> std::result::Result<(), String> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| active[i]).collect();
    let m = idx.len();
    let w = op.weights();
    let kd = op.stiffness_diag();
    let ko = op.stiffness_off();
    // roundoff floor of K x / w dominates on fine meshes
    let lap = kd.iter().zip(w).fold(0.0f64, |m, (k, q)| m.max(k / q));
    let umax = x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let target = (1e-13 * (scale + lap * umax)).max(f64::MIN_POSITIVE);
    let mut r = residual(spec, op, active, x);
    let mut size = residual_size(&r, w);
    for _ in 0..MAX_NEWTON {
        if size <= target {
            return Ok(());
        }
        let mut jac = BandMatrix::zeros(2 * m, 2, 2);
        let mut rhs = vec![0.0; 2 * m];
        for (p, &i) in idx.iter().enumerate() {
            let z = x[i];
            let rr = z.norm();
            let r3 = rr * rr * rr;
            // derivative of z/|z| as a real 2x2 map
            let js = [
                [z.im * z.im / r3, -z.re * z.im / r3],
                [-z.re * z.im / r3, z.re * z.re / r3],
            ];
            let a = spec.a;
            let ma = [[a.re, -a.im], [a.im, a.re]];
            let c = spec.b + spec.potential.values()[i];
            let mut block = [[c.re * w[i], -c.im * w[i]], [c.im * w[i], c.re * w[i]]];
            for (s, row) in block.iter_mut().enumerate() {
                for (t, entry) in row.iter_mut().enumerate() {
                    *entry += w[i] * (ma[s][0] * js[0][t] + ma[s][1] * js[1][t]);
                }
                row[s] += kd[i];
            }
            for s in 0..2 {
                for t in 0..2 {
                    jac.add(2 * p + s, 2 * p + t, block[s][t]);
                }
            }
            if p + 1 < m && idx[p + 1] == i + 1 {
                for s in 0..2 {
                    jac.add(2 * p + s, 2 * p + 2 + s, ko[i]);
                    jac.add(2 * p + 2 + s, 2 * p + s, ko[i]);
                }
            }
            rhs[2 * p] = -r[i].re;
            rhs[2 * p + 1] = -r[i].im;
        }
        let dx = jac.solve(&rhs).map_err(|e| e.to_string())?;
        let mut t = 1.0;
        loop {
            let mut trial = x.to_vec();
            for (p, &i) in idx.iter().enumerate() {
                trial[i] += Complex64::new(dx[2 * p], dx[2 * p + 1]) * t;
            }
            let ok = idx.iter().all(|&i| trial[i].norm() > 0.0);
            if ok {
                let rt = residual(spec, op, active, &trial);
                let st = residual_size(&rt, w);
                if st < size || st <= target {
                    x.copy_from_slice(&trial);
                    r = rt;
                    size = st;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                return if size <= 1e3 * target {
                    Ok(())
                } else {
                    Err(format!("line search stalled at residual {size:e}"))
                };
            }
        }
    }
    if size <= 1e3 * target {
        Ok(())
    } else {
        Err(format!("newton did not converge, residual {size:e}"))
    }
}
