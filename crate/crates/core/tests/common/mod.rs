//! Shared fixtures: an independent dense Newton solver for the regularized
//! system, and the scenario specs used across test targets.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satnls_core::gauge::{profile_spec, SelfSimilarParams};
use satnls_core::mesh::{BoundaryCondition, ComplexGridFn, Mesh};
use satnls_core::saturation::RegLevel;
use satnls_core::solver::{regularization_delta, solve_regularized, ProblemSpec, SolveConfig};

pub struct Case {
    pub a: Complex64,
    pub b: Complex64,
    pub v: Vec<f64>,
    pub f: Vec<Complex64>,
    pub mesh: Mesh,
    pub n: f64,
    pub delta: f64,
}

// written from the formulas, independently of the library versions
fn sat(z: Complex64, n: f64) -> Complex64 {
    let r = z.norm();
    if r > n {
        z / r
    } else {
        z / (r + (n - r) / (n * n))
    }
}

fn clamp(z: Complex64, n: f64) -> Complex64 {
    let r = z.norm();
    if r > n {
        z * (n / r)
    } else {
        z
    }
}

/// Residual of `-Delta u + delta u + a g_n(u) + (b - delta + V) h_n(u) - F`
/// in weak form, assembled from scratch with the same quadrature.
pub fn residual(c: &Case, u: &[Complex64]) -> Vec<Complex64> {
    let m = u.len();
    let h = c.mesh.h();
    (0..m)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if i + 1 < m { u[i + 1] } else { Complex64::new(0.0, 0.0) };
            let lap = (u[i] * 2.0 - left - right) / h;
            let pointwise = u[i] * c.delta + c.a * sat(u[i], c.n)
                + (c.b - c.delta + c.v[i]) * clamp(u[i], c.n)
                - c.f[i];
            lap + pointwise * h
        })
        .collect()
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

pub fn newton(c: &Case) -> Vec<Complex64> {
    let m = c.f.len();
    let mut u = vec![Complex64::new(0.0, 0.0); m];
    let norm = |r: &[Complex64]| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut r = residual(c, &u);
    for _ in 0..200 {
        if norm(&r) < 1e-15 {
            break;
        }
        let eps = 1e-7;
        let mut jac = vec![vec![0.0; 2 * m]; 2 * m];
        for j in 0..2 * m {
            let mut up = u.clone();
            let mut dn = u.clone();
            let d = if j % 2 == 0 { Complex64::new(eps, 0.0) } else { Complex64::new(0.0, eps) };
            up[j / 2] += d;
            dn[j / 2] -= d;
            let rp = residual(c, &up);
            let rm = residual(c, &dn);
            for i in 0..m {
                let col = (rp[i] - rm[i]) / (2.0 * eps);
                jac[2 * i][j] = col.re;
                jac[2 * i + 1][j] = col.im;
            }
        }
        let rhs: Vec<f64> = r.iter().flat_map(|z| [-z.re, -z.im]).collect();
        let dx = dense_solve(jac, rhs);
        let mut t = 1.0;
        loop {
            let trial: Vec<Complex64> = (0..m)
                .map(|i| u[i] + Complex64::new(dx[2 * i], dx[2 * i + 1]) * t)
                .collect();
            let rt = residual(c, &trial);
            if norm(&rt) < norm(&r) || t < 1e-8 {
                u = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
    }
    assert!(norm(&r) < 1e-12, "oracle Newton did not converge: {}", norm(&r));
    u
}

pub fn spec_of(c: &Case) -> ProblemSpec {
    let v = ComplexGridFn::from_values(&c.mesh, c.v.iter().map(|&x| Complex64::new(x, 0.0)).collect()).unwrap();
    let f = ComplexGridFn::from_values(&c.mesh, c.f.clone()).unwrap();
    ProblemSpec::new(c.a, c.b, v, f).unwrap()
}

pub fn tight() -> SolveConfig {
    SolveConfig {
        picard_tol: 1e-14,
        picard_max_iters: 20_000,
        ..SolveConfig::default()
    }
}

pub fn relative_gap(c: &Case) -> f64 {
    let spec = spec_of(c);
    let reg = RegLevel::new(c.n as u64, c.delta as u8).unwrap();
    let sol = solve_regularized(&spec, reg, &tight(), &ComplexGridFn::zeros(&c.mesh)).unwrap();
    assert!(sol.converged);
    let oracle = newton(c);
    let diff: f64 = sol.u.values().iter().zip(&oracle).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let size: f64 = oracle.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    diff / size.max(f64::MIN_POSITIVE)
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = rng.gen_range(5..=15);
    let mesh = Mesh::interval(-1.0, 1.0, cells, BoundaryCondition::Dirichlet).unwrap();
    let m = mesh.num_dofs();
    let a = Complex64::new(rng.gen_range(0.2..2.0), -rng.gen_range(0.0..1.5));
    let b = Complex64::new(rng.gen_range(0.0..1.0), -rng.gen_range(0.3..2.0));
    let v = (0..m).map(|_| rng.gen_range(0.0..0.5)).collect();
    let amp = rng.gen_range(1.0..20.0);
    let center = rng.gen_range(-0.5..0.5);
    let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..6.28));
    let f = mesh
        .coords()
        .iter()
        .map(|x| phase * amp * (-(x - center).powi(2) / 0.1).exp())
        .collect();
    let n = [1.0, 2.0, 4.0, 16.0][rng.gen_range(0..4)];
    let mut c = Case { a, b, v, f, mesh, n, delta: 0.0 };
    c.delta = regularization_delta(&spec_of(&c)) as f64;
    c
}


pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Gaussian core `amp exp(-x^2 / 2 w^2)` cut off outside `[-half, half]`.
pub fn gaussian_core(mesh: &Mesh, amp: Complex64, width: f64, half: f64) -> ComplexGridFn {
    ComplexGridFn::from_fn(mesh, |x| {
        if x.abs() <= half {
            amp * (-x * x / (2.0 * width * width)).exp()
        } else {
            c(0.0, 0.0)
        }
    })
}

/// The reference dead-core scenario: `N = 1`, `p = 2`, `a = 1` on
/// `(-2, 2)`, forcing a Gaussian of amplitude 3 and width 0.3 inside
/// `K = [-1, 1]` and zero outside.
pub fn reference_forcing(cells: usize) -> ComplexGridFn {
    let mesh = Mesh::interval(-2.0, 2.0, cells, BoundaryCondition::Dirichlet).unwrap();
    gaussian_core(&mesh, c(3.0, 0.0), 0.3, 1.0)
}

pub fn reference_params() -> SelfSimilarParams {
    SelfSimilarParams::new(c(2.0, 0.0), 1).unwrap()
}

/// Ten specs covering both existence cases, profile problems in
/// `N = 1, 2, 3`, and general stationary problems.
pub fn scenarios() -> Vec<(&'static str, ProblemSpec)> {
    let line = Mesh::interval(-1.0, 1.0, 160, BoundaryCondition::Dirichlet).unwrap();
    let wide = Mesh::interval(-2.0, 2.0, 200, BoundaryCondition::Dirichlet).unwrap();
    let disk = Mesh::radial(2, 2.0, 160, BoundaryCondition::Dirichlet).unwrap();
    let ball = Mesh::radial(3, 2.0, 160, BoundaryCondition::Dirichlet).unwrap();
    let zero = |m: &Mesh| ComplexGridFn::zeros(m);
    let bump = |m: &Mesh, amp: Complex64| gaussian_core(m, amp, 0.25, f64::INFINITY);
    let profile = |p: Complex64, dim: usize, m: &Mesh, a: Complex64, amp: f64| {
        let f = gaussian_core(m, c(amp, 0.0), 0.3, 1.0);
        profile_spec(SelfSimilarParams::new(p, dim).unwrap(), &f, a).unwrap()
    };
    vec![
        ("profile_line", profile(c(2.0, 0.0), 1, &wide, c(1.0, 0.0), 3.0)),
        ("profile_line_dissipative", profile(c(2.0, 0.5), 1, &wide, c(1.0, -0.5), 3.0)),
        ("profile_disk", profile(c(2.0, 0.0), 2, &disk, c(1.0, 0.0), 4.0)),
        ("profile_ball", profile(c(2.0, 0.0), 3, &ball, c(1.0, -0.2), 4.0)),
        (
            "nonnegative_potential",
            ProblemSpec::new(
                c(1.0, 0.0),
                c(0.5, 0.0),
                ComplexGridFn::from_fn(&line, |x| c(1.0 + x * x, 0.0)),
                bump(&line, c(5.0, 2.0)),
            )
            .unwrap(),
        ),
        (
            "negative_real_shift",
            ProblemSpec::new(c(1.0, -1.0), c(-1.0, 0.0), zero(&line), bump(&line, c(4.0, 0.0))).unwrap(),
        ),
        (
            "absorbing_complex_potential",
            ProblemSpec::new(
                c(0.5, -0.5),
                c(0.3, -2.0),
                ComplexGridFn::from_fn(&line, |x| c(0.5, -0.3 * x * x)),
                bump(&line, c(6.0, -1.0)),
            )
            .unwrap(),
        ),
        (
            "purely_imaginary_a",
            ProblemSpec::new(c(0.0, -1.0), c(0.0, -1.0), zero(&line), bump(&line, c(3.0, 0.0))).unwrap(),
        ),
        (
            "negative_shift_absorbing",
            ProblemSpec::new(c(2.0, 0.0), c(-3.0, 1.0), zero(&line), bump(&line, c(8.0, 0.0))).unwrap(),
        ),
        (
            "radial_absorbing",
            ProblemSpec::new(c(1.0, 0.0), c(0.0, 1.0), zero(&ball), bump(&ball, c(5.0, 0.0))).unwrap(),
        ),
    ]
}

/// `u = A (1 - x^2) e^{ix}` on `(-1, 1)`, nonzero inside, with
/// `F = -u'' + a e^{ix} + b u`.
pub fn manufactured_line(cells: usize) -> (ProblemSpec, ComplexGridFn, ComplexGridFn) {
    let mesh = Mesh::interval(-1.0, 1.0, cells, BoundaryCondition::Dirichlet).unwrap();
    let (a, b, amp) = (c(1.0, -0.5), c(0.0, 1.0), 2.0);
    let phase = |x: f64| Complex64::from_polar(1.0, x);
    let exact = ComplexGridFn::from_fn(&mesh, |x| amp * (1.0 - x * x) * phase(x));
    let section = ComplexGridFn::from_fn(&mesh, phase);
    let f = ComplexGridFn::from_fn(&mesh, |x| {
        let s = 1.0 - x * x;
        let upp = amp * (c(-2.0, 0.0) + c(0.0, -4.0 * x) - s) * phase(x);
        -upp + a * phase(x) + b * amp * s * phase(x)
    });
    let spec = ProblemSpec::new(a, b, ComplexGridFn::zeros(&mesh), f).unwrap();
    (spec, exact, section)
}
