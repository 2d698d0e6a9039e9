//! Uniform meshes, the conservative finite-difference Laplacian, and the
//! quadratures behind every norm and pairing used by the solver and audits.
//!
//! Two geometries are supported: a 1-D interval and the radial reduction of
//! a ball in `R^N`. Both are represented by the same three ingredients:
//! nodal weights `w_i` (control-volume measures), edge conductances `c_e`,
//! and the symmetric stiffness `K` assembled from the conductances. The
//! discrete negative Laplacian is `W^{-1} K`, which is self-adjoint in the
//! weighted inner product, so the discrete energy identities hold exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{smallest_eigenvalue, Tridiagonal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Interval,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Uniform grid on `[x_lo, x_hi]` (radial: `[0, R]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    kind: MeshKind,
    dim: usize,
    x_lo: f64,
    x_hi: f64,
    num_cells: usize,
    h: f64,
    bc: BoundaryCondition,
}

/// One edge between consecutive nodes, with the DOF indices of its ends
/// (`None` for an eliminated Dirichlet node).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub conductance: f64,
    /// Measure of the dual cell around the edge midpoint.
    pub measure: f64,
}

/// Surface measure of the unit sphere `S^{N-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        n => sphere_area(n - 2) * 2.0 * PI / (n as f64 - 2.0),
    }
}

pub fn build_mesh(
    kind: MeshKind,
    dim: usize,
    extent: (f64, f64),
    num_cells: usize,
    bc: BoundaryCondition,
) -> Result<Mesh> {
    Mesh::new(kind, dim, extent, num_cells, bc)
}

impl Mesh {
    pub fn new(
        kind: MeshKind,
        dim: usize,
        (x_lo, x_hi): (f64, f64),
        num_cells: usize,
        bc: BoundaryCondition,
    ) -> Result<Self> {
        if num_cells < 4 {
            return Err(Error::InvalidMesh(format!(
                "need at least 4 cells, got {num_cells}"
            )));
        }
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_hi <= x_lo {
            return Err(Error::InvalidMesh(format!(
                "extent ({x_lo}, {x_hi}) is not a positive interval"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidMesh("dimension must be positive".into()));
        }
        match kind {
            MeshKind::Interval if dim != 1 => {
                return Err(Error::InvalidMesh(format!(
                    "interval meshes are one-dimensional, got N = {dim}"
                )))
            }
            MeshKind::Radial if x_lo != 0.0 => {
                return Err(Error::InvalidMesh(format!(
                    "radial meshes start at r = 0, got {x_lo}"
                )))
            }
            _ => {}
        }
        let h = (x_hi - x_lo) / num_cells as f64;
        Ok(Self {
            kind,
            dim,
            x_lo,
            x_hi,
            num_cells,
            h,
            bc,
        })
    }

    pub fn interval(lo: f64, hi: f64, num_cells: usize, bc: BoundaryCondition) -> Result<Self> {
        Self::new(MeshKind::Interval, 1, (lo, hi), num_cells, bc)
    }

    pub fn radial(dim: usize, radius: f64, num_cells: usize, bc: BoundaryCondition) -> Result<Self> {
        Self::new(MeshKind::Radial, dim, (0.0, radius), num_cells, bc)
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }
    pub fn num_cells(&self) -> usize {
        self.num_cells
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn extent(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    /// Same grid structure with every coordinate multiplied by `s > 0`.
    pub fn dilated(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::param("dilation", format!("must be positive, got {s}")));
        }
        Self::new(
            self.kind,
            self.dim,
            (self.x_lo * s, self.x_hi * s),
            self.num_cells,
            self.bc,
        )
    }

    pub fn with_bc(&self, bc: BoundaryCondition) -> Self {
        Self { bc, ..*self }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_cells + 1
    }

    pub fn node_coord(&self, j: usize) -> f64 {
        if j == self.num_cells {
            self.x_hi
        } else {
            self.x_lo + j as f64 * self.h
        }
    }

    fn first_dof_node(&self) -> usize {
        match (self.kind, self.bc) {
            (MeshKind::Interval, BoundaryCondition::Dirichlet) => 1,
            _ => 0,
        }
    }

    pub fn num_dofs(&self) -> usize {
        match (self.kind, self.bc) {
            (MeshKind::Interval, BoundaryCondition::Dirichlet) => self.num_cells - 1,
            (MeshKind::Radial, BoundaryCondition::Dirichlet) => self.num_cells,
            (_, BoundaryCondition::Neumann) => self.num_cells + 1,
        }
    }

    pub fn dof_node(&self, k: usize) -> usize {
        k + self.first_dof_node()
    }

    pub fn node_dof(&self, j: usize) -> Option<usize> {
        let first = self.first_dof_node();
        (j >= first && j < first + self.num_dofs()).then(|| j - first)
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.node_coord(self.dof_node(k))
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.num_dofs()).map(|k| self.coord(k)).collect()
    }

    /// Distance of each DOF from the origin (`|x|` or `r`).
    pub fn radii(&self) -> Vec<f64> {
        self.coords().into_iter().map(f64::abs).collect()
    }

    fn shell_measure(&self, r0: f64, r1: f64) -> f64 {
        let n = self.dim as i32;
        sphere_area(self.dim) * (r1.powi(n) - r0.powi(n)) / self.dim as f64
    }

    /// Quadrature weight of node `j`: trapezoid on intervals, exact shell
    /// volume of the control cell on radial meshes.
    pub fn node_weight(&self, j: usize) -> f64 {
        match self.kind {
            MeshKind::Interval => {
                if j == 0 || j == self.num_cells {
                    0.5 * self.h
                } else {
                    self.h
                }
            }
            MeshKind::Radial => {
                let r = self.node_coord(j);
                let r0 = (r - 0.5 * self.h).max(0.0);
                let r1 = (r + 0.5 * self.h).min(self.x_hi);
                self.shell_measure(r0, r1)
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.num_dofs())
            .map(|k| self.node_weight(self.dof_node(k)))
            .collect()
    }

    /// Measure of the domain `|Omega|`.
    pub fn measure(&self) -> f64 {
        match self.kind {
            MeshKind::Interval => self.x_hi - self.x_lo,
            MeshKind::Radial => self.shell_measure(0.0, self.x_hi),
        }
    }

    pub fn edges(&self) -> Vec<Edge> {
        (0..self.num_cells)
            .map(|j| {
                let (conductance, measure) = match self.kind {
                    MeshKind::Interval => (1.0 / self.h, self.h),
                    MeshKind::Radial => {
                        let mid = self.node_coord(j) + 0.5 * self.h;
                        let s = sphere_area(self.dim) * mid.powi(self.dim as i32 - 1);
                        (s / self.h, s * self.h)
                    }
                };
                Edge {
                    left: self.node_dof(j),
                    right: self.node_dof(j + 1),
                    conductance,
                    measure,
                }
            })
            .collect()
    }

    /// Interval meshes symmetric about the origin.
    pub fn is_symmetric(&self) -> bool {
        self.kind == MeshKind::Interval && (self.x_lo + self.x_hi).abs() <= 1e-12 * self.x_hi.abs()
    }
}

/// Complex field sampled at the degrees of freedom of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGridFn {
    mesh: Mesh,
    values: Vec<Complex64>,
}

impl ComplexGridFn {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            mesh: *mesh,
            values: vec![Complex64::new(0.0, 0.0); mesh.num_dofs()],
        }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.num_dofs() {
            return Err(Error::param(
                "values",
                format!("expected {} entries, got {}", mesh.num_dofs(), values.len()),
            ));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("values", "non-finite entry"));
        }
        Ok(Self {
            mesh: *mesh,
            values,
        })
    }

    /// Samples `f` at each DOF coordinate.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            mesh: *mesh,
            values: mesh.coords().into_iter().map(f).collect(),
        }
    }

    pub fn constant(mesh: &Mesh, c: Complex64) -> Self {
        Self::from_fn(mesh, |_| c)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            mesh: self.mesh,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Pointwise map that also sees the DOF coordinate.
    pub fn map_with_coord(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        Self {
            mesh: self.mesh,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(k, &z)| f(self.mesh.coord(k), z))
                .collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.check_same_mesh(other)?;
        Ok(Self {
            mesh: self.mesh,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| c * z)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn check_same_mesh(&self, other: &Self) -> Result<()> {
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Values on every node, with zeros at eliminated Dirichlet nodes.
    pub fn node_values(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.mesh.num_nodes()];
        for (k, &z) in self.values.iter().enumerate() {
            out[self.mesh.dof_node(k)] = z;
        }
        out
    }

    /// Piecewise-linear evaluation at coordinate `x`, zero outside the mesh.
    /// Radial meshes are evaluated at `|x|`.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let nodes = self.node_values();
        interpolate_nodes(&self.mesh, &nodes, x)
    }
}

pub(crate) fn interpolate_nodes(mesh: &Mesh, nodes: &[Complex64], x: f64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    let x = match mesh.kind() {
        MeshKind::Radial => x.abs(),
        MeshKind::Interval => x,
    };
    let (lo, hi) = mesh.extent();
    if x < lo || x > hi {
        return zero;
    }
    let s = (x - lo) / mesh.h();
    let mut j = s.floor() as usize;
    if j >= mesh.num_cells() {
        j = mesh.num_cells() - 1;
    }
    let mut theta = s - j as f64;
    // snap to nodes so that exact nodal positions reproduce nodal values
    if theta.abs() < 1e-12 {
        theta = 0.0;
    } else if (1.0 - theta).abs() < 1e-12 {
        theta = 1.0;
    }
    if theta == 0.0 {
        nodes[j]
    } else if theta == 1.0 {
        nodes[j + 1]
    } else {
        nodes[j] * (1.0 - theta) + nodes[j + 1] * theta
    }
}

/// Discrete negative Laplacian `W^{-1} K`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    mesh: Mesh,
    /// Symmetric stiffness matrix `K` (real tridiagonal).
    stiff_diag: Vec<f64>,
    stiff_off: Vec<f64>,
    weights: Vec<f64>,
    /// `K` is symmetric, hence `W^{-1}K` is self-adjoint in the weighted product.
    pub hermitian: bool,
}

pub fn laplacian(mesh: &Mesh) -> DiscreteOperator {
    DiscreteOperator::new(mesh)
}

impl DiscreteOperator {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.num_dofs();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for e in mesh.edges() {
            if let Some(l) = e.left {
                diag[l] += e.conductance;
            }
            if let Some(r) = e.right {
                diag[r] += e.conductance;
            }
            if let (Some(l), Some(_)) = (e.left, e.right) {
                off[l] -= e.conductance;
            }
        }
        Self {
            mesh: *mesh,
            stiff_diag: diag,
            stiff_off: off,
            weights: mesh.weights(),
            hermitian: true,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.stiff_diag.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stiffness_diag(&self) -> &[f64] {
        &self.stiff_diag
    }

    pub fn stiffness_off(&self) -> &[f64] {
        &self.stiff_off
    }

    /// `K u` (the weak form of `-Delta u` tested against nodal hats).
    pub fn stiffness_apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(u.len(), n);
        (0..n)
            .map(|i| {
                let mut s = u[i] * self.stiff_diag[i];
                if i > 0 {
                    s += u[i - 1] * self.stiff_off[i - 1];
                }
                if i + 1 < n {
                    s += u[i + 1] * self.stiff_off[i];
                }
                s
            })
            .collect()
    }

    /// Nodal values of `-Delta_h f`.
    pub fn apply(&self, f: &ComplexGridFn) -> Result<ComplexGridFn> {
        if *f.mesh() != self.mesh {
            return Err(Error::MeshMismatch);
        }
        let ku = self.stiffness_apply(f.values());
        let vals = ku
            .into_iter()
            .zip(&self.weights)
            .map(|(z, w)| z / *w)
            .collect();
        ComplexGridFn::from_values(&self.mesh, vals)
    }

    /// Tridiagonal matrix `K + W diag(shift)`.
    pub fn shifted_system(&self, shift: &[Complex64]) -> Tridiagonal {
        let n = self.dim();
        assert_eq!(shift.len(), n);
        let diag = (0..n)
            .map(|i| Complex64::new(self.stiff_diag[i], 0.0) + shift[i] * self.weights[i])
            .collect();
        let off: Vec<Complex64> = self
            .stiff_off
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        Tridiagonal::new(off.clone(), diag, off)
    }

    /// Smallest eigenvalue of `K x = lambda W x`.
    pub fn smallest_eigenvalue(&self) -> f64 {
        let d: Vec<f64> = self
            .stiff_diag
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| k / w)
            .collect();
        let e: Vec<f64> = self
            .stiff_off
            .iter()
            .enumerate()
            .map(|(i, k)| k / (self.weights[i] * self.weights[i + 1]).sqrt())
            .collect();
        smallest_eigenvalue(&d, &e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub h1_seminorm: f64,
}

impl Norms {
    /// Full `H^1` norm `sqrt(|u|_2^2 + |grad u|_2^2)`.
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_seminorm)
    }
}

pub fn norms(f: &ComplexGridFn) -> Norms {
    let mesh = f.mesh();
    let w = mesh.weights();
    let vals = f.values();
    let l1 = vals.iter().zip(&w).map(|(z, w)| w * z.norm()).sum();
    let l2 = vals
        .iter()
        .zip(&w)
        .map(|(z, w)| w * z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    Norms {
        l1,
        l2,
        linf: f.max_abs(),
        h1_seminorm: gradient_energy(f).sqrt(),
    }
}

/// `sum_e c_e |u_right - u_left|^2`, the discrete Dirichlet energy.
pub fn gradient_energy(f: &ComplexGridFn) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    let v = f.values();
    f.mesh()
        .edges()
        .iter()
        .map(|e| {
            let l = e.left.map_or(zero, |k| v[k]);
            let r = e.right.map_or(zero, |k| v[k]);
            e.conductance * (r - l).norm_sqr()
        })
        .sum()
}

/// Weighted `L^q` norm, `q = f64::INFINITY` allowed.
pub fn lq_norm(f: &ComplexGridFn, q: f64) -> f64 {
    if q.is_infinite() {
        return f.max_abs();
    }
    let w = f.mesh().weights();
    f.values()
        .iter()
        .zip(&w)
        .map(|(z, w)| w * z.norm().powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// `L^q` norm of the edge gradient (radial derivative on radial meshes).
pub fn gradient_lq_norm(f: &ComplexGridFn, q: f64) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    let v = f.values();
    let h = f.mesh().h();
    let grads = f.mesh().edges().into_iter().map(|e| {
        let l = e.left.map_or(zero, |k| v[k]);
        let r = e.right.map_or(zero, |k| v[k]);
        (e.measure, ((r - l) / h).norm())
    });
    if q.is_infinite() {
        return grads.fold(0.0, |m, (_, g)| m.max(g));
    }
    grads.map(|(m, g)| m * g.powf(q)).sum::<f64>().powf(1.0 / q)
}

/// `L^q` norm of the nodal second difference `(u_{j+1} - 2u_j + u_{j-1})/h^2`
/// (the `xx` or `rr` component of the Hessian), over interior nodes.
pub fn second_derivative_lq_norm(f: &ComplexGridFn, q: f64) -> f64 {
    let mesh = f.mesh();
    let nodes = f.node_values();
    let h2 = mesh.h() * mesh.h();
    let vals = (1..mesh.num_cells()).map(|j| {
        let d2 = (nodes[j + 1] - nodes[j] * 2.0 + nodes[j - 1]) / h2;
        (mesh.node_weight(j), d2.norm())
    });
    if q.is_infinite() {
        return vals.fold(0.0, |m, (_, g)| m.max(g));
    }
    vals.map(|(w, g)| w * g.powf(q)).sum::<f64>().powf(1.0 / q)
}

/// `Re int F conj(v) dx`.
pub fn duality(f: &ComplexGridFn, v: &ComplexGridFn) -> Result<f64> {
    f.check_same_mesh(v)?;
    Ok(weighted_pairing(f.mesh(), f.values(), v.values()))
}

pub(crate) fn weighted_pairing(mesh: &Mesh, f: &[Complex64], v: &[Complex64]) -> f64 {
    let w = mesh.weights();
    f.iter()
        .zip(v)
        .zip(&w)
        .map(|((a, b), w)| w * (a * b.conj()).re)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareConstants {
    /// `|w|_2 <= c_p |grad w|_2`.
    pub c_p: f64,
    /// `|w|_1 <= l1_grad |grad w|_2`, equal to `|Omega|^{1/2} c_p`.
    pub l1_grad: f64,
    /// `|w|_{H^1} <= h1 |grad w|_2`, equal to `1 + c_p`.
    pub h1: f64,
    pub measure: f64,
}

pub fn poincare_constant(mesh: &Mesh) -> Result<PoincareConstants> {
    if mesh.bc() != BoundaryCondition::Dirichlet {
        return Err(Error::param(
            "mesh",
            "the Poincare inequality needs a Dirichlet mesh",
        ));
    }
    let lambda = laplacian(mesh).smallest_eigenvalue();
    if lambda <= 0.0 {
        return Err(Error::InvalidMesh(format!(
            "Dirichlet Laplacian is not positive definite (lambda_min = {lambda})"
        )));
    }
    let c_p = 1.0 / lambda.sqrt();
    let measure = mesh.measure();
    Ok(PoincareConstants {
        c_p,
        l1_grad: measure.sqrt() * c_p,
        h1: 1.0 + c_p,
        measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn build_mesh_examples() {
        let m = build_mesh(MeshKind::Interval, 1, (0.0, PI), 64, BoundaryCondition::Dirichlet)
            .unwrap();
        assert_eq!(m.h(), PI / 64.0);
        let r = build_mesh(MeshKind::Radial, 3, (0.0, 10.0), 100, BoundaryCondition::Dirichlet)
            .unwrap();
        assert!((r.node_coord(1) - 0.1).abs() < 1e-15);
        assert!(
            build_mesh(MeshKind::Interval, 1, (0.0, 0.0), 64, BoundaryCondition::Dirichlet)
                .is_err()
        );
        assert!(Mesh::interval(0.0, 1.0, 3, BoundaryCondition::Dirichlet).is_err());
        assert!(
            build_mesh(MeshKind::Radial, 2, (0.5, 1.0), 10, BoundaryCondition::Dirichlet).is_err()
        );
    }

    #[test]
    fn dof_layout() {
        let d = Mesh::interval(0.0, 1.0, 8, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(d.num_dofs(), 7);
        assert_eq!(d.coord(0), 0.125);
        let n = d.with_bc(BoundaryCondition::Neumann);
        assert_eq!(n.num_dofs(), 9);
        let r = Mesh::radial(2, 1.0, 8, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(r.num_dofs(), 8);
        assert_eq!(r.coord(0), 0.0);
        // radial weights sum to the ball measure (Neumann keeps the outer node)
        let rn = r.with_bc(BoundaryCondition::Neumann);
        let total: f64 = rn.weights().iter().sum();
        assert!((total - PI).abs() < 1e-13);
    }

    #[test]
    fn laplacian_of_parabola_is_two() {
        let m = Mesh::interval(0.0, PI, 64, BoundaryCondition::Dirichlet).unwrap();
        let u = ComplexGridFn::from_fn(&m, |x| re(x * (PI - x)));
        let lu = laplacian(&m).apply(&u).unwrap();
        for z in lu.values() {
            assert!((z - re(2.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn radial_laplacian_exact_on_r_squared() {
        for n in 1..=3 {
            let m = Mesh::radial(n, 1.0, 20, BoundaryCondition::Neumann).unwrap();
            let u = ComplexGridFn::from_fn(&m, |r| re(r * r));
            let lu = laplacian(&m).apply(&u).unwrap();
            // interior nodes only: the outer Neumann row sees a zero flux
            for z in &lu.values()[..m.num_dofs() - 1] {
                assert!((z.re + 2.0 * n as f64).abs() < 1e-9, "N={n}: {z}");
            }
        }
    }

    #[test]
    fn constants_are_harmonic_under_neumann() {
        for m in [
            Mesh::interval(-1.0, 2.0, 16, BoundaryCondition::Neumann).unwrap(),
            Mesh::radial(3, 2.0, 16, BoundaryCondition::Neumann).unwrap(),
        ] {
            let u = ComplexGridFn::constant(&m, Complex64::new(1.5, -0.5));
            let lu = laplacian(&m).apply(&u).unwrap();
            assert!(lu.max_abs() < 1e-12);
        }
    }

    #[test]
    fn smallest_dirichlet_eigenvalue_converges_to_one() {
        let mut prev_err = f64::INFINITY;
        for cells in [32, 64, 128] {
            let m = Mesh::interval(0.0, PI, cells, BoundaryCondition::Dirichlet).unwrap();
            let err = (laplacian(&m).smallest_eigenvalue() - 1.0).abs();
            assert!(err < prev_err / 3.5, "second order: {err} vs {prev_err}");
            prev_err = err;
        }
        assert!(prev_err < 1e-4);
    }

    #[test]
    fn norm_examples() {
        let m = Mesh::interval(0.0, 1.0, 16, BoundaryCondition::Neumann).unwrap();
        let z = norms(&ComplexGridFn::zeros(&m));
        assert_eq!((z.l1, z.l2, z.linf, z.h1_seminorm), (0.0, 0.0, 0.0, 0.0));
        let one = norms(&ComplexGridFn::constant(&m, re(1.0)));
        assert!((one.l1 - 1.0).abs() < 1e-14 && (one.l2 - 1.0).abs() < 1e-14);
        let m = Mesh::interval(0.0, PI, 128, BoundaryCondition::Dirichlet).unwrap();
        let s = norms(&ComplexGridFn::from_fn(&m, |x| re(x.sin())));
        assert!((s.l2 * s.l2 - PI / 2.0).abs() < 1e-3);
    }

    #[test]
    fn duality_examples() {
        let m = Mesh::interval(0.0, 1.0, 16, BoundaryCondition::Neumann).unwrap();
        let f = ComplexGridFn::from_fn(&m, |x| re(x * x - 0.3));
        let if_ = f.scale(Complex64::i());
        assert!(duality(&f, &if_).unwrap().abs() < 1e-15);
        let one = ComplexGridFn::constant(&m, re(1.0));
        assert!((duality(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        let g = ComplexGridFn::from_fn(&m, |x| re(x.exp()));
        assert_eq!(duality(&f, &g).unwrap(), duality(&g, &f).unwrap());
        let other = Mesh::interval(0.0, 2.0, 16, BoundaryCondition::Neumann).unwrap();
        assert!(duality(&f, &ComplexGridFn::zeros(&other)).is_err());
    }

    #[test]
    fn poincare_constant_limits() {
        let m = Mesh::interval(0.0, PI, 256, BoundaryCondition::Dirichlet).unwrap();
        assert!((poincare_constant(&m).unwrap().c_p - 1.0).abs() < 1e-4);
        let l = 3.0;
        let m = Mesh::interval(0.0, l, 256, BoundaryCondition::Dirichlet).unwrap();
        let pc = poincare_constant(&m).unwrap();
        assert!((pc.c_p - l / PI).abs() < 1e-4);
        assert!((pc.h1 - 1.0 - pc.c_p).abs() < 1e-15);
        assert!(poincare_constant(&m.with_bc(BoundaryCondition::Neumann)).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_vanishes_outside() {
        let m = Mesh::interval(-1.0, 1.0, 10, BoundaryCondition::Dirichlet).unwrap();
        let f = ComplexGridFn::from_fn(&m, |x| Complex64::new(1.0 - x * x, x));
        for (k, x) in m.coords().into_iter().enumerate() {
            assert_eq!(f.interpolate(x), f.values()[k]);
        }
        assert_eq!(f.interpolate(1.5), Complex64::new(0.0, 0.0));
        let mid = f.interpolate(0.1);
        let expect = (f.values()[4] + f.values()[5]) * 0.5;
        assert!((mid - expect).norm() < 1e-14);
    }
}
