//! P1 finite elements on a uniform triangulation of the unit square with
//! homogeneous Dirichlet conditions.
//!
//! Boundary vertices carry no unknowns; every assembled matrix acts on the
//! interior degrees of freedom only, which keeps mass and stiffness SPD.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DlrError, Result};
use crate::linalg::{generalized_eigenvalues, CsrMatrix};
use crate::stochastic::DiscreteMeasure;

pub type Point = [f64; 2];

/// Uniform triangulation of `[0,1]²`: each of the `n × n` cells is split
/// along its `(0,0)–(1,1)` diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n_per_side: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn uniform(n_per_side: usize) -> Self {
        let n = n_per_side;
        let h = 1.0 / n as f64;
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self {
            n_per_side,
            vertices,
            triangles,
        }
    }

    pub fn n_per_side(&self) -> usize {
        self.n_per_side
    }

    /// Element size: the cell diameter `√2/n` (length of the longest edge).
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n_per_side as f64
    }

    /// Grid spacing `1/n` along each axis.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n_per_side as f64
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    fn is_boundary(&self, v: usize) -> bool {
        let n = self.n_per_side;
        let (i, j) = (v % (n + 1), v / (n + 1));
        i == 0 || j == 0 || i == n || j == n
    }

    /// Edge midpoints of triangle `t`, the nodes of the element quadrature.
    pub fn edge_midpoints(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let mid = |p: Point, q: Point| [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        [mid(a, b), mid(b, c), mid(c, a)]
    }

    /// Area and the constant gradients of the three barycentric functions.
    fn geometry(&self, t: usize) -> (f64, [[f64; 2]; 3]) {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let area = 0.5 * det.abs();
        let grads = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        (area, grads)
    }
}

/// P1 space on a [`Mesh`] restricted to interior vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct FeSpace {
    mesh: Mesh,
    interior: Vec<usize>,
    dof_of_vertex: Vec<Option<usize>>,
}

/// Builds the P1 space with `n_per_side` subdivisions per side.
pub fn build_space(n_per_side: usize) -> Result<FeSpace> {
    if n_per_side < 2 {
        return Err(DlrError::InvalidArgument(format!(
            "n_per_side = {n_per_side} leaves no interior degrees of freedom (need >= 2)"
        )));
    }
    let mesh = Mesh::uniform(n_per_side);
    let mut interior = Vec::new();
    let mut dof_of_vertex = vec![None; mesh.vertices.len()];
    for v in 0..mesh.vertices.len() {
        if !mesh.is_boundary(v) {
            dof_of_vertex[v] = Some(interior.len());
            interior.push(v);
        }
    }
    Ok(FeSpace {
        mesh,
        interior,
        dof_of_vertex,
    })
}

impl FeSpace {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Element size (cell diameter).
    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn dof_count(&self) -> usize {
        self.interior.len()
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior
    }

    pub fn dof_coordinates(&self) -> impl Iterator<Item = Point> + '_ {
        self.interior.iter().map(|&v| self.mesh.vertices[v])
    }

    /// Nodal interpolant of `f` (boundary values are dropped).
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> FeFunction {
        FeFunction::new(DVector::from_iterator(
            self.dof_count(),
            self.dof_coordinates().map(f),
        ))
    }

    pub fn zero(&self) -> FeFunction {
        FeFunction::new(DVector::zeros(self.dof_count()))
    }
}

/// Coefficient vector of a function in `V_h` (interior dofs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeFunction {
    coeffs: DVector<f64>,
}

impl FeFunction {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }
}

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// `a(x, ξ) = a₀(x) + Σₘ aₘ(x) ξₘ`.
#[derive(Clone)]
pub struct AffineDiffusion {
    a0: ScalarField,
    terms: Vec<ScalarField>,
    analytic_bounds: Option<(f64, f64)>,
}

impl fmt::Debug for AffineDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineDiffusion")
            .field("terms", &self.terms.len())
            .field("analytic_bounds", &self.analytic_bounds)
            .finish()
    }
}

impl AffineDiffusion {
    pub fn new(a0: ScalarField, terms: Vec<ScalarField>) -> Self {
        Self {
            a0,
            terms,
            analytic_bounds: None,
        }
    }

    /// Spatially constant, deterministic coefficient `a ≡ c`.
    pub fn constant(c: f64, dim: usize) -> Self {
        let terms = (0..dim)
            .map(|_| Arc::new(|_: Point| 0.0) as ScalarField)
            .collect();
        Self {
            a0: Arc::new(move |_| c),
            terms,
            analytic_bounds: Some((c, c)),
        }
    }

    /// `a₀ + Σₘ (cos 2πm x₁ + cos 2πm x₂)/(m²π²) ξₘ`, the benchmark
    /// coefficient on `Γ = [-1,1]^M`.
    pub fn cosine_series(a0: f64, dim: usize) -> Self {
        let terms = (1..=dim)
            .map(|m| {
                let mf = m as f64;
                Arc::new(move |x: Point| {
                    ((2.0 * PI * mf * x[0]).cos() + (2.0 * PI * mf * x[1]).cos()) / (mf * mf * PI * PI)
                }) as ScalarField
            })
            .collect();
        let spread: f64 = (1..=dim).map(|m| 2.0 / ((m * m) as f64 * PI * PI)).sum();
        Self {
            a0: Arc::new(move |_| a0),
            terms,
            analytic_bounds: Some((a0 - spread, a0 + spread)),
        }
    }

    /// Stochastic dimension `M`.
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn mean_field(&self, x: Point) -> f64 {
        (self.a0)(x)
    }

    pub fn term(&self, m: usize, x: Point) -> f64 {
        (self.terms[m])(x)
    }

    pub fn eval(&self, x: Point, xi: &[f64]) -> f64 {
        (self.a0)(x)
            + self
                .terms
                .iter()
                .zip(xi)
                .map(|(t, &z)| t(x) * z)
                .sum::<f64>()
    }

    /// Worst-case bounds over the whole box `[-1,1]^M`, when known in closed
    /// form (for the cosine series this is `a₀ ∓ Σ 2/(m²π²)`).
    pub fn analytic_bounds(&self) -> Option<(f64, f64)> {
        self.analytic_bounds
    }

    /// `(min, max)` of `a` over element quadrature nodes × measure points.
    pub fn sampled_bounds(&self, space: &FeSpace, mu: &DiscreteMeasure) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in quadrature_nodes(space) {
            for p in mu.points() {
                let a = self.eval(x, p);
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        (lo, hi)
    }
}

fn quadrature_nodes(space: &FeSpace) -> impl Iterator<Item = Point> + '_ {
    (0..space.mesh.triangles.len()).flat_map(|t| space.mesh.edge_midpoints(t))
}

/// Assembled FE matrices on the interior dofs.
#[derive(Debug, Clone)]
pub struct OperatorMatrices {
    pub mass: CsrMatrix,
    /// Stiffness for the deterministic part `a₀`.
    pub stiff_mean: CsrMatrix,
    /// Stiffness for each `aₘ`.
    pub stiff_terms: Vec<CsrMatrix>,
    /// Stiffness for `a ≡ 1` (the `V` seminorm).
    pub stiff_laplace: CsrMatrix,
}

impl OperatorMatrices {
    /// `A(ξ) = A₀ + Σₘ ξₘ Aₘ`.
    pub fn stiffness_at(&self, xi: &[f64]) -> CsrMatrix {
        let mut terms: Vec<(f64, &CsrMatrix)> = vec![(1.0, &self.stiff_mean)];
        terms.extend(xi.iter().copied().zip(self.stiff_terms.iter()));
        CsrMatrix::linear_combination(&terms)
    }

    /// `A(ξ)·v` without forming `A(ξ)`.
    pub fn apply_stiffness_at(&self, xi: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let mut out = self.stiff_mean.mul_vec(v);
        for (m, &z) in xi.iter().enumerate() {
            if z != 0.0 {
                out.axpy(z, &self.stiff_terms[m].mul_vec(v), 1.0);
            }
        }
        out
    }

    pub fn dof_count(&self) -> usize {
        self.mass.nrows()
    }
}

/// Assembles mass and the stiffness matrices of `a₀` and each `aₘ` with an
/// edge-midpoint rule, which is exact for the P1 mass and commutes with the
/// affine sum.
pub fn assemble(space: &FeSpace, diff: &AffineDiffusion) -> Result<OperatorMatrices> {
    let mass = assemble_mass(space);
    let stiff_mean = assemble_stiffness(space, |x| diff.mean_field(x));
    let stiff_terms = (0..diff.dim())
        .map(|m| assemble_stiffness(space, |x| diff.term(m, x)))
        .collect();
    let stiff_laplace = assemble_stiffness(space, |_| 1.0);
    // a broken mesh shows up as a singular mass matrix
    crate::linalg::EnvelopeCholesky::factor(&mass)
        .map_err(|_| DlrError::NotPositiveDefinite("mass matrix"))?;
    Ok(OperatorMatrices {
        mass,
        stiff_mean,
        stiff_terms,
        stiff_laplace,
    })
}

pub fn assemble_mass(space: &FeSpace) -> CsrMatrix {
    let n = space.dof_count();
    let mut trip = Vec::with_capacity(9 * space.mesh.triangles.len());
    for t in 0..space.mesh.triangles.len() {
        let (area, _) = space.mesh.geometry(t);
        let verts = space.mesh.triangles[t];
        for (a, &va) in verts.iter().enumerate() {
            let Some(i) = space.dof_of_vertex[va] else { continue };
            for (b, &vb) in verts.iter().enumerate() {
                let Some(j) = space.dof_of_vertex[vb] else { continue };
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                trip.push((i, j, m));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// `∫ c ∇φⱼ·∇φᵢ` with `c` sampled at the three edge midpoints of each element.
pub fn assemble_stiffness(space: &FeSpace, coeff: impl Fn(Point) -> f64) -> CsrMatrix {
    let n = space.dof_count();
    let mut trip = Vec::with_capacity(9 * space.mesh.triangles.len());
    for t in 0..space.mesh.triangles.len() {
        let (area, grads) = space.mesh.geometry(t);
        let avg = space.mesh.edge_midpoints(t).iter().map(|&x| coeff(x)).sum::<f64>() / 3.0;
        let verts = space.mesh.triangles[t];
        for (a, &va) in verts.iter().enumerate() {
            let Some(i) = space.dof_of_vertex[va] else { continue };
            for (b, &vb) in verts.iter().enumerate() {
                let Some(j) = space.dof_of_vertex[vb] else { continue };
                let g = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                trip.push((i, j, area * avg * g));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Full P1 mass matrix including boundary vertices (partition-of-unity checks).
pub fn assemble_full_mass(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.vertices.len();
    let mut trip = Vec::new();
    for t in 0..mesh.triangles.len() {
        let (area, _) = mesh.geometry(t);
        let verts = mesh.triangles[t];
        for (a, &va) in verts.iter().enumerate() {
            for (b, &vb) in verts.iter().enumerate() {
                trip.push((va, vb, if a == b { area / 6.0 } else { area / 12.0 }));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

fn check_field(ops: &OperatorMatrices, mu: &DiscreteMeasure, field: &DMatrix<f64>) -> Result<()> {
    check_dim("field rows (dofs)", ops.dof_count(), field.nrows())?;
    check_dim("field columns (samples)", mu.len(), field.ncols())
}

/// `‖u‖_{H,L²_ρ̂}` of a per-sample field stored as a `dofs × N̂` matrix.
pub fn norm_h(ops: &OperatorMatrices, mu: &DiscreteMeasure, field: &DMatrix<f64>) -> Result<f64> {
    check_field(ops, mu, field)?;
    Ok(weighted_quadratic(mu, field, |u| ops.mass.bilinear(u, u)).sqrt())
}

/// `‖u‖_{V,L²_ρ̂}` (Laplace seminorm).
pub fn norm_v(ops: &OperatorMatrices, mu: &DiscreteMeasure, field: &DMatrix<f64>) -> Result<f64> {
    check_field(ops, mu, field)?;
    Ok(weighted_quadratic(mu, field, |u| ops.stiff_laplace.bilinear(u, u)).sqrt())
}

/// `‖u‖_{L,ρ̂} = (Σₖ λₖ uₖᵀ A(ωₖ) uₖ)^{1/2}`.
pub fn norm_energy(
    ops: &OperatorMatrices,
    mu: &DiscreteMeasure,
    field: &DMatrix<f64>,
) -> Result<f64> {
    check_field(ops, mu, field)?;
    check_dim("coefficient terms", mu.dim(), ops.stiff_terms.len())?;
    let mut acc = 0.0;
    for k in 0..mu.len() {
        let u = field.column(k).into_owned();
        let au = ops.apply_stiffness_at(mu.point(k), &u);
        acc += mu.weights()[k] * u.dot(&au);
    }
    Ok(acc.max(0.0).sqrt())
}

fn weighted_quadratic(mu: &DiscreteMeasure, field: &DMatrix<f64>, q: impl Fn(&[f64]) -> f64) -> f64 {
    (0..mu.len())
        .map(|k| mu.weights()[k] * q(field.column(k).as_slice()))
        .sum::<f64>()
        .max(0.0)
}

/// Discretization and coercivity constants of the heat problem. Mesh-size
/// dependent quantities use the cell diameter as `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    /// Inverse-inequality constant: `‖v‖_V ≤ (C_I/h)‖v‖_H`.
    pub c_i: f64,
    /// Continuity constant (`a_max`).
    pub c_b: f64,
    /// Coercivity constant (`a_min`).
    pub c_l: f64,
    /// Poincaré constant `‖v‖_H ≤ C_P ‖v‖_V`.
    pub c_p: f64,
    /// `inf ā/a`, with `ā = E_ρ̂[a]`.
    pub c_det: f64,
    /// Explicit time-step bound `Δt/h² ≤ 2/(C_I² C_B)`.
    pub k_explicit: f64,
    pub h: f64,
    /// Worst case over the full parameter box, when known analytically.
    pub analytic_a_min: Option<f64>,
    pub analytic_a_max: Option<f64>,
}

/// Estimates the constants governing the stability bounds on this
/// discretization.
pub fn estimate_constants(
    space: &FeSpace,
    mu: &DiscreteMeasure,
    diff: &AffineDiffusion,
    ops: &OperatorMatrices,
) -> Result<ConstantsReport> {
    check_dim("coefficient terms", mu.dim(), diff.dim())?;
    let eig = generalized_eigenvalues(&ops.stiff_laplace.to_dense(), &ops.mass.to_dense())?;
    let lmin = *eig.first().ok_or(DlrError::Eigensolver("empty spectrum"))?;
    let lmax = *eig.last().ok_or(DlrError::Eigensolver("empty spectrum"))?;
    if !(lmin > 0.0) {
        return Err(DlrError::Eigensolver("non-positive Laplace eigenvalue"));
    }
    let h = space.h();
    let c_i = h * lmax.sqrt();
    let (a_min, a_max) = diff.sampled_bounds(space, mu);
    if !(a_min > 0.0) {
        return Err(DlrError::InvalidArgument(format!(
            "diffusion coefficient is not uniformly positive on the discrete problem (min {a_min})"
        )));
    }
    let mean_xi: Vec<f64> = (0..mu.dim())
        .map(|m| mu.mean_of(mu.coordinate(m).values()))
        .collect();
    let mut c_det = f64::INFINITY;
    for x in quadrature_nodes(space) {
        let abar = diff.eval(x, &mean_xi);
        for p in mu.points() {
            c_det = c_det.min(abar / diff.eval(x, p));
        }
    }
    Ok(ConstantsReport {
        c_i,
        c_b: a_max,
        c_l: a_min,
        c_p: 1.0 / lmin.sqrt(),
        c_det: c_det.min(1.0),
        k_explicit: 2.0 / (c_i * c_i * a_max),
        h,
        analytic_a_min: diff.analytic_bounds().map(|b| b.0),
        analytic_a_max: diff.analytic_bounds().map(|b| b.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{gauss_legendre_measure, monte_carlo_measure};

    #[test]
    fn space_sizes() {
        let s = build_space(7).unwrap();
        assert_eq!(s.dof_count(), 36);
        assert!((s.mesh().spacing() - 1.0 / 7.0).abs() < 1e-15);
        let s = build_space(10).unwrap();
        assert_eq!(s.dof_count(), 81);
        assert!((s.h() - 0.142).abs() < 1e-3);
        let s = build_space(20).unwrap();
        assert!((s.h() - 0.142 / 2.0).abs() < 1e-3);
        let s = build_space(2).unwrap();
        assert_eq!(s.dof_count(), 1);
        assert_eq!(s.dof_coordinates().next().unwrap(), [0.5, 0.5]);
        assert!(build_space(1).is_err());
    }

    #[test]
    fn mesh_covers_unit_square() {
        let m = Mesh::uniform(5);
        let total: f64 = (0..m.triangles().len()).map(|t| m.geometry(t).0).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert_eq!(m.triangles().len(), 50);
    }

    #[test]
    fn full_mass_sums_to_domain_area() {
        let m = Mesh::uniform(6);
        let mass = assemble_full_mass(&m);
        let ones = DVector::from_element(mass.nrows(), 1.0);
        let total = ones.dot(&mass.mul_vec(&ones));
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_coefficient_reproduces_laplace() {
        let s = build_space(6).unwrap();
        let ops = assemble(&s, &AffineDiffusion::constant(1.0, 2)).unwrap();
        let d = (ops.stiff_mean.to_dense() - ops.stiff_laplace.to_dense()).amax();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn matrices_symmetric() {
        let s = build_space(8).unwrap();
        let ops = assemble(&s, &AffineDiffusion::cosine_series(0.3, 3)).unwrap();
        assert!(ops.mass.relative_asymmetry() < 1e-13);
        assert!(ops.stiff_mean.relative_asymmetry() < 1e-13);
        for a in &ops.stiff_terms {
            assert!(a.relative_asymmetry() < 1e-13);
        }
        crate::linalg::EnvelopeCholesky::factor(&ops.stiff_mean).unwrap();
    }

    #[test]
    fn smallest_laplace_eigenvalue_near_two_pi_squared() {
        let s = build_space(16).unwrap();
        let ops = assemble(&s, &AffineDiffusion::constant(1.0, 1)).unwrap();
        let ev = generalized_eigenvalues(&ops.stiff_laplace.to_dense(), &ops.mass.to_dense()).unwrap();
        let target = 2.0 * PI * PI;
        assert!((ev[0] - target).abs() / target < 0.05, "λ₁ = {}", ev[0]);
    }

    #[test]
    fn sine_mode_h_norm() {
        let s = build_space(32).unwrap();
        let ops = assemble(&s, &AffineDiffusion::constant(1.0, 1)).unwrap();
        let mu = gauss_legendre_measure(1, 3).unwrap();
        let u = s.interpolate(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let field = DMatrix::from_fn(s.dof_count(), mu.len(), |i, _| u.coeffs()[i]);
        let nh = norm_h(&ops, &mu, &field).unwrap();
        assert!((nh - 0.5).abs() / 0.5 < 0.02, "‖u‖ = {nh}");
        let zero = DMatrix::zeros(s.dof_count(), mu.len());
        assert_eq!(norm_h(&ops, &mu, &zero).unwrap(), 0.0);
        assert_eq!(norm_energy(&ops, &mu, &zero).unwrap(), 0.0);
    }

    #[test]
    fn energy_norm_with_unit_coefficient_is_v_norm() {
        let s = build_space(6).unwrap();
        let mu = gauss_legendre_measure(2, 3).unwrap();
        let ops = assemble(&s, &AffineDiffusion::constant(1.0, 2)).unwrap();
        let field = DMatrix::from_fn(s.dof_count(), mu.len(), |i, k| ((i * 7 + k * 3) % 11) as f64 - 5.0);
        let e = norm_energy(&ops, &mu, &field).unwrap();
        let v = norm_v(&ops, &mu, &field).unwrap();
        assert!((e - v).abs() < 1e-12 * v);
    }

    #[test]
    fn affine_reconstruction_matches_direct_assembly() {
        let s = build_space(7).unwrap();
        let diff = AffineDiffusion::cosine_series(0.3, 4);
        let ops = assemble(&s, &diff).unwrap();
        let mu = monte_carlo_measure(4, 5, 1).unwrap();
        for k in 0..mu.len() {
            let p = mu.point(k).to_vec();
            let direct = assemble_stiffness(&s, |x| diff.eval(x, &p));
            let affine = ops.stiffness_at(&p);
            let d = (direct.to_dense() - affine.to_dense()).amax();
            assert!(d <= 1e-12 * direct.to_dense().amax());
        }
    }

    #[test]
    fn constants_for_unit_coefficient() {
        let s = build_space(8).unwrap();
        let mu = gauss_legendre_measure(1, 3).unwrap();
        let diff = AffineDiffusion::constant(1.0, 1);
        let ops = assemble(&s, &diff).unwrap();
        let c = estimate_constants(&s, &mu, &diff, &ops).unwrap();
        assert_eq!(c.c_b, 1.0);
        assert_eq!(c.c_l, 1.0);
        assert_eq!(c.c_det, 1.0);
        assert!(c.c_i > 0.0 && c.c_p > 0.0);
    }

    #[test]
    fn benchmark_coefficient_explicit_bound() {
        let s = build_space(10).unwrap();
        let mu = gauss_legendre_measure(2, 9).unwrap();
        let diff = AffineDiffusion::cosine_series(0.3, 2);
        let ops = assemble(&s, &diff).unwrap();
        let c = estimate_constants(&s, &mu, &diff, &ops).unwrap();
        assert!((c.k_explicit - 0.085).abs() <= 0.25 * 0.085, "K = {}", c.k_explicit);
        assert!(c.c_l > 0.04 && c.c_l <= c.c_b);
        assert!(c.c_det >= 0.5 && c.c_det <= 1.0);
        let (lo, hi) = c.analytic_a_min.zip(c.analytic_a_max).unwrap();
        assert!(lo <= c.c_l && c.c_b <= hi);
    }

    #[test]
    fn inverse_inequality_and_sandwich_on_random_fields() {
        use crate::dlr::vector_source;
        let s = build_space(6).unwrap();
        let mu = monte_carlo_measure(2, 7, 3).unwrap();
        let diff = AffineDiffusion::cosine_series(0.3, 2);
        let ops = assemble(&s, &diff).unwrap();
        let c = estimate_constants(&s, &mu, &diff, &ops).unwrap();
        let mut src = vector_source(s.dof_count(), 5);
        for _ in 0..100 {
            let v = src();
            let nv = ops.stiff_laplace.bilinear(v.as_slice(), v.as_slice());
            let nh = ops.mass.bilinear(v.as_slice(), v.as_slice());
            assert!(nv <= (c.c_i / s.h()).powi(2) * nh * (1.0 + 1e-10));
        }
        let field = DMatrix::from_columns(&(0..mu.len()).map(|_| src()).collect::<Vec<_>>());
        let e = norm_energy(&ops, &mu, &field).unwrap().powi(2);
        let v = norm_v(&ops, &mu, &field).unwrap().powi(2);
        assert!(c.c_l * v <= e * (1.0 + 1e-12) && e <= c.c_b * v * (1.0 + 1e-12));
        // the averaged operator dominates C_det times the full one
        let a_det = ops.stiffness_at(&[0.0, 0.0]);
        let det: f64 = (0..mu.len())
            .map(|k| mu.weights()[k] * a_det.bilinear(field.column(k).as_slice(), field.column(k).as_slice()))
            .sum();
        assert!(det >= c.c_det * e * (1.0 - 1e-12));
    }

    #[test]
    fn inverse_constant_stable_under_refinement() {
        let mu = gauss_legendre_measure(1, 2).unwrap();
        let diff = AffineDiffusion::constant(1.0, 1);
        let ci = |n| {
            let s = build_space(n).unwrap();
            let ops = assemble(&s, &diff).unwrap();
            estimate_constants(&s, &mu, &diff, &ops).unwrap().c_i
        };
        let (a, b) = (ci(8), ci(16));
        assert!((a - b).abs() / b < 0.10, "C_I: {a} vs {b}");
    }
}
