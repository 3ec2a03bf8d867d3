//! Low-rank states `u = ū + Σⱼ Uⱼ Yⱼ`, their construction and the checks
//! that certify a time step.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DlrError, Result};
use crate::fem::{build_space, FeFunction, FeSpace, OperatorMatrices};
use crate::integrators::{ForcingRule, HeatModel, Scheme};
use crate::linalg::{gram_schmidt, sorted_symmetric_eigen, CsrMatrix};
use crate::stochastic::{
    column_means, orthonormalize_zero_mean, weighted_cross, DiscreteMeasure, StochasticBasis, TOL_ORTHO,
};

/// Relative size below which a covariance eigenvalue counts as zero.
const KL_EIGEN_TOL: f64 = 1e-12;

/// Dual-DO state: orthonormal zero-mean stochastic modes, free deterministic
/// modes (which may be linearly dependent).
#[derive(Debug, Clone, PartialEq)]
pub struct DlrState {
    mean: FeFunction,
    modes: DMatrix<f64>,
    basis: StochasticBasis,
    time: f64,
}

impl DlrState {
    /// Validates dimensions and the orthonormal, zero-mean basis invariants.
    pub fn new(
        mu: &DiscreteMeasure,
        mean: FeFunction,
        modes: DMatrix<f64>,
        basis: StochasticBasis,
        time: f64,
    ) -> Result<Self> {
        if basis.measure_id() != mu.id() {
            return Err(DlrError::MeasureMismatch);
        }
        check_dim("deterministic modes (dofs)", mean.coeffs().len(), modes.nrows())?;
        check_dim("rank", modes.ncols(), basis.rank())?;
        let dev = basis.orthonormality_defect(mu)?;
        if dev > TOL_ORTHO {
            return Err(DlrError::NotOrthonormal(dev));
        }
        Ok(Self {
            mean,
            modes,
            basis,
            time,
        })
    }

    /// Zero function with `r` (zero) deterministic modes and a seeded basis.
    pub fn zero(dofs: usize, mu: &DiscreteMeasure, r: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            mean: FeFunction::new(DVector::zeros(dofs)),
            modes: DMatrix::zeros(dofs, r),
            basis: StochasticBasis::random_orthonormal(mu, r, seed)?,
            time: 0.0,
        })
    }

    pub fn mean(&self) -> &FeFunction {
        &self.mean
    }

    /// Deterministic modes as the columns of a `dofs × R` matrix.
    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> FeFunction {
        FeFunction::new(self.modes.column(j).into_owned())
    }

    pub fn basis(&self) -> &StochasticBasis {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn dof_count(&self) -> usize {
        self.mean.coeffs().len()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite()
            && self.modes.iter().all(|v| v.is_finite())
            && self.basis.values().iter().all(|v| v.is_finite())
    }

    /// `ū + Σⱼ Uⱼ Yⱼ(ω_k)`.
    pub fn evaluate(&self, k: usize) -> Result<FeFunction> {
        let len = self.basis.values().nrows();
        if k >= len {
            return Err(DlrError::IndexOutOfRange { index: k, len });
        }
        let y = self.basis.values().row(k).transpose();
        Ok(FeFunction::new(self.mean.coeffs() + &self.modes * y))
    }

    /// All samples at once, as a `dofs × N̂` matrix.
    pub fn samples(&self) -> DMatrix<f64> {
        let mut out = &self.modes * self.basis.values().transpose();
        for mut col in out.column_iter_mut() {
            col += self.mean.coeffs();
        }
        out
    }

    /// `‖u‖_{H,L²_ρ̂}`.
    pub fn norm_h(&self, ops: &OperatorMatrices, mu: &DiscreteMeasure) -> Result<f64> {
        let ones = DVector::from_element(mu.len(), 1.0);
        Ok(self.weighted_quadratic(mu, &ops.mass, &ones)?.max(0.0).sqrt())
    }

    /// `‖u‖_{V,L²_ρ̂}` (Laplace seminorm).
    pub fn norm_v(&self, ops: &OperatorMatrices, mu: &DiscreteMeasure) -> Result<f64> {
        let ones = DVector::from_element(mu.len(), 1.0);
        Ok(self.weighted_quadratic(mu, &ops.stiff_laplace, &ones)?.max(0.0).sqrt())
    }

    /// `‖u‖_{L,ρ̂}`, assembled from moments of the stochastic modes.
    pub fn norm_energy(&self, ops: &OperatorMatrices, mu: &DiscreteMeasure) -> Result<f64> {
        check_dim("coefficient terms", mu.dim(), ops.stiff_terms.len())?;
        let ones = DVector::from_element(mu.len(), 1.0);
        let mut acc = self.weighted_quadratic(mu, &ops.stiff_mean, &ones)?;
        for (m, a) in ops.stiff_terms.iter().enumerate() {
            acc += self.weighted_quadratic(mu, a, &mu.coordinate(m).to_vector())?;
        }
        Ok(acc.max(0.0).sqrt())
    }

    /// `E[c · (ū + U y)ᵀ A (ū + U y)]` for a per-sample weight `c`.
    fn weighted_quadratic(&self, mu: &DiscreteMeasure, a: &CsrMatrix, c: &DVector<f64>) -> Result<f64> {
        if self.basis.measure_id() != mu.id() {
            return Err(DlrError::MeasureMismatch);
        }
        let y = self.basis.values();
        let ubar = self.mean.coeffs();
        let ec = mu.mean_of(c.as_slice());
        let cy = scale_rows(y, c);
        let ecy = column_means(mu, &cy);
        let ecyy = weighted_cross(mu, &cy, y);
        let au = a.mul_vec(ubar);
        let aq = a.mul_mat(&self.modes);
        let uqu = self.modes.transpose() * &aq;
        Ok(ec * ubar.dot(&au) + 2.0 * (aq.transpose() * ubar).dot(&ecy) + uqu.component_mul(&ecyy).sum())
    }
}

pub(crate) fn scale_rows(y: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let mut out = y.clone();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= c[k];
    }
    out
}

/// `M̃ = ⟨Uᵀ, U⟩_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> DVector<f64> {
        sorted_symmetric_eigen(&self.entries).0
    }

    /// Smallest singular value (`0` for an empty matrix).
    pub fn min_singular_value(&self) -> f64 {
        let ev = self.eigenvalues();
        if ev.is_empty() {
            return 0.0;
        }
        ev.min().max(0.0)
    }

    /// Number of eigenvalues above `ε·σ₁·R`.
    pub fn effective_rank(&self, rank_tol_factor: f64) -> usize {
        let ev = self.eigenvalues();
        let Some(&top) = ev.iter().next() else { return 0 };
        let thr = rank_tol_factor * top * ev.len() as f64;
        ev.iter().filter(|&&l| l > thr && l > 0.0).count()
    }
}

pub fn gram(ops: &OperatorMatrices, modes: &DMatrix<f64>) -> Result<GramMatrix> {
    check_dim("deterministic modes (dofs)", ops.dof_count(), modes.nrows())?;
    let mu_u = ops.mass.mul_mat(modes);
    let g = modes.transpose() * mu_u;
    Ok(GramMatrix {
        entries: (&g + g.transpose()) * 0.5,
    })
}

/// Outcome of [`kl_initialize`].
#[derive(Debug, Clone)]
pub struct KlExpansion {
    pub state: DlrState,
    /// Singular values `σᵢ` of the weighted snapshot operator, decreasing.
    pub singular_values: Vec<f64>,
    /// Number of modes backed by nonzero covariance eigenvalues.
    pub numerical_rank: usize,
}

impl KlExpansion {
    pub fn is_rank_deficient(&self) -> bool {
        self.numerical_rank < self.state.rank()
    }
}

/// Truncated Karhunen–Loève expansion of per-sample data (`dofs × N̂`) in the
/// `H` inner product, by the method of snapshots.
///
/// Missing modes are padded with zero deterministic modes and a seeded
/// zero-mean orthonormal completion of the stochastic basis.
pub fn kl_initialize(
    ops: &OperatorMatrices,
    mu: &DiscreteMeasure,
    u0: &DMatrix<f64>,
    r: usize,
    seed: u64,
) -> Result<KlExpansion> {
    let n = mu.len();
    check_dim("initial samples (dofs)", ops.dof_count(), u0.nrows())?;
    check_dim("initial samples (points)", n, u0.ncols())?;
    if r >= n || r > ops.dof_count() {
        return Err(DlrError::InvalidArgument(format!(
            "rank R = {r} must satisfy R < N̂ = {n} and R <= dofs = {}",
            ops.dof_count()
        )));
    }
    let mean: DVector<f64> = u0 * DVector::from_column_slice(mu.weights());
    let mut fluct = u0.clone();
    for mut col in fluct.column_iter_mut() {
        col -= &mean;
    }
    let sqrt_w = DVector::from_iterator(n, mu.weights().iter().map(|w| w.sqrt()));
    let mz = ops.mass.mul_mat(&fluct);
    let mut g = fluct.transpose() * mz;
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] *= sqrt_w[i] * sqrt_w[j];
        }
    }
    let g = (&g + g.transpose()) * 0.5;
    let (evals, evecs) = sorted_symmetric_eigen(&g);
    let top = evals.iter().copied().fold(0.0_f64, f64::max);
    // fluctuations at rounding level of the data count as none
    let data_scale: f64 = (0..n)
        .map(|k| mu.weights()[k] * ops.mass.bilinear(u0.column(k).as_slice(), u0.column(k).as_slice()))
        .sum();
    let floor = (KL_EIGEN_TOL * top).max(1e-26 * data_scale);
    let singular_values: Vec<f64> = evals.iter().map(|&l| l.max(0.0).sqrt()).collect();

    let mut kept = 0;
    let mut y = DMatrix::zeros(n, r);
    for i in 0..r {
        if !(evals[i] > floor) || top == 0.0 {
            break;
        }
        for k in 0..n {
            y[(k, i)] = evecs[(k, i)] / sqrt_w[k];
        }
        kept += 1;
    }
    let f = orthonormalize_zero_mean(mu, &y, false, 1e-10, seed);
    let y = f.q;
    let mut modes = fluct * scale_rows(&y, &DVector::from_column_slice(mu.weights()));
    for i in kept..r {
        modes.column_mut(i).fill(0.0);
    }

    let mut yv = y;
    for i in 0..r {
        let col = modes.column(i);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            modes.column_mut(i).neg_mut();
            yv.column_mut(i).neg_mut();
        }
    }
    let basis = StochasticBasis::from_matrix(mu, yv)?;
    let state = DlrState::new(mu, FeFunction::new(mean), modes, basis, 0.0)?;
    Ok(KlExpansion {
        state,
        singular_values,
        numerical_rank: kept,
    })
}

/// Result of [`reorthonormalize`].
#[derive(Debug, Clone)]
pub struct Reorthonormalized {
    pub state: DlrState,
    /// Set when `Ỹ` had dependent columns and the basis was completed.
    pub completed: bool,
}

/// Rewrites `ū + Ũ Ỹᵀ` with an orthonormal basis: `Ỹ = Q·T`, `U = Ũ·Tᵀ`.
pub fn reorthonormalize(
    mu: &DiscreteMeasure,
    mean: FeFunction,
    raw_modes: &DMatrix<f64>,
    raw_basis: &DMatrix<f64>,
    time: f64,
    seed: u64,
) -> Result<Reorthonormalized> {
    check_dim("raw basis (points)", mu.len(), raw_basis.nrows())?;
    check_dim("raw rank", raw_modes.ncols(), raw_basis.ncols())?;
    check_dim("raw modes (dofs)", mean.coeffs().len(), raw_modes.nrows())?;
    // the update is zero-mean in exact arithmetic; drop the rounding drift
    // rounding-level means of Ỹ are dropped along with the constants
    let f = orthonormalize_zero_mean(mu, raw_basis, false, 1e-12, seed);
    let modes = raw_modes * f.t.transpose();
    let basis = StochasticBasis::from_matrix(mu, f.q)?;
    let completed = f.rank < raw_basis.ncols();
    let state = DlrState::new(mu, mean, modes, basis, time)?;
    Ok(Reorthonormalized { state, completed })
}

/// The three discrete DO diagnostics of a raw stochastic update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoDiagnostics {
    /// `max |⟨Ỹᵢ − Yᵢ, Yⱼ⟩|`.
    pub do_condition: f64,
    /// `max |E[Ỹⱼ]|`.
    pub mean_defect: f64,
    /// `‖⟨Ỹᵀ, Y⟩ − I‖_max`.
    pub identity_defect: f64,
}

impl DoDiagnostics {
    pub fn worst(&self) -> f64 {
        self.do_condition.max(self.mean_defect).max(self.identity_defect)
    }
}

pub fn do_residual(
    mu: &DiscreteMeasure,
    y_old: &StochasticBasis,
    y_tilde: &DMatrix<f64>,
) -> Result<DoDiagnostics> {
    if y_old.measure_id() != mu.id() {
        return Err(DlrError::MeasureMismatch);
    }
    check_dim("raw basis (points)", mu.len(), y_tilde.nrows())?;
    check_dim("raw basis (rank)", y_old.rank(), y_tilde.ncols())?;
    let r = y_old.rank();
    let diff = y_tilde - y_old.values();
    let cross = weighted_cross(mu, &diff, y_old.values());
    let pairing = weighted_cross(mu, y_tilde, y_old.values());
    let means = column_means(mu, y_tilde);
    Ok(DoDiagnostics {
        do_condition: cross.amax(),
        mean_defect: means.amax(),
        identity_defect: (pairing - DMatrix::identity(r, r)).amax(),
    })
}

/// Maximum residual of the discrete variational formulation together with
/// the size of its largest contributing term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationalResidual {
    pub max_abs: f64,
    pub scale: f64,
}

impl VariationalResidual {
    pub fn relative(&self) -> f64 {
        self.max_abs / self.scale
    }
}

/// Tests `M(u^{n+1} − u^n)/Δt + L − f` against `φᵢ`, `φᵢ Yⱼⁿ` and
/// `Ũⱼ w` for a seeded random zero-mean complement `w` of `span Yⁿ`.
#[allow(clippy::too_many_arguments)]
pub fn variational_residual(
    model: &HeatModel,
    state_n: &DlrState,
    state_np1: &DlrState,
    raw_modes: &DMatrix<f64>,
    scheme: Scheme,
    forcing_rule: ForcingRule,
    dt: f64,
    seed: u64,
) -> Result<VariationalResidual> {
    let mu = model.measure();
    let ops = model.ops();
    let xn = state_n.samples();
    let xn1 = state_np1.samples();
    check_dim("state samples", xn.ncols(), xn1.ncols())?;
    check_dim("raw rank", state_n.rank(), raw_modes.ncols())?;
    let n = mu.len();

    let mass_term = ops.mass.mul_mat(&(&xn1 - &xn)) / dt;
    let mut op_term = DMatrix::zeros(xn.nrows(), n);
    let a_det = model.deterministic_stiffness();
    let shift = model.mean_parameters();
    for k in 0..n {
        let p = mu.point(k);
        let col = match scheme {
            Scheme::Explicit => ops.apply_stiffness_at(p, &xn.column(k).into_owned()),
            Scheme::Implicit => ops.apply_stiffness_at(p, &xn1.column(k).into_owned()),
            Scheme::SemiImplicit => {
                let fluct: Vec<f64> = p.iter().zip(shift).map(|(a, b)| a - b).collect();
                let mut s = a_det.mul_vec(&xn1.column(k).into_owned());
                let x = xn.column(k).into_owned();
                for (m, z) in fluct.iter().enumerate() {
                    s.axpy(*z, &ops.stiff_terms[m].mul_vec(&x), 1.0);
                }
                s
            }
        };
        op_term.set_column(k, &col);
    }
    let t_force = match forcing_rule {
        ForcingRule::Left => state_n.time(),
        ForcingRule::Right => state_n.time() + dt,
    };
    let force_term = model.forcing_samples(t_force);

    let y = state_n.basis().values();
    let r = state_n.rank();
    let extra = (2 * r).min(n.saturating_sub(1 + r));
    let complement = if extra > 0 {
        let mut seedmat = DMatrix::zeros(n, r + extra);
        seedmat.columns_mut(0, r).copy_from(y);
        let f = orthonormalize_zero_mean(mu, &seedmat, false, 1e-12, seed);
        f.q.columns(r, extra).into_owned()
    } else {
        DMatrix::zeros(n, 0)
    };
    let weights = DVector::from_column_slice(mu.weights());
    let tests = |field: &DMatrix<f64>| -> f64 {
        let e = field * &weights;
        let ey = field * scale_rows(y, &weights);
        let ew = raw_modes.transpose() * (field * scale_rows(&complement, &weights));
        e.amax().max(ey.amax()).max(ew.amax())
    };
    let mut residual = &mass_term + &op_term;
    if let Some(f) = &force_term {
        residual -= f;
    }
    let mut scale = tests(&mass_term).max(tests(&op_term)).max(1.0);
    if let Some(f) = &force_term {
        scale = scale.max(tests(f));
    }
    Ok(VariationalResidual {
        max_abs: tests(&residual),
        scale,
    })
}

/// Bi-orthogonal form `u = ū + U S Vᵀ` with `U` orthonormal in `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdoState {
    mean: FeFunction,
    u_on: DMatrix<f64>,
    s: DMatrix<f64>,
    v_on: StochasticBasis,
    time: f64,
}

impl DdoState {
    pub fn new(
        ops: &OperatorMatrices,
        mu: &DiscreteMeasure,
        mean: FeFunction,
        u_on: DMatrix<f64>,
        s: DMatrix<f64>,
        v_on: StochasticBasis,
        time: f64,
    ) -> Result<Self> {
        check_dim("DDO modes (dofs)", mean.coeffs().len(), u_on.nrows())?;
        check_dim("DDO core rows", u_on.ncols(), s.nrows())?;
        check_dim("DDO core columns", v_on.rank(), s.ncols())?;
        let g = gram(ops, &u_on)?;
        let r = u_on.ncols();
        let dev = (g.entries() - DMatrix::identity(r, r)).amax();
        if dev > TOL_ORTHO {
            return Err(DlrError::NotOrthonormal(dev));
        }
        let dev = v_on.orthonormality_defect(mu)?;
        if dev > TOL_ORTHO {
            return Err(DlrError::NotOrthonormal(dev));
        }
        Ok(Self {
            mean,
            u_on,
            s,
            v_on,
            time,
        })
    }

    pub fn mean(&self) -> &FeFunction {
        &self.mean
    }

    pub fn u_on(&self) -> &DMatrix<f64> {
        &self.u_on
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn v_on(&self) -> &StochasticBasis {
        &self.v_on
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }
}

/// Seeded stream of uniform random vectors of length `n`.
pub(crate) fn vector_source(n: usize, seed: u64) -> impl FnMut() -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// `U = Q·T` in the mass inner product, so `U Yᵀ = Q (T) Yᵀ`.
pub fn to_ddo(ops: &OperatorMatrices, mu: &DiscreteMeasure, state: &DlrState, seed: u64) -> Result<DdoState> {
    let mut src = vector_source(state.dof_count(), seed);
    let f = gram_schmidt(state.modes(), &ops.mass, true, 1e-12, &mut src);
    DdoState::new(
        ops,
        mu,
        state.mean.clone(),
        f.q,
        f.t,
        state.basis.clone(),
        state.time,
    )
}

pub fn from_ddo(mu: &DiscreteMeasure, d: &DdoState) -> Result<DlrState> {
    DlrState::new(
        mu,
        d.mean.clone(),
        &d.u_on * &d.s,
        d.v_on.clone(),
        d.time,
    )
}

/// JSON checkpoint of a state together with the discretization it lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub n_per_side: usize,
    pub measure_points: Vec<Vec<f64>>,
    pub measure_weights: Vec<f64>,
    pub time: f64,
    pub mean: Vec<f64>,
    /// One entry per deterministic mode.
    pub modes: Vec<Vec<f64>>,
    /// One entry per stochastic mode, values at the measure points.
    pub basis: Vec<Vec<f64>>,
}

impl StateSnapshot {
    pub fn capture(space: &FeSpace, mu: &DiscreteMeasure, state: &DlrState) -> Self {
        Self {
            n_per_side: space.mesh().n_per_side(),
            measure_points: mu.points().to_vec(),
            measure_weights: mu.weights().to_vec(),
            time: state.time,
            mean: state.mean.coeffs().iter().copied().collect(),
            modes: state.modes.column_iter().map(|c| c.iter().copied().collect()).collect(),
            basis: state
                .basis
                .values()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }

    /// Rebuilds space, measure and state. The measure gets a fresh identity.
    pub fn restore(&self) -> Result<(FeSpace, DiscreteMeasure, DlrState)> {
        let space = build_space(self.n_per_side)?;
        let dim = self.measure_points.first().map_or(0, |p| p.len());
        let mu = DiscreteMeasure::new(dim, self.measure_points.clone(), self.measure_weights.clone())?;
        let dofs = space.dof_count();
        check_dim("snapshot mean", dofs, self.mean.len())?;
        check_dim("snapshot rank", self.modes.len(), self.basis.len())?;
        let r = self.modes.len();
        let mut modes = DMatrix::zeros(dofs, r);
        let mut basis = DMatrix::zeros(mu.len(), r);
        for j in 0..r {
            check_dim("snapshot mode", dofs, self.modes[j].len())?;
            check_dim("snapshot basis column", mu.len(), self.basis[j].len())?;
            modes.set_column(j, &DVector::from_column_slice(&self.modes[j]));
            basis.set_column(j, &DVector::from_column_slice(&self.basis[j]));
        }
        let basis = StochasticBasis::from_matrix(&mu, basis)?;
        let state = DlrState::new(
            &mu,
            FeFunction::new(DVector::from_column_slice(&self.mean)),
            modes,
            basis,
            self.time,
        )?;
        Ok((space, mu, state))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot contains only finite-size plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| DlrError::InvalidArgument(format!("snapshot: {e}")))
    }
}
