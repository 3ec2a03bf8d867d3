use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DlrError, Result};
use crate::linalg::sorted_symmetric_eigen;
use crate::stochastic::{DiscreteMeasure, StochasticBasis};

/// Relative kernel component of the right-hand side tolerated before the
/// system is reported as inconsistent.
const CONSISTENCY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdatePath {
    Cholesky,
    /// Full-rank non-symmetric system, solved through its SVD.
    Svd,
    /// Minimal-norm solution through the eigen-decomposition of `B`.
    PseudoInverse { rank: usize },
}

/// Structure of the update matrix `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Symmetric positive semi-definite: eigen-decomposition and Cholesky.
    Symmetric,
    /// Anything else: SVD.
    General,
}

#[derive(Debug, Clone)]
pub struct StochasticUpdate {
    /// Raw stochastic modes `Ỹ = Yⁿ + Δ` (`N̂ × R`).
    pub y_tilde: DMatrix<f64>,
    pub path: UpdatePath,
    /// `max |v·Δ_k|` over kernel directions `v` of `B`.
    pub kernel_orthogonality: f64,
    /// Relative size of the right-hand side inside the kernel of `B`.
    pub kernel_residual: f64,
}

/// Solves `B Δ_kᵀ = rhs_k` for every sample and returns `Yⁿ + Δ`.
///
/// When the smallest singular value of `B` is at most `ε·σ₁·R` the
/// minimal-norm solution is used, so the increment avoids `ker B`. A
/// right-hand side with a visible component in `ker Bᵀ` is rejected.
pub fn solve_stochastic_update(
    mu: &DiscreteMeasure,
    b: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    kind: MatrixKind,
    y_n: &StochasticBasis,
    rank_tol_factor: f64,
) -> Result<StochasticUpdate> {
    let update = least_squares_update(mu, b, rhs, kind, y_n, rank_tol_factor)?;
    if update.kernel_residual > CONSISTENCY_TOL {
        return Err(DlrError::InconsistentSystem(update.kernel_residual));
    }
    Ok(update)
}

/// As [`solve_stochastic_update`], but a right-hand side component inside
/// the numerical kernel is dropped silently (reported in the diagnostics).
pub(crate) fn least_squares_update(
    mu: &DiscreteMeasure,
    b: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    kind: MatrixKind,
    y_n: &StochasticBasis,
    rank_tol_factor: f64,
) -> Result<StochasticUpdate> {
    let r = y_n.rank();
    if y_n.measure_id() != mu.id() {
        return Err(DlrError::MeasureMismatch);
    }
    check_dim("update matrix rows", r, b.nrows())?;
    check_dim("update matrix columns", r, b.ncols())?;
    check_dim("update rhs rows", r, rhs.nrows())?;
    check_dim("update rhs columns", mu.len(), rhs.ncols())?;
    if r == 0 {
        return Ok(StochasticUpdate {
            y_tilde: y_n.values().clone(),
            path: UpdatePath::Cholesky,
            kernel_orthogonality: 0.0,
            kernel_residual: 0.0,
        });
    }
    if b.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(DlrError::NonFinite("stochastic update"));
    }
    let solved = match kind {
        MatrixKind::Symmetric => symmetric_solve(b, rhs, rank_tol_factor)?,
        MatrixKind::General => general_solve(b, rhs, rank_tol_factor)?,
    };
    let Solved {
        delta,
        path,
        kernel_orthogonality,
        kernel_residual,
    } = solved;
    Ok(StochasticUpdate {
        y_tilde: y_n.values() + delta.transpose(),
        path,
        kernel_orthogonality,
        kernel_residual,
    })
}

struct Solved {
    delta: DMatrix<f64>,
    path: UpdatePath,
    kernel_orthogonality: f64,
    kernel_residual: f64,
}

fn kernel_metrics(left_ker: &DMatrix<f64>, right_ker: &DMatrix<f64>, rhs: &DMatrix<f64>, delta: &DMatrix<f64>) -> (f64, f64) {
    if left_ker.ncols() == 0 {
        return (0.0, 0.0);
    }
    let scale = rhs.amax();
    let res = if scale > 0.0 { (left_ker.transpose() * rhs).amax() / scale } else { 0.0 };
    ((right_ker.transpose() * delta).amax(), res)
}

fn symmetric_solve(b: &DMatrix<f64>, rhs: &DMatrix<f64>, eps: f64) -> Result<Solved> {
    let r = b.nrows();
    let sym = (b + b.transpose()) * 0.5;
    let (evals, evecs) = sorted_symmetric_eigen(&sym);
    let threshold = eps * evals[0].max(0.0) * r as f64;
    let rank = evals.iter().filter(|&&l| l > threshold && l > 0.0).count();
    let (delta, path) = if rank == r {
        let chol = sym.cholesky().ok_or(DlrError::NotPositiveDefinite("stochastic update matrix"))?;
        (chol.solve(rhs), UpdatePath::Cholesky)
    } else {
        let range = evecs.columns(0, rank);
        let inv = DMatrix::from_diagonal(&evals.rows(0, rank).map(|l| 1.0 / l));
        (range * (inv * (range.transpose() * rhs)), UpdatePath::PseudoInverse { rank })
    };
    let ker = evecs.columns(rank, r - rank).into_owned();
    let (kernel_orthogonality, kernel_residual) = kernel_metrics(&ker, &ker, rhs, &delta);
    Ok(Solved {
        delta,
        path,
        kernel_orthogonality,
        kernel_residual,
    })
}

fn general_solve(b: &DMatrix<f64>, rhs: &DMatrix<f64>, eps: f64) -> Result<Solved> {
    let r = b.nrows();
    let svd = nalgebra::linalg::SVD::new(b.clone(), true, true);
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u.clone(), vt.clone()),
        _ => return Err(DlrError::Eigensolver("stochastic update SVD")),
    };
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(r, r, |i, j| u[(i, order[j])]);
    let v = DMatrix::from_fn(r, r, |i, j| vt[(order[j], i)]);
    let threshold = eps * sv[0] * r as f64;
    let rank = sv.iter().filter(|&&s| s > threshold && s > 0.0).count();
    let inv = DMatrix::from_diagonal(&DVector::from_iterator(rank, sv[..rank].iter().map(|s| 1.0 / s)));
    let delta = v.columns(0, rank) * (inv * (u.columns(0, rank).transpose() * rhs));
    let path = if rank == r { UpdatePath::Svd } else { UpdatePath::PseudoInverse { rank } };
    let (kernel_orthogonality, kernel_residual) = kernel_metrics(
        &u.columns(rank, r - rank).into_owned(),
        &v.columns(rank, r - rank).into_owned(),
        rhs,
        &delta,
    );
    Ok(Solved {
        delta,
        path,
        kernel_orthogonality,
        kernel_residual,
    })
}
