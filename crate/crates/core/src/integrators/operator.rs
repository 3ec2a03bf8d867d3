//! Explicitly treated operator terms evaluated through moments of the
//! stochastic modes, so no per-sample stiffness products are needed.

use nalgebra::{DMatrix, DVector};

use super::{HeatModel, Scheme};
use crate::dlr::scale_rows;
use crate::linalg::CsrMatrix;
use crate::stochastic::{column_means, weighted_cross, DiscreteMeasure};

/// A field `ū + W Zᵀ` with arbitrary (not necessarily orthonormal) `Z`.
#[derive(Debug, Clone)]
pub(crate) struct Field {
    pub mean: DVector<f64>,
    pub modes: DMatrix<f64>,
    pub basis: DMatrix<f64>,
}

impl Field {
    pub fn samples(&self) -> DMatrix<f64> {
        let mut out = &self.modes * self.basis.transpose();
        for mut col in out.column_iter_mut() {
            col += &self.mean;
        }
        out
    }
}

/// `g_k = Σ_m e_km A_m w_k` with `A_0 = stiff_mean`, `A_m = stiff_terms[m-1]`
/// and coordinates `e_k` that depend on the scheme.
pub(crate) struct ExplicitOperator<'a> {
    mu: &'a DiscreteMeasure,
    coords: DMatrix<f64>,
    active: Vec<usize>,
    applied_mean: Vec<DVector<f64>>,
    applied_modes: Vec<DMatrix<f64>>,
    basis: &'a DMatrix<f64>,
}

/// `N̂ × (M+1)` table of coefficient coordinates `(1, ω_k)`, shifted by their
/// mean when the averaged part is treated implicitly.
fn coordinates(model: &HeatModel, scheme: Scheme) -> DMatrix<f64> {
    let mu = model.measure();
    let dim = mu.dim();
    let mut c = DMatrix::zeros(mu.len(), dim + 1);
    for k in 0..mu.len() {
        c[(k, 0)] = 1.0;
        for m in 0..dim {
            c[(k, m + 1)] = mu.point(k)[m];
        }
    }
    if scheme != Scheme::Explicit {
        c.column_mut(0).fill(0.0);
        for m in 0..dim {
            let shift = model.mean_parameters()[m];
            c.column_mut(m + 1).add_scalar_mut(-shift);
        }
    }
    c
}

impl<'a> ExplicitOperator<'a> {
    pub fn new(model: &'a HeatModel, scheme: Scheme, field: &'a Field) -> Self {
        let coords = coordinates(model, scheme);
        let ops = model.ops();
        let matrix = |m: usize| -> &CsrMatrix {
            if m == 0 {
                &ops.stiff_mean
            } else {
                &ops.stiff_terms[m - 1]
            }
        };
        let active: Vec<usize> = (0..coords.ncols())
            .filter(|&m| coords.column(m).iter().any(|&v| v != 0.0))
            .collect();
        let applied_mean = active.iter().map(|&m| matrix(m).mul_vec(&field.mean)).collect();
        let applied_modes = active.iter().map(|&m| matrix(m).mul_mat(&field.modes)).collect();
        Self {
            mu: model.measure(),
            coords,
            active,
            applied_mean,
            applied_modes,
            basis: &field.basis,
        }
    }

    fn coord(&self, i: usize) -> DVector<f64> {
        self.coords.column(self.active[i]).into_owned()
    }

    /// `E[g]`.
    pub fn mean(&self, dofs: usize) -> DVector<f64> {
        let mut out = DVector::zeros(dofs);
        for i in 0..self.active.len() {
            let e = self.coord(i);
            out.axpy(self.mu.mean_of(e.as_slice()), &self.applied_mean[i], 1.0);
            let ez = column_means(self.mu, &scale_rows(self.basis, &e));
            out += &self.applied_modes[i] * ez;
        }
        out
    }

    /// `E[g Yᵀ]` as a `dofs × R` matrix.
    pub fn against(&self, dofs: usize, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(dofs, y.ncols());
        for i in 0..self.active.len() {
            let e = self.coord(i);
            let ey = column_means(self.mu, &scale_rows(y, &e));
            out += &self.applied_mean[i] * ey.transpose();
            let ezy = weighted_cross(self.mu, &scale_rows(self.basis, &e), y);
            out += &self.applied_modes[i] * ezy;
        }
        out
    }

    /// `Tᵀ g_k` for every sample, as an `r × N̂` matrix.
    pub fn paired(&self, test: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.mu.len();
        let mut out = DMatrix::zeros(test.ncols(), n);
        let tt = test.transpose();
        for i in 0..self.active.len() {
            let p = &tt * &self.applied_mean[i];
            let w = &tt * &self.applied_modes[i];
            let wz = &w * self.basis.transpose();
            let m = self.active[i];
            for k in 0..n {
                let e = self.coords[(k, m)];
                if e != 0.0 {
                    let mut col = out.column_mut(k);
                    col.axpy(e, &p, 1.0);
                    col.axpy(e, &wz.column(k), 1.0);
                }
            }
        }
        out
    }
}

/// `E[v]` of an `r × N̂` per-sample matrix.
pub(crate) fn row_means(mu: &DiscreteMeasure, a: &DMatrix<f64>) -> DVector<f64> {
    a * DVector::from_column_slice(mu.weights())
}

/// Removes the components along `1` and the orthonormal zero-mean `y` from
/// each row of an `r × N̂` matrix.
pub(crate) fn complement_rows(mu: &DiscreteMeasure, y: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let at = a.transpose();
    let means = column_means(mu, &at);
    let coeff = weighted_cross(mu, y, &at);
    let mut out = at - y * coeff;
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out.transpose()
}
