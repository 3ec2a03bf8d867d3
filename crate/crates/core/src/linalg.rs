//! Linear-algebra support: compressed sparse rows, an envelope Cholesky
//! factorization for the banded FE systems, and a pivoted Gram–Schmidt
//! factorization under an arbitrary inner product.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{DlrError, Result};

/// Square or rectangular matrix in compressed sparse row format.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn mul_slice(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        self.mul_slice(x.as_slice(), y.as_mut_slice());
        y
    }

    /// Column-by-column product `A * X`.
    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            for i in 0..self.nrows {
                let mut acc = 0.0;
                for p in self.indptr[i]..self.indptr[i + 1] {
                    acc += self.values[p] * xc[self.indices[p]];
                }
                yc[i] = acc;
            }
        }
        y
    }

    /// Bilinear form `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let mut row = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                row += self.values[p] * y[self.indices[p]];
            }
            acc += xi * row;
        }
        acc
    }

    /// `Σ cᵢ Aᵢ`. Matrices sharing a sparsity pattern are combined value-wise.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let (_, first) = terms.first().expect("at least one term");
        let same_pattern = terms
            .iter()
            .all(|(_, m)| m.indptr == first.indptr && m.indices == first.indices);
        if same_pattern {
            let mut values = vec![0.0; first.values.len()];
            for (c, m) in terms {
                for (acc, v) in values.iter_mut().zip(&m.values) {
                    *acc += c * v;
                }
            }
            return CsrMatrix {
                values,
                ..(*first).clone()
            };
        }
        let mut trip = Vec::new();
        for (c, m) in terms {
            for i in 0..m.nrows {
                for (j, v) in m.row(i) {
                    trip.push((i, j, c * v));
                }
            }
        }
        CsrMatrix::from_triplets(first.nrows, first.ncols, &trip)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Largest `|Aᵢⱼ − Aⱼᵢ|` relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

/// Cholesky factor stored over the row envelope (skyline) of an SPD matrix.
///
/// Fill-in is confined to the envelope, so for the lexicographically ordered
/// grids used here the cost is `O(n·b²)` to factor and `O(n·b)` per solve.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(DlrError::DimensionMismatch {
                context: "cholesky (square)",
                expected: n,
                found: a.ncols(),
            });
        }
        let mut first = vec![0usize; n];
        for (i, f) in first.iter_mut().enumerate() {
            *f = a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offsets[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[offsets[i] + (j - first[i])] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let kstart = fi.max(fj);
                let mut s = data[offsets[i] + (j - fi)];
                for k in kstart..j {
                    s -= data[offsets[i] + (k - fi)] * data[offsets[j] + (k - fj)];
                }
                if j < i {
                    let djj = data[offsets[j] + (j - fj)];
                    data[offsets[i] + (j - fi)] = s / djj;
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(DlrError::NotPositiveDefinite("sparse cholesky pivot"));
                    }
                    data[offsets[i] + (i - fi)] = s.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            first,
            offsets,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[self.offsets[i] + (j - self.first[i])]
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        // forward: L y = b
        for i in 0..self.n {
            let mut s = b[i];
            for k in self.first[i]..i {
                s -= self.l(i, k) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
        // backward: Lᵀ x = y
        for i in (0..self.n).rev() {
            let xi = b[i] / self.l(i, i);
            b[i] = xi;
            for k in self.first[i]..i {
                b[k] -= self.l(i, k) * xi;
            }
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for c in 0..x.ncols() {
            let mut col = x.column_mut(c);
            self.solve_in_place(col.as_mut_slice());
        }
        x
    }

    /// Applies `Lᵀ` to `x`, so that `‖Lᵀx‖² = xᵀAx`.
    pub fn mul_lt(&self, x: &[f64]) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            for k in self.first[i]..=i {
                y[k] += self.l(i, k) * x[i];
            }
        }
        y
    }
}

/// An inner product on coefficient vectors.
pub trait InnerProduct {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64;

    fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).max(0.0).sqrt()
    }
}

/// `⟨a, b⟩ = Σ wₖ aₖ bₖ`.
#[derive(Debug, Clone, Copy)]
pub struct Weighted<'a>(pub &'a [f64]);

impl InnerProduct for Weighted<'_> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }
}

impl InnerProduct for CsrMatrix {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.bilinear(a, b)
    }
}

/// Result of [`gram_schmidt`]: `A = Q·T` with `Q` orthonormal in the chosen
/// inner product. Columns of `Q` beyond `rank` come from the completion source
/// and have zero rows in `T`.
#[derive(Debug, Clone)]
pub struct OrthoFactor {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub rank: usize,
}

/// Orthogonalizes `v` against the given columns twice, returning the norm
/// before and after.
fn orthogonalize<I: InnerProduct>(v: &mut DVector<f64>, basis: &[DVector<f64>], ip: &I) -> (f64, f64) {
    let before = ip.norm(v.as_slice());
    let mut norm = before;
    for _ in 0..3 {
        let start = norm;
        for q in basis {
            let c = ip.dot(q.as_slice(), v.as_slice());
            v.axpy(-c, q, 1.0);
        }
        norm = ip.norm(v.as_slice());
        if norm > 0.5 * start {
            break;
        }
    }
    (before, norm)
}

/// Modified Gram–Schmidt with optional column pivoting under `ip`.
///
/// A column whose remaining norm drops below `rel_tol` times the largest
/// input column norm is treated as linearly dependent. Missing directions are
/// filled from `completion`, which must produce fresh candidate vectors.
pub fn gram_schmidt<I: InnerProduct>(
    a: &DMatrix<f64>,
    ip: &I,
    pivot: bool,
    rel_tol: f64,
    completion: &mut dyn FnMut() -> DVector<f64>,
) -> OrthoFactor {
    gram_schmidt_against(a, &[], ip, pivot, rel_tol, completion)
}

/// [`gram_schmidt`] that also keeps every column orthogonal to the
/// orthonormal vectors in `locked`. Components of `a` along `locked` are
/// discarded, so `A = Q·T` holds only for columns of `A` already orthogonal
/// to them.
pub fn gram_schmidt_against<I: InnerProduct>(
    a: &DMatrix<f64>,
    locked: &[DVector<f64>],
    ip: &I,
    pivot: bool,
    rel_tol: f64,
    completion: &mut dyn FnMut() -> DVector<f64>,
) -> OrthoFactor {
    let (n, r) = a.shape();
    let offset = locked.len();
    let mut cols: Vec<DVector<f64>> = (0..r).map(|j| a.column(j).into_owned()).collect();
    let scale = cols
        .iter()
        .map(|c| ip.norm(c.as_slice()))
        .fold(0.0_f64, f64::max);
    let threshold = rel_tol * scale;
    // pivoting must rank columns by what is left after the locked part
    if !locked.is_empty() {
        for c in &mut cols {
            orthogonalize(c, locked, ip);
        }
    }

    let mut t = DMatrix::zeros(r, r);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(r + offset);
    basis.extend(locked.iter().cloned());
    let mut remaining: Vec<usize> = (0..r).collect();

    while !remaining.is_empty() {
        let pos = if pivot {
            let mut best = 0;
            let mut best_norm = -1.0;
            for (p, &j) in remaining.iter().enumerate() {
                let nj = ip.norm(cols[j].as_slice());
                if nj > best_norm {
                    best_norm = nj;
                    best = p;
                }
            }
            best
        } else {
            0
        };
        let j = remaining.remove(pos);
        let mut v = cols[j].clone();
        // re-orthogonalize against the accepted basis, twice if cancellation was heavy
        let mut nv = ip.norm(v.as_slice());
        for _ in 0..2 {
            let start = nv;
            for (i, q) in basis.iter().enumerate() {
                let c = ip.dot(q.as_slice(), v.as_slice());
                v.axpy(-c, q, 1.0);
                if i >= offset {
                    t[(i - offset, j)] += c;
                }
            }
            nv = ip.norm(v.as_slice());
            if nv > 0.5 * start {
                break;
            }
        }
        if nv <= threshold || nv == 0.0 {
            if pivot {
                // every remaining column is at least as small
                remaining.insert(0, j);
                break;
            }
            continue;
        }
        let i = basis.len() - offset;
        v /= nv;
        t[(i, j)] = nv;
        for &k in &remaining {
            let c = ip.dot(v.as_slice(), cols[k].as_slice());
            cols[k].axpy(-c, &v, 1.0);
            t[(i, k)] += c;
        }
        basis.push(v);
    }

    let rank = basis.len() - offset;

    let mut attempts = 0;
    while basis.len() < r + offset {
        let mut v = completion();
        assert_eq!(v.len(), n, "completion vector has wrong length");
        let (before, after) = orthogonalize(&mut v, &basis, ip);
        attempts += 1;
        assert!(attempts < 100 * r + 100, "completion source keeps producing dependent vectors");
        if before == 0.0 || after <= 1e-8 * before {
            continue;
        }
        v /= after;
        basis.push(v);
    }

    let mut q = DMatrix::zeros(n, r);
    for (j, b) in basis[offset..].iter().enumerate() {
        q.set_column(j, b);
    }
    OrthoFactor {
        q,
        t,
        rank,
    }
}

/// Symmetric eigen-decomposition with eigenvalues sorted in decreasing order.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Eigenvalues of the pencil `K x = λ M x` (M SPD), sorted increasingly.
pub fn generalized_eigenvalues(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(DlrError::NotPositiveDefinite("generalized eigenproblem mass"))?;
    let l = chol.l();
    let linv_k = l
        .solve_lower_triangular(k)
        .ok_or(DlrError::Eigensolver("triangular solve"))?;
    let c = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or(DlrError::Eigensolver("triangular solve"))?;
    let (vals, _) = sorted_symmetric_eigen(&c);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(DlrError::Eigensolver("non-finite eigenvalue"));
    }
    let mut out: Vec<f64> = vals.iter().copied().collect();
    out.reverse();
    Ok(out)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}
