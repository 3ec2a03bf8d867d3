//! Discrete probability measures on Γ ⊂ ℝ^M and random variables over them.
//!
//! A random variable on a discrete measure with `N̂` points is a vector of
//! `N̂` values; expectations are weighted sums with a fixed summation order
//! so results are bit-reproducible.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, DlrError, Result};
use crate::linalg::{gram_schmidt_against, OrthoFactor, Weighted};

/// Default tolerance for orthonormality and zero-mean checks.
pub const TOL_ORTHO: f64 = 1e-10;

/// Largest tensor grid `gauss_legendre_measure` will build.
pub const MAX_TENSOR_POINTS: usize = 1 << 20;

static NEXT_MEASURE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MEASURE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Sample points `ωₖ ∈ ℝ^M` with positive weights `λₖ` summing to one.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    id: u64,
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl PartialEq for DiscreteMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.weights == other.weights
    }
}

impl DiscreteMeasure {
    /// Builds a measure from explicit points and weights.
    ///
    /// Weights must be positive and sum to one within `1e-14`.
    pub fn new(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(DlrError::InvalidArgument("measure dimension must be >= 1".into()));
        }
        if points.is_empty() {
            return Err(DlrError::InvalidArgument("measure needs at least one point".into()));
        }
        check_dim("measure weights", points.len(), weights.len())?;
        for p in &points {
            check_dim("measure point", dim, p.len())?;
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(DlrError::InvalidArgument("measure weights must be positive".into()));
        }
        let total = compensated_sum(&weights);
        if (total - 1.0).abs() > 1e-14 {
            return Err(DlrError::InvalidArgument(format!(
                "measure weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            id: fresh_id(),
            dim,
            points,
            weights,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Stochastic dimension `M`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points `N̂`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted `L²_ρ̂` inner product on raw value slices.
    pub fn inner(&self) -> Weighted<'_> {
        Weighted(&self.weights)
    }

    /// `E[g]` for a slice of per-sample values.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `⟨a, b⟩_{L²_ρ̂}` on raw value slices.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// Coordinate `m` of every point, as a random variable.
    pub fn coordinate(&self, m: usize) -> RandomScalar {
        RandomScalar {
            measure_id: self.id,
            values: self.points.iter().map(|p| p[m]).collect(),
        }
    }

    pub fn scalar(&self, values: Vec<f64>) -> Result<RandomScalar> {
        check_dim("random scalar", self.len(), values.len())?;
        Ok(RandomScalar {
            measure_id: self.id,
            values,
        })
    }

    pub fn constant(&self, c: f64) -> RandomScalar {
        RandomScalar {
            measure_id: self.id,
            values: vec![c; self.len()],
        }
    }

    pub fn random_scalar_fn(&self, f: impl Fn(&[f64]) -> f64) -> RandomScalar {
        RandomScalar {
            measure_id: self.id,
            values: self.points.iter().map(|p| f(p)).collect(),
        }
    }

    fn owns(&self, v: &RandomScalar) -> Result<()> {
        if v.measure_id != self.id {
            return Err(DlrError::MeasureMismatch);
        }
        check_dim("random scalar", self.len(), v.values.len())
    }

    /// Seeded stream of zero-mean random vectors, used to complete
    /// orthonormal stochastic bases.
    pub fn zero_mean_source(&self, seed: u64) -> impl FnMut() -> DVector<f64> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        move || {
            let v = DVector::from_fn(self.len(), |_, _| rng.random_range(-1.0..1.0));
            let mean = self.mean_of(v.as_slice());
            v.add_scalar(-mean)
        }
    }
}

/// Tensor-product Gauss–Legendre rule on `[-1, 1]^M` for the uniform density.
///
/// The `2^{-M}` density factor is absorbed into the weights, which sum to one.
pub fn gauss_legendre_measure(dim: usize, n_per_dim: usize) -> Result<DiscreteMeasure> {
    if dim == 0 || n_per_dim == 0 {
        return Err(DlrError::InvalidArgument(
            "Gauss-Legendre measure needs M >= 1 and n >= 1".into(),
        ));
    }
    let total = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(n_per_dim));
    let total = match total {
        Some(t) if t <= MAX_TENSOR_POINTS => t,
        _ => {
            return Err(DlrError::TensorGridTooLarge {
                per_dim: n_per_dim,
                dim,
                cap: MAX_TENSOR_POINTS,
            })
        }
    };
    let (nodes, w1) = gauss_legendre_1d(n_per_dim);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        points.push(idx.iter().map(|&i| nodes[i]).collect());
        weights.push(idx.iter().map(|&i| 0.5 * w1[i]).product::<f64>());
        // last coordinate varies fastest
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < n_per_dim {
                break;
            }
            idx[d] = 0;
        }
    }
    // renormalize to absorb rounding in the products
    let s: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= s;
    }
    DiscreteMeasure::new(dim, points, weights)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `N` iid uniform samples on `[-1, 1]^M` with equal weights.
///
/// The generator is ChaCha8 seeded from `seed`, so the measure is
/// reproducible across runs and platforms.
pub fn monte_carlo_measure(dim: usize, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if dim == 0 || n == 0 {
        return Err(DlrError::InvalidArgument(
            "Monte Carlo measure needs M >= 1 and N >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let weights = vec![1.0 / n as f64; n];
    DiscreteMeasure::new(dim, points, weights)
}

/// Neumaier summation, so the weight check does not degrade with `N`.
fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// A random variable on a discrete measure: one value per sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomScalar {
    measure_id: u64,
    values: Vec<f64>,
}

impl RandomScalar {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measure_id(&self) -> u64 {
        self.measure_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            measure_id: self.measure_id,
            values,
        }
    }
}

/// `E_ρ̂[v] = Σ λₖ vₖ`.
pub fn expect(mu: &DiscreteMeasure, v: &RandomScalar) -> Result<f64> {
    mu.owns(v)?;
    Ok(mu.mean_of(&v.values))
}

/// `v − E_ρ̂[v]`.
pub fn center(mu: &DiscreteMeasure, v: &RandomScalar) -> Result<RandomScalar> {
    let m = expect(mu, v)?;
    Ok(v.with_values(v.values.iter().map(|x| x - m).collect()))
}

/// `⟨a, b⟩_{L²_ρ̂}`.
pub fn inner(mu: &DiscreteMeasure, a: &RandomScalar, b: &RandomScalar) -> Result<f64> {
    mu.owns(a)?;
    mu.owns(b)?;
    Ok(mu.dot(&a.values, &b.values))
}

/// `R` stochastic modes stored column-wise as an `N̂ × R` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticBasis {
    measure_id: u64,
    values: DMatrix<f64>,
}

impl StochasticBasis {
    /// Wraps raw values without checking orthonormality.
    pub fn from_matrix(mu: &DiscreteMeasure, values: DMatrix<f64>) -> Result<Self> {
        check_dim("stochastic basis rows", mu.len(), values.nrows())?;
        Ok(Self {
            measure_id: mu.id,
            values,
        })
    }

    /// Wraps values and verifies the orthonormal, zero-mean invariants.
    pub fn orthonormal(mu: &DiscreteMeasure, values: DMatrix<f64>, tol: f64) -> Result<Self> {
        let basis = Self::from_matrix(mu, values)?;
        let dev = basis.orthonormality_defect(mu)?;
        if dev > tol {
            return Err(DlrError::NotOrthonormal(dev));
        }
        Ok(basis)
    }

    pub fn from_columns(mu: &DiscreteMeasure, columns: &[RandomScalar]) -> Result<Self> {
        let mut values = DMatrix::zeros(mu.len(), columns.len());
        for (j, c) in columns.iter().enumerate() {
            mu.owns(c)?;
            values.set_column(j, &c.to_vector());
        }
        Ok(Self {
            measure_id: mu.id,
            values,
        })
    }

    pub fn empty(mu: &DiscreteMeasure) -> Self {
        Self {
            measure_id: mu.id,
            values: DMatrix::zeros(mu.len(), 0),
        }
    }

    /// Seeded random orthonormal zero-mean basis with `r` columns.
    pub fn random_orthonormal(mu: &DiscreteMeasure, r: usize, seed: u64) -> Result<Self> {
        if r + 1 > mu.len() {
            return Err(DlrError::InvalidArgument(format!(
                "cannot build {r} zero-mean orthonormal modes on {} points",
                mu.len()
            )));
        }
        let f = orthonormalize_zero_mean(mu, &DMatrix::zeros(mu.len(), r), false, 0.0, seed);
        Ok(Self {
            measure_id: mu.id,
            values: f.q,
        })
    }

    pub fn rank(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn measure_id(&self) -> u64 {
        self.measure_id
    }

    pub fn column(&self, j: usize) -> RandomScalar {
        RandomScalar {
            measure_id: self.measure_id,
            values: self.values.column(j).iter().copied().collect(),
        }
    }

    fn check(&self, mu: &DiscreteMeasure) -> Result<()> {
        if self.measure_id != mu.id {
            return Err(DlrError::MeasureMismatch);
        }
        Ok(())
    }

    /// `⟨Yᵀ, Y⟩_{L²_ρ̂}` as an `R × R` matrix.
    pub fn gram(&self, mu: &DiscreteMeasure) -> Result<DMatrix<f64>> {
        self.check(mu)?;
        Ok(weighted_cross(mu, &self.values, &self.values))
    }

    /// Column means `E_ρ̂[Yⱼ]`.
    pub fn means(&self, mu: &DiscreteMeasure) -> Result<DVector<f64>> {
        self.check(mu)?;
        Ok(column_means(mu, &self.values))
    }

    /// `max(‖⟨Yᵀ,Y⟩ − I‖_max, max_j |E[Yⱼ]|)`.
    pub fn orthonormality_defect(&self, mu: &DiscreteMeasure) -> Result<f64> {
        let g = self.gram(mu)?;
        let r = g.nrows();
        let ortho = (g - DMatrix::identity(r, r)).amax();
        let mean = self.means(mu)?.amax();
        Ok(ortho.max(mean))
    }

    /// `⟨v, Yⱼ⟩` for every `j`.
    fn coefficients(&self, mu: &DiscreteMeasure, v: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.rank(),
            (0..self.rank()).map(|j| mu.dot(self.values.column(j).as_slice(), v)),
        )
    }
}

/// Weighted Gram–Schmidt of `a` (`N̂ × r`) that keeps every column orthogonal
/// to constants; components of `a` along the constants are dropped. Missing
/// directions are completed from a seeded zero-mean source.
pub(crate) fn orthonormalize_zero_mean(
    mu: &DiscreteMeasure,
    a: &DMatrix<f64>,
    pivot: bool,
    rel_tol: f64,
    seed: u64,
) -> OrthoFactor {
    let total: f64 = mu.weights().iter().sum();
    let ones = DVector::from_element(mu.len(), 1.0 / total.sqrt());
    let mut src = mu.zero_mean_source(seed);
    gram_schmidt_against(a, &[ones], &mu.inner(), pivot, rel_tol, &mut src)
}

/// `Σₖ λₖ a(ωₖ) b(ωₖ)ᵀ` for `N̂ × p` and `N̂ × q` sample matrices.
pub fn weighted_cross(mu: &DiscreteMeasure, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let w = mu.weights();
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for i in 0..a.ncols() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for k in 0..w.len() {
                acc += w[k] * a[(k, i)] * b[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Column means of an `N̂ × p` sample matrix.
pub fn column_means(mu: &DiscreteMeasure, a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.ncols(),
        (0..a.ncols()).map(|j| mu.mean_of(a.column(j).as_slice())),
    )
}

fn require_orthonormal(mu: &DiscreteMeasure, y: &StochasticBasis) -> Result<()> {
    let dev = y.orthonormality_defect(mu)?;
    // zero-mean is not part of the projection contract
    let g = y.gram(mu)?;
    let ortho = (g - DMatrix::identity(y.rank(), y.rank())).amax();
    if ortho > TOL_ORTHO {
        return Err(DlrError::NotOrthonormal(dev));
    }
    Ok(())
}

/// `P_Y[v] = Σⱼ ⟨v, Yⱼ⟩ Yⱼ`.
pub fn project_span(
    mu: &DiscreteMeasure,
    y: &StochasticBasis,
    v: &RandomScalar,
) -> Result<RandomScalar> {
    mu.owns(v)?;
    require_orthonormal(mu, y)?;
    let c = y.coefficients(mu, &v.values);
    let p = &y.values * c;
    Ok(v.with_values(p.iter().copied().collect()))
}

/// `P_Y^⊥[v] = v − P_Y[v]`.
pub fn project_complement(
    mu: &DiscreteMeasure,
    y: &StochasticBasis,
    v: &RandomScalar,
) -> Result<RandomScalar> {
    let p = project_span(mu, y, v)?;
    Ok(v.with_values(
        v.values
            .iter()
            .zip(&p.values)
            .map(|(a, b)| a - b)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_9x9_has_81_points() {
        let mu = gauss_legendre_measure(2, 9).unwrap();
        assert_eq!(mu.len(), 81);
        let s: f64 = mu.weights().iter().sum();
        assert!((s - 1.0).abs() <= 1e-14);
        assert!(mu.weights().iter().all(|&w| w > 0.0));
        assert!(mu.points().iter().flatten().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn single_point_rule_is_midpoint() {
        let mu = gauss_legendre_measure(1, 1).unwrap();
        assert_eq!(mu.points(), &[vec![0.0]]);
        assert_eq!(mu.weights(), &[1.0]);
    }

    #[test]
    fn three_point_rule_second_moment() {
        let mu = gauss_legendre_measure(1, 3).unwrap();
        let v = mu.random_scalar_fn(|p| p[0] * p[0]);
        let e = expect(&mu, &v).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-15);
        // exact up to degree 5: E[ξ⁴] = 1/5
        let v4 = mu.random_scalar_fn(|p| p[0].powi(4));
        assert!((expect(&mu, &v4).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn high_order_rule_matches_known_nodes() {
        let (x, w) = gauss_legendre_1d(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (_, w) = gauss_legendre_1d(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_cap_is_enforced() {
        assert!(matches!(
            gauss_legendre_measure(30, 9),
            Err(DlrError::TensorGridTooLarge { .. })
        ));
    }

    #[test]
    fn monte_carlo_weights_and_reproducibility() {
        let a = monte_carlo_measure(10, 50, 7).unwrap();
        assert_eq!(a.len(), 50);
        assert!(a.weights().iter().all(|&w| (w - 0.02).abs() < 1e-16));
        let b = monte_carlo_measure(10, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.id(), b.id());
        let c = monte_carlo_measure(10, 50, 8).unwrap();
        assert_ne!(a, c);
        let one = monte_carlo_measure(1, 1, 3).unwrap();
        assert_eq!(one.weights(), &[1.0]);
    }

    #[test]
    fn monte_carlo_mean_is_near_zero() {
        let mu = monte_carlo_measure(2, 10_000, 11).unwrap();
        let e = expect(&mu, &mu.coordinate(0)).unwrap();
        assert!(e.abs() <= 0.05, "E[ξ₁] = {e}");
    }

    #[test]
    fn expect_and_center_small_cases() {
        let mu = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let v = mu.scalar(vec![1.0, 3.0]).unwrap();
        assert_eq!(expect(&mu, &v).unwrap(), 2.0);
        let c = center(&mu, &v).unwrap();
        assert_eq!(c.values(), &[-1.0, 1.0]);
        let cc = center(&mu, &c).unwrap();
        assert_eq!(cc, c);
        assert_eq!(expect(&mu, &mu.constant(4.5)).unwrap(), 4.5);
    }

    #[test]
    fn measure_mismatch_is_detected() {
        let a = gauss_legendre_measure(1, 3).unwrap();
        let b = gauss_legendre_measure(1, 3).unwrap();
        let v = a.constant(1.0);
        assert_eq!(expect(&b, &v), Err(DlrError::MeasureMismatch));
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn orthonormal_basis_columns_are_centered_fixed_points() {
        let mu = gauss_legendre_measure(2, 5).unwrap();
        let y = StochasticBasis::random_orthonormal(&mu, 4, 3).unwrap();
        assert!(y.orthonormality_defect(&mu).unwrap() < 1e-13);
        for j in 0..4 {
            let yj = y.column(j);
            let c = center(&mu, &yj).unwrap();
            let d = c
                .values()
                .iter()
                .zip(yj.values())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn projections_on_own_span_and_complement() {
        let mu = gauss_legendre_measure(2, 4).unwrap();
        let y = StochasticBasis::random_orthonormal(&mu, 3, 1).unwrap();
        let y1 = y.column(0);
        let p = project_span(&mu, &y, &y1).unwrap();
        let q = project_complement(&mu, &y, &y1).unwrap();
        for k in 0..mu.len() {
            assert!((p.values()[k] - y1.values()[k]).abs() < 1e-13);
            assert!(q.values()[k].abs() < 1e-13);
        }
        // a vector orthogonal to span(Y) is left alone by P^⊥ and killed by P
        let w = StochasticBasis::random_orthonormal(&mu, 3, 99).unwrap().column(0);
        let w = project_complement(&mu, &y, &w).unwrap();
        let pw = project_span(&mu, &y, &w).unwrap();
        assert!(pw.values().iter().all(|x| x.abs() < 1e-13));
        let qw = project_complement(&mu, &y, &w).unwrap();
        for k in 0..mu.len() {
            assert!((qw.values()[k] - w.values()[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let mu = gauss_legendre_measure(1, 4).unwrap();
        let vals = DMatrix::from_element(4, 1, 2.0);
        let y = StochasticBasis::from_matrix(&mu, vals).unwrap();
        let v = mu.constant(1.0);
        assert!(matches!(
            project_span(&mu, &y, &v),
            Err(DlrError::NotOrthonormal(_))
        ));
    }
}
