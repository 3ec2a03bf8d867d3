#![allow(dead_code)]

use std::f64::consts::PI;

use dlr_core::dlr::DlrState;
use dlr_core::fem::{build_space, AffineDiffusion, FeFunction, FeSpace};
use dlr_core::integrators::HeatModel;
use dlr_core::stochastic::{gauss_legendre_measure, DiscreteMeasure, StochasticBasis};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Samples of `10 s₁ + 2 s₂ ξ₁ + 2 s₄ ξ₂ + 2 s₆ ξ₁²` with `s_c = sin(cπx)sin(cπy)`.
pub fn benchmark_samples(space: &FeSpace, mu: &DiscreteMeasure) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(space.dof_count(), mu.len());
    for k in 0..mu.len() {
        let xi = mu.point(k);
        let f = space.interpolate(|x| {
            let s = |c: f64| (c * PI * x[0]).sin() * (c * PI * x[1]).sin();
            10.0 * s(1.0) + 2.0 * s(2.0) * xi[0] + 2.0 * s(4.0) * xi[1] + 2.0 * s(6.0) * xi[0] * xi[0]
        });
        u.set_column(k, f.coeffs());
    }
    u
}

pub fn small_model(n: usize, gl: usize) -> HeatModel {
    let space = build_space(n).unwrap();
    let mu = gauss_legendre_measure(2, gl).unwrap();
    HeatModel::new(space, mu, AffineDiffusion::cosine_series(0.3, 2)).unwrap()
}

pub fn random_state(model: &HeatModel, r: usize, seed: u64) -> DlrState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dofs = model.space().dof_count();
    let mu = model.measure();
    let mean = DVector::from_fn(dofs, |_, _| rng.random_range(-1.0..1.0));
    let modes = DMatrix::from_fn(dofs, r, |_, _| rng.random_range(-1.0..1.0));
    let basis = StochasticBasis::random_orthonormal(mu, r, seed.wrapping_add(7)).unwrap();
    DlrState::new(mu, FeFunction::new(mean), modes, basis, 0.0).unwrap()
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(1e-300)
}
