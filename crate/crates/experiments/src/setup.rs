use std::f64::consts::PI;

use dlr_core::dlr::{kl_initialize, KlExpansion};
use dlr_core::fem::{build_space, AffineDiffusion, FeSpace};
use dlr_core::integrators::HeatModel;
use dlr_core::stochastic::{gauss_legendre_measure, monte_carlo_measure, DiscreteMeasure};
use nalgebra::DMatrix;

use crate::config::{ExperimentConfig, MeasureConfig};
use crate::error::{ExperimentError, Result};

/// Nodal samples of the benchmark initial condition
/// `10 s₁ + 2 s₂ ξ₁ + 2 s₄ ξ₂ + 2 s₆ ξ₁²`, `s_c(x) = sin(cπx₁) sin(cπx₂)`.
pub fn initial_condition(space: &FeSpace, mu: &DiscreteMeasure) -> Result<DMatrix<f64>> {
    if mu.dim() < 2 {
        return Err(ExperimentError::config("model.M", "the initial condition needs two parameters"));
    }
    let mut u = DMatrix::zeros(space.dof_count(), mu.len());
    for k in 0..mu.len() {
        let xi = mu.point(k);
        let f = space.interpolate(|x| {
            let s = |c: f64| (c * PI * x[0]).sin() * (c * PI * x[1]).sin();
            10.0 * s(1.0) + 2.0 * s(2.0) * xi[0] + 2.0 * s(4.0) * xi[1] + 2.0 * s(6.0) * xi[0] * xi[0]
        });
        u.set_column(k, f.coeffs());
    }
    Ok(u)
}

pub fn build_measure(cfg: &ExperimentConfig) -> Result<DiscreteMeasure> {
    let mu = match cfg.model.measure {
        MeasureConfig::Gl { n } => gauss_legendre_measure(cfg.model.m, n)
            .map_err(|e| ExperimentError::config("model.measure.n", e.to_string()))?,
        MeasureConfig::Mc { n, seed } => monte_carlo_measure(cfg.model.m, n, seed)?,
    };
    Ok(mu)
}

/// Heat model and KL-truncated initial state for a configuration.
pub struct Setup {
    pub model: HeatModel,
    pub initial: KlExpansion,
}

impl Setup {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let space = build_space(cfg.space.n_per_side)?;
        let mu = build_measure(cfg)?;
        let diff = AffineDiffusion::cosine_series(cfg.model.a0, cfg.model.m);
        let u0 = initial_condition(&space, &mu)?;
        let model = HeatModel::new(space, mu, diff)?;
        let initial = kl_initialize(model.ops(), model.measure(), &u0, cfg.dlr.rank, cfg.dlr.seed)?;
        Ok(Self { model, initial })
    }
}
