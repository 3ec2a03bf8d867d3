//! Time integrators for the low-rank heat problem.

mod full_tensor;
mod operator;
mod splitting;
mod stepper;
mod update;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DlrError, Result};
use crate::fem::{assemble, AffineDiffusion, FeSpace, OperatorMatrices};
use crate::linalg::CsrMatrix;
use crate::stochastic::DiscreteMeasure;

pub use full_tensor::{full_tensor_step, FullTensorState, FullTensorStepper};
pub use splitting::projector_splitting_step;
pub use stepper::{step, StepDiagnostics, StepOutcome, Stepper};
pub use update::{solve_stochastic_update, MatrixKind, StochasticUpdate, UpdatePath};

/// How the diffusion operator is split between time levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    SemiImplicit,
    Implicit,
}

/// Time level at which the forcing is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingRule {
    /// `f(t_n)`.
    #[default]
    Left,
    /// `f(t_{n+1})`.
    Right,
}

/// Which deterministic modes the stochastic update is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// The freshly computed `Ũ^{n+1}`.
    #[default]
    GaussSeidel,
    /// The old modes `U^n`.
    FullyExplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub forcing_rule: ForcingRule,
    pub projection_mode: ProjectionMode,
    /// `ε` in the rank threshold `ε·σ₁·R`.
    pub rank_tol_factor: f64,
    pub implicit_fp: FixedPointConfig,
    /// Seed for basis completions.
    pub seed: u64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            forcing_rule: match scheme {
                Scheme::Implicit => ForcingRule::Right,
                _ => ForcingRule::Left,
            },
            projection_mode: ProjectionMode::GaussSeidel,
            rank_tol_factor: f64::EPSILON,
            implicit_fp: FixedPointConfig::default(),
            seed: 0,
        }
    }

    pub fn with_projection(mut self, mode: ProjectionMode) -> Self {
        self.projection_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(DlrError::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.rank_tol_factor > 0.0 && self.rank_tol_factor <= 1e-6) {
            return Err(DlrError::InvalidArgument(format!(
                "rank_tol_factor must lie in (0, 1e-6], got {}",
                self.rank_tol_factor
            )));
        }
        if self.implicit_fp.max_iters == 0 || !(self.implicit_fp.tol > 0.0) {
            return Err(DlrError::InvalidArgument(
                "implicit_fp needs max_iters >= 1 and tol > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Load vector `(f(t, ω_k), φᵢ)` for time `t` and sample index `k`.
pub type Forcing = Arc<dyn Fn(f64, usize) -> DVector<f64> + Send + Sync>;

/// The discrete random heat problem.
#[derive(Clone)]
pub struct HeatModel {
    space: FeSpace,
    mu: DiscreteMeasure,
    diff: AffineDiffusion,
    ops: OperatorMatrices,
    forcing: Option<Forcing>,
    mean_xi: Vec<f64>,
    a_det: CsrMatrix,
}

impl fmt::Debug for HeatModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeatModel")
            .field("dofs", &self.space.dof_count())
            .field("samples", &self.mu.len())
            .field("diff", &self.diff)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

impl HeatModel {
    pub fn new(space: FeSpace, mu: DiscreteMeasure, diff: AffineDiffusion) -> Result<Self> {
        check_dim("coefficient terms vs measure dimension", mu.dim(), diff.dim())?;
        let ops = assemble(&space, &diff)?;
        let mean_xi: Vec<f64> = (0..mu.dim())
            .map(|m| mu.mean_of(mu.coordinate(m).values()))
            .collect();
        let mut terms = vec![(1.0, &ops.stiff_mean)];
        terms.extend(mean_xi.iter().copied().zip(ops.stiff_terms.iter()));
        let a_det = CsrMatrix::linear_combination(&terms);
        Ok(Self {
            space,
            mu,
            diff,
            ops,
            forcing: None,
            mean_xi,
            a_det,
        })
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn diffusion(&self) -> &AffineDiffusion {
        &self.diff
    }

    pub fn ops(&self) -> &OperatorMatrices {
        &self.ops
    }

    pub fn is_forced(&self) -> bool {
        self.forcing.is_some()
    }

    /// `E_ρ̂[ξ]`.
    pub fn mean_parameters(&self) -> &[f64] {
        &self.mean_xi
    }

    /// Stiffness of the averaged coefficient `ā = E_ρ̂[a]`.
    pub fn deterministic_stiffness(&self) -> &CsrMatrix {
        &self.a_det
    }

    /// Per-sample load vectors at time `t` (`dofs × N̂`), or `None` when unforced.
    pub fn forcing_samples(&self, t: f64) -> Option<DMatrix<f64>> {
        let f = self.forcing.as_ref()?;
        let mut out = DMatrix::zeros(self.space.dof_count(), self.mu.len());
        for k in 0..self.mu.len() {
            out.set_column(k, &f(t, k));
        }
        Some(out)
    }
}
