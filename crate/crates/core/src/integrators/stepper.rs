use nalgebra::{DMatrix, DVector};

use super::operator::{complement_rows, ExplicitOperator, Field};
use super::update::{least_squares_update, MatrixKind, StochasticUpdate, UpdatePath};
use super::{ForcingRule, HeatModel, ProjectionMode, Scheme, SchemeConfig};
use crate::dlr::{do_residual, reorthonormalize, DlrState, DoDiagnostics};
use crate::error::{check_dim, DlrError, Result};
use crate::fem::FeFunction;
use crate::linalg::{CsrMatrix, EnvelopeCholesky};
use crate::stochastic::{weighted_cross, DiscreteMeasure};

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub do_residual: DoDiagnostics,
    pub update_path: UpdatePath,
    pub kernel_orthogonality: f64,
    pub kernel_residual: f64,
    /// Set when reorthonormalization had to complete the basis.
    pub completed_basis: bool,
    /// Relative successive differences of the implicit fixed-point loop.
    pub fixed_point_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: DlrState,
    /// Deterministic modes `Ũ^{n+1}` before reorthonormalization.
    pub raw_modes: DMatrix<f64>,
    pub diagnostics: StepDiagnostics,
}

/// Staggered low-rank stepper with the factorization of `M + Δt·A_impl` cached across steps.
pub struct Stepper<'m> {
    model: &'m HeatModel,
    cfg: SchemeConfig,
    implicit_part: Option<&'m CsrMatrix>,
    lhs: EnvelopeCholesky,
}

pub(crate) struct RawStep {
    pub mean: DVector<f64>,
    pub modes: DMatrix<f64>,
    pub update: StochasticUpdate,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m HeatModel, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let ops = model.ops();
        let implicit_part = match cfg.scheme {
            Scheme::Explicit => None,
            Scheme::SemiImplicit | Scheme::Implicit => Some(model.deterministic_stiffness()),
        };
        let lhs = match implicit_part {
            None => EnvelopeCholesky::factor(&ops.mass)?,
            Some(a) => EnvelopeCholesky::factor(&CsrMatrix::linear_combination(&[(1.0, &ops.mass), (cfg.dt, a)]))?,
        };
        Ok(Self {
            model,
            cfg,
            implicit_part,
            lhs,
        })
    }

    pub fn model(&self) -> &HeatModel {
        self.model
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    fn mu(&self) -> &DiscreteMeasure {
        self.model.measure()
    }

    pub(crate) fn solve_lhs(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.lhs.solve_mat(rhs)
    }

    pub(crate) fn implicit_part(&self) -> Option<&CsrMatrix> {
        self.implicit_part
    }

    /// Scheme whose coordinate split applies to the explicit part.
    pub(crate) fn explicit_split(&self) -> Scheme {
        match self.cfg.scheme {
            Scheme::Explicit => Scheme::Explicit,
            _ => Scheme::SemiImplicit,
        }
    }

    pub(crate) fn forcing_time(&self, t: f64) -> f64 {
        match self.cfg.forcing_rule {
            ForcingRule::Left => t,
            ForcingRule::Right => t + self.cfg.dt,
        }
    }

    pub(crate) fn step_seed(&self, t: f64) -> u64 {
        self.cfg.seed ^ t.to_bits().rotate_left(17)
    }

    /// `(M + Δt A_I)` applied to a block.
    pub(crate) fn lhs_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.model.ops().mass.mul_mat(x);
        if let Some(a) = self.implicit_part {
            out += a.mul_mat(x) * self.cfg.dt;
        }
        out
    }

    /// Steps 1–3: mean, deterministic modes, and the raw stochastic update,
    /// with the explicit operator part evaluated at `field`.
    pub(crate) fn raw_step(&self, state: &DlrState, field: &Field, forcing: Option<&DMatrix<f64>>) -> Result<RawStep> {
        let mu = self.mu();
        let ops = self.model.ops();
        let dt = self.cfg.dt;
        let dofs = state.dof_count();
        let y = state.basis().values();
        let op = ExplicitOperator::new(self.model, self.explicit_split(), field);

        let mut rhs_mean = ops.mass.mul_vec(state.mean().coeffs()) - op.mean(dofs) * dt;
        let mut rhs_modes = ops.mass.mul_mat(state.modes()) - op.against(dofs, y) * dt;
        if let Some(f) = forcing {
            rhs_mean += f * DVector::from_column_slice(mu.weights()) * dt;
            rhs_modes += weighted_cross(mu, &f.transpose(), y) * dt;
        }
        let mean = self.lhs.solve(&rhs_mean);
        let modes = self.lhs.solve_mat(&rhs_modes);

        let test = match self.cfg.projection_mode {
            ProjectionMode::GaussSeidel => &modes,
            ProjectionMode::FullyExplicit => state.modes(),
        };
        let mut z = op.paired(test);
        if let Some(f) = forcing {
            z -= test.transpose() * f;
        }
        let rhs = complement_rows(mu, y, &z) * (-dt);
        // the increment multiplies Ũ in the time difference and the implicit part
        let b = test.transpose() * self.lhs_mul(&modes);
        let kind = match self.cfg.projection_mode {
            ProjectionMode::GaussSeidel => MatrixKind::Symmetric,
            ProjectionMode::FullyExplicit => MatrixKind::General,
        };
        let mut update = least_squares_update(mu, &b, &rhs, kind, state.basis(), self.cfg.rank_tol_factor)?;
        // the exact increment is orthogonal to 1 and Yⁿ; remove solver round-off
        let delta = &update.y_tilde - y;
        update.y_tilde = y + complement_rows(mu, y, &delta.transpose()).transpose();
        Ok(RawStep { mean, modes, update })
    }

    pub fn step(&self, state: &DlrState) -> Result<StepOutcome> {
        let mu = self.mu();
        check_dim("state dofs", self.model.space().dof_count(), state.dof_count())?;
        if state.basis().measure_id() != mu.id() {
            return Err(DlrError::MeasureMismatch);
        }
        let forcing = self.model.forcing_samples(self.forcing_time(state.time()));
        let field = Field {
            mean: state.mean().coeffs().clone(),
            modes: state.modes().clone(),
            basis: state.basis().values().clone(),
        };
        let (raw, history) = match self.cfg.scheme {
            Scheme::Explicit | Scheme::SemiImplicit => (self.raw_step(state, &field, forcing.as_ref())?, Vec::new()),
            Scheme::Implicit => self.fixed_point(state, field, forcing.as_ref())?,
        };
        if raw.mean.iter().chain(raw.modes.iter()).chain(raw.update.y_tilde.iter()).any(|v| !v.is_finite()) {
            return Err(DlrError::NonFinite("time step"));
        }
        let do_diag = do_residual(mu, state.basis(), &raw.update.y_tilde)?;
        let time = state.time() + self.cfg.dt;
        let re = reorthonormalize(
            mu,
            FeFunction::new(raw.mean),
            &raw.modes,
            &raw.update.y_tilde,
            time,
            self.step_seed(time),
        )?;
        Ok(StepOutcome {
            state: re.state,
            raw_modes: raw.modes,
            diagnostics: StepDiagnostics {
                do_residual: do_diag,
                update_path: raw.update.path,
                kernel_orthogonality: raw.update.kernel_orthogonality,
                kernel_residual: raw.update.kernel_residual,
                completed_basis: re.completed,
                fixed_point_history: history,
            },
        })
    }

    /// Picard iteration: the averaged operator acts on the new iterate, the
    /// fluctuating part on the previous one, starting from `uⁿ`.
    fn fixed_point(&self, state: &DlrState, mut field: Field, forcing: Option<&DMatrix<f64>>) -> Result<(RawStep, Vec<f64>)> {
        let mass = &self.model.ops().mass;
        let weights = self.mu().weights();
        let h_norm = |x: &DMatrix<f64>| -> f64 {
            (0..x.ncols())
                .map(|k| weights[k] * mass.bilinear(x.column(k).as_slice(), x.column(k).as_slice()))
                .sum::<f64>()
                .max(0.0)
                .sqrt()
        };
        let mut prev = field.samples();
        let mut history = Vec::new();
        for _ in 0..self.cfg.implicit_fp.max_iters {
            let raw = self.raw_step(state, &field, forcing)?;
            field = Field {
                mean: raw.mean.clone(),
                modes: raw.modes.clone(),
                basis: raw.update.y_tilde.clone(),
            };
            let next = field.samples();
            if next.iter().any(|v| !v.is_finite()) {
                return Err(DlrError::NonFinite("implicit fixed-point iterate"));
            }
            let diff = h_norm(&(&next - &prev));
            let norm = h_norm(&next);
            let rel = if diff == 0.0 { 0.0 } else { diff / norm };
            history.push(rel);
            if diff == 0.0 || diff <= self.cfg.implicit_fp.tol * norm {
                return Ok((raw, history));
            }
            prev = next;
        }
        Err(DlrError::FixedPointNotConverged { history })
    }
}

/// One staggered step without reusing factorizations.
pub fn step(state: &DlrState, model: &HeatModel, cfg: &SchemeConfig) -> Result<StepOutcome> {
    Stepper::new(model, *cfg)?.step(state)
}
