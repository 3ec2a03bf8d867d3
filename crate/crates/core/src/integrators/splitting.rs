use nalgebra::{DMatrix, DVector};

use super::operator::{row_means, ExplicitOperator, Field};
use super::{Scheme, Stepper};
use crate::dlr::{vector_source, DdoState};
use crate::error::{check_dim, DlrError, Result};
use crate::fem::FeFunction;
use crate::linalg::gram_schmidt;
use crate::stochastic::{orthonormalize_zero_mean, weighted_cross, StochasticBasis};

/// Relative column size below which the pivoted factorizations treat a
/// direction as absent and complete the basis.
const SPLIT_RANK_TOL: f64 = 1e-13;

/// One K–S–L projector-splitting step on the bi-orthogonal form.
///
/// Only the explicit and semi-implicit operator splits are supported.
pub fn projector_splitting_step(d: &DdoState, stepper: &Stepper<'_>) -> Result<DdoState> {
    let cfg = stepper.config();
    if cfg.scheme == Scheme::Implicit {
        return Err(DlrError::InvalidArgument(
            "projector splitting supports the explicit and semi-implicit schemes only".into(),
        ));
    }
    let model = stepper.model();
    let mu = model.measure();
    let ops = model.ops();
    let dt = cfg.dt;
    let dofs = model.space().dof_count();
    check_dim("DDO dofs", dofs, d.mean().coeffs().len())?;
    if d.v_on().measure_id() != mu.id() {
        return Err(DlrError::MeasureMismatch);
    }
    let r = d.rank();
    let v0 = d.v_on().values();
    let field = Field {
        mean: d.mean().coeffs().clone(),
        modes: d.u_on() * d.core(),
        basis: v0.clone(),
    };
    let op = ExplicitOperator::new(model, stepper.explicit_split(), &field);
    let forcing = model.forcing_samples(stepper.forcing_time(d.time()));

    let mut rhs_mean = ops.mass.mul_vec(&field.mean) - op.mean(dofs) * dt;
    // E[F V₀ᵀ] with F = f − g
    let mut fv = -op.against(dofs, v0);
    if let Some(f) = &forcing {
        rhs_mean += f * DVector::from_column_slice(mu.weights()) * dt;
        fv += weighted_cross(mu, &f.transpose(), v0);
    }
    let mean = stepper.solve_lhs(&DMatrix::from_column_slice(dofs, 1, rhs_mean.as_slice()));

    let k1 = stepper.solve_lhs(&(ops.mass.mul_mat(&field.modes) + &fv * dt));
    let seed = stepper.step_seed(d.time() + dt);
    let mut dof_src = vector_source(dofs, seed);
    let kf = gram_schmidt(&k1, &ops.mass, true, SPLIT_RANK_TOL, &mut dof_src);
    let u1 = kf.q;
    let s_hat = kf.t;

    let damping = match stepper.implicit_part() {
        Some(a) => u1.transpose() * a.mul_mat(&u1),
        None => DMatrix::zeros(r, r),
    };
    let s_tilde = &s_hat - (u1.transpose() * &fv) * dt + &damping * &s_hat * dt;

    // per-sample U₁ᵀF_k for the centered F
    let mut ftu = -op.paired(&u1);
    if let Some(f) = &forcing {
        ftu += u1.transpose() * f;
    }
    let means = row_means(mu, &ftu);
    for mut col in ftu.column_iter_mut() {
        col -= &means;
    }
    let l_rhs = v0 * s_tilde.transpose() + ftu.transpose() * dt;
    let system = DMatrix::identity(r, r) + &damping * dt;
    let l1 = system
        .transpose()
        .lu()
        .solve(&l_rhs.transpose())
        .ok_or(DlrError::NotPositiveDefinite("L-step matrix"))?
        .transpose();

    let lf = orthonormalize_zero_mean(mu, &l1, true, SPLIT_RANK_TOL, seed);
    let v1 = StochasticBasis::from_matrix(mu, lf.q)?;
    let s1 = lf.t.transpose();
    if mean.iter().chain(u1.iter()).chain(s1.iter()).any(|v| !v.is_finite()) {
        return Err(DlrError::NonFinite("projector-splitting step"));
    }
    DdoState::new(
        ops,
        mu,
        FeFunction::new(mean.column(0).into_owned()),
        u1,
        s1,
        v1,
        d.time() + dt,
    )
}
