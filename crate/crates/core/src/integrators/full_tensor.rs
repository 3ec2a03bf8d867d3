use nalgebra::{DMatrix, DVector};

use super::HeatModel;
use crate::error::{check_dim, DlrError, Result};
use crate::linalg::{CsrMatrix, EnvelopeCholesky};

/// Every sample solved independently (`dofs × N̂`).
#[derive(Debug, Clone, PartialEq)]
pub struct FullTensorState {
    pub values: DMatrix<f64>,
    pub time: f64,
}

impl FullTensorState {
    pub fn new(values: DMatrix<f64>, time: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DlrError::NonFinite("full tensor state"));
        }
        Ok(Self { values, time })
    }
}

/// θ-scheme per sample with cached factorizations of `M + θΔt A(ω_k)`.
pub struct FullTensorStepper<'m> {
    model: &'m HeatModel,
    dt: f64,
    theta: f64,
    stiffness: Vec<CsrMatrix>,
    factors: Vec<EnvelopeCholesky>,
}

impl<'m> FullTensorStepper<'m> {
    pub fn new(model: &'m HeatModel, dt: f64, theta: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(DlrError::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(DlrError::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
        }
        let ops = model.ops();
        let mu = model.measure();
        let stiffness: Vec<CsrMatrix> = (0..mu.len()).map(|k| ops.stiffness_at(mu.point(k))).collect();
        let factors = stiffness
            .iter()
            .map(|a| EnvelopeCholesky::factor(&CsrMatrix::linear_combination(&[(1.0, &ops.mass), (theta * dt, a)])))
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            dt,
            theta,
            stiffness,
            factors,
        })
    }

    pub fn step(&self, full: &FullTensorState) -> Result<FullTensorState> {
        let mu = self.model.measure();
        let mass = &self.model.ops().mass;
        check_dim("full tensor dofs", mass.nrows(), full.values.nrows())?;
        check_dim("full tensor samples", mu.len(), full.values.ncols())?;
        let (dt, theta) = (self.dt, self.theta);
        let f_old = self.model.forcing_samples(full.time);
        let f_new = self.model.forcing_samples(full.time + dt);
        let mut out = DMatrix::zeros(full.values.nrows(), full.values.ncols());
        for k in 0..mu.len() {
            let u: DVector<f64> = full.values.column(k).into_owned();
            let mut rhs = mass.mul_vec(&u);
            if theta < 1.0 {
                rhs.axpy(-(1.0 - theta) * dt, &self.stiffness[k].mul_vec(&u), 1.0);
            }
            if let (Some(a), Some(b)) = (&f_old, &f_new) {
                rhs.axpy((1.0 - theta) * dt, &a.column(k), 1.0);
                rhs.axpy(theta * dt, &b.column(k), 1.0);
            }
            out.set_column(k, &self.factors[k].solve(&rhs));
        }
        FullTensorState::new(out, full.time + dt)
    }
}

pub fn full_tensor_step(full: &FullTensorState, model: &HeatModel, dt: f64, theta: f64) -> Result<FullTensorState> {
    FullTensorStepper::new(model, dt, theta)?.step(full)
}
