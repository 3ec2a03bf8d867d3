//! Side-by-side runs: staggered vs. projector-splitting, and projection modes.

use dlr_core::dlr::{from_ddo, to_ddo};
use dlr_core::integrators::{projector_splitting_step, ProjectionMode, Scheme, Stepper};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};
use crate::run::{run_trajectory, Outcome};
use crate::setup::Setup;
use crate::trace::{NormTrace, MONOTONE_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeDiffRow {
    pub step: usize,
    pub time: f64,
    /// `max |u_a − u_b| / max(|u_a|, |u_b|)` over all sample values.
    pub relative_difference: f64,
    pub energy_staggered: f64,
    pub energy_splitting: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub rows: Vec<SchemeDiffRow>,
    pub max_kernel_orthogonality: f64,
}

fn monotone(values: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK * w[1].abs())
}

impl SchemeComparison {
    pub fn max_relative_difference(&self) -> f64 {
        self.rows.iter().map(|r| r.relative_difference).fold(0.0, f64::max)
    }

    pub fn staggered_monotone(&self) -> bool {
        monotone(self.rows.iter().map(|r| r.energy_staggered))
    }

    pub fn splitting_monotone(&self) -> bool {
        monotone(self.rows.iter().map(|r| r.energy_splitting))
    }
}

/// Runs the staggered scheme and the projector-splitting scheme from the same
/// initial state for `steps` steps. Row 0 is the initial state.
pub fn compare_schemes(cfg: &ExperimentConfig, steps: usize) -> Result<SchemeComparison> {
    if cfg.scheme.name == Scheme::Implicit {
        return Err(ExperimentError::config(
            "scheme.name",
            "the projector-splitting comparison supports explicit and semi_implicit",
        ));
    }
    let setup = Setup::build(cfg)?;
    let model = &setup.model;
    let mu = model.measure();
    let ops = model.ops();
    let stepper = Stepper::new(model, cfg.scheme_config())?;
    let mut a = setup.initial.state;
    let mut d = to_ddo(ops, mu, &a, cfg.dlr.seed)?;
    let mut out = SchemeComparison::default();
    if steps == 0 {
        return Ok(out);
    }
    let row = |step: usize, a: &dlr_core::dlr::DlrState, b: &dlr_core::dlr::DlrState| -> Result<SchemeDiffRow> {
        let (xa, xb) = (a.samples(), b.samples());
        let scale = xa.amax().max(xb.amax());
        Ok(SchemeDiffRow {
            step,
            time: a.time(),
            relative_difference: if scale > 0.0 { (&xa - &xb).amax() / scale } else { 0.0 },
            energy_staggered: a.norm_energy(ops, mu)?,
            energy_splitting: b.norm_energy(ops, mu)?,
        })
    };
    out.rows.push(row(0, &a, &from_ddo(mu, &d)?)?);
    for step in 1..=steps {
        let next = stepper.step(&a)?;
        out.max_kernel_orthogonality = out.max_kernel_orthogonality.max(next.diagnostics.kernel_orthogonality);
        a = next.state;
        d = projector_splitting_step(&d, &stepper)?;
        out.rows.push(row(step, &a, &from_ddo(mu, &d)?)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionRun {
    pub dt: f64,
    pub mode: ProjectionMode,
    pub outcome: Outcome,
    pub steps: usize,
    pub energy_increases: usize,
    pub monotone: bool,
    pub trace: NormTrace,
}

/// One decay run per `(Δt, mode)`, both projection modes, semi-implicit only.
pub fn compare_projection_modes(cfg: &ExperimentConfig, dts: &[f64]) -> Result<Vec<ProjectionRun>> {
    if cfg.scheme.name != Scheme::SemiImplicit {
        return Err(ExperimentError::config("scheme.name", "the projection comparison needs semi_implicit"));
    }
    if let Some(bad) = dts.iter().find(|dt| !(**dt > 0.0)) {
        return Err(ExperimentError::config("dt", format!("time steps must be positive, got {bad}")));
    }
    let setup = Setup::build(cfg)?;
    let jobs: Vec<(f64, ProjectionMode)> = dts
        .iter()
        .flat_map(|&dt| [ProjectionMode::GaussSeidel, ProjectionMode::FullyExplicit].map(|m| (dt, m)))
        .collect();
    jobs.par_iter()
        .map(|&(dt, mode)| {
            let mut sc = cfg.scheme_config().with_projection(mode);
            sc.dt = dt;
            let run = run_trajectory(&setup.model, setup.initial.state.clone(), sc, &cfg.run)?;
            Ok(ProjectionRun {
                dt,
                mode,
                outcome: run.outcome,
                steps: run.steps,
                energy_increases: run.trace.energy_increases(),
                monotone: run.trace.energy_monotone(),
                trace: run.trace,
            })
        })
        .collect()
}
