//! Single decay trajectories with decayed / blew-up / inconclusive labels.

use std::time::Instant;

use dlr_core::dlr::DlrState;
use dlr_core::integrators::{HeatModel, SchemeConfig, Stepper};
use dlr_core::DlrError;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, RunConfig};
use crate::error::Result;
use crate::setup::Setup;
use crate::trace::{NormTrace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    MaxSteps,
    WallClock,
    FixedPointNotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "label")]
pub enum Outcome {
    Decayed,
    BlewUp,
    Inconclusive { reason: InconclusiveReason },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Decayed => "decayed",
            Self::BlewUp => "blew_up",
            Self::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Worst per-step diagnostics seen along a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WorstDiagnostics {
    pub do_residual: f64,
    pub kernel_orthogonality: f64,
    pub rank_deficient_steps: usize,
    pub completed_bases: usize,
    pub max_fp_iters: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRun {
    pub outcome: Outcome,
    /// Steps taken before the label was assigned.
    pub steps: usize,
    pub trace: NormTrace,
    pub worst: WorstDiagnostics,
    /// Picard history of the step that failed to converge, if any.
    pub fixed_point_history: Option<Vec<f64>>,
    #[serde(skip)]
    pub final_state: Option<DlrState>,
}

impl DecayRun {
    pub fn energy_monotone(&self) -> bool {
        self.trace.energy_monotone()
    }
}

pub fn run_decay(cfg: &ExperimentConfig) -> Result<DecayRun> {
    let setup = Setup::build(cfg)?;
    run_trajectory(&setup.model, setup.initial.state, cfg.scheme_config(), &cfg.run)
}

/// Steps `initial` until its energy norm leaves `(stop_energy, blowup_energy)`.
pub fn run_trajectory(model: &HeatModel, initial: DlrState, scheme: SchemeConfig, run: &RunConfig) -> Result<DecayRun> {
    let stepper = Stepper::new(model, scheme)?;
    let implicit = scheme.scheme == dlr_core::integrators::Scheme::Implicit;
    let eps = scheme.rank_tol_factor;
    let start = Instant::now();
    let mut trace = NormTrace::default();
    let mut worst = WorstDiagnostics::default();
    let mut state = initial;
    let first = TraceRow::measure(model, &state, 0, eps, implicit.then_some(0))?;
    let mut energy = first.energy;
    trace.push(first);

    let finish = |outcome, steps, trace, worst, history, state| {
        Ok(DecayRun {
            outcome,
            steps,
            trace,
            worst,
            fixed_point_history: history,
            final_state: state,
        })
    };
    if energy <= run.stop_energy {
        return finish(Outcome::Decayed, 0, trace, worst, None, Some(state));
    }
    for step in 1..=run.max_steps {
        let out = match stepper.step(&state) {
            Ok(out) => out,
            Err(DlrError::NonFinite(_)) => return finish(Outcome::BlewUp, step, trace, worst, None, None),
            Err(DlrError::FixedPointNotConverged { history }) => {
                let outcome = Outcome::Inconclusive {
                    reason: InconclusiveReason::FixedPointNotConverged,
                };
                return finish(outcome, step, trace, worst, Some(history), Some(state));
            }
            Err(e) => return Err(e.into()),
        };
        let d = &out.diagnostics;
        worst.do_residual = worst.do_residual.max(d.do_residual.worst());
        worst.kernel_orthogonality = worst.kernel_orthogonality.max(d.kernel_orthogonality);
        worst.rank_deficient_steps += matches!(d.update_path, dlr_core::integrators::UpdatePath::PseudoInverse { .. }) as usize;
        worst.completed_bases += d.completed_basis as usize;
        worst.max_fp_iters = worst.max_fp_iters.max(d.fixed_point_history.len());
        state = out.state;
        if !state.is_finite() {
            return finish(Outcome::BlewUp, step, trace, worst, None, None);
        }
        let row = TraceRow::measure(model, &state, step, eps, implicit.then_some(d.fixed_point_history.len()))?;
        energy = row.energy;
        trace.push(row);
        if !energy.is_finite() || energy >= run.blowup_energy {
            return finish(Outcome::BlewUp, step, trace, worst, None, Some(state));
        }
        if energy <= run.stop_energy {
            return finish(Outcome::Decayed, step, trace, worst, None, Some(state));
        }
        if run.max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() > s) {
            let outcome = Outcome::Inconclusive {
                reason: InconclusiveReason::WallClock,
            };
            return finish(outcome, step, trace, worst, None, Some(state));
        }
    }
    let outcome = Outcome::Inconclusive {
        reason: InconclusiveReason::MaxSteps,
    };
    finish(outcome, run.max_steps, trace, worst, None, Some(state))
}
