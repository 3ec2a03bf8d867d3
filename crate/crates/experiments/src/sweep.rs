//! `(h, Δt)` stability maps for the explicit scheme.

use dlr_core::fem::estimate_constants;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};
use crate::run::{run_decay, Outcome};

/// Time steps of a sweep: either the same absolute values for every mesh,
/// or multiples `c·h²` of each mesh's squared cell diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtGrid {
    Absolute(Vec<f64>),
    Scaled(Vec<f64>),
}

impl DtGrid {
    fn values(&self) -> &[f64] {
        match self {
            Self::Absolute(v) | Self::Scaled(v) => v,
        }
    }

    fn dt(&self, i: usize, h: f64) -> f64 {
        match self {
            Self::Absolute(v) => v[i],
            Self::Scaled(v) => v[i] * h * h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum CellResult {
    Finished { outcome: Outcome, steps: usize },
    Failed { message: String },
}

impl CellResult {
    pub fn outcome(&self) -> Option<Outcome> {
        match self {
            Self::Finished { outcome, .. } => Some(*outcome),
            Self::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n_per_side: usize,
    pub h: f64,
    pub dt: f64,
    /// `Δt / h²`.
    pub ratio: f64,
    pub result: CellResult,
}

impl SweepCell {
    pub fn decayed(&self) -> bool {
        self.result.outcome() == Some(Outcome::Decayed)
    }

    pub fn blew_up(&self) -> bool {
        self.result.outcome() == Some(Outcome::BlewUp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum KFit {
    /// Largest tested `Δt/h²` below which every cell decayed.
    Bounded(f64),
    /// Every cell decayed; the value is the largest tested ratio.
    AboveGrid(f64),
}

impl KFit {
    pub fn value(&self) -> f64 {
        match *self {
            Self::Bounded(v) | Self::AboveGrid(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshConstant {
    pub n_per_side: usize,
    pub h: f64,
    pub k_explicit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub k_fit: Option<KFit>,
    /// Theoretical `2/(C_I² C_B)` per mesh.
    pub k_explicit: Vec<MeshConstant>,
}

impl SweepReport {
    /// Largest ratio of a decayed cell and smallest ratio of a blown-up one.
    pub fn class_extremes(&self) -> (Option<f64>, Option<f64>) {
        let max_decayed = self.cells.iter().filter(|c| c.decayed()).map(|c| c.ratio).reduce(f64::max);
        let min_blown = self.cells.iter().filter(|c| c.blew_up()).map(|c| c.ratio).reduce(f64::min);
        (max_decayed, min_blown)
    }
}

/// `K_fit`: the largest decayed ratio such that every cell at or below it decayed.
pub fn fit_threshold(cells: &[SweepCell]) -> Option<KFit> {
    let mut ratios: Vec<f64> = cells.iter().map(|c| c.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let mut best = None;
    for &r in &ratios {
        if cells.iter().filter(|c| c.ratio == r).all(SweepCell::decayed) {
            best = Some(r);
        } else {
            return best.map(KFit::Bounded);
        }
    }
    best.map(KFit::AboveGrid)
}

/// One decay run per `(n, Δt)` cell, in parallel; labels do not depend on
/// the execution order.
pub fn stability_sweep(base: &ExperimentConfig, n_list: &[usize], dts: &DtGrid) -> Result<SweepReport> {
    if n_list.is_empty() {
        return Err(ExperimentError::config("sweep.n", "needs at least one mesh"));
    }
    if dts.values().is_empty() {
        return Err(ExperimentError::config("sweep.dt", "needs at least one time step"));
    }
    let jobs: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&n| (0..dts.values().len()).map(move |i| (n, i)))
        .collect();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(n, i)| {
            let h = std::f64::consts::SQRT_2 / n as f64;
            let dt = dts.dt(i, h);
            let mut cfg = base.clone();
            cfg.space.n_per_side = n;
            cfg.scheme.dt = dt;
            let result = match run_decay(&cfg) {
                Ok(run) => CellResult::Finished {
                    outcome: run.outcome,
                    steps: run.steps,
                },
                Err(e) => CellResult::Failed { message: e.to_string() },
            };
            SweepCell {
                n_per_side: n,
                h,
                dt,
                ratio: dt / (h * h),
                result,
            }
        })
        .collect();
    let k_explicit = n_list
        .par_iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.space.n_per_side = n;
            let setup = crate::setup::Setup::build(&cfg)?;
            let m = &setup.model;
            let c = estimate_constants(m.space(), m.measure(), m.diffusion(), m.ops())?;
            Ok(MeshConstant {
                n_per_side: n,
                h: c.h,
                k_explicit: c.k_explicit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        k_fit: fit_threshold(&cells),
        cells,
        k_explicit,
    })
}
