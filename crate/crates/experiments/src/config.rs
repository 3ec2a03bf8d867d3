//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use dlr_core::integrators::{FixedPointConfig, ForcingRule, ProjectionMode, Scheme, SchemeConfig};
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub space: SpaceConfig,
    pub dlr: DlrConfig,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub a0: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub measure: MeasureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    /// Tensor Gauss–Legendre rule with `n` points per dimension.
    #[serde(alias = "gauss_legendre")]
    Gl { n: usize },
    /// `N` seeded uniform samples.
    #[serde(alias = "monte_carlo")]
    Mc {
        #[serde(rename = "N")]
        n: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub n_per_side: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlrConfig {
    #[serde(rename = "R")]
    pub rank: usize,
    /// Seed for basis completions (initial padding and rank-deficient steps).
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub name: Scheme,
    #[serde(default)]
    pub projection_mode: ProjectionMode,
    #[serde(default)]
    pub forcing_rule: Option<ForcingRule>,
    pub dt: f64,
    #[serde(default)]
    pub implicit_fp: Option<FixedPointConfig>,
    #[serde(default)]
    pub rank_tol_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub max_steps: usize,
    pub stop_energy: f64,
    pub blowup_energy: f64,
    /// Wall-clock guard; `None` disables it.
    pub max_seconds: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_steps: 200_000,
            stop_energy: 1e-10,
            blowup_energy: 1e4,
            max_seconds: Some(3600.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::config("<json>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(ExperimentError::config(field, msg));
        if !(self.model.a0 > 0.0) {
            return bad("model.a0", format!("must be positive, got {}", self.model.a0));
        }
        if self.model.m < 2 {
            return bad("model.M", format!("the initial condition needs M >= 2, got {}", self.model.m));
        }
        match self.model.measure {
            MeasureConfig::Gl { n: 0 } => return bad("model.measure.n", "must be positive".into()),
            MeasureConfig::Mc { n: 0, .. } => return bad("model.measure.N", "must be positive".into()),
            _ => {}
        }
        if self.space.n_per_side < 2 {
            return bad("space.n_per_side", format!("must be at least 2, got {}", self.space.n_per_side));
        }
        if self.dlr.rank == 0 {
            return bad("dlr.R", "must be positive".into());
        }
        if self.dlr.rank >= self.sample_count() {
            return bad(
                "dlr.R",
                format!("must be smaller than the number of samples {}", self.sample_count()),
            );
        }
        let dofs = (self.space.n_per_side - 1).pow(2);
        if self.dlr.rank > dofs {
            return bad("dlr.R", format!("exceeds the number of degrees of freedom {dofs}"));
        }
        if !(self.scheme.dt > 0.0) || !self.scheme.dt.is_finite() {
            return bad("scheme.dt", format!("must be positive, got {}", self.scheme.dt));
        }
        if let Some(eps) = self.scheme.rank_tol_factor {
            if !(eps > 0.0 && eps <= 1e-6) {
                return bad("scheme.rank_tol_factor", format!("must lie in (0, 1e-6], got {eps}"));
            }
        }
        if let Some(fp) = self.scheme.implicit_fp {
            if fp.max_iters == 0 || !(fp.tol > 0.0) {
                return bad("scheme.implicit_fp", "needs max_iters >= 1 and tol > 0".into());
            }
        }
        if self.run.max_steps == 0 {
            return bad("run.max_steps", "must be positive".into());
        }
        if !(self.run.stop_energy > 0.0) {
            return bad("run.stop_energy", format!("must be positive, got {}", self.run.stop_energy));
        }
        if !(self.run.stop_energy < self.run.blowup_energy) {
            return bad("run.blowup_energy", "must exceed run.stop_energy".into());
        }
        if let Some(s) = self.run.max_seconds {
            if !(s > 0.0) {
                return bad("run.max_seconds", format!("must be positive, got {s}"));
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        match self.model.measure {
            MeasureConfig::Gl { n } => n.saturating_pow(self.model.m as u32),
            MeasureConfig::Mc { n, .. } => n,
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let s = &self.scheme;
        let mut cfg = SchemeConfig::new(s.name, s.dt).with_projection(s.projection_mode);
        if let Some(rule) = s.forcing_rule {
            cfg.forcing_rule = rule;
        }
        if let Some(fp) = s.implicit_fp {
            cfg.implicit_fp = fp;
        }
        if let Some(eps) = s.rank_tol_factor {
            cfg.rank_tol_factor = eps;
        }
        cfg.seed = self.dlr.seed;
        cfg
    }
}
