//! Pipeline configuration (TOML). Precedence: CLI flag > file > default.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use forge_core::augment::AugmentConfig;
use forge_core::markers::MarkerSpec;
use forge_core::metrics::{Delta1Mode, GrpoConfig};
use forge_core::oracle::OracleConfig;
use forge_core::pointcloud::ColorMode;
use forge_core::prompts::{PromptVariant, TemplateTable};
use forge_core::tasks::{GivenRanges, TaskKind, POSE_PAIR_RANGE};
use serde::{Deserialize, Serialize};

use crate::client::EndpointConfig;
use crate::data::{Split, SynthDataset, DEFAULT_MAX_DEPTH};
use crate::error::{ForgeError, Result};

pub const RESOLVED_CONFIG_NAME: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub variant: PromptVariant,
    /// Replacement template table (JSON); the built-in table otherwise.
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub enabled: Vec<TaskKind>,
    /// Query samples drawn per image (per pair for pose) in `prepare`.
    pub points_per_image: usize,
    pub max_resample: usize,
    /// Camera displacement accepted for pose pairs, meters.
    pub pose_pair_range: (f64, f64),
    pub given: GivenRanges,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self { enabled: vec![TaskKind::Distance], points_per_image: 1, max_resample: 16, pose_pair_range: POSE_PAIR_RANGE, given: GivenRanges::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSection {
    /// Per-dataset sampling weight; unlisted datasets weigh 1.
    pub weights: BTreeMap<String, f64>,
    /// Draw this many training samples from the weighted stream instead of
    /// visiting every image once.
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub delta1_mode: Delta1Mode,
    pub grpo: GrpoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Samples per dataset.
    pub count: usize,
    /// Abort when more than this fraction of queries hit transport errors.
    pub max_transport_failure: f64,
    pub max_depth: f64,
    /// Restrict to one split; every entry is used otherwise.
    pub split: Option<Split>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { count: 8192, max_transport_failure: 0.5, max_depth: DEFAULT_MAX_DEPTH, split: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointcloudSection {
    pub n: usize,
    pub color: ColorMode,
}

impl Default for PointcloudSection {
    fn default() -> Self {
        Self { n: 10_000, color: ColorMode::Image }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub augment: AugmentConfig,
    pub marker: MarkerSpec,
    pub prompt: PromptSection,
    pub tasks: TaskSection,
    pub mixture: MixtureSection,
    pub endpoint: Option<EndpointConfig>,
    /// Offline stand-in for a model; its seed follows the global seed.
    pub oracle: Option<OracleConfig>,
    pub metrics: MetricsSection,
    pub eval: EvalSection,
    pub pointcloud: PointcloudSection,
    pub synth: SynthDataset,
}

/// CLI values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub variant: Option<PromptVariant>,
    pub task: Option<TaskKind>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ForgeError::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&fs::read_to_string(p).map_err(ForgeError::io(p))?)
                .map_err(|e| ForgeError::Config(format!("{}: {e}", p.display())))?,
            None => Self::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(v) = overrides.variant {
            cfg.prompt.variant = v;
        }
        if let Some(t) = overrides.task {
            cfg.tasks.enabled = vec![t];
        }
        if let Some(o) = &mut cfg.oracle {
            o.seed = cfg.seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        self.marker.validate()?;
        self.metrics.grpo.validate()?;
        if let Some(o) = &self.oracle {
            o.validate()?;
        }
        if let Some(e) = &self.endpoint {
            e.validate()?;
        }
        if self.endpoint.is_some() && self.oracle.is_some() {
            return Err(ForgeError::Config("configure either [endpoint] or [oracle], not both".into()));
        }
        if self.tasks.enabled.is_empty() {
            return Err(ForgeError::Config("tasks.enabled is empty".into()));
        }
        if self.tasks.points_per_image == 0 {
            return Err(ForgeError::Config("tasks.points_per_image must be >= 1".into()));
        }
        if self.eval.count == 0 {
            return Err(ForgeError::Config("eval.count must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eval.max_transport_failure) {
            return Err(ForgeError::Config("eval.max_transport_failure must be in [0, 1]".into()));
        }
        if !(self.eval.max_depth > 0.0) {
            return Err(ForgeError::Config("eval.max_depth must be positive".into()));
        }
        if self.mixture.weights.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ForgeError::Config("mixture weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn templates(&self) -> Result<TemplateTable> {
        match &self.prompt.templates {
            Some(p) => Ok(TemplateTable::from_json(&fs::read_to_string(p).map_err(ForgeError::io(p))?)?),
            None => Ok(TemplateTable::builtin()),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ForgeError::Internal(format!("serialize config: {e}")))
    }

    /// Writes the fully resolved config next to a run's outputs.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(out_dir).map_err(ForgeError::io(out_dir))?;
        let p = out_dir.join(RESOLVED_CONFIG_NAME);
        fs::write(&p, self.to_toml()?).map_err(ForgeError::io(&p))?;
        Ok(p)
    }
}
