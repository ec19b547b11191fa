//! Mock answer source for offline runs: replays the ground truth through
//! the answer template, optionally with log-normal noise or refusals.

use alloc::string::String;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompts::{build_answer, AnswerValues, PromptVariant, TemplateTable};
use crate::rng::{derive_stream, seeded};
use crate::tasks::TaskKind;

pub const REFUSAL_TEXT: &str = "I cannot tell.";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Std of the multiplicative log-normal noise.
    pub noise_sigma: f64,
    pub refusal_rate: f64,
    pub seed: u64,
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("oracle noise_sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.refusal_rate) {
            return Err(Error::InvalidConfig("oracle refusal_rate must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// `gt * exp(eps)`.
pub fn perturb(gt: f64, eps: f64) -> f64 {
    gt * libm::exp(eps)
}

/// The value the oracle reports for `sample_id`, or `None` for a refusal.
pub fn oracle_value(cfg: &OracleConfig, sample_id: &str, gt: f64) -> Result<Option<f64>> {
    cfg.validate()?;
    let mut rng = seeded(derive_stream(cfg.seed, sample_id, "oracle"));
    let u: f64 = rng.random();
    if u < cfg.refusal_rate {
        return Ok(None);
    }
    if cfg.noise_sigma == 0.0 {
        return Ok(Some(gt));
    }
    let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|_| Error::InvalidConfig("oracle noise_sigma".into()))?;
    Ok(Some(perturb(gt, normal.sample(&mut rng))))
}

pub fn oracle_answer(
    table: &TemplateTable,
    task: TaskKind,
    variant: PromptVariant,
    sample_id: &str,
    gt: f64,
    angles: Option<(f64, f64)>,
    cfg: &OracleConfig,
) -> Result<String> {
    if !(gt.is_finite() && gt > 0.0) {
        return Err(Error::Domain("oracle ground truth must be positive"));
    }
    match oracle_value(cfg, sample_id, gt)? {
        None => Ok(String::from(REFUSAL_TEXT)),
        Some(v) => build_answer(table, task, variant, AnswerValues { value: v, angles }),
    }
}
