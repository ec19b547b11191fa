//! Depth metrics, GRPO rewards and group advantages, and report aggregation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompts::{ParseError, ParsedAnswer};
use crate::tasks::TaskKind;

pub const DELTA1_THRESHOLD: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Delta1,
    AbsRel,
    #[default]
    L1,
    L2,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [MetricKind::Delta1, MetricKind::AbsRel, MetricKind::L1, MetricKind::L2];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Delta1 => "delta1",
            MetricKind::AbsRel => "abs_rel",
            MetricKind::L1 => "l1",
            MetricKind::L2 => "l2",
        }
    }
}

/// How the δ1 inlier test is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delta1Mode {
    /// `max(pred/gt, gt/pred) < 1.25`.
    #[default]
    Ratio,
    /// `|pred - gt| / gt < 0.25`.
    OneSided,
}

pub fn delta1(pred: f64, gt: f64, mode: Delta1Mode) -> f64 {
    let inlier = match mode {
        Delta1Mode::Ratio => pred > 0.0 && (pred / gt).max(gt / pred) < DELTA1_THRESHOLD,
        Delta1Mode::OneSided => libm::fabs(pred - gt) / gt < DELTA1_THRESHOLD - 1.0,
    };
    if inlier { 1.0 } else { 0.0 }
}

pub fn per_sample_metric(kind: MetricKind, pred: f64, gt: f64) -> Result<f64> {
    per_sample_metric_with(kind, pred, gt, Delta1Mode::Ratio)
}

pub fn per_sample_metric_with(kind: MetricKind, pred: f64, gt: f64, mode: Delta1Mode) -> Result<f64> {
    if !(gt.is_finite() && gt > 0.0) {
        return Err(Error::Domain("ground truth must be finite and positive"));
    }
    if !pred.is_finite() {
        return Err(Error::Domain("prediction must be finite"));
    }
    let err = pred - gt;
    Ok(match kind {
        MetricKind::Delta1 => delta1(pred, gt, mode),
        MetricKind::AbsRel => libm::fabs(err) / gt,
        MetricKind::L1 => libm::fabs(err),
        MetricKind::L2 => err * err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    /// KL weight; recorded for the external trainer, not used here.
    pub beta: f64,
    pub reward_kind: MetricKind,
    pub format_required: bool,
    pub format_fail_reward: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self { group_size: 8, beta: 0.0, reward_kind: MetricKind::L1, format_required: true, format_fail_reward: -10.0 }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::InvalidConfig(alloc::format!("group_size must be >= 2, got {}", self.group_size)));
        }
        if !self.format_fail_reward.is_finite() {
            return Err(Error::InvalidConfig("format_fail_reward must be finite".into()));
        }
        Ok(())
    }
}

/// Reward for one rollout: the negated metric (δ1 is used as is), or the
/// floor for unparsable or badly formatted output.
pub fn grpo_reward(cfg: &GrpoConfig, parsed: &core::result::Result<ParsedAnswer, ParseError>, gt: f64) -> Result<f64> {
    let answer = match parsed {
        Ok(a) if !cfg.format_required || a.format_ok => a,
        _ => return Ok(cfg.format_fail_reward),
    };
    let m = per_sample_metric(cfg.reward_kind, answer.value, gt)?;
    Ok(match cfg.reward_kind {
        MetricKind::Delta1 => m,
        _ => -m,
    })
}

/// `(r - mean) / std` with population std; an all-equal group gets zeros.
pub fn group_advantages(rewards: &[f64], group_size: usize) -> Result<Vec<f64>> {
    if rewards.len() != group_size {
        return Err(Error::LengthMismatch { expected: group_size, got: rewards.len() });
    }
    if rewards.is_empty() {
        return Err(Error::Empty("reward group"));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    if std == 0.0 || !std.is_finite() {
        return Ok(alloc::vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    NoNumber,
    Ambiguous,
    Domain,
    Transport,
}

impl From<ParseError> for ParseStatus {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::NoNumber => ParseStatus::NoNumber,
            ParseError::Ambiguous => ParseStatus::Ambiguous,
            ParseError::Domain => ParseStatus::Domain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub task: TaskKind,
    pub dataset: String,
    pub pred: Option<f64>,
    pub gt: f64,
    pub status: ParseStatus,
}

/// Metric values for one sample; error metrics are absent on failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub delta1: f64,
    pub abs_rel: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
}

pub fn sample_metrics(r: &SampleRecord, mode: Delta1Mode) -> Result<SampleMetrics> {
    match r.pred {
        Some(p) if r.status == ParseStatus::Ok => Ok(SampleMetrics {
            delta1: per_sample_metric_with(MetricKind::Delta1, p, r.gt, mode)?,
            abs_rel: Some(per_sample_metric(MetricKind::AbsRel, p, r.gt)?),
            l1: Some(per_sample_metric(MetricKind::L1, p, r.gt)?),
            l2: Some(per_sample_metric(MetricKind::L2, p, r.gt)?),
        }),
        _ => {
            if !(r.gt.is_finite() && r.gt > 0.0) {
                return Err(Error::Domain("ground truth must be finite and positive"));
            }
            Ok(SampleMetrics { delta1: 0.0, abs_rel: None, l1: None, l2: None })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub count: usize,
    pub failures: usize,
    pub delta1: f64,
    /// Means over successfully parsed samples; `None` if there were none.
    pub abs_rel: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub failure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<SampleRecord>,
    pub metrics: Vec<SampleMetrics>,
    /// Sorted by dataset name.
    pub datasets: Vec<DatasetSummary>,
    /// Unweighted mean of the per-dataset δ1 values.
    pub average_delta1: f64,
    pub average_abs_rel: Option<f64>,
    pub average_failure_rate: f64,
    pub delta1_mode: Delta1Mode,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn aggregate(records: Vec<SampleRecord>) -> Result<MetricReport> {
    aggregate_with(records, Delta1Mode::Ratio)
}

pub fn aggregate_with(records: Vec<SampleRecord>, mode: Delta1Mode) -> Result<MetricReport> {
    if records.is_empty() {
        return Err(Error::Empty("no evaluation records"));
    }
    let metrics = records.iter().map(|r| sample_metrics(r, mode)).collect::<Result<Vec<_>>>()?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.dataset.is_empty() {
            return Err(Error::MissingMetadata("record dataset tag"));
        }
        groups.entry(r.dataset.as_str()).or_default().push(i);
    }
    let datasets: Vec<DatasetSummary> = groups
        .iter()
        .map(|(name, idx)| {
            let m = || idx.iter().map(|&i| &metrics[i]);
            let failures = idx.iter().filter(|&&i| records[i].status != ParseStatus::Ok).count();
            DatasetSummary {
                dataset: String::from(*name),
                count: idx.len(),
                failures,
                delta1: mean(m().map(|x| x.delta1)).unwrap_or(0.0),
                abs_rel: mean(m().filter_map(|x| x.abs_rel)),
                l1: mean(m().filter_map(|x| x.l1)),
                l2: mean(m().filter_map(|x| x.l2)),
                failure_rate: failures as f64 / idx.len() as f64,
            }
        })
        .collect();
    let average_delta1 = mean(datasets.iter().map(|d| d.delta1)).unwrap_or(0.0);
    let average_abs_rel = if datasets.iter().all(|d| d.abs_rel.is_some()) {
        mean(datasets.iter().filter_map(|d| d.abs_rel))
    } else {
        None
    };
    let average_failure_rate = mean(datasets.iter().map(|d| d.failure_rate)).unwrap_or(0.0);
    Ok(MetricReport { records, metrics, datasets, average_delta1, average_abs_rel, average_failure_rate, delta1_mode: mode })
}
