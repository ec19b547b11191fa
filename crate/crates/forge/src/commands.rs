//! Subcommand implementations. Each returns a summary so callers (the CLI,
//! tests) decide how to print it.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use forge_core::augment::{plan_unify, survives_unify, ImageDims};
use forge_core::markers::{render_marker, render_multi, MarkerSpec, MarkerStyle};
use forge_core::metrics::{aggregate_with, group_advantages, grpo_reward, MetricReport, ParseStatus, SampleRecord};
use forge_core::mixture::{MixtureSpec, MixtureStream};
use forge_core::oracle::{oracle_answer, OracleConfig};
use forge_core::pointcloud::{assemble, grid_pixels, median, Answer};
use forge_core::prompts::{build_question, parse_answer, PromptVariant, QuestionContext, TemplateTable};
use forge_core::rng::{derive_seed, derive_stream, seeded};
use forge_core::tasks::{admissible_pose_pair, distance_at, make_qa, Frame, QaRecord, QaSettings, TaskKind};
use forge_core::{geometry, Intrinsics, Pixel};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::client::Client;
use crate::config::PipelineConfig;
use crate::data::{encode_png, export_sft, load_manifest, read_rgb, write_manifest, write_png, write_synthetic, Manifest};
use crate::error::{ForgeError, Result};
use crate::ply::write_ply;
use crate::report::{write_report, ReportFiles};

/// Where answers come from.
#[derive(Debug, Clone)]
pub enum Responder {
    Oracle(OracleConfig),
    Constant(f64),
    Endpoint(Arc<Client>),
}

impl Responder {
    /// The configured model stand-in: `[endpoint]` or `[oracle]`.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        match (&cfg.endpoint, &cfg.oracle) {
            (Some(e), None) => Ok(Responder::Endpoint(Client::new(e.clone().with_env_key(), cfg.seed)?)),
            (None, Some(o)) => Ok(Responder::Oracle(o.clone())),
            (None, None) => Err(ForgeError::Config("this command needs an [endpoint] or [oracle] section".into())),
            (Some(_), Some(_)) => Err(ForgeError::Config("configure either [endpoint] or [oracle], not both".into())),
        }
    }

    fn chunk_size(&self) -> usize {
        match self {
            Responder::Endpoint(c) => 4 * c.config().max_concurrency,
            _ => 256,
        }
    }
}

/// One question for the responder.
struct Query<'a> {
    id: &'a str,
    task: TaskKind,
    gt: f64,
    angles: Option<(f64, f64)>,
    images: &'a [forge_core::image::RgbImage],
    prompt: &'a str,
}

enum Reply {
    Text(String),
    Value(f64),
    Failed(ForgeError),
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| ForgeError::Internal(format!("tokio runtime: {e}")))
}

fn respond(responder: &Responder, table: &TemplateTable, variant: PromptVariant, queries: &[Query]) -> Result<Vec<Reply>> {
    match responder {
        Responder::Constant(c) => Ok(queries.iter().map(|_| Reply::Value(*c)).collect()),
        Responder::Oracle(o) => queries
            .iter()
            .map(|q| Ok(Reply::Text(oracle_answer(table, q.task, variant, q.id, q.gt, q.angles, o)?)))
            .collect(),
        Responder::Endpoint(client) => {
            let jobs = queries
                .iter()
                .map(|q| Ok((q.id.to_owned(), q.images.iter().map(encode_png).collect::<Result<Vec<_>>>()?, q.prompt.to_owned())))
                .collect::<Result<Vec<_>>>()?;
            let rt = runtime()?;
            let out = rt.block_on(async {
                let mut set = tokio::task::JoinSet::new();
                for (i, (id, pngs, prompt)) in jobs.into_iter().enumerate() {
                    let c = Arc::clone(client);
                    set.spawn(async move { (i, c.query(&id, &pngs, &prompt).await) });
                }
                let mut replies: Vec<Option<Reply>> = (0..queries.len()).map(|_| None).collect();
                while let Some(joined) = set.join_next().await {
                    let (i, r) = joined.map_err(|e| ForgeError::Internal(format!("query task: {e}")))?;
                    replies[i] = Some(match r {
                        Ok(t) => Reply::Text(t),
                        Err(e) => Reply::Failed(e),
                    });
                }
                Ok::<_, ForgeError>(replies)
            })?;
            out.into_iter().map(|r| r.ok_or_else(|| ForgeError::Internal("missing reply".into()))).collect()
        }
    }
}

fn settings(cfg: &PipelineConfig, table: TemplateTable, evaluation: bool) -> QaSettings {
    let augment = if evaluation { cfg.augment.for_evaluation() } else { cfg.augment.clone() };
    let mut s = QaSettings::new(table, augment, cfg.marker.clone(), cfg.prompt.variant);
    s.given = cfg.tasks.given;
    s.max_resample = cfg.tasks.max_resample;
    s
}

/// Lazily loaded frames keyed by manifest index, dropped wholesale when full.
struct FrameCache<'a> {
    manifest: &'a Manifest,
    max_depth: f64,
    frames: HashMap<usize, Frame>,
}

impl<'a> FrameCache<'a> {
    fn new(manifest: &'a Manifest, max_depth: f64) -> Self {
        Self { manifest, max_depth, frames: HashMap::new() }
    }

    const CAPACITY: usize = 256;

    fn load(&mut self, idx: &[usize]) -> Result<Vec<&Frame>> {
        if self.frames.len() + idx.len() > Self::CAPACITY {
            self.frames.retain(|k, _| idx.contains(k));
        }
        for &i in idx {
            if !self.frames.contains_key(&i) {
                self.frames.insert(i, self.manifest.load_frame(i, self.max_depth)?);
            }
        }
        Ok(idx.iter().map(|i| &self.frames[i]).collect())
    }
}

/// Frame groups usable for `task` in one dataset: single frames, or
/// admissible consecutive pairs within a scene for pose.
fn units(manifest: &Manifest, cache: &mut FrameCache, indices: &[usize], task: TaskKind, pose_range: (f64, f64)) -> Result<Vec<Vec<usize>>> {
    if task != TaskKind::Pose {
        return Ok(indices.iter().map(|i| vec![*i]).collect());
    }
    let mut scenes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        let e = &manifest.entries[i];
        if let (Some(scene), Some(_)) = (&e.scene, &e.pose) {
            scenes.entry(scene.as_str()).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    for members in scenes.values() {
        for w in members.windows(2) {
            let frames = cache.load(w)?;
            if admissible_pose_pair(frames[0], frames[1], pose_range) {
                out.push(w.to_vec());
            }
        }
    }
    Ok(out)
}

fn no_units(task: TaskKind, dataset: &str) -> ForgeError {
    let why = if task == TaskKind::Pose { " (needs entries with pose and scene fields)" } else { "" };
    ForgeError::Config(format!("task {} has no usable samples in dataset {dataset:?}{why}", task.name()))
}

fn check_templates(cfg: &PipelineConfig, table: &TemplateTable) -> Result<()> {
    for t in &cfg.tasks.enabled {
        table.get(*t, cfg.prompt.variant)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareSummary {
    pub sft: PathBuf,
    pub counts: BTreeMap<TaskKind, usize>,
}

pub fn prepare(cfg: &PipelineConfig, manifest_path: &Path, out: &Path) -> Result<PrepareSummary> {
    let manifest = load_manifest(manifest_path)?;
    let table = cfg.templates()?;
    check_templates(cfg, &table)?;
    let settings = settings(cfg, table, false);
    let mut cache = FrameCache::new(&manifest, cfg.eval.max_depth);
    let by_dataset = manifest.by_dataset(cfg.eval.split);

    // (task, dataset) -> units
    let mut all_units: BTreeMap<(TaskKind, String), Vec<Vec<usize>>> = BTreeMap::new();
    for &task in &cfg.tasks.enabled {
        let mut any = false;
        for (ds, idx) in &by_dataset {
            let u = units(&manifest, &mut cache, idx, task, cfg.tasks.pose_pair_range)?;
            any |= !u.is_empty();
            all_units.insert((task, ds.clone()), u);
        }
        if !any {
            return Err(no_units(task, "<all>"));
        }
    }

    // (unit, task, id suffix)
    let mut plan: Vec<(Vec<usize>, TaskKind, String)> = Vec::new();
    match cfg.mixture.samples {
        None => {
            for ((task, _), us) in &all_units {
                for u in us {
                    for k in 0..cfg.tasks.points_per_image {
                        plan.push((u.clone(), *task, k.to_string()));
                    }
                }
            }
        }
        Some(n) => {
            let tasks = &cfg.tasks.enabled;
            let mut streams = Vec::new();
            for &task in tasks {
                let sizes: BTreeMap<String, usize> =
                    all_units.iter().filter(|((t, _), u)| *t == task && !u.is_empty()).map(|((_, d), u)| (d.clone(), u.len())).collect();
                let spec = MixtureSpec {
                    weights: cfg.mixture.weights.iter().filter(|(d, _)| sizes.contains_key(*d)).map(|(d, w)| (d.clone(), *w)).collect(),
                    seed: derive_stream(cfg.seed, task.name(), "mixture"),
                };
                for d in cfg.mixture.weights.keys() {
                    if !by_dataset.contains_key(d) {
                        return Err(ForgeError::Config(format!("mixture weight for unknown dataset {d:?}")));
                    }
                }
                streams.push(MixtureStream::new(&spec, &sizes)?);
            }
            for j in 0..n {
                let ti = j % tasks.len();
                let draw = streams[ti].next().ok_or_else(|| ForgeError::Internal("mixture stream ended".into()))?;
                let unit = all_units[&(tasks[ti], draw.dataset.clone())][draw.index].clone();
                plan.push((unit, tasks[ti], format!("e{}", draw.epoch)));
            }
        }
    }

    let mut records = Vec::with_capacity(plan.len());
    let mut counts = BTreeMap::new();
    for (unit, task, suffix) in plan {
        let frames = cache.load(&unit)?;
        let ids: Vec<&str> = frames.iter().map(|f| f.id.as_str()).collect();
        let id = format!("{}:{}:{suffix}", ids.join("+"), task.name());
        let mut rng = seeded(derive_seed(cfg.seed, &id));
        let mut rec = make_qa(&settings, &frames, task, &[], cfg.seed, &mut rng).map_err(|e| ForgeError::Config(format!("sample {id}: {e}")))?;
        rec.id = id;
        *counts.entry(task).or_insert(0) += 1;
        records.push(rec);
    }
    fs::create_dir_all(out).map_err(ForgeError::io(out))?;
    let sft = export_sft(&records, out, "sft.jsonl")?;
    cfg.write_resolved(out)?;
    Ok(PrepareSummary { sft, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub report: MetricReport,
    pub files: ReportFiles,
    pub transport_failures: usize,
    /// Set when the run stopped early on transport failures.
    pub aborted: Option<String>,
}

fn to_sample(rec: &QaRecord, reply: Reply, table: &TemplateTable, variant: PromptVariant) -> (SampleRecord, bool) {
    let (pred, status, transport) = match reply {
        Reply::Value(v) => (Some(v), ParseStatus::Ok, false),
        Reply::Failed(_) => (None, ParseStatus::Transport, true),
        Reply::Text(t) => match parse_answer(table, rec.task, variant, &t) {
            Ok(p) => (Some(p.value), ParseStatus::Ok, false),
            Err(e) => (None, e.into(), false),
        },
    };
    let sample = SampleRecord { sample_id: rec.id.clone(), task: rec.task, dataset: rec.dataset.clone(), pred, gt: rec.gt_value, status };
    (sample, transport)
}

/// Samples up to `eval.count` queries per dataset, asks the responder,
/// parses, and writes the report files to `out`.
pub fn evaluate(cfg: &PipelineConfig, manifest_path: &Path, out: &Path, responder: &Responder) -> Result<EvalSummary> {
    let manifest = load_manifest(manifest_path)?;
    let table = cfg.templates()?;
    check_templates(cfg, &table)?;
    let settings = settings(cfg, table.clone(), true);
    let variant = cfg.prompt.variant;
    let mut cache = FrameCache::new(&manifest, cfg.eval.max_depth);
    let tasks = &cfg.tasks.enabled;

    // Build the full (lightweight) sampling plan first.
    let mut plan: Vec<(String, TaskKind, Vec<usize>)> = Vec::new();
    for (ds, idx) in manifest.by_dataset(cfg.eval.split) {
        let mut per_task = Vec::new();
        for &task in tasks {
            let mut u = units(&manifest, &mut cache, &idx, task, cfg.tasks.pose_pair_range)?;
            if u.is_empty() {
                return Err(no_units(task, &ds));
            }
            u.shuffle(&mut seeded(derive_stream(cfg.seed, &format!("{ds}/{}", task.name()), "eval-order")));
            per_task.push(u);
        }
        for i in 0..cfg.eval.count {
            let ti = i % tasks.len();
            let u = &per_task[ti];
            plan.push((format!("{ds}/{i:05}"), tasks[ti], u[(i / tasks.len()) % u.len()].clone()));
        }
    }
    if plan.is_empty() {
        return Err(ForgeError::Config("no manifest entries match the evaluation split".into()));
    }

    let mut samples = Vec::with_capacity(plan.len());
    let mut transport_failures = 0;
    let mut aborted = None;
    for chunk in plan.chunks(responder.chunk_size()) {
        let mut recs = Vec::with_capacity(chunk.len());
        for (id, task, unit) in chunk {
            let frames = cache.load(unit)?;
            let mut rng = seeded(derive_seed(cfg.seed, id));
            let mut rec = make_qa(&settings, &frames, *task, &[], cfg.seed, &mut rng).map_err(|e| ForgeError::Config(format!("sample {id}: {e}")))?;
            rec.id = id.clone();
            recs.push(rec);
        }
        let queries: Vec<Query> = recs
            .iter()
            .map(|r| Query {
                id: &r.id,
                task: r.task,
                gt: r.gt_value,
                angles: r.query_pixels.first().map(|q| geometry::ray_angles(q.transformed, &r.intrinsics[0])),
                images: &r.images,
                prompt: &r.question,
            })
            .collect();
        let replies = respond(responder, &table, variant, &queries)?;
        for (rec, reply) in recs.iter().zip(replies) {
            let (s, transport) = to_sample(rec, reply, &table, variant);
            transport_failures += transport as usize;
            samples.push(s);
        }
        let frac = transport_failures as f64 / samples.len() as f64;
        if frac > cfg.eval.max_transport_failure {
            aborted = Some(format!("{transport_failures} of {} queries failed in transport; aborted after {} of {} planned samples", samples.len(), samples.len(), plan.len()));
            break;
        }
    }

    let report = aggregate_with(samples, cfg.metrics.delta1_mode)?;
    let files = write_report(&report, out, aborted.as_deref())?;
    cfg.write_resolved(out)?;
    Ok(EvalSummary { report, files, transport_failures, aborted })
}

pub fn baseline(cfg: &PipelineConfig, manifest: &Path, out: &Path, constant: f64) -> Result<EvalSummary> {
    if !(constant.is_finite() && constant > 0.0) {
        return Err(ForgeError::Config(format!("baseline constant must be positive, got {constant}")));
    }
    evaluate(cfg, manifest, out, &Responder::Constant(constant))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub sample_id: String,
    pub gt: f64,
    pub text: String,
    #[serde(default)]
    pub task: Option<TaskKind>,
    #[serde(default)]
    pub variant: Option<PromptVariant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLine {
    pub sample_id: String,
    pub index: usize,
    pub reward: f64,
    pub advantage: f64,
    pub parsed: Option<f64>,
    pub format_ok: bool,
    /// Reward is the format-failure floor.
    pub flagged: bool,
}

/// Reads rollouts (JSONL), writes `rewards.jsonl` under `out`.
pub fn reward(cfg: &PipelineConfig, rollouts: &Path, out: &Path) -> Result<(PathBuf, Vec<RewardLine>)> {
    let table = cfg.templates()?;
    let grpo = &cfg.metrics.grpo;
    let text = fs::read_to_string(rollouts).map_err(ForgeError::io(rollouts))?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Rollout>> = HashMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: Rollout = serde_json::from_str(line).map_err(|e| ForgeError::Manifest {
            path: rollouts.to_path_buf(),
            line: i + 1,
            field: "<line>".into(),
            message: e.to_string(),
        })?;
        if !groups.contains_key(&r.sample_id) {
            order.push(r.sample_id.clone());
        }
        groups.entry(r.sample_id.clone()).or_default().push(r);
    }
    if order.is_empty() {
        return Err(ForgeError::format(rollouts, "no rollouts"));
    }
    let mut lines = Vec::new();
    for id in &order {
        let g = &groups[id];
        if g.len() != grpo.group_size {
            return Err(ForgeError::Config(format!("sample {id:?} has {} rollouts, expected group size {}", g.len(), grpo.group_size)));
        }
        let mut rewards = Vec::with_capacity(g.len());
        let mut meta = Vec::with_capacity(g.len());
        for r in g {
            let task = r.task.unwrap_or(TaskKind::Distance);
            let variant = r.variant.unwrap_or(cfg.prompt.variant);
            let parsed = parse_answer(&table, task, variant, &r.text);
            let value = grpo_reward(grpo, &parsed, r.gt)?;
            let (p, fmt) = match &parsed {
                Ok(p) => (Some(p.value), p.format_ok),
                Err(_) => (None, false),
            };
            rewards.push(value);
            meta.push((p, fmt, value == grpo.format_fail_reward && (p.is_none() || (grpo.format_required && !fmt))));
        }
        let adv = group_advantages(&rewards, grpo.group_size)?;
        for (i, ((reward, advantage), (parsed, format_ok, flagged))) in rewards.iter().zip(adv).zip(meta).enumerate() {
            lines.push(RewardLine { sample_id: id.clone(), index: i, reward: *reward, advantage, parsed, format_ok, flagged });
        }
    }
    fs::create_dir_all(out).map_err(ForgeError::io(out))?;
    let path = out.join("rewards.jsonl");
    let mut body = String::new();
    for l in &lines {
        body.push_str(&serde_json::to_string(l).map_err(|e| ForgeError::Internal(e.to_string()))?);
        body.push('\n');
    }
    fs::write(&path, body).map_err(ForgeError::io(&path))?;
    cfg.write_resolved(out)?;
    Ok((path, lines))
}

/// Image source for `pointcloud`.
#[derive(Debug, Clone)]
pub enum CloudSource {
    /// A manifest entry; ground-truth depth is available to the oracle.
    Entry { manifest: PathBuf, id: String },
    /// A bare image, usable only with a live endpoint.
    Image { path: PathBuf, intrinsics: Intrinsics },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSummary {
    pub ply: PathBuf,
    pub requested: usize,
    pub queried: usize,
    pub points: usize,
    pub failures: usize,
    pub median_depth: Option<f64>,
    pub median_distance: Option<f64>,
}

pub fn pointcloud(cfg: &PipelineConfig, source: &CloudSource, n: usize, out: &Path, responder: &Responder) -> Result<CloudSummary> {
    let frame = match source {
        CloudSource::Entry { manifest, id } => {
            let m = load_manifest(manifest)?;
            let idx = m.entries.iter().position(|e| &e.id == id).ok_or_else(|| ForgeError::Config(format!("no manifest entry {id:?}")))?;
            m.load_frame(idx, cfg.eval.max_depth)?
        }
        CloudSource::Image { path, intrinsics } => {
            if matches!(responder, Responder::Oracle(_)) {
                return Err(ForgeError::Config("the oracle needs ground-truth depth; pass a manifest entry".into()));
            }
            intrinsics.validate()?;
            let image = read_rgb(path)?;
            let (w, h) = (image.width(), image.height());
            Frame { id: path.display().to_string(), dataset: "input".into(), image, depth: forge_core::image::DepthMap::filled(w, h, 1.0), intrinsics: *intrinsics, pose: None }
        }
    };
    let table = cfg.templates()?;
    let variant = cfg.prompt.variant;
    table.get(TaskKind::Distance, variant)?;
    let augment = cfg.augment.for_evaluation();
    let plan = plan_unify(ImageDims::of(&frame.image), &frame.intrinsics, &augment)?;
    let mut dummy = seeded(cfg.seed);
    let unified = forge_core::augment::apply_augment(&frame.image, &frame.intrinsics, &[], &augment, &mut dummy)?;

    // Grid on the input image, snapped to pixel cells so each query has a
    // single ground-truth depth; cells that fall off the resized raster are skipped.
    let (w, h) = (frame.image.width(), frame.image.height());
    let mut cells = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for p in grid_pixels(ImageDims::of(&frame.image), n)? {
        if let Some(c) = p.cell(w, h) {
            if seen.insert(c) {
                cells.push(Pixel::new(c.0 as f64, c.1 as f64));
            }
        }
    }
    let requested = cells.len();
    cells.retain(|p| survives_unify(*p, &plan));

    let mut answers: Vec<Answer> = Vec::with_capacity(cells.len());
    let needs_images = matches!(responder, Responder::Endpoint(_));
    for chunk in cells.chunks(responder.chunk_size()) {
        let mut items = Vec::with_capacity(chunk.len());
        for (j, p) in chunk.iter().enumerate() {
            let t = unified.transform.apply(*p);
            let id = format!("{}/{:06}", frame.id, answers.len() + j);
            let question = build_question(
                &table,
                TaskKind::Distance,
                variant,
                &QuestionContext { dims: Some(ImageDims::of(&unified.image)), pixel: Some(t), intrinsics: Some(unified.intrinsics), ..Default::default() },
            )?;
            let images = if needs_images && variant.uses_marker() {
                vec![render_marker(&unified.image, t, &cfg.marker)?]
            } else if needs_images {
                vec![unified.image.clone()]
            } else {
                Vec::new()
            };
            let gt = distance_at(&frame, *p).ok();
            items.push((id, t, gt, images, question));
        }
        let queries: Vec<Query> = items
            .iter()
            .filter(|it| !matches!(responder, Responder::Oracle(_)) || it.2.is_some())
            .map(|(id, t, gt, images, prompt)| Query {
                id,
                task: TaskKind::Distance,
                gt: gt.unwrap_or(1.0),
                angles: Some(geometry::ray_angles(*t, &unified.intrinsics)),
                images,
                prompt,
            })
            .collect();
        let mut replies = respond(responder, &table, variant, &queries)?.into_iter();
        for (_, t, gt, _, _) in &items {
            if matches!(responder, Responder::Oracle(_)) && gt.is_none() {
                answers.push((*t, None));
                continue;
            }
            let value = match replies.next().ok_or_else(|| ForgeError::Internal("missing reply".into()))? {
                Reply::Value(v) => Some(v),
                Reply::Text(text) => parse_answer(&table, TaskKind::Distance, variant, &text).ok().map(|p| p.value),
                // No partial cloud on transport failure.
                Reply::Failed(e) => return Err(e),
            };
            answers.push((*t, value));
        }
    }

    let assembly = assemble(&unified.image, &unified.intrinsics, &answers, cfg.pointcloud.color)?;
    fs::create_dir_all(out).map_err(ForgeError::io(out))?;
    let ply = out.join("pointcloud.ply");
    write_ply(&assembly.cloud, &ply)?;
    let mut z: Vec<f64> = assembly.cloud.points.iter().map(|p| p.z).collect();
    let mut d: Vec<f64> = assembly.cloud.points.iter().map(|p| p.norm()).collect();
    let summary = CloudSummary {
        ply,
        requested,
        queried: answers.len(),
        points: assembly.cloud.len(),
        failures: assembly.failures + (requested - answers.len()),
        median_depth: median(&mut z),
        median_distance: median(&mut d),
    };
    let sp = out.join("pointcloud_summary.json");
    fs::write(&sp, serde_json::to_string_pretty(&summary).map_err(|e| ForgeError::Internal(e.to_string()))?).map_err(ForgeError::io(&sp))?;
    cfg.write_resolved(out)?;
    Ok(summary)
}

/// Draws markers at `pixels` (labelled A, B, ... when more than one) and
/// writes the PNG to `out`.
pub fn render(cfg: &PipelineConfig, image: &Path, pixels: &[Pixel], style: Option<MarkerStyle>, out: &Path) -> Result<()> {
    if pixels.is_empty() {
        return Err(ForgeError::Config("render needs at least one --pixel".into()));
    }
    let img = read_rgb(image)?;
    let mut spec: MarkerSpec = cfg.marker.clone();
    if let Some(s) = style {
        spec.style = s;
    }
    let rendered = if pixels.len() == 1 {
        render_marker(&img, pixels[0], &spec)?
    } else {
        if pixels.len() > 26 {
            return Err(ForgeError::Config("at most 26 labelled markers".into()));
        }
        let marks: Vec<(Pixel, MarkerSpec)> =
            pixels.iter().enumerate().map(|(i, p)| (*p, spec.clone().with_label(&((b'A' + i as u8) as char).to_string()))).collect();
        render_multi(&img, &marks)?
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(ForgeError::io(dir))?;
    }
    write_png(&rendered, out)
}

/// Materialises the `[synth]` dataset under `out` and returns the manifest path.
pub fn synth(cfg: &PipelineConfig, out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out).map_err(ForgeError::io(out))?;
    let entries = write_synthetic(&cfg.synth, cfg.seed, out)?;
    let path = out.join("manifest.jsonl");
    write_manifest(&entries, &path)?;
    Ok(path)
}
