//! Question/answer generation for the six supported tasks.
//!
//! Depth maps store principal-axis depth `z`; euclidean distances are
//! derived through the intrinsics. Ground truth is kept at full precision
//! and only rounded when the answer text is formatted.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::augment::{apply_augment, plan_unify, AugmentConfig, ImageDims, PixelTransform};
use crate::error::{Error, Result};
use crate::geometry::{back_project, euclid_from_principal, ray_angles, Intrinsics, Pixel, Point3, Pose};
use crate::image::{DepthMap, RgbImage};
use crate::markers::{render_marker, render_multi, MarkerSpec};
use crate::prompts::{build_answer, build_question, round1, AnswerValues, PromptVariant, QuestionContext, TemplateTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Distance,
    PrincipalAxisDistance,
    Speed,
    Time,
    TwoPointDistance,
    Pose,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Distance,
        TaskKind::PrincipalAxisDistance,
        TaskKind::Speed,
        TaskKind::Time,
        TaskKind::TwoPointDistance,
        TaskKind::Pose,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Distance => "distance",
            TaskKind::PrincipalAxisDistance => "principal_axis_distance",
            TaskKind::Speed => "speed",
            TaskKind::Time => "time",
            TaskKind::TwoPointDistance => "two_point_distance",
            TaskKind::Pose => "pose",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    pub fn unit(&self) -> &'static str {
        match self {
            TaskKind::Speed => "m/s",
            TaskKind::Time => "s",
            _ => "m",
        }
    }

    pub fn frames(&self) -> usize {
        if *self == TaskKind::Pose { 2 } else { 1 }
    }

    pub fn query_points(&self) -> usize {
        match self {
            TaskKind::Pose => 0,
            TaskKind::TwoPointDistance => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Given-value ranges for the speed and time tasks (inclusive, before
/// rounding to one decimal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GivenRanges {
    pub time_s: (f64, f64),
    pub speed_mps: (f64, f64),
}

impl Default for GivenRanges {
    fn default() -> Self {
        Self { time_s: (2.0, 20.0), speed_mps: (0.5, 10.0) }
    }
}

/// One posed RGB-D frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: String,
    pub dataset: String,
    pub image: RgbImage,
    pub depth: DepthMap,
    pub intrinsics: Intrinsics,
    pub pose: Option<Pose>,
}

impl Frame {
    pub fn dims(&self) -> ImageDims {
        ImageDims::of(&self.image)
    }

    pub fn depth_at(&self, p: Pixel) -> Option<f64> {
        let (x, y) = p.cell(self.depth.width(), self.depth.height())?;
        self.depth.at(x, y)
    }
}

fn sample_from_mask<R: rand::Rng + ?Sized>(mask: &[bool], width: u32, k: usize, rng: &mut R) -> Result<Vec<Pixel>> {
    let valid: Vec<usize> = mask.iter().enumerate().filter(|(_, v)| **v).map(|(i, _)| i).collect();
    if valid.len() < k {
        return Err(Error::InsufficientPixels { needed: k, available: valid.len() });
    }
    let picks = rand::seq::index::sample(rng, valid.len(), k);
    Ok(picks
        .into_iter()
        .map(|i| {
            let idx = valid[i];
            Pixel::new((idx % width as usize) as f64, (idx / width as usize) as f64)
        })
        .collect())
}

/// `k` distinct integer pixels drawn uniformly from the valid part of `depth`.
pub fn sample_query_pixels<R: rand::Rng + ?Sized>(depth: &DepthMap, k: usize, rng: &mut R) -> Result<Vec<Pixel>> {
    sample_from_mask(depth.mask(), depth.width(), k, rng)
}

/// Valid-depth pixels that also land inside the focal-unified raster.
pub fn queryable_mask(frame: &Frame, cfg: &AugmentConfig) -> Result<Vec<bool>> {
    let (dims, _, t) = plan_unify(frame.dims(), &frame.intrinsics, cfg)?;
    let w = frame.depth.width();
    Ok(frame
        .depth
        .mask()
        .iter()
        .enumerate()
        .map(|(i, &ok)| {
            ok && {
                let p = Pixel::new((i % w as usize) as f64, (i / w as usize) as f64);
                dims.contains(t.apply(p))
            }
        })
        .collect())
}

pub fn sample_queryable<R: rand::Rng + ?Sized>(frame: &Frame, cfg: &AugmentConfig, k: usize, rng: &mut R) -> Result<Vec<Pixel>> {
    let mask = queryable_mask(frame, cfg)?;
    sample_from_mask(&mask, frame.depth.width(), k, rng)
}

/// Full-precision ground truth and the given values that accompany it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub value: f64,
    pub given_time: Option<f64>,
    pub given_speed: Option<f64>,
}

pub fn distance_at(frame: &Frame, p: Pixel) -> Result<f64> {
    let z = frame.depth_at(p).ok_or(Error::InvalidDepth(1))?;
    euclid_from_principal(p, z, &frame.intrinsics)
}

pub fn point_at(frame: &Frame, p: Pixel) -> Result<Point3> {
    let z = frame.depth_at(p).ok_or(Error::InvalidDepth(1))?;
    back_project(p, z, &frame.intrinsics)
}

pub fn speed_truth(distance: f64, given_time: f64) -> f64 {
    distance / given_time
}

pub fn time_truth(distance: f64, given_speed: f64) -> f64 {
    distance / given_speed
}

pub fn two_point_truth(a: &Point3, b: &Point3) -> f64 {
    a.distance(b)
}

/// Distance travelled by the camera between two world-from-camera poses.
pub fn pose_truth(a: &Pose, b: &Pose) -> f64 {
    a.camera_center().distance(&b.camera_center())
}

fn draw_given<R: rand::Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    round1(v).max(0.1)
}

pub fn compute_truth<R: rand::Rng + ?Sized>(
    frames: &[&Frame],
    task: TaskKind,
    pixels: &[Pixel],
    given: &GivenRanges,
    rng: &mut R,
) -> Result<Truth> {
    let plain = |value| Truth { value, given_time: None, given_speed: None };
    match task {
        TaskKind::Distance => Ok(plain(distance_at(frames[0], pixels[0])?)),
        TaskKind::PrincipalAxisDistance => Ok(plain(frames[0].depth_at(pixels[0]).ok_or(Error::InvalidDepth(1))?)),
        TaskKind::Speed => {
            let d = distance_at(frames[0], pixels[0])?;
            let t = draw_given(rng, given.time_s);
            Ok(Truth { value: speed_truth(d, t), given_time: Some(t), given_speed: None })
        }
        TaskKind::Time => {
            let d = distance_at(frames[0], pixels[0])?;
            let s = draw_given(rng, given.speed_mps);
            Ok(Truth { value: time_truth(d, s), given_time: None, given_speed: Some(s) })
        }
        TaskKind::TwoPointDistance => {
            let a = point_at(frames[0], pixels[0])?;
            let b = point_at(frames[0], pixels[1])?;
            Ok(plain(two_point_truth(&a, &b)))
        }
        TaskKind::Pose => {
            let a = frames[0].pose.ok_or(Error::MissingPose(task.name()))?;
            let b = frames[1].pose.ok_or(Error::MissingPose(task.name()))?;
            Ok(plain(pose_truth(&a, &b)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryPixel {
    pub original: Pixel,
    pub transformed: Pixel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaRecord {
    pub id: String,
    pub task: TaskKind,
    pub variant: PromptVariant,
    /// Rendered model inputs; two for pose, one otherwise.
    pub images: Vec<RgbImage>,
    pub question: String,
    pub answer: String,
    pub gt_value: f64,
    pub unit: &'static str,
    pub query_pixels: Vec<QueryPixel>,
    pub sample_ids: Vec<String>,
    pub dataset: String,
    pub given_time: Option<f64>,
    pub given_speed: Option<f64>,
    pub transforms: Vec<PixelTransform>,
    pub intrinsics: Vec<Intrinsics>,
    pub seed: u64,
}

/// Shared, read-only settings for building records.
#[derive(Debug, Clone)]
pub struct QaSettings {
    pub templates: TemplateTable,
    pub augment: AugmentConfig,
    pub marker: MarkerSpec,
    pub variant: PromptVariant,
    pub given: GivenRanges,
    /// Resampling attempts when a supplied query pixel has no usable depth.
    pub max_resample: usize,
}

impl QaSettings {
    pub fn new(templates: TemplateTable, augment: AugmentConfig, marker: MarkerSpec, variant: PromptVariant) -> Self {
        Self { templates, augment, marker, variant, given: GivenRanges::default(), max_resample: 16 }
    }
}

pub const MARKER_LABELS: [&str; 2] = ["A", "B"];

/// Augment, mark, and phrase one question/answer pair.
///
/// `query` may be shorter than the task needs; missing pixels are sampled.
/// Supplied pixels without usable depth are resampled up to
/// `settings.max_resample` times.
pub fn make_qa<R: rand::Rng + ?Sized>(
    settings: &QaSettings,
    frames: &[&Frame],
    task: TaskKind,
    query: &[Pixel],
    seed: u64,
    rng: &mut R,
) -> Result<QaRecord> {
    settings.templates.get(task, settings.variant)?;
    if frames.len() != task.frames() {
        return Err(Error::LengthMismatch { expected: task.frames(), got: frames.len() });
    }
    if task == TaskKind::Pose {
        for f in frames {
            f.pose.ok_or(Error::MissingPose(task.name()))?.validate(1e-4)?;
        }
    }

    // Pose pairs are compared at the same scale and framing, so no crop.
    let augment = if task == TaskKind::Pose { settings.augment.for_evaluation() } else { settings.augment.clone() };

    let need = task.query_points();
    let mut pixels: Vec<Pixel> = Vec::with_capacity(need);
    if need > 0 {
        let mask = queryable_mask(frames[0], &augment)?;
        let width = frames[0].depth.width();
        let usable = |p: &Pixel| {
            p.cell(width, frames[0].depth.height()).is_some_and(|(x, y)| mask[(y * width + x) as usize])
        };
        for i in 0..need {
            let mut candidate = query.get(i).copied();
            let mut attempts = 0;
            loop {
                match candidate {
                    Some(p) if usable(&p) && !pixels.contains(&p) => {
                        pixels.push(p);
                        break;
                    }
                    _ if attempts >= settings.max_resample => return Err(Error::InvalidDepth(attempts)),
                    _ => {
                        attempts += 1;
                        candidate = Some(sample_from_mask(&mask, width, 1, rng)?[0]);
                    }
                }
            }
        }
    }

    let truth = compute_truth(frames, task, &pixels, &settings.given, rng)?;

    let mut images = Vec::with_capacity(frames.len());
    let mut transforms = Vec::with_capacity(frames.len());
    let mut intrinsics = Vec::with_capacity(frames.len());
    let mut query_pixels = Vec::with_capacity(need);
    for (fi, frame) in frames.iter().enumerate() {
        let q: &[Pixel] = if fi == 0 { &pixels } else { &[] };
        let aug = apply_augment(&frame.image, &frame.intrinsics, q, &augment, rng)?;
        let rendered = if q.is_empty() || !settings.variant.uses_marker() {
            aug.image.clone()
        } else if task == TaskKind::TwoPointDistance {
            let marks: Vec<(Pixel, MarkerSpec)> = aug
                .pixels
                .iter()
                .zip(MARKER_LABELS)
                .map(|(p, label)| (*p, settings.marker.clone().with_label(label)))
                .collect();
            render_multi(&aug.image, &marks)?
        } else {
            render_marker(&aug.image, aug.pixels[0], &settings.marker)?
        };
        for (o, t) in q.iter().zip(&aug.pixels) {
            query_pixels.push(QueryPixel { original: *o, transformed: *t });
        }
        images.push(rendered);
        transforms.push(aug.transform);
        intrinsics.push(aug.intrinsics);
    }

    let ctx = QuestionContext {
        dims: Some(ImageDims::of(&images[0])),
        pixel: query_pixels.first().map(|q| q.transformed),
        intrinsics: Some(intrinsics[0]),
        given_time: truth.given_time,
        given_speed: truth.given_speed,
        labels: (task == TaskKind::TwoPointDistance).then(|| (MARKER_LABELS[0].to_string(), MARKER_LABELS[1].to_string())),
    };
    let question = build_question(&settings.templates, task, settings.variant, &ctx)?;
    let angles = query_pixels.first().map(|q| ray_angles(q.transformed, &intrinsics[0]));
    let answer = build_answer(&settings.templates, task, settings.variant, AnswerValues { value: truth.value, angles })?;

    let sample_ids: Vec<String> = frames.iter().map(|f| f.id.clone()).collect();
    Ok(QaRecord {
        id: alloc::format!("{}:{}", sample_ids.join("+"), task.name()),
        task,
        variant: settings.variant,
        images,
        question,
        answer,
        gt_value: truth.value,
        unit: task.unit(),
        query_pixels,
        sample_ids,
        dataset: frames[0].dataset.clone(),
        given_time: truth.given_time,
        given_speed: truth.given_speed,
        transforms,
        intrinsics,
        seed,
    })
}

/// Pose-pair admissibility: camera displacement within `[min, max]` meters.
pub fn admissible_pose_pair(a: &Frame, b: &Frame, (min, max): (f64, f64)) -> bool {
    match (a.pose, b.pose) {
        (Some(pa), Some(pb)) => {
            let d = pose_truth(&pa, &pb);
            d >= min && d <= max
        }
        _ => false,
    }
}

pub const POSE_PAIR_RANGE: (f64, f64) = (0.5, 50.0);

#[doc(hidden)]
pub fn flat_frame(id: &str, w: u32, h: u32, depth: f64, k: Intrinsics) -> Frame {
    Frame {
        id: id.into(),
        dataset: "test".into(),
        image: RgbImage::new(w, h, [40, 80, 120]),
        depth: DepthMap::filled(w, h, depth),
        intrinsics: k,
        pose: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::rng::seeded;

    fn k() -> Intrinsics {
        Intrinsics::new(1000.0, 1000.0, 64.0, 48.0).unwrap()
    }

    fn settings(variant: PromptVariant) -> QaSettings {
        QaSettings::new(TemplateTable::builtin(), AugmentConfig::default().for_evaluation(), MarkerSpec::default(), variant)
    }

    #[test]
    fn query_sampling() {
        let d = DepthMap::filled(10, 10, 2.0);
        let a = sample_query_pixels(&d, 1, &mut seeded(5)).unwrap();
        let b = sample_query_pixels(&d, 1, &mut seeded(5)).unwrap();
        assert_eq!(a, b);

        let mut vals = vec![0.0; 16];
        vals[1] = 1.0;
        vals[6] = 2.0;
        vals[15] = 3.0;
        let d = DepthMap::from_meters(4, 4, vals, 300.0).unwrap();
        let mut got = sample_query_pixels(&d, 3, &mut seeded(1)).unwrap();
        got.sort_by(|a, b| (a.v, a.u).partial_cmp(&(b.v, b.u)).unwrap());
        assert_eq!(got, [Pixel::new(1.0, 0.0), Pixel::new(2.0, 1.0), Pixel::new(3.0, 3.0)]);

        let mut vals = vec![0.0; 16];
        vals[0] = 1.0;
        vals[3] = 1.0;
        let d = DepthMap::from_meters(4, 4, vals, 300.0).unwrap();
        assert_eq!(
            sample_query_pixels(&d, 4, &mut seeded(1)),
            Err(Error::InsufficientPixels { needed: 4, available: 2 })
        );
    }

    #[test]
    fn derived_task_arithmetic() {
        assert_eq!(speed_truth(10.0, 5.0), 2.0);
        assert_eq!(time_truth(10.0, 4.0), 2.5);
        assert_eq!(two_point_truth(&Point3::new(0.0, 0.0, 1.0), &Point3::new(0.0, 0.0, 3.0)), 2.0);
        let a = Pose::IDENTITY;
        let b = Pose::from_rotation_translation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [3.0, 4.0, 0.0]);
        assert_eq!(pose_truth(&a, &b), 5.0);
    }

    #[test]
    fn distance_record() {
        let f = flat_frame("s0", 128, 96, 4.0, k());
        let rec = make_qa(&settings(PromptVariant::MarkerPlain), &[&f], TaskKind::Distance, &[Pixel::new(64.0, 48.0)], 1, &mut seeded(1)).unwrap();
        assert_eq!(rec.gt_value, 4.0);
        assert_eq!(rec.question, "How many meters is this point from the camera?");
        assert_eq!(rec.answer, "The point is around 4.00 meters away from the camera.");
        assert_eq!(rec.images.len(), 1);
        assert_ne!(rec.images[0], f.image);
    }

    #[test]
    fn distance_exceeds_principal_axis() {
        let f = flat_frame("s0", 128, 96, 4.0, k());
        let s = settings(PromptVariant::MarkerPlain);
        let p = [Pixel::new(10.0, 20.0)];
        let d = make_qa(&s, &[&f], TaskKind::Distance, &p, 0, &mut seeded(0)).unwrap().gt_value;
        let z = make_qa(&s, &[&f], TaskKind::PrincipalAxisDistance, &p, 0, &mut seeded(0)).unwrap().gt_value;
        assert!(d > z);
    }

    #[test]
    fn speed_and_time_records() {
        let f = flat_frame("s0", 128, 96, 4.0, k());
        let s = settings(PromptVariant::MarkerPlain);
        let p = [Pixel::new(64.0, 48.0)];
        let rec = make_qa(&s, &[&f], TaskKind::Speed, &p, 0, &mut seeded(3)).unwrap();
        let t = rec.given_time.unwrap();
        assert!((2.0..=20.0).contains(&t));
        assert!((rec.gt_value * t - 4.0).abs() < 1e-9);
        assert!(rec.question.contains(&alloc::format!("{t:.1} seconds")));
        let rec = make_qa(&s, &[&f], TaskKind::Time, &p, 0, &mut seeded(3)).unwrap();
        let v = rec.given_speed.unwrap();
        assert!((0.5..=10.0).contains(&v));
        assert!((rec.gt_value * v - 4.0).abs() < 1e-9);
    }

    #[test]
    fn two_point_record_has_two_labeled_markers() {
        let f = flat_frame("s0", 200, 150, 3.0, Intrinsics::new(1000.0, 1000.0, 100.0, 75.0).unwrap());
        let s = settings(PromptVariant::MarkerPlain);
        let rec = make_qa(&s, &[&f], TaskKind::TwoPointDistance, &[Pixel::new(50.0, 60.0), Pixel::new(150.0, 100.0)], 0, &mut seeded(0)).unwrap();
        assert_eq!(rec.query_pixels.len(), 2);
        assert_eq!(rec.question, "How many meters apart are the points marked A and B?");
        let a = back_project(Pixel::new(50.0, 60.0), 3.0, &f.intrinsics).unwrap();
        let b = back_project(Pixel::new(150.0, 100.0), 3.0, &f.intrinsics).unwrap();
        assert!((rec.gt_value - a.distance(&b)).abs() < 1e-12);
    }

    #[test]
    fn pose_requires_poses() {
        let a = flat_frame("a", 64, 48, 3.0, k());
        let b = flat_frame("b", 64, 48, 3.0, k());
        let s = settings(PromptVariant::MarkerPlain);
        assert_eq!(make_qa(&s, &[&a, &b], TaskKind::Pose, &[], 0, &mut seeded(0)).unwrap_err(), Error::MissingPose("pose"));
        let mut a = a;
        let mut b = b;
        a.pose = Some(Pose::IDENTITY);
        b.pose = Some(Pose::from_rotation_translation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [3.0, 4.0, 0.0]));
        let rec = make_qa(&s, &[&a, &b], TaskKind::Pose, &[], 0, &mut seeded(0)).unwrap();
        assert_eq!(rec.gt_value, 5.0);
        assert_eq!(rec.images.len(), 2);
        assert_eq!(rec.answer, "The camera has moved around 5.00 meters.");
    }

    #[test]
    fn invalid_query_pixel_is_resampled() {
        let mut f = flat_frame("s0", 32, 32, 2.0, Intrinsics::new(1000.0, 1000.0, 16.0, 16.0).unwrap());
        f.depth.set_invalid(5, 5);
        let s = settings(PromptVariant::MarkerPlain);
        let rec = make_qa(&s, &[&f], TaskKind::Distance, &[Pixel::new(5.0, 5.0)], 0, &mut seeded(0)).unwrap();
        assert_ne!(rec.query_pixels[0].original, Pixel::new(5.0, 5.0));

        let mut dead = f.clone();
        dead.depth = DepthMap::from_meters(32, 32, vec![0.0; 1024], 300.0).unwrap();
        assert!(make_qa(&s, &[&dead], TaskKind::Distance, &[], 0, &mut seeded(0)).is_err());
    }

    #[test]
    fn unsupported_variant_for_task() {
        let f = flat_frame("s0", 32, 32, 2.0, k());
        let s = settings(PromptVariant::TextCoordinate);
        assert!(matches!(make_qa(&s, &[&f], TaskKind::Speed, &[], 0, &mut seeded(0)), Err(Error::UnsupportedTask { .. })));
    }
}
