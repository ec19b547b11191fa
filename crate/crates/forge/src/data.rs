//! Manifest ingestion, depth/image file formats, SFT export and synthetic
//! dataset materialisation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use forge_core::augment::PixelTransform;
use forge_core::image::{DepthMap, RgbImage};
use forge_core::prompts::PromptVariant;
use forge_core::synth::{self, SynthConfig};
use forge_core::tasks::{Frame, QaRecord, QueryPixel, TaskKind};
use forge_core::{Intrinsics, Pose};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{ForgeError, Result};

pub const SCHEMA_VERSION: &str = "1";
pub const DEFAULT_MAX_DEPTH: f64 = 300.0;
pub const DEFAULT_DEPTH_SCALE: f64 = 0.001;
pub const POSE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthEncoding {
    /// 16-bit grayscale PNG.
    #[default]
    Png16,
    /// Portable float map, single channel.
    Pfm,
    /// Two-dimensional `.npy` array (`<f4`, `<f8` or `<u2`).
    Npy,
}

impl DepthEncoding {
    pub fn extension(&self) -> &'static str {
        match self {
            DepthEncoding::Png16 => "png",
            DepthEncoding::Pfm => "pfm",
            DepthEncoding::Npy => "npy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub schema_version: String,
    pub id: String,
    pub image_path: String,
    pub depth_path: String,
    pub depth_encoding: DepthEncoding,
    /// Meters per stored unit.
    pub depth_scale: f64,
    pub intrinsics: Intrinsics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    pub dataset: String,
    pub split: Split,
    /// Groups frames of one sequence; frames sharing a scene can form pose pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
}

const FIELDS: [&str; 11] = [
    "schema_version",
    "id",
    "image_path",
    "depth_path",
    "depth_encoding",
    "depth_scale",
    "intrinsics",
    "pose",
    "dataset",
    "split",
    "scene",
];

#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    /// Relative entry paths resolve against this directory.
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> ForgeError {
        ForgeError::Manifest { path: self.path.to_path_buf(), line: self.line, field: field.to_owned(), message: message.into() }
    }

    fn required<T: DeserializeOwned>(&self, obj: &Map<String, Value>, field: &str) -> Result<T> {
        match obj.get(field) {
            None | Some(Value::Null) => Err(self.err(field, "missing")),
            Some(v) => T::deserialize(v).map_err(|e| self.err(field, e.to_string())),
        }
    }

    fn optional<T: DeserializeOwned>(&self, obj: &Map<String, Value>, field: &str) -> Result<Option<T>> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => T::deserialize(v).map(Some).map_err(|e| self.err(field, e.to_string())),
        }
    }
}

fn parse_entry(ctx: &LineCtx, text: &str) -> Result<ManifestEntry> {
    let value: Value = serde_json::from_str(text).map_err(|e| ctx.err("<line>", format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(ctx.err("<line>", "expected a JSON object"));
    };
    if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(ctx.err(k, "unknown field"));
    }
    let schema_version: String = ctx.required(&obj, "schema_version")?;
    if schema_version != SCHEMA_VERSION {
        return Err(ctx.err("schema_version", format!("unsupported version {schema_version:?}, expected {SCHEMA_VERSION:?}")));
    }
    let entry = ManifestEntry {
        schema_version,
        id: ctx.required(&obj, "id")?,
        image_path: ctx.required(&obj, "image_path")?,
        depth_path: ctx.required(&obj, "depth_path")?,
        depth_encoding: ctx.optional(&obj, "depth_encoding")?.unwrap_or_default(),
        depth_scale: ctx.optional(&obj, "depth_scale")?.unwrap_or(DEFAULT_DEPTH_SCALE),
        intrinsics: ctx.required(&obj, "intrinsics")?,
        pose: ctx.optional(&obj, "pose")?,
        dataset: ctx.required(&obj, "dataset")?,
        split: ctx.required(&obj, "split")?,
        scene: ctx.optional(&obj, "scene")?,
    };
    for (field, v) in [("id", &entry.id), ("image_path", &entry.image_path), ("depth_path", &entry.depth_path), ("dataset", &entry.dataset)] {
        if v.trim().is_empty() {
            return Err(ctx.err(field, "must be non-empty"));
        }
    }
    if !(entry.depth_scale.is_finite() && entry.depth_scale > 0.0) {
        return Err(ctx.err("depth_scale", format!("must be positive, got {}", entry.depth_scale)));
    }
    entry.intrinsics.validate().map_err(|e| ctx.err("intrinsics", e.to_string()))?;
    if let Some(pose) = &entry.pose {
        pose.validate(POSE_TOLERANCE).map_err(|e| ctx.err("pose", e.to_string()))?;
    }
    Ok(entry)
}

/// Loads and validates a JSONL manifest. Blank lines are ignored.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = fs::File::open(path).map_err(ForgeError::io(path))?;
    let mut entries = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(ForgeError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = LineCtx { path, line: i + 1 };
        let entry = parse_entry(&ctx, &line)?;
        if let Some(first) = seen.insert(entry.id.clone(), i + 1) {
            return Err(ctx.err("id", format!("duplicate id {:?} (first on line {first})", entry.id)));
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(ForgeError::format(path, "empty manifest"));
    }
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Manifest { path: path.to_path_buf(), base_dir, entries })
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).map_err(|e| ForgeError::Internal(e.to_string()))?);
        out.push('\n');
    }
    fs::write(path, out).map_err(ForgeError::io(path))
}

impl Manifest {
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.dataset.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Entry indices grouped by dataset, in manifest order.
    pub fn by_dataset(&self, split: Option<Split>) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if split.is_none_or(|s| s == e.split) {
                out.entry(e.dataset.clone()).or_default().push(i);
            }
        }
        out
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_frame(&self, index: usize, max_depth: f64) -> Result<Frame> {
        let e = &self.entries[index];
        let image = read_rgb(&self.resolve(&e.image_path))?;
        let depth = read_depth(&self.resolve(&e.depth_path), e.depth_encoding, e.depth_scale, max_depth, Some((image.width(), image.height())))?;
        Ok(Frame { id: e.id.clone(), dataset: e.dataset.clone(), image, depth, intrinsics: e.intrinsics, pose: e.pose })
    }
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| ForgeError::format(path, e.to_string()))?.into_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::from_raw(w, h, img.into_raw())?)
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| ForgeError::Internal(format!("png encode: {e}")))?;
    Ok(out)
}

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    fs::write(path, encode_png(img)?).map_err(ForgeError::io(path))
}

/// Raw stored depth units, row-major.
pub struct RawDepth {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

pub fn read_raw_depth(path: &Path, encoding: DepthEncoding) -> Result<RawDepth> {
    let bytes = fs::read(path).map_err(ForgeError::io(path))?;
    match encoding {
        DepthEncoding::Png16 => {
            let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| ForgeError::format(path, e.to_string()))?;
            let image::DynamicImage::ImageLuma16(buf) = img else {
                return Err(ForgeError::format(path, "png16 depth must be 16-bit single-channel"));
            };
            let (width, height) = buf.dimensions();
            Ok(RawDepth { width, height, values: buf.into_raw().into_iter().map(f64::from).collect() })
        }
        DepthEncoding::Pfm => parse_pfm(&bytes).map_err(|m| ForgeError::format(path, m)),
        DepthEncoding::Npy => parse_npy(&bytes).map_err(|m| ForgeError::format(path, m)),
    }
}

/// Reads a depth file and converts it to meters. Raw zeros, non-finite
/// values and depths beyond `max_depth` are masked.
pub fn read_depth(path: &Path, encoding: DepthEncoding, scale: f64, max_depth: f64, expected: Option<(u32, u32)>) -> Result<DepthMap> {
    let raw = read_raw_depth(path, encoding)?;
    if let Some((w, h)) = expected {
        if (raw.width, raw.height) != (w, h) {
            return Err(ForgeError::format(path, format!("depth is {}x{} but image is {w}x{h}", raw.width, raw.height)));
        }
    }
    let meters = raw.values.into_iter().map(|r| r * scale).collect();
    Ok(DepthMap::from_meters(raw.width, raw.height, meters, max_depth)?)
}

/// Writes depth in meters; masked pixels are stored as 0.
pub fn write_depth(depth: &DepthMap, path: &Path, encoding: DepthEncoding, scale: f64) -> Result<()> {
    let raw: Vec<f64> = depth.values().iter().zip(depth.mask()).map(|(v, ok)| if *ok { v / scale } else { 0.0 }).collect();
    let (w, h) = (depth.width(), depth.height());
    let bytes = match encoding {
        DepthEncoding::Png16 => {
            let mut px = Vec::with_capacity(raw.len());
            for r in &raw {
                let q = r.round();
                if q > u16::MAX as f64 {
                    return Err(ForgeError::format(path, format!("depth {} m exceeds png16 range at scale {scale}", r * scale)));
                }
                px.push(q as u16);
            }
            let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, px).ok_or_else(|| ForgeError::Internal("png16 buffer size".into()))?;
            let mut out = std::io::Cursor::new(Vec::new());
            buf.write_to(&mut out, image::ImageFormat::Png).map_err(|e| ForgeError::format(path, e.to_string()))?;
            out.into_inner()
        }
        DepthEncoding::Pfm => encode_pfm(w, h, &raw),
        DepthEncoding::Npy => encode_npy(w, h, &raw),
    };
    fs::write(path, bytes).map_err(ForgeError::io(path))
}

fn encode_pfm(w: u32, h: u32, raw: &[f64]) -> Vec<u8> {
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for row in (0..h as usize).rev() {
        for v in &raw[row * w as usize..(row + 1) * w as usize] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn pfm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> std::result::Result<&'a str, String> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| "non-ascii PFM header".to_string())
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<RawDepth, String> {
    let mut pos = 0;
    match pfm_token(bytes, &mut pos)? {
        "Pf" => {}
        "PF" => return Err("three-channel PFM is not a depth map".into()),
        other => return Err(format!("bad PFM magic {other:?}")),
    }
    let width: u32 = pfm_token(bytes, &mut pos)?.parse().map_err(|_| "bad PFM width")?;
    let height: u32 = pfm_token(bytes, &mut pos)?.parse().map_err(|_| "bad PFM height")?;
    let scale: f64 = pfm_token(bytes, &mut pos)?.parse().map_err(|_| "bad PFM scale")?;
    pos += 1;
    let n = width as usize * height as usize;
    let data = bytes.get(pos..pos + 4 * n).ok_or("truncated PFM data")?;
    let little = scale < 0.0;
    let mut values = vec![0.0; n];
    for (i, c) in data.chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, col) = (i / width as usize, i % width as usize);
        values[(height as usize - 1 - row) * width as usize + col] = v as f64;
    }
    Ok(RawDepth { width, height, values })
}

fn encode_npy(w: u32, h: u32, raw: &[f64]) -> Vec<u8> {
    let mut header = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({h}, {w}), }}");
    while (10 + header.len() + 1) % 64 != 0 {
        header.push(' ');
    }
    header.push('\n');
    let mut out = b"\x93NUMPY\x01\x00".to_vec();
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in raw {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

fn npy_value<'a>(header: &'a str, key: &str) -> std::result::Result<&'a str, String> {
    let at = header.find(&format!("'{key}'")).ok_or_else(|| format!("npy header lacks {key}"))?;
    let rest = header[at + key.len() + 2..].trim_start().trim_start_matches(':').trim_start();
    Ok(rest)
}

fn parse_npy(bytes: &[u8]) -> std::result::Result<RawDepth, String> {
    if bytes.len() < 10 || &bytes[..6] != b"\x93NUMPY" {
        return Err("bad npy magic".into());
    }
    let (hlen, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => (u32::from_le_bytes(bytes.get(8..12).ok_or("truncated npy")?.try_into().unwrap()) as usize, 12),
        v => return Err(format!("unsupported npy version {v}")),
    };
    let header = std::str::from_utf8(bytes.get(start..start + hlen).ok_or("truncated npy header")?).map_err(|_| "non-utf8 npy header")?;
    let descr = npy_value(header, "descr")?;
    let descr = descr.split('\'').nth(1).ok_or("bad npy descr")?;
    if npy_value(header, "fortran_order")?.starts_with("True") {
        return Err("fortran-order npy is not supported".into());
    }
    let shape = npy_value(header, "shape")?;
    let dims: Vec<usize> = shape
        .trim_start_matches('(')
        .split(')')
        .next()
        .unwrap_or("")
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| format!("bad npy shape {shape:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let [height, width] = dims[..] else {
        return Err(format!("npy depth must be 2-D, got shape {dims:?}"));
    };
    let n = width * height;
    let data = &bytes[start + hlen..];
    let values: Vec<f64> = match descr {
        "<f4" => data.get(..4 * n).ok_or("truncated npy data")?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        "<f8" => data.get(..8 * n).ok_or("truncated npy data")?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        "<u2" => data.get(..2 * n).ok_or("truncated npy data")?.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as f64).collect(),
        other => return Err(format!("unsupported npy dtype {other}")),
    };
    Ok(RawDepth { width: width as u32, height: height as u32, values })
}

#[derive(Debug, Clone, Serialize)]
struct SftMeta<'a> {
    variant: PromptVariant,
    seed: u64,
    dataset: &'a str,
    sample_ids: &'a [String],
    query_pixels: &'a [QueryPixel],
    transforms: &'a [PixelTransform],
    intrinsics: &'a [Intrinsics],
    given_time: Option<f64>,
    given_speed: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct SftLine<'a> {
    schema_version: &'static str,
    id: &'a str,
    task: TaskKind,
    image_files: Vec<String>,
    question: &'a str,
    answer: &'a str,
    gt_value: f64,
    unit: &'a str,
    meta: SftMeta<'a>,
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

/// Writes `out_dir/<name>` (one record per line) and the rendered images
/// under `out_dir/images/`.
pub fn export_sft(records: &[QaRecord], out_dir: &Path, name: &str) -> Result<PathBuf> {
    let img_dir = out_dir.join("images");
    fs::create_dir_all(&img_dir).map_err(ForgeError::io(&img_dir))?;
    let mut used = BTreeSet::new();
    let mut text = String::new();
    for r in records {
        let mut files = Vec::with_capacity(r.images.len());
        for (i, img) in r.images.iter().enumerate() {
            let rel = format!("images/{}_{i}.png", file_stem(&r.id));
            if !used.insert(rel.clone()) {
                return Err(ForgeError::format(out_dir, format!("image filename collision on {rel} (record {:?})", r.id)));
            }
            write_png(img, &out_dir.join(&rel))?;
            files.push(rel);
        }
        let line = SftLine {
            schema_version: SCHEMA_VERSION,
            id: &r.id,
            task: r.task,
            image_files: files,
            question: &r.question,
            answer: &r.answer,
            gt_value: r.gt_value,
            unit: r.unit,
            meta: SftMeta {
                variant: r.variant,
                seed: r.seed,
                dataset: &r.dataset,
                sample_ids: &r.sample_ids,
                query_pixels: &r.query_pixels,
                transforms: &r.transforms,
                intrinsics: &r.intrinsics,
                given_time: r.given_time,
                given_speed: r.given_speed,
            },
        };
        text.push_str(&serde_json::to_string(&line).map_err(|e| ForgeError::Internal(e.to_string()))?);
        text.push('\n');
    }
    let path = out_dir.join(name);
    fs::write(&path, text).map_err(ForgeError::io(&path))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthDataset {
    pub dataset: String,
    pub scenes: usize,
    pub split: Split,
    pub encoding: DepthEncoding,
    pub depth_scale: f64,
    pub scene: SynthConfig,
}

impl Default for SynthDataset {
    fn default() -> Self {
        Self {
            dataset: "synthetic".into(),
            scenes: 16,
            split: Split::Eval,
            // png16 at millimeter scale tops out at 65.5 m.
            encoding: DepthEncoding::Pfm,
            depth_scale: 1.0,
            scene: SynthConfig::default(),
        }
    }
}

/// Renders synthetic scenes to `out_dir` and returns the manifest entries.
pub fn write_synthetic(spec: &SynthDataset, seed: u64, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    for sub in ["images", "depth"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(ForgeError::io(&d))?;
    }
    let frames = synth::generate(&spec.scene, &spec.dataset, spec.scenes, seed)?;
    let mut entries = Vec::with_capacity(frames.len());
    for sf in frames {
        let f = &sf.frame;
        let image_path = format!("images/{}.png", file_stem(&f.id));
        let depth_path = format!("depth/{}.{}", file_stem(&f.id), spec.encoding.extension());
        write_png(&f.image, &out_dir.join(&image_path))?;
        write_depth(&f.depth, &out_dir.join(&depth_path), spec.encoding, spec.depth_scale)?;
        entries.push(ManifestEntry {
            schema_version: SCHEMA_VERSION.into(),
            id: f.id.clone(),
            image_path,
            depth_path,
            depth_encoding: spec.encoding,
            depth_scale: spec.depth_scale,
            intrinsics: f.intrinsics,
            pose: (spec.scene.frames_per_scene > 1).then_some(f.pose).flatten(),
            dataset: f.dataset.clone(),
            split: spec.split,
            scene: (spec.scene.frames_per_scene > 1).then(|| sf.scene.clone()),
        });
    }
    Ok(entries)
}
