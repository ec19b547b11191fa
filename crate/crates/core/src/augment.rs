//! Intrinsic-conditioned augmentation.
//!
//! Every image is resampled so that its focal length becomes a shared
//! constant `f_uni`, which removes the camera-scale ambiguity between
//! datasets. Training additionally takes a random crop whose size varies per
//! sample; evaluation skips the crop.
//!
//! Pixel coordinates map by `u' = u * scale_x - offset_x` with
//! `scale_x = f_uni / fx` exactly. The output raster size is rounded, but the
//! coordinate mapping is not, so the back-projected 3D point of any tracked
//! pixel is unchanged by augmentation.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pixel};
use crate::image::RgbImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Degenerate(format!("image dims {width}x{height}")));
        }
        Ok(Self { width, height })
    }

    pub fn of(image: &RgbImage) -> Self {
        Self { width: image.width(), height: image.height() }
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.is_inside(self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Unified focal length in pixels.
    pub f_uni: f64,
    /// Inclusive crop width range.
    pub crop_width_range: (u32, u32),
    /// Inclusive crop height range.
    pub crop_height_range: (u32, u32),
    pub crop_enabled: bool,
    /// Reject images whose unified size exceeds this many pixels on a side.
    pub max_dim: Option<u32>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            f_uni: 1000.0,
            crop_width_range: (1000, 1400),
            crop_height_range: (700, 1200),
            crop_enabled: true,
            max_dim: Some(4096),
        }
    }
}

impl AugmentConfig {
    /// Same settings with cropping turned off, as used for evaluation.
    pub fn for_evaluation(&self) -> Self {
        Self { crop_enabled: false, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_uni.is_finite() && self.f_uni > 0.0) {
            return Err(Error::InvalidConfig(format!("f_uni must be positive, got {}", self.f_uni)));
        }
        for (name, (lo, hi)) in [("crop_width_range", self.crop_width_range), ("crop_height_range", self.crop_height_range)] {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidConfig(format!("{name} must satisfy 1 <= min <= max, got [{lo}, {hi}]")));
            }
        }
        if self.max_dim == Some(0) {
            return Err(Error::InvalidConfig("max_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Resize followed by crop, as a per-axis affine map on pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelTransform {
    pub scale_x: f64,
    pub scale_y: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl PixelTransform {
    pub const IDENTITY: PixelTransform = PixelTransform { scale_x: 1.0, scale_y: 1.0, offset_x: 0.0, offset_y: 0.0 };

    pub fn apply(&self, p: Pixel) -> Pixel {
        Pixel::new(p.u * self.scale_x - self.offset_x, p.v * self.scale_y - self.offset_y)
    }

    pub fn invert(&self, p: Pixel) -> Pixel {
        Pixel::new((p.u + self.offset_x) / self.scale_x, (p.v + self.offset_y) / self.scale_y)
    }

    pub fn with_crop(&self, crop: &CropRect) -> PixelTransform {
        PixelTransform {
            offset_x: self.offset_x + crop.x as f64,
            offset_y: self.offset_y + crop.y as f64,
            ..*self
        }
    }
}

pub fn transform_pixel(p: Pixel, t: &PixelTransform) -> Pixel {
    t.apply(p)
}

pub fn inverse_transform_pixel(p: Pixel, t: &PixelTransform) -> Pixel {
    t.invert(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

fn round_half_up(x: f64) -> f64 {
    libm::floor(x + 0.5)
}

/// Resample geometry so both focal lengths equal `f_uni`.
pub fn unify_focal(dims: ImageDims, k: &Intrinsics, f_uni: f64) -> Result<(ImageDims, Intrinsics, PixelTransform)> {
    k.validate()?;
    if !(f_uni.is_finite() && f_uni > 0.0) {
        return Err(Error::InvalidConfig(format!("f_uni must be positive, got {f_uni}")));
    }
    let scale_x = f_uni / k.fx;
    let scale_y = f_uni / k.fy;
    let w = round_half_up(scale_x * dims.width as f64);
    let h = round_half_up(scale_y * dims.height as f64);
    if !(w >= 1.0 && h >= 1.0) || w > u32::MAX as f64 || h > u32::MAX as f64 {
        return Err(Error::Degenerate(format!(
            "unifying focal {}x{} (fx={}, fy={}) to {f_uni} gives {w}x{h}",
            dims.width, dims.height, k.fx, k.fy
        )));
    }
    let new_dims = ImageDims { width: w as u32, height: h as u32 };
    let new_k = Intrinsics { fx: f_uni, fy: f_uni, cx: k.cx * scale_x, cy: k.cy * scale_y };
    Ok((new_dims, new_k, PixelTransform { scale_x, scale_y, offset_x: 0.0, offset_y: 0.0 }))
}

/// Inclusive range `[lo, hi]` intersected with `[1, limit]`.
fn clamp_range((lo, hi): (u32, u32), limit: u32) -> (u32, u32) {
    (lo.min(limit).max(1), hi.min(limit).max(1))
}

/// Admissible origins `[lo, hi]` along one axis for a window of `size`
/// inside `extent` that must contain coordinates `[min, max]`.
fn origin_range(size: u32, extent: u32, span: Option<(f64, f64)>) -> Option<(u32, u32)> {
    let mut lo = 0i64;
    let mut hi = extent as i64 - size as i64;
    if let Some((min, max)) = span {
        lo = lo.max(libm::ceil(max - (size as f64 - 1.0)) as i64);
        hi = hi.min(libm::floor(min) as i64);
    }
    (lo <= hi).then_some((lo as u32, hi as u32))
}

fn minimal_size(span: Option<(f64, f64)>) -> u32 {
    match span {
        Some((min, max)) => (libm::ceil(max - libm::floor(min)) as u32) + 1,
        None => 1,
    }
}

/// Random crop of `dims` whose size is drawn from the configured ranges
/// (intersected with the image) and whose origin keeps every pixel of
/// `must_contain` inside the crop.
pub fn sample_crop<R: rand::Rng + ?Sized>(
    rng: &mut R,
    dims: ImageDims,
    cfg: &AugmentConfig,
    must_contain: &[Pixel],
) -> Result<CropRect> {
    cfg.validate()?;
    if let Some(p) = must_contain.iter().find(|p| !dims.contains(**p)) {
        return Err(Error::OutOfBounds { u: p.u, v: p.v, width: dims.width, height: dims.height });
    }
    let span = |f: fn(&Pixel) -> f64| {
        must_contain.iter().map(f).fold(None, |acc: Option<(f64, f64)>, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
        })
    };
    let span_x = span(|p| p.u);
    let span_y = span(|p| p.v);

    let (wlo, whi) = clamp_range(cfg.crop_width_range, dims.width);
    let (hlo, hhi) = clamp_range(cfg.crop_height_range, dims.height);
    let mut width = rng.random_range(wlo..=whi);
    let mut height = rng.random_range(hlo..=hhi);
    width = width.max(minimal_size(span_x).min(dims.width));
    height = height.max(minimal_size(span_y).min(dims.height));

    let (xlo, xhi) = origin_range(width, dims.width, span_x)
        .ok_or_else(|| Error::Degenerate("no crop origin contains all query pixels".into()))?;
    let (ylo, yhi) = origin_range(height, dims.height, span_y)
        .ok_or_else(|| Error::Degenerate("no crop origin contains all query pixels".into()))?;
    let x = rng.random_range(xlo..=xhi);
    let y = rng.random_range(ylo..=yhi);
    Ok(CropRect { x, y, width, height })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub image: RgbImage,
    pub intrinsics: Intrinsics,
    pub pixels: Vec<Pixel>,
    pub transform: PixelTransform,
    pub crop: Option<CropRect>,
}

/// Unified-size dims and transform for an image, with the `max_dim` guard.
pub fn plan_unify(dims: ImageDims, k: &Intrinsics, cfg: &AugmentConfig) -> Result<(ImageDims, Intrinsics, PixelTransform)> {
    let (new_dims, new_k, t) = unify_focal(dims, k, cfg.f_uni)?;
    if let Some(limit) = cfg.max_dim {
        if new_dims.width > limit || new_dims.height > limit {
            return Err(Error::Degenerate(format!(
                "unified size {}x{} exceeds max_dim {limit}",
                new_dims.width, new_dims.height
            )));
        }
    }
    Ok((new_dims, new_k, t))
}

/// Resize to the unified focal length, optionally random-crop, and carry the
/// query pixels and intrinsics through the same transform.
///
/// Query pixels must land inside the resized raster; pixels in the last
/// fractional column/row of a downscaled image do not and are rejected.
pub fn apply_augment<R: rand::Rng + ?Sized>(
    image: &RgbImage,
    k: &Intrinsics,
    query: &[Pixel],
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Augmented> {
    cfg.validate()?;
    let dims = ImageDims::of(image);
    if let Some(p) = query.iter().find(|p| !dims.contains(**p)) {
        return Err(Error::OutOfBounds { u: p.u, v: p.v, width: dims.width, height: dims.height });
    }
    let (resized_dims, mut new_k, mut transform) = plan_unify(dims, k, cfg)?;
    let mut pixels: Vec<Pixel> = query.iter().map(|p| transform.apply(*p)).collect();
    if let Some(p) = pixels.iter().find(|p| !resized_dims.contains(**p)) {
        return Err(Error::OutOfBounds { u: p.u, v: p.v, width: resized_dims.width, height: resized_dims.height });
    }

    let resized = if resized_dims == dims && transform.scale_x == 1.0 && transform.scale_y == 1.0 {
        image.clone()
    } else {
        image.resize_bilinear(resized_dims.width, resized_dims.height, transform.scale_x, transform.scale_y)
    };

    if !cfg.crop_enabled {
        return Ok(Augmented { image: resized, intrinsics: new_k, pixels, transform, crop: None });
    }

    let crop = sample_crop(rng, resized_dims, cfg, &pixels)?;
    let out = resized.crop(crop.x, crop.y, crop.width, crop.height)?;
    transform = transform.with_crop(&crop);
    new_k.cx -= crop.x as f64;
    new_k.cy -= crop.y as f64;
    for p in pixels.iter_mut() {
        p.u -= crop.x as f64;
        p.v -= crop.y as f64;
    }
    Ok(Augmented { image: out, intrinsics: new_k, pixels, transform, crop: Some(crop) })
}

/// True when `p` in the original image maps inside the unified raster.
pub fn survives_unify(p: Pixel, plan: &(ImageDims, Intrinsics, PixelTransform)) -> bool {
    plan.0.contains(plan.2.apply(p))
}
