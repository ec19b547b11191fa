//! Metric point clouds from per-pixel distance answers.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::augment::ImageDims;
use crate::error::{Error, Result};
use crate::geometry::{back_project, principal_from_euclid, Intrinsics, Pixel, Point3};
use crate::image::RgbImage;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub pixels: Vec<Pixel>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(Error::LengthMismatch { expected: self.points.len(), got: c.len() });
            }
        }
        if self.points.iter().any(|p| !(p.z > 0.0)) {
            return Err(Error::Domain("point cloud contains points with z <= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    #[default]
    Image,
    Depth,
}

/// Roughly `n` pixel-cell centers on a uniform lattice.
pub fn grid_pixels(dims: ImageDims, n: usize) -> Result<Vec<Pixel>> {
    let (w, h) = (dims.width as f64, dims.height as f64);
    if n == 0 {
        return Err(Error::Domain("grid needs at least one pixel"));
    }
    if n as f64 > w * h {
        return Err(Error::Domain("grid larger than the image"));
    }
    let rows = libm::round(libm::sqrt(n as f64 * h / w)).clamp(1.0, h);
    let cols = libm::round(n as f64 / rows).clamp(1.0, w);
    let (rows, cols) = (rows as usize, cols as usize);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let v = (r as f64 + 0.5) * h / rows as f64;
        for c in 0..cols {
            out.push(Pixel::new((c as f64 + 0.5) * w / cols as f64, v));
        }
    }
    Ok(out)
}

/// Per-pixel answer: euclidean distance in meters, or `None` when the
/// query failed.
pub type Answer = (Pixel, Option<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub cloud: PointCloud,
    pub failures: usize,
}

/// Converts each euclidean answer to principal-axis depth and back-projects.
pub fn assemble(image: &RgbImage, k: &Intrinsics, answers: &[Answer], mode: ColorMode) -> Result<Assembly> {
    let mut cloud = PointCloud::default();
    let mut colors = Vec::new();
    let mut failures = 0;
    for (p, answer) in answers {
        let Some(d) = answer.filter(|d| d.is_finite() && *d > 0.0) else {
            failures += 1;
            continue;
        };
        let z = principal_from_euclid(*p, d, k)?;
        cloud.points.push(back_project(*p, z, k)?);
        cloud.pixels.push(*p);
        let (x, y) = p.cell(image.width(), image.height()).unwrap_or((
            libm::round(p.u).clamp(0.0, image.width() as f64 - 1.0) as u32,
            libm::round(p.v).clamp(0.0, image.height() as f64 - 1.0) as u32,
        ));
        colors.push(image.get(x, y));
    }
    if mode == ColorMode::Depth {
        colors = depth_colors(&cloud.points);
    }
    cloud.colors = Some(colors);
    Ok(Assembly { cloud, failures })
}

/// Blue (near) to red (far) ramp over log depth.
pub fn depth_colors(points: &[Point3]) -> Vec<[u8; 3]> {
    let logs: Vec<f64> = points.iter().map(|p| libm::log(p.z)).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    logs.iter()
        .map(|l| {
            let t = ((l - lo) / span).clamp(0.0, 1.0);
            let r = (255.0 * libm::fmin(1.0, libm::fmax(0.0, 1.5 - libm::fabs(4.0 * t - 3.0)))) as u8;
            let g = (255.0 * libm::fmin(1.0, libm::fmax(0.0, 1.5 - libm::fabs(4.0 * t - 2.0)))) as u8;
            let b = (255.0 * libm::fmin(1.0, libm::fmax(0.0, 1.5 - libm::fabs(4.0 * t - 1.0)))) as u8;
            [r, g, b]
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = grid_pixels(ImageDims { width: 100, height: 100 }, 4).unwrap();
        assert_eq!(g, [Pixel::new(25.0, 25.0), Pixel::new(75.0, 25.0), Pixel::new(25.0, 75.0), Pixel::new(75.0, 75.0)]);
        let g = grid_pixels(ImageDims { width: 1600, height: 1200 }, 10_000).unwrap();
        assert_eq!(g.len(), 10_005);
        let g = grid_pixels(ImageDims { width: 64, height: 48 }, 1).unwrap();
        assert_eq!(g, [Pixel::new(32.0, 24.0)]);
        assert!(grid_pixels(ImageDims { width: 4, height: 4 }, 17).is_err());
        assert!(grid_pixels(ImageDims { width: 4, height: 4 }, 0).is_err());
    }

    #[test]
    fn assemble_examples() {
        let img = RgbImage::new(2001, 1001, [7, 8, 9]);
        let k = Intrinsics::new(1000.0, 1000.0, 500.0, 500.0).unwrap();
        let a = assemble(
            &img,
            &k,
            &[(Pixel::new(500.0, 500.0), Some(2.0)), (Pixel::new(1500.0, 500.0), Some(core::f64::consts::SQRT_2)), (Pixel::new(3.0, 3.0), None)],
            ColorMode::Image,
        )
        .unwrap();
        assert_eq!(a.failures, 1);
        assert_eq!(a.cloud.points[0], Point3::new(0.0, 0.0, 2.0));
        let p = a.cloud.points[1];
        assert!((p.x - 1.0).abs() < 1e-12 && p.y.abs() < 1e-12 && (p.z - 1.0).abs() < 1e-12);
        assert_eq!(a.cloud.colors.as_ref().unwrap()[0], [7, 8, 9]);
        assert!(a.cloud.validate().is_ok());
    }

    #[test]
    fn failures_are_counted() {
        let img = RgbImage::new(100, 100, [0, 0, 0]);
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0).unwrap();
        let grid = grid_pixels(ImageDims { width: 100, height: 100 }, 10_000).unwrap();
        let answers: Vec<Answer> = grid.iter().enumerate().map(|(i, p)| (*p, (i % 3333 != 7).then_some(2.0))).collect();
        let a = assemble(&img, &k, &answers, ColorMode::Depth).unwrap();
        assert_eq!(a.failures, 3);
        assert_eq!(a.cloud.len(), 9_997);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
