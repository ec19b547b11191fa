//! Minimal owned raster types: packed RGB8 images and metric depth maps.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..(width as usize * height as usize) {
            data.extend_from_slice(&fill);
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Degenerate("image dimensions must be at least 1".into()));
        }
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::LengthMismatch {
                expected: width as usize * height as usize * 3,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Bilinear resample to `out_w` x `out_h` where output pixel `(x, y)`
    /// reads source position `(x / scale_x, y / scale_y)`, clamped to the
    /// source grid.
    pub fn resize_bilinear(&self, out_w: u32, out_h: u32, scale_x: f64, scale_y: f64) -> RgbImage {
        let mut out = RgbImage::new(out_w, out_h, [0, 0, 0]);
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let taps_x: Vec<(u32, u32, f64)> = (0..out_w)
            .map(|x| linear_taps(x as f64 / scale_x, max_x))
            .collect();
        for y in 0..out_h {
            let (y0, y1, fy) = linear_taps(y as f64 / scale_y, max_y);
            for (x, &(x0, x1, fx)) in taps_x.iter().enumerate() {
                let a = self.get(x0, y0);
                let b = self.get(x1, y0);
                let c = self.get(x0, y1);
                let d = self.get(x1, y1);
                let mut px = [0u8; 3];
                for ch in 0..3 {
                    let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
                    let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
                    let val = top * (1.0 - fy) + bottom * fy;
                    px[ch] = libm::round(val).clamp(0.0, 255.0) as u8;
                }
                out.put(x as u32, y, px);
            }
        }
        out
    }

    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Result<RgbImage> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Degenerate("crop rectangle outside image".into()));
        }
        let mut data = Vec::with_capacity(w as usize * h as usize * 3);
        for y in y0..y0 + h {
            let start = self.offset(x0, y);
            data.extend_from_slice(&self.data[start..start + w as usize * 3]);
        }
        Ok(RgbImage { width: w, height: h, data })
    }
}

fn linear_taps(pos: f64, max: f64) -> (u32, u32, f64) {
    let p = pos.clamp(0.0, max);
    let i0 = libm::floor(p);
    let i1 = if i0 + 1.0 > max { i0 } else { i0 + 1.0 };
    (i0 as u32, i1 as u32, p - i0)
}

/// Principal-axis depth in meters with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a map from meters; entries that are non-finite, non-positive, or
    /// above `max_depth` are masked invalid.
    pub fn from_meters(width: u32, height: u32, values: Vec<f64>, max_depth: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Degenerate("depth dimensions must be at least 1".into()));
        }
        if values.len() != width as usize * height as usize {
            return Err(Error::LengthMismatch { expected: width as usize * height as usize, got: values.len() });
        }
        let valid = values.iter().map(|&d| d.is_finite() && d > 0.0 && d <= max_depth).collect();
        Ok(Self { width, height, values, valid })
    }

    pub fn filled(width: u32, height: u32, depth: f64) -> Self {
        let n = width as usize * height as usize;
        Self { width, height, values: vec![depth; n], valid: vec![depth.is_finite() && depth > 0.0; n] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn set_invalid(&mut self, x: u32, y: u32) {
        let i = y as usize * self.width as usize + x as usize;
        self.valid[i] = false;
    }

    /// Depth at an integer cell, `None` when masked.
    pub fn at(&self, x: u32, y: u32) -> Option<f64> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = y as usize * self.width as usize + x as usize;
        self.valid[i].then(|| self.values[i])
    }
}
