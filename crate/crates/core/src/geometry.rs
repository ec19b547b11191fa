//! Pinhole camera math.
//!
//! Image coordinates follow the usual raster convention: `u` grows to the
//! right, `v` grows downward, and the camera looks along `+z`. Inputs are
//! assumed undistorted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fy.is_finite() && self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidIntrinsics("all fields must be finite"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive"));
        }
        Ok(())
    }

    /// Normalized ray `((u-cx)/fx, (v-cy)/fy, 1)` through a pixel.
    #[inline]
    pub fn ray(&self, p: Pixel) -> [f64; 3] {
        [(p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy, 1.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Nearest integer raster cell, if it lies inside a `width` x `height` grid.
    pub fn cell(&self, width: u32, height: u32) -> Option<(u32, u32)> {
        let x = libm::round(self.u);
        let y = libm::round(self.v);
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            return None;
        }
        Some((x as u32, y as u32))
    }

    pub fn is_inside(&self, width: u32, height: u32) -> bool {
        self.u.is_finite()
            && self.v.is_finite()
            && self.u >= 0.0
            && self.v >= 0.0
            && self.u <= (width as f64 - 1.0)
            && self.v <= (height as f64 - 1.0)
    }
}

/// Camera-frame point in meters; `+z` is the principal axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        Point3::new(self.x - other.x, self.y - other.y, self.z - other.z).norm()
    }
}

fn check_depth(z: f64) -> Result<()> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Domain("depth must be finite and positive"));
    }
    Ok(())
}

pub fn back_project(p: Pixel, z: f64, k: &Intrinsics) -> Result<Point3> {
    check_depth(z)?;
    let [rx, ry, _] = k.ray(p);
    Ok(Point3::new(rx * z, ry * z, z))
}

pub fn project(pt: Point3, k: &Intrinsics) -> Result<Pixel> {
    if !(pt.z > 0.0) || !pt.z.is_finite() {
        return Err(Error::BehindCamera(pt.z));
    }
    Ok(Pixel::new(k.fx * pt.x / pt.z + k.cx, k.fy * pt.y / pt.z + k.cy))
}

/// Ratio between euclidean distance and principal-axis depth along a pixel ray.
pub fn ray_length_factor(p: Pixel, k: &Intrinsics) -> f64 {
    let [rx, ry, _] = k.ray(p);
    libm::sqrt(1.0 + rx * rx + ry * ry)
}

pub fn euclid_from_principal(p: Pixel, z: f64, k: &Intrinsics) -> Result<f64> {
    check_depth(z)?;
    Ok(z * ray_length_factor(p, k))
}

pub fn principal_from_euclid(p: Pixel, distance: f64, k: &Intrinsics) -> Result<f64> {
    check_depth(distance)?;
    Ok(distance / ray_length_factor(p, k))
}

/// Signed per-axis ray angles in degrees: positive horizontal is right of the
/// optical axis, positive vertical is above it.
pub fn ray_angles(p: Pixel, k: &Intrinsics) -> (f64, f64) {
    let h = libm::atan((p.u - k.cx) / k.fx).to_degrees();
    let v = libm::atan((k.cy - p.v) / k.fy).to_degrees();
    (h, v)
}

/// Rigid world-from-camera transform, stored as a row-major 4x4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pose(pub [f64; 16]);

impl Pose {
    pub const IDENTITY: Pose =
        Pose([1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn from_rotation_translation(r: [[f64; 3]; 3], t: [f64; 3]) -> Self {
        let mut m = [0.0; 16];
        for i in 0..3 {
            for j in 0..3 {
                m[i * 4 + j] = r[i][j];
            }
            m[i * 4 + 3] = t[i];
        }
        m[15] = 1.0;
        Pose(m)
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]]
    }

    /// Camera center in world coordinates (the translation column).
    pub fn camera_center(&self) -> Point3 {
        Point3::new(self.0[3], self.0[7], self.0[11])
    }

    /// Checks finiteness, the affine bottom row, and orthonormality of the
    /// rotation block within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("pose must be finite"));
        }
        let bottom = [self.0[12], self.0[13], self.0[14], self.0[15]];
        if libm::fabs(bottom[0]) > tol
            || libm::fabs(bottom[1]) > tol
            || libm::fabs(bottom[2]) > tol
            || libm::fabs(bottom[3] - 1.0) > tol
        {
            return Err(Error::Domain("pose bottom row must be (0, 0, 0, 1)"));
        }
        let r = self.rotation();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|c| r[i][c] * r[j][c]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if libm::fabs(dot - want) > tol {
                    return Err(Error::Domain("pose rotation block is not orthonormal"));
                }
            }
        }
        Ok(())
    }

    /// `self` followed by `other` applied on the left: `other * self`.
    pub fn premultiply(&self, other: &Pose) -> Pose {
        let a = &other.0;
        let b = &self.0;
        let mut m = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                m[i * 4 + j] = (0..4).map(|k| a[i * 4 + k] * b[k * 4 + j]).sum();
            }
        }
        Pose(m)
    }
}
