//! Visual markers that point a vision-language model at a query pixel.
//!
//! Strokes are rasterized by distance-to-segment tests over the marker's
//! bounding box, so rendering never touches pixels outside that box.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::image::RgbImage;

pub const MAX_LABEL_CHARS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerStyle {
    #[default]
    Arrow,
    Cross,
    Circle,
}

impl MarkerStyle {
    pub const ALL: [MarkerStyle; 3] = [MarkerStyle::Arrow, MarkerStyle::Cross, MarkerStyle::Circle];

    pub fn name(&self) -> &'static str {
        match self {
            MarkerStyle::Arrow => "arrow",
            MarkerStyle::Cross => "cross",
            MarkerStyle::Circle => "circle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkerSpec {
    pub style: MarkerStyle,
    pub stroke_width: u32,
    /// Tip-to-tail length in pixels.
    pub size: u32,
    pub color: [u8; 3],
    pub label: Option<String>,
}

impl Default for MarkerSpec {
    fn default() -> Self {
        Self { style: MarkerStyle::Arrow, stroke_width: 5, size: 40, color: [255, 0, 0], label: None }
    }
}

impl MarkerSpec {
    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.stroke_width == 0 {
            return Err(Error::InvalidConfig("marker stroke_width must be >= 1".into()));
        }
        if self.size < self.stroke_width {
            return Err(Error::InvalidConfig("marker size must be >= stroke_width".into()));
        }
        if let Some(label) = &self.label {
            if label.chars().count() > MAX_LABEL_CHARS {
                return Err(Error::InvalidConfig(alloc::format!("marker label `{label}` exceeds {MAX_LABEL_CHARS} characters")));
            }
        }
        Ok(())
    }
}

/// Inclusive integer pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn union(&self, o: &BBox) -> BBox {
        BBox { x0: self.x0.min(o.x0), y0: self.y0.min(o.y0), x1: self.x1.max(o.x1), y1: self.y1.max(o.y1) }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: (f64, f64),
    b: (f64, f64),
}

impl Segment {
    fn distance(&self, x: f64, y: f64) -> f64 {
        let (ax, ay) = self.a;
        let (dx, dy) = (self.b.0 - ax, self.b.1 - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 { 0.0 } else { (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0) };
        let (px, py) = (ax + t * dx - x, ay + t * dy - y);
        libm::sqrt(px * px + py * py)
    }
}

enum Shape {
    Segments(Vec<Segment>),
    Ring { cx: f64, cy: f64, radius: f64 },
}

/// Marker geometry resolved against a concrete image, before rasterization.
struct Layout {
    shapes: Vec<Shape>,
    half_width: f64,
    /// Unclipped float extent of the strokes.
    extent: (f64, f64, f64, f64),
    label_box: Option<(i64, i64, i64, i64)>,
}

const GLYPH_SCALE: i64 = 2;
const GLYPH_ADVANCE: i64 = 6 * GLYPH_SCALE;
const LABEL_PAD: i64 = 2;

fn label_size(label: &str) -> (i64, i64) {
    let n = label.chars().count() as i64;
    (n * GLYPH_ADVANCE - GLYPH_SCALE + 2 * LABEL_PAD, 7 * GLYPH_SCALE + 2 * LABEL_PAD)
}

fn layout(p: Pixel, spec: &MarkerSpec, width: u32, height: u32) -> Layout {
    let len = spec.size as f64;
    // Guarantees the cell nearest the tip is painted even for 1 px strokes.
    let half = (spec.stroke_width as f64 / 2.0).max(0.75);
    let diag = len / core::f64::consts::SQRT_2;
    let label = spec.label.as_deref().filter(|l| !l.is_empty());
    let (lw, lh) = label.map(label_size).unwrap_or((0, 0));

    // Body goes up-left of the tip unless that would leave the image.
    let reach = diag + half;
    let sx = if p.u - reach < 0.0 { 1.0 } else { -1.0 };
    let sy = if p.v - reach < 0.0 { 1.0 } else { -1.0 };

    let tip = (p.u, p.v);
    let mut shapes = Vec::new();
    let tail;
    match spec.style {
        MarkerStyle::Arrow => {
            tail = (p.u + sx * diag, p.v + sy * diag);
            let (ux, uy) = (sx / core::f64::consts::SQRT_2, sy / core::f64::consts::SQRT_2);
            let head = len / 3.0;
            let (s, c) = (0.5f64, libm::sqrt(3.0) / 2.0);
            let left = (tip.0 + head * (ux * c - uy * s), tip.1 + head * (ux * s + uy * c));
            let right = (tip.0 + head * (ux * c + uy * s), tip.1 + head * (-ux * s + uy * c));
            shapes.push(Shape::Segments(alloc::vec![
                Segment { a: tip, b: tail },
                Segment { a: tip, b: left },
                Segment { a: tip, b: right },
            ]));
        }
        MarkerStyle::Cross => {
            let r = len / 2.0;
            tail = (p.u + sx * r, p.v + sy * r);
            shapes.push(Shape::Segments(alloc::vec![
                Segment { a: (p.u - r, p.v), b: (p.u + r, p.v) },
                Segment { a: (p.u, p.v - r), b: (p.u, p.v + r) },
            ]));
        }
        MarkerStyle::Circle => {
            let r = (len / 2.0 - half).max(half);
            tail = (p.u + sx * (r + half), p.v + sy * (r + half));
            shapes.push(Shape::Ring { cx: p.u, cy: p.v, radius: r });
            shapes.push(Shape::Segments(alloc::vec![Segment { a: tip, b: tip }]));
        }
    }

    let mut extent = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |x: f64, y: f64| {
        extent.0 = extent.0.min(x - half);
        extent.1 = extent.1.min(y - half);
        extent.2 = extent.2.max(x + half);
        extent.3 = extent.3.max(y + half);
    };
    for shape in &shapes {
        match shape {
            Shape::Segments(segs) => {
                for s in segs {
                    grow(s.a.0, s.a.1);
                    grow(s.b.0, s.b.1);
                }
            }
            Shape::Ring { cx, cy, radius } => {
                grow(cx - radius, cy - radius);
                grow(cx + radius, cy + radius);
            }
        }
    }

    let label_box = label.map(|_| {
        let tx = libm::round(tail.0) as i64;
        let ty = libm::round(tail.1) as i64;
        let mut x0 = if sx < 0.0 { tx - lw + 1 } else { tx };
        let mut y0 = if sy < 0.0 { ty - lh + 1 } else { ty };
        x0 = x0.min(width as i64 - lw).max(0);
        y0 = y0.min(height as i64 - lh).max(0);
        (x0, y0, x0 + lw - 1, y0 + lh - 1)
    });

    Layout { shapes, half_width: half, extent, label_box }
}

fn clip_box(x0: f64, y0: f64, x1: f64, y1: f64, width: u32, height: u32) -> BBox {
    let cx = |x: f64| libm::floor(x).clamp(0.0, width as f64 - 1.0) as u32;
    let cy = |y: f64| libm::floor(y).clamp(0.0, height as f64 - 1.0) as u32;
    BBox { x0: cx(libm::ceil(x0)), y0: cy(libm::ceil(y0)), x1: cx(x1), y1: cy(y1) }
}

impl Layout {
    fn stroke_box(&self, width: u32, height: u32) -> BBox {
        clip_box(self.extent.0, self.extent.1, self.extent.2, self.extent.3, width, height)
    }

    fn label_bbox(&self, width: u32, height: u32) -> Option<BBox> {
        self.label_box
            .map(|(x0, y0, x1, y1)| clip_box(x0 as f64, y0 as f64, x1 as f64, y1 as f64, width, height))
    }

    fn bbox(&self, width: u32, height: u32) -> BBox {
        let b = self.stroke_box(width, height);
        match self.label_bbox(width, height) {
            Some(l) => b.union(&l),
            None => b,
        }
    }

    fn covers(&self, x: f64, y: f64) -> bool {
        self.shapes.iter().any(|s| match s {
            Shape::Segments(segs) => segs.iter().any(|seg| seg.distance(x, y) <= self.half_width),
            Shape::Ring { cx, cy, radius } => {
                let d = libm::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
                libm::fabs(d - radius) <= self.half_width
            }
        })
    }
}

fn check_inside(image: &RgbImage, p: Pixel) -> Result<()> {
    if !p.is_inside(image.width(), image.height()) {
        return Err(Error::OutOfBounds { u: p.u, v: p.v, width: image.width(), height: image.height() });
    }
    Ok(())
}

/// Bounding box (clipped to the image) that `draw_marker` may modify.
pub fn marker_bbox(image: &RgbImage, p: Pixel, spec: &MarkerSpec) -> Result<BBox> {
    spec.validate()?;
    check_inside(image, p)?;
    Ok(layout(p, spec, image.width(), image.height()).bbox(image.width(), image.height()))
}

/// Draws in place and returns the box that bounds every modified pixel.
pub fn draw_marker(image: &mut RgbImage, p: Pixel, spec: &MarkerSpec) -> Result<BBox> {
    spec.validate()?;
    check_inside(image, p)?;
    let (w, h) = (image.width(), image.height());
    let lay = layout(p, spec, w, h);
    let sb = lay.stroke_box(w, h);
    for y in sb.y0..=sb.y1 {
        for x in sb.x0..=sb.x1 {
            if lay.covers(x as f64, y as f64) {
                image.put(x, y, spec.color);
            }
        }
    }
    if let (Some(label), Some(lb)) = (spec.label.as_deref(), lay.label_box) {
        draw_label(image, label, lb, spec.color);
    }
    Ok(lay.bbox(w, h))
}

pub fn render_marker(image: &RgbImage, p: Pixel, spec: &MarkerSpec) -> Result<RgbImage> {
    let mut out = image.clone();
    draw_marker(&mut out, p, spec)?;
    Ok(out)
}

/// One marker per point. Labels, when given, must be unique.
pub fn render_multi(image: &RgbImage, points: &[(Pixel, MarkerSpec)]) -> Result<RgbImage> {
    if points.is_empty() {
        return Err(Error::Empty("render_multi needs at least one point"));
    }
    for (i, (p, spec)) in points.iter().enumerate() {
        spec.validate()?;
        check_inside(image, *p)?;
        if let Some(label) = &spec.label {
            if points[..i].iter().any(|(_, s)| s.label.as_ref() == Some(label)) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
    }
    let mut out = image.clone();
    for (p, spec) in points {
        draw_marker(&mut out, *p, spec)?;
    }
    Ok(out)
}

fn draw_label(image: &mut RgbImage, label: &str, (x0, y0, x1, y1): (i64, i64, i64, i64), bg: [u8; 3]) {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let mut put = |x: i64, y: i64, c: [u8; 3]| {
        if x >= 0 && y >= 0 && x < w && y < h && x >= x0 && x <= x1 && y >= y0 && y <= y1 {
            image.put(x as u32, y as u32, c);
        }
    };
    for y in y0..=y1 {
        for x in x0..=x1 {
            put(x, y, bg);
        }
    }
    for (i, ch) in label.chars().enumerate() {
        let rows = glyph(ch);
        let gx = x0 + LABEL_PAD + i as i64 * GLYPH_ADVANCE;
        let gy = y0 + LABEL_PAD;
        for (r, bits) in rows.iter().enumerate() {
            for c in 0..5 {
                if bits & (0x10 >> c) != 0 {
                    for dy in 0..GLYPH_SCALE {
                        for dx in 0..GLYPH_SCALE {
                            put(gx + c * GLYPH_SCALE + dx, gy + r as i64 * GLYPH_SCALE + dy, [255, 255, 255]);
                        }
                    }
                }
            }
        }
    }
}

fn glyph(ch: char) -> [u8; 7] {
    match ch.to_ascii_uppercase() {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'A' => [0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ' ' => [0x00; 7],
        _ => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas(w: u32, h: u32) -> RgbImage {
        let mut img = RgbImage::new(w, h, [0, 0, 0]);
        for y in 0..h {
            for x in 0..w {
                img.put(x, y, [(x % 200) as u8, (y % 200) as u8, 60]);
            }
        }
        img
    }

    fn changed(a: &RgbImage, b: &RgbImage) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for y in 0..a.height() {
            for x in 0..a.width() {
                if a.get(x, y) != b.get(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    #[test]
    fn default_arrow_points_down_right() {
        let img = canvas(300, 200);
        let spec = MarkerSpec::default();
        let out = render_marker(&img, Pixel::new(100.0, 100.0), &spec).unwrap();
        let diff = changed(&img, &out);
        assert!(diff.len() as u32 >= spec.stroke_width * spec.size / 2);
        // Body within [60, 100]^2 apart from the stroke's half-width around the tip.
        for &(x, y) in &diff {
            assert!((60..=103).contains(&x) && (60..=103).contains(&y), "({x},{y})");
            if x > 100 || y > 100 {
                assert!(x <= 103 && y <= 103);
            }
        }
        assert!(diff.contains(&(100, 100)));
    }

    #[test]
    fn locality_within_bbox() {
        let img = canvas(120, 90);
        for style in MarkerStyle::ALL {
            let spec = MarkerSpec { style, ..Default::default() }.with_label("P1");
            let p = Pixel::new(57.3, 44.8);
            let bbox = marker_bbox(&img, p, &spec).unwrap();
            let out = render_marker(&img, p, &spec).unwrap();
            let diff = changed(&img, &out);
            assert!(!diff.is_empty());
            assert!(diff.iter().all(|&(x, y)| bbox.contains(x, y)), "{style:?}");
            let nearest = diff
                .iter()
                .map(|&(x, y)| libm::hypot(x as f64 - p.u, y as f64 - p.v))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 1.0, "{style:?} nearest {nearest}");
        }
    }

    #[test]
    fn rejects_out_of_bounds() {
        let img = canvas(50, 50);
        assert!(matches!(
            render_marker(&img, Pixel::new(-1.0, 5.0), &MarkerSpec::default()),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn flips_near_left_and_top_edges() {
        let img = canvas(200, 200);
        let p = Pixel::new(3.0, 4.0);
        let out = render_marker(&img, p, &MarkerSpec::default()).unwrap();
        let diff = changed(&img, &out);
        assert!(diff.iter().any(|&(x, y)| x > 20 && y > 20));
        let p = Pixel::new(196.0, 100.0);
        let bbox = marker_bbox(&img, p, &MarkerSpec::default()).unwrap();
        assert!(bbox.x0 < 196 && bbox.x1 <= 199);
    }

    #[test]
    fn multi_labels() {
        let img = canvas(200, 160);
        let pts = [
            (Pixel::new(60.0, 60.0), MarkerSpec::default().with_label("A")),
            (Pixel::new(150.0, 120.0), MarkerSpec::default().with_label("B")),
        ];
        let out = render_multi(&img, &pts).unwrap();
        let diff = changed(&img, &out);
        let boxes: Vec<BBox> = pts.iter().map(|(p, s)| marker_bbox(&img, *p, s).unwrap()).collect();
        assert!(diff.iter().all(|&(x, y)| boxes.iter().any(|b| b.contains(x, y))));
        // white glyph pixels exist
        assert!(diff.iter().any(|&(x, y)| out.get(x, y) == [255, 255, 255]));

        let dup = [pts[0].clone(), (Pixel::new(10.0, 10.0), MarkerSpec::default().with_label("A"))];
        assert!(matches!(render_multi(&img, &dup), Err(Error::DuplicateLabel(_))));
        assert!(matches!(render_multi(&img, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn deterministic() {
        let img = canvas(80, 80);
        let spec = MarkerSpec { style: MarkerStyle::Circle, ..Default::default() };
        let a = render_marker(&img, Pixel::new(40.0, 40.0), &spec).unwrap();
        let b = render_marker(&img, Pixel::new(40.0, 40.0), &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_validation() {
        assert!(MarkerSpec { stroke_width: 0, ..Default::default() }.validate().is_err());
        assert!(MarkerSpec { size: 3, ..Default::default() }.validate().is_err());
        assert!(MarkerSpec::default().with_label("TOOLONGXX").validate().is_err());
    }
}
