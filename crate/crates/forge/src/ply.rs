//! Binary little-endian PLY with float32 positions and uchar colors.

use std::fs;
use std::path::Path;

use forge_core::pointcloud::{depth_colors, PointCloud};
use forge_core::Point3;

use crate::error::{ForgeError, Result};

pub fn encode_ply(cloud: &PointCloud) -> Result<Vec<u8>> {
    cloud.validate()?;
    let colors = cloud.colors.clone().unwrap_or_else(|| depth_colors(&cloud.points));
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\ncomment generated by forge\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.points.len()
    )
    .into_bytes();
    out.reserve(cloud.points.len() * 15);
    for (p, c) in cloud.points.iter().zip(&colors) {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(c);
    }
    Ok(out)
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let bytes = encode_ply(cloud)?;
    fs::write(path, bytes).map_err(ForgeError::io(path))
}

const EXPECTED_PROPS: [(&str, &str); 6] =
    [("float", "x"), ("float", "y"), ("float", "z"), ("uchar", "red"), ("uchar", "green"), ("uchar", "blue")];

pub fn decode_ply(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let bad = |m: String| ForgeError::format(path, m);
    let end = bytes.windows(11).position(|w| w == b"end_header\n").ok_or_else(|| bad("missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("non-ascii header".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing ply magic".into()));
    }
    let mut count = None;
    let mut props = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other, ..] => return Err(bad(format!("unsupported format {other}"))),
            ["comment", ..] | [] => {}
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| bad(format!("bad vertex count {n:?}")))?),
            ["element", other, ..] => return Err(bad(format!("unsupported element {other}"))),
            ["property", ty, name] => props.push((ty.to_string(), name.to_string())),
            _ => return Err(bad(format!("malformed header line {line:?}"))),
        }
    }
    let count = count.ok_or_else(|| bad("no vertex element".into()))?;
    let props_ok = props.len() == EXPECTED_PROPS.len() && props.iter().zip(EXPECTED_PROPS).all(|((t, n), (et, en))| t == et && n == en);
    if !props_ok {
        return Err(bad(format!("unexpected vertex properties {props:?}")));
    }
    let body = &bytes[end + 11..];
    if body.len() != count * 15 {
        return Err(bad(format!("expected {} body bytes for {count} vertices, found {}", count * 15, body.len())));
    }
    let mut points = Vec::with_capacity(count);
    let mut colors = Vec::with_capacity(count);
    for rec in body.chunks_exact(15) {
        let f = |i: usize| f32::from_le_bytes([rec[i], rec[i + 1], rec[i + 2], rec[i + 3]]) as f64;
        points.push(Point3::new(f(0), f(4), f(8)));
        colors.push([rec[12], rec[13], rec[14]]);
    }
    Ok(PointCloud { points, colors: Some(colors), pixels: Vec::new() })
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(ForgeError::io(path))?;
    decode_ply(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud() {
        let bytes = encode_ply(&PointCloud::default()).unwrap();
        assert!(String::from_utf8_lossy(&bytes).contains("element vertex 0\n"));
        assert!(decode_ply(&bytes, Path::new("e.ply")).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let cloud = PointCloud {
            points: vec![Point3::new(0.1, -2.0, 3.25), Point3::new(1e-3, 4.0, 80.0)],
            colors: Some(vec![[1, 2, 3], [250, 0, 9]]),
            pixels: vec![],
        };
        let back = decode_ply(&encode_ply(&cloud).unwrap(), Path::new("x.ply")).unwrap();
        assert_eq!(back.colors, cloud.colors);
        for (a, b) in back.points.iter().zip(&cloud.points) {
            assert_eq!(a.x, b.x as f32 as f64);
            assert_eq!(a.z, b.z as f32 as f64);
        }
    }

    #[test]
    fn malformed_header() {
        assert!(decode_ply(b"plx\nend_header\n", Path::new("a")).is_err());
        assert!(decode_ply(b"ply\nformat ascii 1.0\nend_header\n", Path::new("a")).is_err());
        let mut good = encode_ply(&PointCloud { points: vec![Point3::new(0.0, 0.0, 1.0)], colors: None, pixels: vec![] }).unwrap();
        good.pop();
        assert!(decode_ply(&good, Path::new("a")).is_err());
    }
}
