//! File formats owned by the command-line tool: SDF grids, camera lists and
//! image loading by extension.

use std::fmt::Write as _;
use std::path::Path;

use twinlight::geometry::{Aabb, SdfGrid};
use twinlight::io::{read_fb, read_png};
use twinlight::{CameraModel, DQuat, DVec3, Error, Image, Result, RigidTransform};

/// SDF grid file: magic `SDF1`, three little-endian `u32` node counts, six
/// `f64` bounds (min then max), then the node values as `f64`, x fastest.
pub const SDF_MAGIC: &[u8; 4] = b"SDF1";
const SDF_HEADER: usize = 4 + 12 + 48;

fn codec(path: &Path, message: impl Into<String>) -> Error {
    Error::Codec {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn encode_sdf(grid: &SdfGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(SDF_HEADER + 8 * grid.node_count());
    out.extend_from_slice(SDF_MAGIC);
    for r in grid.resolution() {
        out.extend_from_slice(&(r as u32).to_le_bytes());
    }
    let b = grid.bounds();
    for v in [b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_sdf(bytes: &[u8], path: &Path) -> Result<SdfGrid> {
    if bytes.len() < SDF_HEADER {
        return Err(codec(
            path,
            format!(
                "file is {} bytes, shorter than the {SDF_HEADER}-byte header",
                bytes.len()
            ),
        ));
    }
    if &bytes[..4] != SDF_MAGIC {
        return Err(codec(path, "missing SDF1 magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let res = [u32_at(4), u32_at(8), u32_at(12)];
    let b: Vec<f64> = (0..6).map(|i| f64_at(16 + 8 * i)).collect();
    let n = res.iter().product::<usize>();
    let expected = SDF_HEADER + 8 * n;
    if bytes.len() != expected {
        return Err(codec(
            path,
            format!("expected {expected} bytes for a {res:?} grid, found {}", bytes.len()),
        ));
    }
    let values = (0..n).map(|i| f64_at(SDF_HEADER + 8 * i)).collect();
    let bounds = Aabb::new(DVec3::new(b[0], b[1], b[2]), DVec3::new(b[3], b[4], b[5]));
    SdfGrid::new(bounds, res, values).map_err(|e| codec(path, e.to_string()))
}

pub fn write_sdf(path: &Path, grid: &SdfGrid) -> Result<()> {
    std::fs::write(path, encode_sdf(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_sdf(path: &Path) -> Result<SdfGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sdf(&bytes, path)
}

/// Camera list: one camera per line,
/// `width height fx fy cx cy tx ty tz qw qx qy qz` with a world-from-camera
/// pose. Blank lines and `#` comments are skipped.
pub fn parse_cameras(text: &str, path: &Path) -> Result<Vec<CameraModel>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 13 {
            return Err(Error::format(
                path,
                i + 1,
                format!(
                    "expected 'width height fx fy cx cy tx ty tz qw qx qy qz', found {} fields",
                    fields.len()
                ),
            ));
        }
        let size = |k: usize| {
            fields[k]
                .parse::<usize>()
                .map_err(|_| Error::format(path, i + 1, format!("'{}' is not an image size", fields[k])))
        };
        let mut v = [0.0; 11];
        for (k, f) in fields[2..].iter().enumerate() {
            v[k] = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::format(path, i + 1, format!("'{f}' is not a finite number")))?;
        }
        let pose = RigidTransform::new(DQuat::from_xyzw(v[8], v[9], v[10], v[7]), DVec3::new(v[4], v[5], v[6]))
            .map_err(|e| Error::format(path, i + 1, e.to_string()))?;
        let cam = CameraModel::new(size(0)?, size(1)?, v[0], v[1], v[2], v[3], pose)
            .map_err(|e| Error::format(path, i + 1, e.to_string()))?;
        out.push(cam);
    }
    Ok(out)
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraModel>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cameras(&text, path)
}

pub fn format_cameras(cameras: &[CameraModel]) -> String {
    let mut s = String::from("# width height fx fy cx cy tx ty tz qw qx qy qz\n");
    for c in cameras {
        let (t, q) = (c.pose.translation, c.pose.rotation);
        writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {} {} {} {}",
            c.width, c.height, c.fx, c.fy, c.cx, c.cy, t.x, t.y, t.z, q.w, q.x, q.y, q.z
        )
        .unwrap();
    }
    s
}

/// Reads `.png` as 8-bit values scaled to [0, 1] and anything else as a
/// float container.
pub fn read_image(path: &Path) -> Result<Image> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        read_png(path)
    } else {
        read_fb(path)
    }
}
