//! Binary little-endian PLY for [`TriangleMesh`].
//!
//! Layout (exactly this, in this order):
//!
//! ```text
//! ply
//! format binary_little_endian 1.0
//! element vertex N
//! property float x / y / z
//! property float nx / ny / nz
//! property uchar red / green / blue
//! element face M
//! property list uchar int vertex_indices
//! end_header
//! ```
//!
//! `comment` and `obj_info` lines may appear anywhere in the header. Albedo is
//! stored as `round(albedo · 255)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use glam::DVec3;

use super::TriangleMesh;
use crate::error::{Error, Result};

const VERTEX_PROPS: [(&str, &str); 9] = [
    ("float", "x"),
    ("float", "y"),
    ("float", "z"),
    ("float", "nx"),
    ("float", "ny"),
    ("float", "nz"),
    ("uchar", "red"),
    ("uchar", "green"),
    ("uchar", "blue"),
];

pub fn encode(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(256 + mesh.vertex_count() * 27 + mesh.triangle_count() * 13);
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n",
        mesh.vertex_count()
    )
    .unwrap();
    for (ty, name) in VERTEX_PROPS {
        writeln!(out, "property {ty} {name}").unwrap();
    }
    write!(
        out,
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.triangle_count()
    )
    .unwrap();
    for i in 0..mesh.vertex_count() {
        let p = mesh.positions[i];
        let n = mesh.normals[i];
        for v in [p.x, p.y, p.z, n.x, n.y, n.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let a = mesh.albedo[i];
        for c in [a.x, a.y, a.z] {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &v in t {
            out.extend_from_slice(&(v as i32).to_le_bytes());
        }
    }
    out
}

pub fn write(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    fs::write(path, encode(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<TriangleMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Parses PLY bytes; `path` only labels diagnostics.
pub fn decode(bytes: &[u8], path: &Path) -> Result<TriangleMesh> {
    let bad = |line: usize, msg: String| Error::format(path, line, msg);

    // Header lines up to and including `end_header`.
    let mut lines = Vec::new();
    let mut pos = 0;
    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(bad(lines.len() + 1, "header is not terminated by end_header".into()));
        };
        let raw = &bytes[pos..pos + nl];
        pos += nl + 1;
        let text = std::str::from_utf8(raw)
            .map_err(|_| bad(lines.len() + 1, "header line is not UTF-8".into()))?
            .trim_end_matches('\r')
            .to_string();
        let done = text.trim() == "end_header";
        lines.push(text);
        if done {
            break;
        }
    }

    let mut body = lines
        .iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with("comment") && !l.starts_with("obj_info"));
    let mut expect = |what: &str| -> Result<(usize, Vec<String>)> {
        let (n, l) = body
            .next()
            .ok_or_else(|| bad(lines.len(), format!("header ended early, expected {what}")))?;
        Ok((n, l.split_whitespace().map(str::to_string).collect()))
    };

    let (n, magic) = expect("'ply'")?;
    if magic != ["ply"] {
        return Err(bad(n, format!("expected 'ply', found '{}'", lines[n - 1])));
    }
    let (n, fmt) = expect("format line")?;
    if fmt != ["format", "binary_little_endian", "1.0"] {
        return Err(bad(
            n,
            format!("expected 'format binary_little_endian 1.0', found '{}'", lines[n - 1]),
        ));
    }
    let (n, ev) = expect("vertex element")?;
    let vertex_count = match ev.as_slice() {
        [e, v, c] if e == "element" && v == "vertex" => c
            .parse::<usize>()
            .map_err(|_| bad(n, format!("bad vertex count in '{}'", lines[n - 1])))?,
        _ => return Err(bad(n, format!("expected 'element vertex N', found '{}'", lines[n - 1]))),
    };
    for (ty, name) in VERTEX_PROPS {
        let (n, p) = expect("vertex property")?;
        if p != ["property", ty, name] {
            return Err(bad(
                n,
                format!("expected 'property {ty} {name}', found '{}'", lines[n - 1]),
            ));
        }
    }
    let (n, ef) = expect("face element")?;
    let face_count = match ef.as_slice() {
        [e, f, c] if e == "element" && f == "face" => c
            .parse::<usize>()
            .map_err(|_| bad(n, format!("bad face count in '{}'", lines[n - 1])))?,
        _ => return Err(bad(n, format!("expected 'element face M', found '{}'", lines[n - 1]))),
    };
    let (n, fp) = expect("face property")?;
    let ok = fp.len() == 5
        && fp[..4] == ["property", "list", "uchar", "int"]
        && (fp[4] == "vertex_indices" || fp[4] == "vertex_index");
    if !ok {
        return Err(bad(
            n,
            format!(
                "expected 'property list uchar int vertex_indices', found '{}'",
                lines[n - 1]
            ),
        ));
    }
    let (n, end) = expect("end_header")?;
    if end != ["end_header"] {
        return Err(bad(n, format!("expected 'end_header', found '{}'", lines[n - 1])));
    }

    let payload = &bytes[pos..];
    let need = vertex_count * 27 + face_count * 13;
    if payload.len() < need {
        return Err(Error::Codec {
            path: path.to_path_buf(),
            message: format!("truncated body: expected {need} bytes, found {}", payload.len()),
        });
    }
    let f32_at = |o: usize| f32::from_le_bytes(payload[o..o + 4].try_into().unwrap()) as f64;
    let mut mesh = TriangleMesh::empty();
    for i in 0..vertex_count {
        let o = i * 27;
        mesh.positions.push(DVec3::new(f32_at(o), f32_at(o + 4), f32_at(o + 8)));
        mesh.normals
            .push(DVec3::new(f32_at(o + 12), f32_at(o + 16), f32_at(o + 20)));
        mesh.albedo.push(DVec3::new(
            payload[o + 24] as f64 / 255.0,
            payload[o + 25] as f64 / 255.0,
            payload[o + 26] as f64 / 255.0,
        ));
    }
    let base = vertex_count * 27;
    for f in 0..face_count {
        let o = base + f * 13;
        if payload[o] != 3 {
            return Err(Error::Codec {
                path: path.to_path_buf(),
                message: format!("face {f} has {} vertices, only triangles are supported", payload[o]),
            });
        }
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let v = i32::from_le_bytes(payload[o + 1 + 4 * k..o + 5 + 4 * k].try_into().unwrap());
            if v < 0 || v as usize >= vertex_count {
                return Err(Error::Codec {
                    path: path.to_path_buf(),
                    message: format!("face {f} references vertex {v} of {vertex_count}"),
                });
            }
            *slot = v as u32;
        }
        mesh.triangles.push(tri);
    }
    // Stored normals are float32; renormalize so the unit invariant holds.
    for n in &mut mesh.normals {
        *n = n.try_normalize().unwrap_or(DVec3::Z);
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    fn header_with(line: &str, replace: &str) -> Vec<u8> {
        let mesh = primitives::quad(DVec3::ZERO, 1.0, DVec3::splat(0.5));
        let bytes = encode(&mesh);
        let text_end = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        let header = String::from_utf8(bytes[..text_end].to_vec()).unwrap();
        let mut out = header.replacen(line, replace, 1).into_bytes();
        out.extend_from_slice(&bytes[text_end..]);
        out
    }

    #[test]
    fn round_trip_preserves_mesh_to_float_precision() {
        let mut mesh = primitives::uv_sphere(DVec3::new(0.5, -1.0, 2.0), 1.5, 12, 6, false, DVec3::ZERO);
        for (i, a) in mesh.albedo.iter_mut().enumerate() {
            *a = DVec3::new((i % 256) as f64 / 255.0, 0.2, 1.0);
        }
        let back = decode(&encode(&mesh), Path::new("mem.ply")).unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        for i in 0..mesh.vertex_count() {
            assert!((back.positions[i] - mesh.positions[i]).length() < 1e-6);
            assert!((back.normals[i] - mesh.normals[i]).length() < 1e-6);
            assert!((back.albedo[i] - mesh.albedo[i]).length() < 0.5 / 255.0);
        }
    }

    #[test]
    fn rejects_wrong_format_line_with_line_number() {
        let bytes = header_with("binary_little_endian", "ascii");
        let err = decode(&bytes, Path::new("bad.ply")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.ply:2"), "{msg}");
        assert!(msg.contains("format ascii 1.0"), "{msg}");
    }

    #[test]
    fn rejects_unexpected_property() {
        let bytes = header_with("property float nx", "property double nx");
        let msg = decode(&bytes, Path::new("p.ply")).unwrap_err().to_string();
        assert!(msg.contains("p.ply:7"), "{msg}");
        assert!(msg.contains("property double nx"), "{msg}");
    }

    #[test]
    fn comments_are_ignored_and_truncation_is_caught() {
        let bytes = header_with("element vertex", "comment made by hand\nelement vertex");
        assert!(decode(&bytes, Path::new("c.ply")).is_ok());
        let mesh = primitives::quad(DVec3::ZERO, 1.0, DVec3::splat(0.5));
        let mut bytes = encode(&mesh);
        bytes.truncate(bytes.len() - 5);
        assert!(decode(&bytes, Path::new("t.ply")).is_err());
    }
}
