//! File formats: the raw float container, Radiance RGBE, 8-bit PNG and
//! binary PGM masks.
//!
//! Float container layout: magic `FB01`, then width, height and channel count
//! as little-endian `u32`, then `W·H·C` little-endian `f32` values, row-major
//! and channel-interleaved. Nothing follows the payload.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::hdr::{HdrDecoder, HdrEncoder};
use image::{ImageDecoder, ImageFormat, Rgb};

use crate::error::{Error, Result};
use crate::raster::Image;

pub const FB_MAGIC: &[u8; 4] = b"FB01";
const FB_HEADER: usize = 16;

fn codec(path: &Path, message: impl Into<String>) -> Error {
    Error::Codec {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_fb(image: &Image) -> Result<Vec<u8>> {
    if let Some(i) = image.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::precondition(format!("float buffer value {i} is not finite")));
    }
    let mut out = Vec::with_capacity(FB_HEADER + image.data().len() * 4);
    out.extend_from_slice(FB_MAGIC);
    for d in [image.width(), image.height(), image.channels()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in image.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses a float container; `path` only labels diagnostics.
pub fn decode_fb(bytes: &[u8], path: &Path) -> Result<Image> {
    if bytes.len() < FB_HEADER {
        return Err(codec(
            path,
            format!("truncated header: expected {FB_HEADER} bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[..4] != FB_MAGIC {
        return Err(codec(path, "not a float buffer (magic is not FB01)"));
    }
    let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (w, h, c) = (dim(4), dim(8), dim(12));
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| codec(path, format!("dimensions {w}x{h}x{c} overflow")))?;
    let actual = bytes.len() - FB_HEADER;
    if actual != expected {
        return Err(codec(
            path,
            format!("payload for {w}x{h}x{c} should be {expected} bytes, found {actual}"),
        ));
    }
    let data = bytes[FB_HEADER..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Image::from_vec(w, h, c, data)
}

pub fn write_fb(path: &Path, image: &Image) -> Result<()> {
    write_bytes(path, &encode_fb(image)?)
}

pub fn read_fb(path: &Path) -> Result<Image> {
    decode_fb(&read_bytes(path)?, path)
}

/// Radiance RGBE with adaptive run-length scanlines.
pub fn encode_hdr(image: &Image) -> Result<Vec<u8>> {
    if image.channels() != 3 {
        return Err(Error::precondition("RGBE needs a 3-channel image"));
    }
    let px: Vec<Rgb<f32>> = image
        .data()
        .chunks_exact(3)
        .map(|c| Rgb([c[0].max(0.0), c[1].max(0.0), c[2].max(0.0)]))
        .collect();
    let mut out = Vec::new();
    HdrEncoder::new(&mut out)
        .encode(&px, image.width(), image.height())
        .map_err(|e| Error::precondition(format!("RGBE encoding failed: {e}")))?;
    Ok(out)
}

/// Reads flat and run-length encoded RGBE scanlines.
pub fn decode_hdr(bytes: &[u8], path: &Path) -> Result<Image> {
    let dec = HdrDecoder::new(Cursor::new(bytes)).map_err(|e| codec(path, e.to_string()))?;
    let (w, h) = dec.dimensions();
    let mut buf = vec![0u8; dec.total_bytes() as usize];
    dec.read_image(&mut buf).map_err(|e| codec(path, e.to_string()))?;
    let data = buf
        .chunks_exact(4)
        .map(|b| f32::from_ne_bytes(b.try_into().unwrap()))
        .collect();
    Image::from_vec(w as usize, h as usize, 3, data)
}

pub fn write_hdr(path: &Path, image: &Image) -> Result<()> {
    write_bytes(path, &encode_hdr(image)?)
}

pub fn read_hdr(path: &Path) -> Result<Image> {
    decode_hdr(&read_bytes(path)?, path)
}

/// The image as it comes back from an RGBE round trip.
pub fn quantize_rgbe(image: &Image) -> Result<Image> {
    decode_hdr(&encode_hdr(image)?, Path::new("<memory>"))
}

/// Writes a 1- or 3-channel image with values in `[0, 1]` as 8-bit PNG.
pub fn write_png(path: &Path, image: &Image) -> Result<()> {
    let color = match image.channels() {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(Error::precondition(format!("PNG needs 1 or 3 channels, got {c}"))),
    };
    let bytes: Vec<u8> = image
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        image.width() as u32,
        image.height() as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => codec(path, other.to_string()),
    })
}

/// Reads a PNG as RGB in `[0, 1]`.
pub fn read_png(path: &Path) -> Result<Image> {
    let bytes = read_bytes(path)?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| codec(path, e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
    Image::from_vec(w as usize, h as usize, 3, data)
}

/// Binary PGM, 255 for `true` and 0 for `false`.
pub fn write_pgm(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::precondition("mask size does not match its dimensions"));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(mask.iter().map(|&m| if m { 255u8 } else { 0 }));
    write_bytes(path, &out)
}

/// Reads a binary 8-bit PGM; any nonzero sample counts as `true`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let bytes = read_bytes(path)?;
    // Four whitespace-separated header tokens, comments allowed.
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(codec(path, "truncated PGM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "P5" {
        return Err(codec(path, format!("expected P5 magic, found {}", tokens[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| codec(path, format!("bad PGM number {s}")))
    };
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(codec(path, format!("only 8-bit PGM is supported (maxval {maxval})")));
    }
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < w * h {
        return Err(codec(
            path,
            format!("payload should be {} bytes, found {}", w * h, payload.len()),
        ));
    }
    Ok((w, h, payload[..w * h].iter().map(|&b| b != 0).collect()))
}
