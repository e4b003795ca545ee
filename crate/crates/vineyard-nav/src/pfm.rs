//! Portable float map (PFM) I/O for depth images, plus the plain-text
//! intrinsics sidecar (`fx fy cx cy`).
//!
//! Grayscale `Pf` maps only. The header is three ASCII lines (magic,
//! `width height`, scale); a negative scale marks little-endian payload,
//! which is what the writer always emits. Rows are stored bottom-up per
//! the format, 4-byte floats per pixel. NaN values round-trip bit-exactly.

use crate::depth::{CameraIntrinsics, DepthImage};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed pfm: {0}")]
    Format(String),
    #[error("invalid depth payload: {0}")]
    Depth(#[from] crate::depth::DepthError),
}

fn format_err(msg: impl Into<String>) -> PfmError {
    PfmError::Format(msg.into())
}

/// Read one whitespace-delimited ASCII token.
fn read_token(r: &mut impl Read) -> Result<String, PfmError> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            if token.is_empty() {
                return Err(format_err("unexpected end of header"));
            }
            break;
        }
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue; // skip leading whitespace
            }
            break; // single terminator consumed
        }
        token.push(byte[0]);
        if token.len() > 32 {
            return Err(format_err("header token too long"));
        }
    }
    String::from_utf8(token).map_err(|_| format_err("non-ascii header token"))
}

/// Parse a PFM stream into a depth image.
pub fn read_pfm_from(r: &mut impl Read) -> Result<DepthImage, PfmError> {
    let magic = read_token(r)?;
    if magic != "Pf" {
        return Err(format_err(format!(
            "expected grayscale magic 'Pf', got '{magic}'"
        )));
    }
    let width: usize = read_token(r)?
        .parse()
        .map_err(|_| format_err("bad width"))?;
    let height: usize = read_token(r)?
        .parse()
        .map_err(|_| format_err("bad height"))?;
    let scale: f64 = read_token(r)?
        .parse()
        .map_err(|_| format_err("bad scale"))?;
    if width == 0 || height == 0 {
        return Err(format_err("zero image dimension"));
    }
    let little_endian = scale < 0.0;

    let mut payload = vec![0u8; width * height * 4];
    r.read_exact(&mut payload)
        .map_err(|_| format_err("truncated pixel payload"))?;

    // Rows are stored bottom-up; flip into row-major top-down.
    let mut data = vec![0f32; width * height];
    for (row_from_bottom, chunk) in payload.chunks_exact(width * 4).enumerate() {
        let y = height - 1 - row_from_bottom;
        for (x, px) in chunk.chunks_exact(4).enumerate() {
            let bytes = [px[0], px[1], px[2], px[3]];
            data[y * width + x] = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
        }
    }
    Ok(DepthImage::new(width, height, data)?)
}

/// Serialize a depth image as little-endian grayscale PFM.
pub fn write_pfm_to(image: &DepthImage, w: &mut impl Write) -> Result<(), PfmError> {
    write!(w, "Pf\n{} {}\n-1.0\n", image.width(), image.height())?;
    for y in (0..image.height()).rev() {
        for x in 0..image.width() {
            let v = image.get(x, y).expect("in-bounds");
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DepthImage, PfmError> {
    read_pfm_from(&mut BufReader::new(File::open(path)?))
}

pub fn write_pfm(image: &DepthImage, path: impl AsRef<Path>) -> Result<(), PfmError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pfm_to(image, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Read the `fx fy cx cy` sidecar.
pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics, PfmError> {
    let text = std::fs::read_to_string(path)?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format_err("intrinsics sidecar must hold numbers"))?;
    if values.len() != 4 {
        return Err(format_err(format!(
            "intrinsics sidecar needs exactly 4 values (fx fy cx cy), got {}",
            values.len()
        )));
    }
    let k = CameraIntrinsics::new(values[0], values[1], values[2], values[3]);
    k.validate().map_err(format_err)?;
    Ok(k)
}

pub fn write_intrinsics(
    intrinsics: &CameraIntrinsics,
    path: impl AsRef<Path>,
) -> Result<(), PfmError> {
    Ok(std::fs::write(
        path,
        format!(
            "{} {} {} {}\n",
            intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy
        ),
    )?)
}
