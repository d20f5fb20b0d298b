//! PFM depth and PGM mask files.
//!
//! Depth is written as grayscale `Pf` with scale `-1.0` (little-endian
//! `f32`, bottom row first as the format requires). Masks are binary `P5`
//! with 0/255 values.

use std::fs;
use std::path::Path;

use super::{DepthImage, MaskImage};
use crate::error::{Error, Result};

pub fn encode_pfm(depth: &DepthImage) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", depth.width, depth.height).into_bytes();
    out.reserve(depth.data.len() * 4);
    for v in (0..depth.height).rev() {
        for u in 0..depth.width {
            out.extend_from_slice(&(depth.get(u, v) as f32).to_le_bytes());
        }
    }
    out
}

/// Splits off `count` whitespace-separated header tokens, returning them and
/// the payload that follows the single whitespace byte after the last token.
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, &[u8])> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Format("truncated header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() {
        return Err(Error::Format("missing payload".into()));
    }
    Ok((tokens, &bytes[i + 1..]))
}

fn parse_dim(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Format(format!("bad image dimension `{s}`")))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthImage> {
    let (tok, payload) = header_tokens(bytes, 4)?;
    if tok[0] != "Pf" {
        return Err(Error::Format(format!("expected grayscale `Pf`, got `{}`", tok[0])));
    }
    let (w, h) = (parse_dim(&tok[1])?, parse_dim(&tok[2])?);
    let scale: f64 = tok[3]
        .parse()
        .map_err(|_| Error::Format("bad PFM scale".into()))?;
    if payload.len() < w * h * 4 {
        return Err(Error::Format("PFM payload too short".into()));
    }
    let mut depth = DepthImage::invalid(w, h);
    for (row, chunk) in payload.chunks_exact(w * 4).take(h).enumerate() {
        let v = h - 1 - row;
        for u in 0..w {
            let b: [u8; 4] = chunk[u * 4..u * 4 + 4].try_into().expect("4 bytes");
            let val = if scale < 0.0 {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            depth.set(u, v, val as f64);
        }
    }
    Ok(depth)
}

pub fn encode_pgm(mask: &MaskImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.data.iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<MaskImage> {
    let (tok, payload) = header_tokens(bytes, 4)?;
    if tok[0] != "P5" {
        return Err(Error::Format(format!("expected binary `P5`, got `{}`", tok[0])));
    }
    let (w, h) = (parse_dim(&tok[1])?, parse_dim(&tok[2])?);
    if payload.len() < w * h {
        return Err(Error::Format("PGM payload too short".into()));
    }
    MaskImage::new(w, h, payload[..w * h].iter().map(|&b| b > 127).collect())
}

pub fn write_pfm(depth: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_pfm(depth))?)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DepthImage> {
    decode_pfm(&fs::read(path)?)
}

pub fn write_pgm(mask: &MaskImage, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_pgm(mask))?)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<MaskImage> {
    decode_pgm(&fs::read(path)?)
}
