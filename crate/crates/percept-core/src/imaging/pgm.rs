//! Binary (P5) PGM reading and writing, maxval 255 only.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{GrayImage, ImagingError};

/// Decode a binary P5 PGM with maxval 255 into a normalized image.
///
/// `#` comments are tolerated anywhere whitespace may appear in the header.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, ImagingError> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(ImagingError::PgmMagic);
    }
    let mut at = 2;
    let width = read_header_number(bytes, &mut at)?;
    let height = read_header_number(bytes, &mut at)?;
    let maxval = read_header_number(bytes, &mut at)?;
    if maxval != 255 {
        return Err(ImagingError::PgmMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if at >= bytes.len() || !bytes[at].is_ascii_whitespace() {
        return Err(ImagingError::PgmHeader);
    }
    at += 1;
    let n = width * height;
    if bytes.len() < at + n {
        return Err(ImagingError::PgmTruncated);
    }
    let pixels = bytes[at..at + n].iter().map(|&b| b as f32 / 255.0).collect();
    GrayImage::new(width, height, pixels)
}

fn read_header_number(bytes: &[u8], at: &mut usize) -> Result<usize, ImagingError> {
    // Skip whitespace and '#'-to-end-of-line comments.
    loop {
        while *at < bytes.len() && bytes[*at].is_ascii_whitespace() {
            *at += 1;
        }
        if *at < bytes.len() && bytes[*at] == b'#' {
            while *at < bytes.len() && bytes[*at] != b'\n' {
                *at += 1;
            }
        } else {
            break;
        }
    }
    let start = *at;
    while *at < bytes.len() && bytes[*at].is_ascii_digit() {
        *at += 1;
    }
    if *at == start {
        return Err(ImagingError::PgmHeader);
    }
    std::str::from_utf8(&bytes[start..*at])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(ImagingError::PgmHeader)
}

/// Read and decode a PGM file from disk.
pub fn read_pgm(path: &Path) -> Result<GrayImage, ImagingError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    load_pgm(&bytes)
}

/// Write raw 8-bit grayscale rows as a P5 PGM.
pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    pixels: &[u8],
) -> Result<(), ImagingError> {
    debug_assert_eq!(pixels.len(), width * height);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()?;
    Ok(())
}

/// Quantize a normalized image to 8 bits and write it as P5.
pub fn save_pgm(path: &Path, img: &GrayImage) -> Result<(), ImagingError> {
    let bytes: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&p| (p * 255.0).round() as u8)
        .collect();
    write_pgm(path, img.width(), img.height(), &bytes)
}
