//! On-disk feature cache so featurization runs once per dataset.
//!
//! Layout (all integers little-endian):
//! `"MFCC"` magic, `u32` version (1), then per clip: `u32` label,
//! `u32` frame count, `u32` coefficient count, and `frames * coeffs`
//! f32 values in row-major order. Clips repeat until end of file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::AudioError;

const MAGIC: &[u8; 4] = b"MFCC";
const VERSION: u32 = 1;

/// One featurized clip: a `[frames][coeffs]` matrix plus its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureClip {
    pub label: u32,
    pub frames: usize,
    pub coeffs: usize,
    pub data: Vec<f32>,
}

pub fn write_feature_cache(path: &Path, clips: &[FeatureClip]) -> Result<(), AudioError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for clip in clips {
        debug_assert_eq!(clip.data.len(), clip.frames * clip.coeffs);
        w.write_all(&clip.label.to_le_bytes())?;
        w.write_all(&(clip.frames as u32).to_le_bytes())?;
        w.write_all(&(clip.coeffs as u32).to_le_bytes())?;
        for &v in &clip.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_cache(path: &Path) -> Result<Vec<FeatureClip>, AudioError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| AudioError::CacheMagic)?;
    if &magic != MAGIC {
        return Err(AudioError::CacheMagic);
    }
    let version = read_u32(&mut r).ok_or(AudioError::CacheTruncated)?;
    if version != VERSION {
        return Err(AudioError::CacheVersion(version));
    }

    let mut clips = Vec::new();
    loop {
        let label = match read_u32(&mut r) {
            Some(v) => v,
            None => break, // clean end of file
        };
        let frames = read_u32(&mut r).ok_or(AudioError::CacheTruncated)? as usize;
        let coeffs = read_u32(&mut r).ok_or(AudioError::CacheTruncated)? as usize;
        let mut data = vec![0.0f32; frames * coeffs];
        let mut bytes = vec![0u8; frames * coeffs * 4];
        r.read_exact(&mut bytes)
            .map_err(|_| AudioError::CacheTruncated)?;
        for (v, chunk) in data.iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        clips.push(FeatureClip {
            label,
            frames,
            coeffs,
            data,
        });
    }
    Ok(clips)
}

fn read_u32(r: &mut impl Read) -> Option<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).ok()?;
    Some(u32::from_le_bytes(b))
}
