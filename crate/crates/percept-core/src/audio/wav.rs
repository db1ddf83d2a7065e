//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.
//!
//! The reader walks the chunk list, skipping anything it does not understand
//! (LIST, fact, cue, ...), and accepts mono or stereo; stereo is mixed down
//! by averaging. The writer emits the plain 44-byte-header mono layout the
//! synthetic datasets use.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{AudioBuffer, AudioError};

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Decode a 16-bit PCM WAV from raw file bytes.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotRiff);
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // code, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body = at + 8;
        if body + size > bytes.len() {
            let name: &'static str = match id {
                b"fmt " => "fmt",
                b"data" => "data",
                _ => "unknown",
            };
            return Err(AudioError::TruncatedChunk(name));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::TruncatedChunk("fmt"));
                }
                fmt = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => data = Some(&bytes[body..body + size]),
            _ => {}
        }
        // Chunk bodies are word-aligned; odd sizes carry a pad byte.
        at = body + size + (size & 1);
    }

    let (code, channels, rate, bits) = fmt.ok_or(AudioError::MissingFmt)?;
    if code != 1 {
        return Err(AudioError::UnsupportedFormatCode(code));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedBitDepth(bits));
    }
    if channels == 0 || channels > 2 {
        return Err(AudioError::UnsupportedChannelCount(channels));
    }
    let data = data.ok_or(AudioError::MissingData)?;

    let bytes_per_frame = 2 * channels as usize;
    let n_frames = data.len() / bytes_per_frame;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0f32;
        for c in 0..channels as usize {
            let at = f * bytes_per_frame + 2 * c;
            let s = i16::from_le_bytes([data[at], data[at + 1]]);
            acc += s as f32 / 32768.0;
        }
        samples.push(acc / channels as f32);
    }
    Ok(AudioBuffer {
        samples,
        sample_rate: rate,
    })
}

/// Read and decode a WAV file from disk.
pub fn read_wav(path: &Path) -> Result<AudioBuffer, AudioError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_wav(&bytes)
}

/// Write a mono 16-bit PCM WAV. Samples are clamped to [-1, 1].
pub fn write_wav_pcm16(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), AudioError> {
    let data_len = (samples.len() * 2) as u32;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?; // PCM
    w.write_all(&1u16.to_le_bytes())?; // mono
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(sample_rate * 2).to_le_bytes())?; // byte rate
    w.write_all(&2u16.to_le_bytes())?; // block align
    w.write_all(&16u16.to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())?;
    for &s in samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_all(&q.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}
