//! Synthetic demo datasets, shaped exactly like the real ingestion formats.
//!
//! Three generators, one per task: pure-tone "speakers" written as PCM16 WAV
//! clips plus a manifest, oriented sinusoidal gratings written as a FER-style
//! CSV, and bright/dark-center blobs written as PGM files plus a manifest.
//! Everything is a pure function of its seed, so regenerated datasets are
//! byte-identical and training runs on them are reproducible end to end.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::audio::{write_wav_pcm16, AudioError};
use crate::imaging::{save_pgm, GrayImage, ImagingError};
use crate::rng::Prng;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Fundamental frequencies of the five synthetic "speakers", in Hz. Spread
/// far enough apart that any two land in different mel bands.
pub const TONE_HZ: [f64; 5] = [110.0, 147.0, 196.0, 262.0, 330.0];

/// Shape of a generated speaker dataset.
#[derive(Debug, Clone, Copy)]
pub struct SpeakerSynth {
    pub clips_per_class: usize,
    pub sample_rate: u32,
    pub seconds: f64,
    /// Uniform noise amplitude relative to full scale.
    pub noise: f32,
}

impl Default for SpeakerSynth {
    fn default() -> Self {
        SpeakerSynth {
            clips_per_class: 200,
            sample_rate: 16_000,
            seconds: 1.0,
            noise: 0.01,
        }
    }
}

/// One sine clip at `freq_hz` with a random phase and additive uniform
/// noise, peak amplitude 0.8 so noise never clips.
pub fn tone_clip(
    freq_hz: f64,
    sample_rate: u32,
    n_samples: usize,
    noise: f32,
    prng: &mut Prng,
) -> Vec<f32> {
    let phase = prng.next_f64() * 2.0 * PI;
    let step = 2.0 * PI * freq_hz / f64::from(sample_rate);
    (0..n_samples)
        .map(|t| {
            let clean = 0.8 * (phase + step * t as f64).sin();
            clean as f32 + prng.uniform(-noise, noise)
        })
        .collect()
}

/// Write `TONE_HZ.len()` classes of tone clips under `dir` as
/// `speaker{c}/clip{j}.wav` plus a `manifest.csv` of relative paths.
/// Returns the manifest path.
pub fn write_speaker_dataset(
    dir: &Path,
    cfg: &SpeakerSynth,
    seed: u64,
) -> Result<PathBuf, SynthError> {
    let n_samples = (cfg.seconds * f64::from(cfg.sample_rate)).round() as usize;
    let mut prng = Prng::new(seed);
    let mut manifest = String::from("path,label\n");
    for (class, &freq) in TONE_HZ.iter().enumerate() {
        let sub = dir.join(format!("speaker{class}"));
        fs::create_dir_all(&sub)?;
        for j in 0..cfg.clips_per_class {
            let rel = format!("speaker{class}/clip{j:03}.wav");
            let samples = tone_clip(freq, cfg.sample_rate, n_samples, cfg.noise, &mut prng);
            write_wav_pcm16(&dir.join(&rel), &samples, cfg.sample_rate)?;
            manifest.push_str(&format!("{rel},{class}\n"));
        }
    }
    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

/// Number of grating orientation classes (one per FER emotion slot).
pub const GRATING_CLASSES: usize = 7;

/// A sinusoidal grating oriented at `class * 180° / 7`, with random phase,
/// slight frequency jitter, and pixel noise. Values stay in [0, 1].
pub fn grating_image(side: usize, class: usize, prng: &mut Prng) -> GrayImage {
    let theta = class as f64 * PI / GRATING_CLASSES as f64;
    let (sin_t, cos_t) = theta.sin_cos();
    let cycles = 4.0 * (1.0 + 0.05 * (prng.next_f64() - 0.5));
    let phase = prng.next_f64() * 2.0 * PI;
    let scale = 2.0 * PI * cycles / side as f64;
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let u = x as f64 * cos_t + y as f64 * sin_t;
            let v = 0.5 + 0.4 * (scale * u + phase).sin();
            let noisy = v as f32 + prng.uniform(-0.03, 0.03);
            pixels.push(noisy.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(side, side, pixels).expect("side*side pixels")
}

/// Write a FER-format CSV (`emotion,pixels,Usage`, 48x48, pixels 0-255) of
/// oriented gratings, `per_class` rows for each of the seven classes.
pub fn write_fer_csv(path: &Path, per_class: usize, seed: u64) -> Result<(), SynthError> {
    const SIDE: usize = 48;
    let mut prng = Prng::new(seed);
    let mut out = fs::File::create(path)?;
    writeln!(out, "emotion,pixels,Usage")?;
    for class in 0..GRATING_CLASSES {
        for _ in 0..per_class {
            let img = grating_image(SIDE, class, &mut prng);
            let pixels: Vec<String> = img
                .pixels()
                .iter()
                .map(|&v| ((v * 255.0).round() as u32).to_string())
                .collect();
            writeln!(out, "{class},{},Training", pixels.join(" "))?;
        }
    }
    Ok(())
}

/// A Gaussian blob on a contrasting background: bright-center blobs sit on a
/// dark field and vice versa. Center position, radius, and both intensity
/// levels jitter per draw, so the class signal is the contrast polarity, not
/// any fixed pixel.
pub fn blob_image(side: usize, bright_center: bool, prng: &mut Prng) -> GrayImage {
    let s = side as f64;
    let cx = s / 2.0 + (prng.next_f64() - 0.5) * s / 4.0;
    let cy = s / 2.0 + (prng.next_f64() - 0.5) * s / 4.0;
    let sigma = s * (0.15 + 0.10 * prng.next_f64());
    let lo = 0.1 + 0.1 * prng.next_f64();
    let hi = 0.7 + 0.2 * prng.next_f64();
    let (bg, fg) = if bright_center { (lo, hi) } else { (hi, lo) };
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            let v = bg + (fg - bg) * (-d2 / (2.0 * sigma * sigma)).exp();
            let noisy = v as f32 + prng.uniform(-0.05, 0.05);
            pixels.push(noisy.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(side, side, pixels).expect("side*side pixels")
}

/// Write a two-class eye-style dataset of 64x64 blob PGMs under `dir`
/// (label 0 = dark center / "closed", label 1 = bright center / "open")
/// plus a `manifest.csv`. Returns the manifest path.
pub fn write_eye_dataset(dir: &Path, per_class: usize, seed: u64) -> Result<PathBuf, SynthError> {
    const SIDE: usize = 64;
    let mut prng = Prng::new(seed);
    fs::create_dir_all(dir)?;
    let mut manifest = String::from("path,label\n");
    for class in 0..2u32 {
        for j in 0..per_class {
            let rel = format!("eye{class}_{j:03}.pgm");
            let img = blob_image(SIDE, class == 1, &mut prng);
            save_pgm(&dir.join(&rel), &img)?;
            manifest.push_str(&format!("{rel},{class}\n"));
        }
    }
    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}
