//! Audio front end for the speaker-identification pipeline.
//!
//! The chain runs WAV ingestion, framing, Hamming windowing, an in-repo
//! radix-2 FFT power spectrum, a triangular mel filterbank, log compression,
//! and an orthonormal DCT-II, producing one MFCC row per frame. DSP
//! arithmetic is f64 throughout; features are stored as f32 at the pipeline
//! boundary.

mod cache;
mod dsp;
mod mel;
mod mfcc;
mod plots;
mod scaler;
mod wav;

pub use cache::{read_feature_cache, write_feature_cache, FeatureClip};
pub use dsp::{dct2, fft_radix2, frame_signal, hamming_window, next_pow2, power_spectrum};
pub use mel::{build_mel_filterbank, hz_to_mel, mel_to_hz};
pub use mfcc::{concat_snippets, mfcc};
pub use plots::render_audio_plots;
pub use scaler::FeatureScaler;
pub use wav::{parse_wav, read_wav, write_wav_pcm16};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    // WAV container
    #[error("not a RIFF/WAVE file")]
    NotRiff,
    #[error("missing fmt chunk")]
    MissingFmt,
    #[error("missing data chunk")]
    MissingData,
    #[error("unsupported WAV format code {0} (only PCM code 1)")]
    UnsupportedFormatCode(u16),
    #[error("unsupported bit depth {0} (only 16-bit)")]
    UnsupportedBitDepth(u16),
    #[error("unsupported channel count {0} (mono or stereo)")]
    UnsupportedChannelCount(u16),
    #[error("truncated {0} chunk")]
    TruncatedChunk(&'static str),

    // DSP
    #[error("signal of {len} samples is shorter than one frame of {frame_len}")]
    SignalTooShort { len: usize, frame_len: usize },
    #[error("window needs at least 2 samples")]
    WindowTooShort,
    #[error("FFT size {0} is not a power of two")]
    FftSizeNotPowerOfTwo(usize),
    #[error("frame of {frame} samples exceeds FFT size {fft}")]
    FrameExceedsFft { frame: usize, fft: usize },
    #[error("frequency {0} is negative")]
    NegativeFrequency(f64),
    #[error("mel band edges must satisfy 0 <= fmin < fmax <= Nyquist, got [{fmin}, {fmax}] at rate {rate}")]
    BadMelRange { fmin: f64, fmax: f64, rate: u32 },
    #[error("{n_mels} mel filters do not fit distinct FFT bins at size {fft_size}")]
    FilterbankResolution { n_mels: usize, fft_size: usize },
    #[error("requested {n_coeffs} coefficients from {n} inputs")]
    CoeffCountTooLarge { n_coeffs: usize, n: usize },

    // Scaling and assembly
    #[error("scaler needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("feature width {got} does not match scaler width {want}")]
    WidthMismatch { want: usize, got: usize },
    #[error("mixed sample rates: {a} Hz vs {b} Hz")]
    MixedSampleRates { a: u32, b: u32 },
    #[error("no input buffers")]
    EmptyInput,

    // Feature cache
    #[error("bad feature-cache magic")]
    CacheMagic,
    #[error("unsupported feature-cache version {0}")]
    CacheVersion(u32),
    #[error("truncated feature cache")]
    CacheTruncated,

    #[error("plot image: {0}")]
    Plot(#[from] crate::imaging::ImagingError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono sample sequence plus its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// MFCC extraction parameters. Frame geometry is given in milliseconds so the
/// same configuration applies across sample rates; the FFT size defaults to
/// the next power of two at or above the frame length and the upper band edge
/// defaults to Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub fft_size: Option<usize>,
    pub fmin: f64,
    pub fmax: Option<f64>,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 26,
            n_coeffs: 13,
            fft_size: None,
            fmin: 0.0,
            fmax: None,
        }
    }
}

impl MfccConfig {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_len_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn fft_len(&self, sample_rate: u32) -> usize {
        self.fft_size
            .unwrap_or_else(|| next_pow2(self.frame_len(sample_rate)))
    }

    pub fn band_top(&self, sample_rate: u32) -> f64 {
        self.fmax.unwrap_or(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), AudioError> {
        if self.n_coeffs > self.n_mels {
            return Err(AudioError::CoeffCountTooLarge {
                n_coeffs: self.n_coeffs,
                n: self.n_mels,
            });
        }
        let frame = self.frame_len(sample_rate);
        let fft = self.fft_len(sample_rate);
        if !fft.is_power_of_two() {
            return Err(AudioError::FftSizeNotPowerOfTwo(fft));
        }
        if frame > fft {
            return Err(AudioError::FrameExceedsFft { frame, fft });
        }
        let nyquist = sample_rate as f64 / 2.0;
        let fmax = self.band_top(sample_rate);
        if self.fmin < 0.0 || self.fmin >= fmax || fmax > nyquist {
            return Err(AudioError::BadMelRange {
                fmin: self.fmin,
                fmax,
                rate: sample_rate,
            });
        }
        Ok(())
    }
}

/// Row-major f64 matrix used for per-frame feature data.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}
