//! MFCC extraction: frame, window, power spectrum, mel filterbank, log, DCT.

use super::dsp::{dct2, frame_signal, hamming_window, power_spectrum};
use super::mel::build_mel_filterbank;
use super::{AudioBuffer, AudioError, FeatureMatrix, MfccConfig};

/// Floor added inside the log to keep silent frames finite.
pub const LOG_FLOOR: f64 = 1e-10;

/// Compute MFCCs for one buffer, one row of `cfg.n_coeffs` values per frame.
pub fn mfcc(buf: &AudioBuffer, cfg: &MfccConfig) -> Result<FeatureMatrix, AudioError> {
    cfg.validate(buf.sample_rate)?;
    let frame_len = cfg.frame_len(buf.sample_rate);
    let hop = cfg.hop(buf.sample_rate);
    let fft_size = cfg.fft_len(buf.sample_rate);

    let frames = frame_signal(&buf.samples, frame_len, hop)?;
    let filters = build_mel_filterbank(
        cfg.n_mels,
        fft_size,
        buf.sample_rate,
        cfg.fmin,
        cfg.band_top(buf.sample_rate),
    )?;

    let mut out = FeatureMatrix::zeros(frames.len(), cfg.n_coeffs);
    let mut log_energies = vec![0.0f64; cfg.n_mels];
    for (t, frame) in frames.iter().enumerate() {
        let windowed = hamming_window(frame)?;
        let power = power_spectrum(&windowed, fft_size)?;
        for (e, filter) in log_energies.iter_mut().zip(&filters) {
            let sum: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            *e = (sum + LOG_FLOOR).ln();
        }
        let coeffs = dct2(&log_energies, cfg.n_coeffs)?;
        out.row_mut(t).copy_from_slice(&coeffs);
    }
    Ok(out)
}

/// Join several buffers of identical sample rate into one continuous buffer.
pub fn concat_snippets(parts: &[AudioBuffer]) -> Result<AudioBuffer, AudioError> {
    let first = parts.first().ok_or(AudioError::EmptyInput)?;
    let rate = first.sample_rate;
    let total: usize = parts.iter().map(|p| p.samples.len()).sum();
    let mut samples = Vec::with_capacity(total);
    for p in parts {
        if p.sample_rate != rate {
            return Err(AudioError::MixedSampleRates {
                a: rate,
                b: p.sample_rate,
            });
        }
        samples.extend_from_slice(&p.samples);
    }
    Ok(AudioBuffer {
        samples,
        sample_rate: rate,
    })
}
