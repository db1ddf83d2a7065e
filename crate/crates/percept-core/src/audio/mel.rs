//! Mel scale conversions (HTK convention) and the triangular filterbank.

use super::AudioError;

/// mel = 2595 log10(1 + f / 700)
pub fn hz_to_mel(f: f64) -> Result<f64, AudioError> {
    if f < 0.0 {
        return Err(AudioError::NegativeFrequency(f));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

/// Exact inverse of [`hz_to_mel`].
pub fn mel_to_hz(m: f64) -> Result<f64, AudioError> {
    if m < 0.0 {
        return Err(AudioError::NegativeFrequency(m));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

/// Triangular mel filterbank as a `[n_mels][fft_size/2 + 1]` weight matrix.
///
/// Centers are equally spaced on the mel scale between `fmin` and `fmax`;
/// each filter rises from its lower neighbor's center and falls to its upper
/// neighbor's, and is rescaled so its largest sampled weight is exactly 1.
pub fn build_mel_filterbank(
    n_mels: usize,
    fft_size: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<Vec<Vec<f64>>, AudioError> {
    let nyquist = sample_rate as f64 / 2.0;
    if fmin < 0.0 || fmin >= fmax || fmax > nyquist {
        return Err(AudioError::BadMelRange {
            fmin,
            fmax,
            rate: sample_rate,
        });
    }
    let mel_lo = hz_to_mel(fmin)?;
    let mel_hi = hz_to_mel(fmax)?;
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| {
            let m = mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64;
            mel_to_hz(m).expect("mel points are non-negative")
        })
        .collect();

    let bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut filters = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut weights = vec![0.0f64; bins];
        let mut peak = 0.0f64;
        for (k, w) in weights.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let tri = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            *w = tri;
            peak = peak.max(tri);
        }
        if peak == 0.0 {
            return Err(AudioError::FilterbankResolution { n_mels, fft_size });
        }
        weights.iter_mut().for_each(|w| *w /= peak);
        filters.push(weights);
    }
    Ok(filters)
}
