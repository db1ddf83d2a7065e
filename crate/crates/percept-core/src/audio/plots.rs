//! Waveform / spectrogram / MFCC artifacts for a single clip.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::dsp::{frame_signal, hamming_window, power_spectrum};
use super::mfcc::LOG_FLOOR;
use super::{AudioBuffer, AudioError, FeatureMatrix, MfccConfig};
use crate::imaging::write_pgm;

/// Render the three inspection plots for one clip into `out_dir`:
///
/// * `waveform.csv` — `t,amplitude` per sample;
/// * `spectrogram.csv` / `spectrogram.pgm` — log power spectrum per frame;
/// * `mfcc.csv` / `mfcc.pgm` — the supplied feature matrix.
///
/// CSVs hold one frame per row at six decimals. PGMs are min-max normalized
/// per image and transposed so time runs along the horizontal axis.
pub fn render_audio_plots(
    buf: &AudioBuffer,
    cfg: &MfccConfig,
    features: &FeatureMatrix,
    out_dir: &Path,
) -> Result<(), AudioError> {
    std::fs::create_dir_all(out_dir)?;

    let mut w = BufWriter::new(File::create(out_dir.join("waveform.csv"))?);
    writeln!(w, "t,amplitude")?;
    for (i, &s) in buf.samples.iter().enumerate() {
        writeln!(w, "{:.6},{:.6}", i as f64 / buf.sample_rate as f64, s)?;
    }
    w.flush()?;

    let spec = log_spectrogram(buf, cfg)?;
    write_matrix_csv(&spec, &out_dir.join("spectrogram.csv"))?;
    write_matrix_pgm(&spec, &out_dir.join("spectrogram.pgm"))?;
    write_matrix_csv(features, &out_dir.join("mfcc.csv"))?;
    write_matrix_pgm(features, &out_dir.join("mfcc.pgm"))?;
    Ok(())
}

/// Log power spectrum with the same framing as MFCC extraction:
/// `[frames][fft/2 + 1]` of `ln(power + floor)`.
fn log_spectrogram(buf: &AudioBuffer, cfg: &MfccConfig) -> Result<FeatureMatrix, AudioError> {
    cfg.validate(buf.sample_rate)?;
    let frame_len = cfg.frame_len(buf.sample_rate);
    let fft_size = cfg.fft_len(buf.sample_rate);
    let frames = frame_signal(&buf.samples, frame_len, cfg.hop(buf.sample_rate))?;

    let mut out = FeatureMatrix::zeros(frames.len(), fft_size / 2 + 1);
    for (t, frame) in frames.iter().enumerate() {
        let windowed = hamming_window(frame)?;
        let power = power_spectrum(&windowed, fft_size)?;
        for (dst, p) in out.row_mut(t).iter_mut().zip(&power) {
            *dst = (p + LOG_FLOOR).ln();
        }
    }
    Ok(out)
}

fn write_matrix_csv(m: &FeatureMatrix, path: &Path) -> Result<(), AudioError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in 0..m.rows {
        let mut line = String::with_capacity(m.cols * 12);
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.6}"));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix_pgm(m: &FeatureMatrix, path: &Path) -> Result<(), AudioError> {
    let lo = m.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = m.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Transpose: matrix rows are frames, image columns are frames.
    let (width, height) = (m.rows, m.cols);
    let mut pixels = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            let v = m.row(x)[y];
            pixels[y * width + x] = if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                128 // flat image: one mid-gray level
            };
        }
    }
    write_pgm(path, width, height, &pixels)?;
    Ok(())
}
