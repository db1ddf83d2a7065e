//! Framing, windowing, radix-2 FFT power spectrum, and the orthonormal
//! DCT-II. All arithmetic is f64.

use super::AudioError;
use std::f64::consts::PI;

/// Smallest power of two at or above `n`.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Slice a signal into overlapping frames of `frame_len` samples advancing by
/// `hop`. The trailing partial frame is dropped, so the frame count is
/// 1 + floor((len - frame_len) / hop).
pub fn frame_signal(
    samples: &[f32],
    frame_len: usize,
    hop: usize,
) -> Result<Vec<Vec<f64>>, AudioError> {
    if samples.len() < frame_len {
        return Err(AudioError::SignalTooShort {
            len: samples.len(),
            frame_len,
        });
    }
    let count = 1 + (samples.len() - frame_len) / hop;
    let mut frames = Vec::with_capacity(count);
    for t in 0..count {
        let start = t * hop;
        frames.push(
            samples[start..start + frame_len]
                .iter()
                .map(|&x| x as f64)
                .collect(),
        );
    }
    Ok(frames)
}

/// Hamming window: w[n] = 0.54 - 0.46 cos(2 pi n / (N - 1)).
pub fn hamming_window(frame: &[f64]) -> Result<Vec<f64>, AudioError> {
    let n = frame.len();
    if n < 2 {
        return Err(AudioError::WindowTooShort);
    }
    Ok(frame
        .iter()
        .enumerate()
        .map(|(i, &x)| x * (0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
        .collect())
}

/// In-place iterative radix-2 FFT over parallel real/imaginary arrays.
pub fn fft_radix2(re: &mut [f64], im: &mut [f64]) -> Result<(), AudioError> {
    let n = re.len();
    if n != im.len() || !n.is_power_of_two() {
        return Err(AudioError::FftSizeNotPowerOfTwo(n));
    }
    if n == 1 {
        return Ok(());
    }
    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let (w_re, w_im) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut cur_re = 1.0f64;
            let mut cur_im = 0.0f64;
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let t_re = re[b] * cur_re - im[b] * cur_im;
                let t_im = re[b] * cur_im + im[b] * cur_re;
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
        }
        len *= 2;
    }
    Ok(())
}

/// One-sided power spectrum |X[k]|^2 for k = 0..=fft_size/2. The frame is
/// zero-padded to `fft_size`.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Result<Vec<f64>, AudioError> {
    if !fft_size.is_power_of_two() {
        return Err(AudioError::FftSizeNotPowerOfTwo(fft_size));
    }
    if frame.len() > fft_size {
        return Err(AudioError::FrameExceedsFft {
            frame: frame.len(),
            fft: fft_size,
        });
    }
    let mut re = vec![0.0f64; fft_size];
    let mut im = vec![0.0f64; fft_size];
    re[..frame.len()].copy_from_slice(frame);
    fft_radix2(&mut re, &mut im)?;
    Ok((0..=fft_size / 2)
        .map(|k| re[k] * re[k] + im[k] * im[k])
        .collect())
}

/// Orthonormal DCT-II, truncated to the first `n_coeffs` coefficients:
/// X[k] = s(k) * sum_n v[n] cos(pi k (2n + 1) / (2N)),
/// s(0) = sqrt(1/N), s(k>0) = sqrt(2/N).
pub fn dct2(v: &[f64], n_coeffs: usize) -> Result<Vec<f64>, AudioError> {
    let n = v.len();
    if n_coeffs > n {
        return Err(AudioError::CoeffCountTooLarge { n_coeffs, n });
    }
    let mut out = Vec::with_capacity(n_coeffs);
    for k in 0..n_coeffs {
        let mut acc = 0.0f64;
        for (j, &x) in v.iter().enumerate() {
            acc += x * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos();
        }
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        out.push(scale * acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    /// Naive O(N^2) DFT used as the FFT oracle.
    fn naive_dft(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for (k, (rk, ik)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
            for (j, &xj) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * j) as f64 / n as f64;
                *rk += xj * ang.cos();
                *ik += xj * ang.sin();
            }
        }
        (re, im)
    }

    #[test]
    fn framing_arithmetic_matches_formula() {
        // 1 s at 16 kHz, 25 ms frames, 10 ms hop: 98 frames of 400.
        let signal = vec![0.0f32; 16_000];
        let frames = frame_signal(&signal, 400, 160).unwrap();
        assert_eq!(frames.len(), 98);
        assert_eq!(frames[0].len(), 400);
    }

    #[test]
    fn framing_single_frame_and_short_signal() {
        let signal = vec![0.5f32; 400];
        assert_eq!(frame_signal(&signal, 400, 160).unwrap().len(), 1);
        let short = vec![0.0f32; 100];
        assert!(matches!(
            frame_signal(&short, 400, 160),
            Err(AudioError::SignalTooShort { .. })
        ));
    }

    #[test]
    fn hamming_endpoints_and_midpoint() {
        let frame = vec![1.0f64; 11];
        let w = hamming_window(&frame).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[10] - 0.08).abs() < 1e-12);
        assert!((w[5] - 1.0).abs() < 1e-12); // cos(pi) term: 0.54 + 0.46

        let zeros = vec![0.0f64; 32];
        assert!(hamming_window(&zeros).unwrap().iter().all(|&x| x == 0.0));
        assert!(matches!(
            hamming_window(&[1.0]),
            Err(AudioError::WindowTooShort)
        ));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut frame = vec![0.0f64; 16];
        frame[0] = 1.0;
        let p = power_spectrum(&frame, 16).unwrap();
        assert_eq!(p.len(), 9);
        for &v in &p {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_concentrates_in_one_bin() {
        // x[n] = cos(2 pi 2 n / 8): bin 2 carries power 16, the rest nothing.
        let frame: Vec<f64> = (0..8).map(|n| (2.0 * PI * 2.0 * n as f64 / 8.0).cos()).collect();
        let p = power_spectrum(&frame, 8).unwrap();
        assert!((p[2] - 16.0).abs() < 1e-9);
        for (k, &v) in p.iter().enumerate() {
            if k != 2 {
                assert!(v.abs() < 1e-9, "bin {k} leaked {v}");
            }
        }
    }

    #[test]
    fn fft_matches_naive_dft() {
        let mut prng = Prng::new(21);
        for &n in &[8usize, 64, 256] {
            let x: Vec<f64> = (0..n).map(|_| prng.uniform(-1.0, 1.0) as f64).collect();
            let (re_ref, im_ref) = naive_dft(&x);
            let p = power_spectrum(&x, n).unwrap();
            for k in 0..=n / 2 {
                let want = re_ref[k] * re_ref[k] + im_ref[k] * im_ref[k];
                assert!((p[k] - want).abs() < 1e-9, "N={n} bin {k}");
            }
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(matches!(
            power_spectrum(&[0.0; 12], 12),
            Err(AudioError::FftSizeNotPowerOfTwo(12))
        ));
    }

    #[test]
    fn parseval_holds() {
        let mut prng = Prng::new(30);
        let n = 256usize;
        let x: Vec<f64> = (0..n).map(|_| prng.uniform(-1.0, 1.0) as f64).collect();
        let time_energy: f64 = x.iter().map(|v| v * v).sum();
        let mut re = x.clone();
        let mut im = vec![0.0; n];
        fft_radix2(&mut re, &mut im).unwrap();
        let freq_energy: f64 = re
            .iter()
            .zip(im.iter())
            .map(|(r, i)| r * r + i * i)
            .sum::<f64>()
            / n as f64;
        let rel = (time_energy - freq_energy).abs() / time_energy;
        assert!(rel < 1e-6, "Parseval rel error {rel}");
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let n = 26usize;
        let c = 0.75f64;
        let v = vec![c; n];
        let out = dct2(&v, n).unwrap();
        assert!((out[0] - c * (n as f64).sqrt()).abs() < 1e-9);
        for &x in &out[1..] {
            assert!(x.abs() < 1e-9);
        }
    }

    #[test]
    fn dct_matches_direct_formula() {
        let mut prng = Prng::new(17);
        let n = 26usize;
        let v: Vec<f64> = (0..n).map(|_| prng.uniform(-2.0, 2.0) as f64).collect();
        let got = dct2(&v, 13).unwrap();
        for (k, &g) in got.iter().enumerate() {
            let mut acc = 0.0f64;
            for (j, &x) in v.iter().enumerate() {
                acc += x * (PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n as f64)).cos();
            }
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            assert!((g - scale * acc).abs() < 1e-9);
        }
    }

    #[test]
    fn dct_full_length_inverts() {
        let mut prng = Prng::new(19);
        let n = 26usize;
        let v: Vec<f64> = (0..n).map(|_| prng.uniform(-1.0, 1.0) as f64).collect();
        let coeffs = dct2(&v, n).unwrap();
        // Orthonormal DCT-III reconstruction.
        for (j, &orig) in v.iter().enumerate() {
            let mut acc = coeffs[0] * (1.0 / n as f64).sqrt();
            for (k, &c) in coeffs.iter().enumerate().skip(1) {
                acc += c
                    * (2.0 / n as f64).sqrt()
                    * (PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n as f64)).cos();
            }
            assert!((acc - orig).abs() < 1e-6);
        }
    }

    #[test]
    fn dct_coeff_count_bounded() {
        assert!(matches!(
            dct2(&[1.0, 2.0], 3),
            Err(AudioError::CoeffCountTooLarge { .. })
        ));
    }
}
