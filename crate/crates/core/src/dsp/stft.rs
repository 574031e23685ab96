//! STFT, magnitude spectrograms, and the multi-resolution spectral
//! distance (spectral convergence plus log-magnitude L1 per resolution).

use super::AudioBuffer;
use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Magnitude floor for logarithmic terms.
pub const MAG_FLOOR: f64 = 1e-8;

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
        .collect()
}

/// One-sided complex STFT frames (bins `0..=win/2`). Signals shorter than
/// the window are zero-padded to one full frame.
pub fn stft_complex(x: &[f64], win: usize, hop: usize) -> Vec<Vec<Complex<f64>>> {
    assert!(win >= 2 && hop >= 1);
    let padded;
    let x = if x.len() < win {
        padded = {
            let mut p = x.to_vec();
            p.resize(win, 0.0);
            p
        };
        &padded[..]
    } else {
        x
    };
    let window = hann(win);
    let n_frames = 1 + (x.len() - win) / hop;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(win);
    let bins = win / 2 + 1;
    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); win];
    for f in 0..n_frames {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(x[f * hop + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..bins].to_vec());
    }
    frames
}

/// Magnitude spectrogram, row-major `frames x bins`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub mag: Vec<f64>,
}

impl Spectrogram {
    pub fn frobenius(&self) -> f64 {
        self.mag.iter().map(|m| m * m).sum::<f64>().sqrt()
    }
}

pub fn magnitude_spectrogram(x: &[f64], win: usize, hop: usize) -> Spectrogram {
    let frames = stft_complex(x, win, hop);
    let n_frames = frames.len();
    let bins = frames.first().map_or(0, Vec::len);
    let mut mag = Vec::with_capacity(n_frames * bins);
    for frame in &frames {
        mag.extend(frame.iter().map(|c| c.norm()));
    }
    Spectrogram {
        frames: n_frames,
        bins,
        mag,
    }
}

/// Spectral-convergence and log-magnitude-L1 terms between two magnitude
/// spectrograms of equal shape. The convergence denominator is the larger
/// Frobenius norm, keeping the distance symmetric.
pub fn spectral_terms(a: &Spectrogram, b: &Spectrogram) -> (f64, f64) {
    assert_eq!(a.mag.len(), b.mag.len());
    let diff2: f64 = a
        .mag
        .iter()
        .zip(&b.mag)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let denom = a.frobenius().max(b.frobenius());
    let sc = if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 };
    let lm = a
        .mag
        .iter()
        .zip(&b.mag)
        .map(|(x, y)| (x.max(MAG_FLOOR).ln() - y.max(MAG_FLOOR).ln()).abs())
        .sum::<f64>()
        / a.mag.len() as f64;
    (sc, lm)
}

/// Multi-resolution spectral distance: for each window size in
/// `resolutions` (hop = window / 4), sum of spectral convergence and
/// log-magnitude L1. Zero iff the magnitude spectrograms agree at every
/// resolution; symmetric and nonnegative.
pub fn mrstft_distance(a: &AudioBuffer, b: &AudioBuffer, resolutions: &[usize]) -> Result<f64> {
    a.check_same_rate(b)?;
    a.check_same_len(b)?;
    if resolutions.is_empty() {
        return Err(Error::Domain("resolution set must be nonempty".into()));
    }
    let mut total = 0.0;
    for &win in resolutions {
        let hop = (win / 4).max(1);
        let sa = magnitude_spectrogram(&a.samples, win, hop);
        let sb = magnitude_spectrogram(&b.samples, win, hop);
        let (sc, lm) = spectral_terms(&sa, &sb);
        total += sc + lm;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, fs: u32, n: usize) -> AudioBuffer {
        let s: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs as f64).sin() * 0.5)
            .collect();
        AudioBuffer::new(s, fs)
    }

    /// Independent oracle: naive DFT magnitudes.
    fn naive_mag_spectrogram(x: &[f64], win: usize, hop: usize) -> Vec<f64> {
        let window: Vec<f64> = (0..win)
            .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / win as f64).cos()))
            .collect();
        let x = if x.len() < win {
            let mut p = x.to_vec();
            p.resize(win, 0.0);
            p
        } else {
            x.to_vec()
        };
        let n_frames = 1 + (x.len() - win) / hop;
        let bins = win / 2 + 1;
        let mut out = Vec::with_capacity(n_frames * bins);
        for f in 0..n_frames {
            for k in 0..bins {
                let (mut re, mut im) = (0.0, 0.0);
                for n in 0..win {
                    let th = std::f64::consts::TAU * (k * n) as f64 / win as f64;
                    let v = x[f * hop + n] * window[n];
                    re += v * th.cos();
                    im -= v * th.sin();
                }
                out.push((re * re + im * im).sqrt());
            }
        }
        out
    }

    fn naive_mrstft(a: &AudioBuffer, b: &AudioBuffer, resolutions: &[usize]) -> f64 {
        let mut total = 0.0;
        for &win in resolutions {
            let hop = (win / 4).max(1);
            let ma = naive_mag_spectrogram(&a.samples, win, hop);
            let mb = naive_mag_spectrogram(&b.samples, win, hop);
            let diff2: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum();
            let na: f64 = ma.iter().map(|m| m * m).sum::<f64>().sqrt();
            let nb: f64 = mb.iter().map(|m| m * m).sum::<f64>().sqrt();
            let denom = na.max(nb);
            let sc = if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 };
            let lm = ma
                .iter()
                .zip(&mb)
                .map(|(x, y)| (x.max(MAG_FLOOR).ln() - y.max(MAG_FLOOR).ln()).abs())
                .sum::<f64>()
                / ma.len() as f64;
            total += sc + lm;
        }
        total
    }

    #[test]
    fn identical_signals_zero() {
        let x = sine(1000.0, 48000, 4096);
        assert_eq!(mrstft_distance(&x, &x, &[512, 1024, 2048]).unwrap(), 0.0);
    }

    #[test]
    fn sign_flip_invisible_to_magnitudes() {
        let x = sine(1000.0, 48000, 4096);
        let neg = AudioBuffer::new(x.samples.iter().map(|v| -v).collect(), 48000);
        let d = mrstft_distance(&x, &neg, &[512, 1024, 2048]).unwrap();
        assert!(d < 1e-10, "distance {d}");
    }

    #[test]
    fn distinct_tones_match_naive_dft_oracle() {
        let a = sine(1000.0, 48000, 4096);
        let b = sine(2000.0, 48000, 4096);
        let res = [512usize, 1024, 2048];
        let fast = mrstft_distance(&a, &b, &res).unwrap();
        let slow = naive_mrstft(&a, &b, &res);
        assert!(fast > 0.0);
        assert!((fast - slow).abs() < 1e-6, "fast {fast} vs naive {slow}");
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = sine(1000.0, 48000, 4096);
        let b = sine(1000.0, 48000, 2048);
        assert!(mrstft_distance(&a, &b, &[512]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn premetric_properties(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 1024;
            let a = AudioBuffer::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000);
            let b = AudioBuffer::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000);
            let res = [128usize, 256];
            let dab = mrstft_distance(&a, &b, &res).unwrap();
            let dba = mrstft_distance(&b, &a, &res).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert_eq!(mrstft_distance(&a, &a, &res).unwrap(), 0.0);
        }
    }
}
