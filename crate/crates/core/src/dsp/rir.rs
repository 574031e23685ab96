//! Synthetic room impulse responses and convolution reverb.
//!
//! The generator is exponentially decaying white noise with a unit
//! direct-path tap: `tap[n] = eps_n * exp(-6.908 n / (rt60 * fs))`, where
//! 6.908 = ln(10^3) makes the amplitude fall 60 dB over `rt60` seconds.

use super::AudioBuffer;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const DECAY_60DB: f64 = 6.908;

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate_hz: u32,
    pub rt60_s: f64,
}

/// Generate a synthetic RIR with the requested RT60.
pub fn synth_rir(rt60_s: f64, fs_hz: u32, rng: &mut impl Rng) -> Result<Rir> {
    if !(0.1..=2.0).contains(&rt60_s) {
        return Err(Error::Domain(format!(
            "rt60 must lie in [0.1, 2.0] s, got {rt60_s}"
        )));
    }
    let len = (rt60_s * fs_hz as f64).ceil() as usize + 1;
    let tau = DECAY_60DB / (rt60_s * fs_hz as f64);
    let mut taps = Vec::with_capacity(len);
    taps.push(1.0);
    for n in 1..len {
        let eps: f64 = rng.sample(StandardNormal);
        taps.push(eps * (-tau * n as f64).exp());
    }
    Ok(Rir {
        taps,
        sample_rate_hz: fs_hz,
        rt60_s,
    })
}

/// Measure RT60 by Schroeder backward integration: least-squares slope of
/// the energy-decay curve between -5 dB and -25 dB, extrapolated to 60 dB.
pub fn measure_rt60(rir: &Rir) -> f64 {
    let h = &rir.taps;
    let mut edc = vec![0.0f64; h.len()];
    let mut acc = 0.0;
    for (i, &v) in h.iter().enumerate().rev() {
        acc += v * v;
        edc[i] = acc;
    }
    let total = edc[0];
    let fs = rir.sample_rate_hz as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &e) in edc.iter().enumerate() {
        let db = 10.0 * (e / total).log10();
        if (-25.0..=-5.0).contains(&db) {
            xs.push(i as f64 / fs);
            ys.push(db);
        }
    }
    if xs.len() < 2 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx; // dB per second, negative
    -60.0 / slope
}

/// Full linear convolution by FFT overlap-add, truncated to the input
/// length.
pub fn convolve_rir(x: &AudioBuffer, rir: &Rir) -> Result<AudioBuffer> {
    if x.sample_rate_hz != rir.sample_rate_hz {
        return Err(Error::RateMismatch {
            a: x.sample_rate_hz,
            b: rir.sample_rate_hz,
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("convolution input".into()));
    }
    let out = fft_convolve_truncated(&x.samples, &rir.taps, x.len());
    Ok(AudioBuffer::new(out, x.sample_rate_hz))
}

/// Overlap-add convolution of `x` with kernel `h`, truncated to `out_len`.
pub fn fft_convolve_truncated(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    let m = h.len();
    let fft_len = (2 * m.max(4096)).next_power_of_two();
    let block = fft_len - m + 1;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);

    let mut hbuf: Vec<Complex<f64>> = h
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    fft.process(&mut hbuf);

    let mut out = vec![0.0f64; out_len];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    let scale = 1.0 / fft_len as f64;
    let mut start = 0;
    while start < x.len() && start < out_len {
        let end = (start + block).min(x.len());
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = start + i;
            *b = if idx < end && i < block {
                Complex::new(x[idx], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (b, hv) in buf.iter_mut().zip(&hbuf) {
            *b *= hv;
        }
        ifft.process(&mut buf);
        for (i, b) in buf.iter().enumerate() {
            let idx = start + i;
            if idx < out_len {
                out[idx] += b.re * scale;
            }
        }
        start += block;
    }
    out
}
