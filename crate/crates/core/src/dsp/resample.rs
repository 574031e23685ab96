//! Rational-ratio resampling with an IIR anti-alias stage.
//!
//! The signal is zero-stuffed by `L`, lowpassed at `0.9 * min(rate_in,
//! rate_out) / 2` with an order-8 filter of the requested family (the
//! single filter acts as both anti-image and anti-alias), and decimated
//! by `M`, where `L/M` is the reduced rate ratio.

use super::filter::{apply_iir, design_lowpass, FilterFamily};
use super::AudioBuffer;
use crate::error::{Error, Result};

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Resample to `target_hz`. Same-rate calls return the input unchanged.
pub fn resample(x: &AudioBuffer, target_hz: u32, family: FilterFamily) -> Result<AudioBuffer> {
    if target_hz == 0 {
        return Err(Error::Domain("target rate must be positive".into()));
    }
    let src = x.sample_rate_hz;
    if target_hz == src {
        return Ok(x.clone());
    }
    let g = gcd(src as u64, target_hz as u64);
    let up = (target_hz as u64 / g) as usize;
    let down = (src as u64 / g) as usize;
    if up > 1024 || down > 1024 {
        return Err(Error::Domain(format!(
            "unsupported resampling ratio {src} -> {target_hz}: reduces to {up}/{down}, factors above 1024"
        )));
    }

    let up_rate = src as u64 * up as u64;
    let mut stuffed = vec![0.0; x.len() * up];
    for (i, &v) in x.samples.iter().enumerate() {
        stuffed[i * up] = v * up as f64;
    }
    let cutoff = 0.9 * (src.min(target_hz) as f64) / 2.0;
    let filt = design_lowpass(family, 8, cutoff, up_rate as f64)?;
    let filtered = apply_iir(&AudioBuffer::new(stuffed, up_rate.min(u32::MAX as u64) as u32), &filt);
    let out: Vec<f64> = filtered.samples.iter().step_by(down).copied().collect();
    Ok(AudioBuffer::new(out, target_hz))
}
