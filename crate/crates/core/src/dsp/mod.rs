//! Signal-processing primitives: IIR lowpass design, filtering, rational
//! resampling, bell EQ, synthetic room impulse responses, STFT, and the
//! multi-resolution spectral distance.

pub mod filter;
pub mod resample;
pub mod rir;
pub mod stft;

pub use filter::{apply_iir, bell_biquad, bell_eq, design_lowpass, Biquad, FilterFamily, IirFilter};
pub use resample::resample;
pub use rir::{convolve_rir, measure_rt60, synth_rir, Rir};
pub use stft::{magnitude_spectrogram, mrstft_distance, Spectrogram};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Sample rates accepted at I/O boundaries. Internal processing (e.g. the
/// intermediate rates of a bandwidth round trip) is unrestricted.
pub const IO_SAMPLE_RATES: [u32; 5] = [8000, 16000, 24000, 44100, 48000];

/// A mono sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        AudioBuffer {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite sample at index {pos}"
            )));
        }
        Ok(())
    }

    pub fn check_same_rate(&self, other: &AudioBuffer) -> Result<()> {
        if self.sample_rate_hz != other.sample_rate_hz {
            return Err(Error::RateMismatch {
                a: self.sample_rate_hz,
                b: other.sample_rate_hz,
            });
        }
        Ok(())
    }

    pub fn check_same_len(&self, other: &AudioBuffer) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LenMismatch {
                a: self.len(),
                b: other.len(),
            });
        }
        Ok(())
    }
}
