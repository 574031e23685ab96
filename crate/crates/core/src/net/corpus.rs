//! Synthetic paired corpus: harmonic "speech-like" signals at 8 kHz with
//! degraded twins, framed into fixed-length encoder inputs.

use crate::degrade::{degrade, AppliedOps, DegradationSpec};
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_train: usize,
    pub n_heldout: usize,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub frame_len: usize,
    pub seed: u64,
    pub degradation: DegradationSpec,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_train: 96,
            n_heldout: 50,
            sample_rate: 8000,
            duration_s: 1.0,
            frame_len: 256,
            seed: 0,
            degradation: DegradationSpec {
                // 8 kHz toy rates: only sub-Nyquist bandwidth targets and
                // bell centres make sense.
                bw_targets_hz: vec![2000, 4000],
                eq_f0_range: (10.0, 3500.0),
                rir_rt60_range: (0.1, 0.4),
                ..DegradationSpec::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairedSignal {
    pub clean: AudioBuffer,
    pub degraded: AudioBuffer,
    pub ops: AppliedOps,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub train: Vec<PairedSignal>,
    pub heldout: Vec<PairedSignal>,
    pub frame_len: usize,
    pub sample_rate: u32,
}

/// Fundamental of the synthetic voice. Fixed across the corpus so the
/// clean-frame manifold is the span of the harmonic quadrature pairs:
/// per-frame content is determined by one in-phase and one quadrature
/// coefficient per harmonic, matching the toy latent budget.
pub const CORPUS_F0_HZ: f64 = 220.0;
const CORPUS_HARMONICS: usize = 4;

/// Harmonic stack at a fixed fundamental with random per-harmonic
/// amplitudes and phases, slow amplitude modulation, and a lowpassed
/// noise floor; normalised to 0.7 peak.
pub fn synth_speech_like(rng: &mut impl Rng, sample_rate: u32, duration_s: f64) -> AudioBuffer {
    let n = (sample_rate as f64 * duration_s).round() as usize;
    let fs = sample_rate as f64;
    let f0 = CORPUS_F0_HZ;
    let n_harm = ((0.45 * fs / f0) as usize).clamp(1, CORPUS_HARMONICS);
    let amps: Vec<f64> = (1..=n_harm)
        .map(|h| rng.random_range(0.4..1.2) / h as f64)
        .collect();
    let phases: Vec<f64> = (0..n_harm)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let env_rate = rng.random_range(1.5..4.0);
    let env_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let noise_level = rng.random_range(0.005..0.02);
    let mut lp_state = 0.0;
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let mut v = 0.0;
            for (h, (a, p)) in amps.iter().zip(&phases).enumerate() {
                v += a * (std::f64::consts::TAU * f0 * (h + 1) as f64 * t + p).sin();
            }
            let env = 0.55 + 0.45 * (std::f64::consts::TAU * env_rate * t + env_phase).sin();
            let w: f64 = rng.sample(StandardNormal);
            lp_state = 0.95 * lp_state + 0.05 * w;
            v * env + noise_level * lp_state
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if peak > 0.0 {
        let k = 0.7 / peak;
        for s in samples.iter_mut() {
            *s *= k;
        }
    }
    AudioBuffer::new(samples, sample_rate)
}

fn build_split(cfg: &CorpusConfig, count: usize, seed_offset: u64) -> Result<Vec<PairedSignal>> {
    let results = par::map_range(count, |i| -> Result<PairedSignal> {
        let seed = cfg.seed ^ (seed_offset + i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clean = synth_speech_like(&mut rng, cfg.sample_rate, cfg.duration_s);
        let (degraded, ops) = degrade(&clean, &cfg.degradation, &mut rng)?;
        Ok(PairedSignal {
            clean,
            degraded,
            ops,
            seed,
        })
    });
    results.into_iter().collect()
}

/// Build train and held-out splits from disjoint per-signal seeds.
pub fn build_corpus(cfg: &CorpusConfig) -> Result<ToyCorpus> {
    if cfg.n_train == 0 || cfg.frame_len == 0 {
        return Err(Error::Domain("corpus needs signals and a frame length".into()));
    }
    cfg.degradation.validate()?;
    let train = build_split(cfg, cfg.n_train, 0x1000_0000)?;
    let heldout = build_split(cfg, cfg.n_heldout, 0x2000_0000)?;
    Ok(ToyCorpus {
        train,
        heldout,
        frame_len: cfg.frame_len,
        sample_rate: cfg.sample_rate,
    })
}

/// Non-overlapping full frames of a buffer (remainder dropped).
pub fn frames_of(buf: &AudioBuffer, frame_len: usize) -> Vec<Vec<f64>> {
    buf.samples
        .chunks_exact(frame_len)
        .map(|c| c.to_vec())
        .collect()
}

impl ToyCorpus {
    pub fn clean_frames(signals: &[PairedSignal], frame_len: usize) -> Vec<Vec<f64>> {
        signals
            .iter()
            .flat_map(|s| frames_of(&s.clean, frame_len))
            .collect()
    }

    /// Aligned (clean, degraded) frame pairs.
    pub fn paired_frames(signals: &[PairedSignal], frame_len: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        signals
            .iter()
            .flat_map(|s| {
                frames_of(&s.clean, frame_len)
                    .into_iter()
                    .zip(frames_of(&s.degraded, frame_len))
            })
            .collect()
    }

    pub fn train_clean_frames(&self) -> Vec<Vec<f64>> {
        Self::clean_frames(&self.train, self.frame_len)
    }

    pub fn train_pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        Self::paired_frames(&self.train, self.frame_len)
    }

    pub fn heldout_pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        Self::paired_frames(&self.heldout, self.frame_len)
    }
}
