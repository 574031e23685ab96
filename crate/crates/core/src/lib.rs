//! Latent-bridge speech restoration toolkit.
//!
//! The crate is organised around a small latent-to-latent generative
//! pipeline for restoring degraded speech:
//!
//! * [`schedule`] — tractable bridge noise schedules with closed-form
//!   coefficients and a quadrature self-check.
//! * [`bridge`] — Gaussian bridge interpolation between paired latents and
//!   the clean-latent prediction loss.
//! * [`sampler`] — first-order exponential-integrator SDE/ODE reverse
//!   steppers and the multi-step trajectory driver.
//! * [`dsp`] — IIR lowpass design, resampling, bell EQ, synthetic room
//!   impulse responses, STFT, and multi-resolution spectral distances.
//! * [`degrade`] — the stochastic degradation operator chain producing
//!   paired low-quality/high-quality audio.
//! * [`net`] — small feed-forward networks with hand-written gradients and
//!   the four training stages (energy-preserving autoencoder, joint neural
//!   prior, latent bridge, perceptual fine-tuning).
//! * [`analysis`] — Gaussian fitting, 2-Wasserstein distances, SNR and
//!   log-spectral distance metrics.
//! * [`audio`] — WAV I/O and corpus manifests.
//!
//! Data-parallel inner loops (corpus degradation, batch gradients,
//! Monte-Carlo sweeps) go through the [`par`] facade, which dispatches to
//! rayon when the default `parallel` feature is enabled and falls back to
//! plain sequential iteration otherwise.

pub mod analysis;
pub mod audio;
pub mod bridge;
pub mod config;
pub mod degrade;
pub mod docs;
pub mod dsp;
pub mod error;
pub mod net;
pub mod par;
pub mod pipeline;
pub mod sampler;
pub mod schedule;
pub mod selftest;

pub use error::{Error, Result};
