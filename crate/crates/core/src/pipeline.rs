//! Shared pipeline-level helpers used by the CLI and the acceptance
//! suite: per-degradation-type latent groups and held-out restoration
//! metrics.

use crate::analysis::{lsd, snr_db};
use crate::bridge::LatentVec;
use crate::degrade::{degrade, DegradationSpec};
use crate::dsp::mrstft_distance;
use crate::error::Result;
use crate::net::corpus::{frames_of, ToyCorpus};
use crate::net::restore::{restore_buffer, RestoreModel};
use crate::net::ToyNet;
use crate::par;
use crate::sampler::SamplerConfig;
use crate::schedule::NoiseSchedule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Step counts exercised by the step sweep.
pub const SWEEP_GRID: [usize; 8] = [1, 2, 3, 4, 5, 10, 20, 50];

/// Spectral-distance resolutions used for evaluation on full signals.
pub const EVAL_RESOLUTIONS: [usize; 3] = [512, 1024, 2048];

/// Single-operator degradation specs derived from a base spec, one per
/// operator type, each firing with probability 1.
pub fn single_op_specs(base: &DegradationSpec) -> Vec<(String, DegradationSpec)> {
    let off = DegradationSpec {
        p_bw: 0.0,
        p_clip: 0.0,
        p_rev: 0.0,
        p_noise: 0.0,
        p_eq: 0.0,
        ..base.clone()
    };
    vec![
        ("noise".into(), DegradationSpec { p_noise: 1.0, ..off.clone() }),
        ("bandwidth".into(), DegradationSpec { p_bw: 1.0, ..off.clone() }),
        ("reverb".into(), DegradationSpec { p_rev: 1.0, ..off.clone() }),
        ("clip".into(), DegradationSpec { p_clip: 1.0, ..off.clone() }),
        ("eq".into(), DegradationSpec { p_eq: 1.0, ..off }),
    ]
}

/// Encode one latent group per degradation type: held-out clean signals
/// pushed through each single-operator pipeline and the given encoder.
pub fn degradation_type_groups(
    base_spec: &DegradationSpec,
    corpus: &ToyCorpus,
    encoder: &ToyNet,
    latent_dim: usize,
    seed: u64,
) -> Result<Vec<(String, Vec<LatentVec>)>> {
    let mut groups = Vec::new();
    for (gi, (label, spec)) in single_op_specs(base_spec).into_iter().enumerate() {
        let per_signal = par::map_indexed(&corpus.heldout, |si, sig| -> Result<Vec<LatentVec>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((gi as u64) << 32) ^ si as u64);
            let (lq, _) = degrade(&sig.clean, &spec, &mut rng)?;
            frames_of(&lq, corpus.frame_len)
                .into_iter()
                .map(|frame| Ok(LatentVec(encoder.forward(&frame)?[..latent_dim].to_vec())))
                .collect()
        });
        let mut latents = Vec::new();
        for v in per_signal {
            latents.extend(v?);
        }
        groups.push((label, latents));
    }
    Ok(groups)
}

/// Mean (SNR dB, LSD, spectral distance) of restored held-out signals
/// against their clean references.
pub fn heldout_metrics(
    corpus: &ToyCorpus,
    model: &RestoreModel,
    sched: &NoiseSchedule,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let outs = par::map_indexed(&corpus.heldout, |i, sig| -> Result<(f64, f64, f64)> {
        let restored = restore_buffer(model, &sig.degraded, sched, sampler, seed ^ i as u64)?;
        Ok((
            snr_db(&sig.clean, &restored)?,
            lsd(&sig.clean, &restored)?,
            mrstft_distance(&sig.clean, &restored, &EVAL_RESOLUTIONS)?,
        ))
    });
    let mut acc = (0.0, 0.0, 0.0);
    for o in outs {
        let (a, b, c) = o?;
        acc.0 += a;
        acc.1 += b;
        acc.2 += c;
    }
    let n = corpus.heldout.len() as f64;
    Ok((acc.0 / n, acc.1 / n, acc.2 / n))
}

/// Mean (SNR dB, LSD) of the degraded held-out signals themselves.
pub fn heldout_input_metrics(corpus: &ToyCorpus) -> Result<(f64, f64)> {
    let outs = par::map_indexed(&corpus.heldout, |_, sig| -> Result<(f64, f64)> {
        Ok((
            snr_db(&sig.clean, &sig.degraded)?,
            lsd(&sig.clean, &sig.degraded)?,
        ))
    });
    let mut acc = (0.0, 0.0);
    for o in outs {
        let (a, b) = o?;
        acc.0 += a;
        acc.1 += b;
    }
    let n = corpus.heldout.len() as f64;
    Ok((acc.0 / n, acc.1 / n))
}
