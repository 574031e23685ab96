//! Stage artifact layout: loading and saving checkpoints, configs, and
//! corpora, plus the stage-order checks.

use anyhow::{bail, Context, Result};
use bridgekit::audio::manifest::Split;
use bridgekit::audio::{read_wav, Manifest, ManifestEntry};
use bridgekit::bridge::BridgePredictor;
use bridgekit::config::RunConfig;
use bridgekit::net::bridge_train::LatentStats;
use bridgekit::net::checkpoint::{load_toynet, save_toynet};
use bridgekit::net::corpus::{PairedSignal, ToyCorpus};
use bridgekit::net::losses::SpecDisc;
use bridgekit::net::vae::VaeNets;
use bridgekit::net::{Activation, ToyNet};
use std::path::Path;

pub const ENCODER_FILE: &str = "encoder.vbtk";
pub const DECODER_FILE: &str = "decoder.vbtk";
pub const DISC_FILE: &str = "disc.vbtk";
pub const PRIOR_FILE: &str = "encoder_np.vbtk";
pub const PREDICTOR_FILE: &str = "predictor.vbtk";
pub const LATENT_STATS_FILE: &str = "latent_stats.json";

/// Create the output directory and drop the resolved config and seed into
/// it, so the run can be reproduced bit-for-bit.
pub fn prepare_out_dir(out: &Path, cfg: &RunConfig, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("config.resolved"), cfg.resolved_text())?;
    std::fs::write(out.join("seed.txt"), format!("{seed}\n"))?;
    Ok(())
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

/// Fail with a stage-order error when a prerequisite artifact is absent.
pub fn require_stage_file(path: &Path, stage: &str, required: &str) -> Result<()> {
    if !path.exists() {
        bail!(bridgekit::Error::StageOrder {
            stage: stage.into(),
            required: required.into(),
            path: path.display().to_string(),
        });
    }
    Ok(())
}

pub fn save_vae_stage(out: &Path, nets: &VaeNets) -> Result<()> {
    save_toynet(&nets.encoder, out.join(ENCODER_FILE))?;
    save_toynet(&nets.decoder, out.join(DECODER_FILE))?;
    save_toynet(&nets.disc.net, out.join(DISC_FILE))?;
    Ok(())
}

/// Reload the autoencoder stage. Shapes come from the checkpoints
/// themselves; activations follow the pipeline convention (tanh hidden).
pub fn load_vae_stage(dir: &Path, stage: &str) -> Result<VaeNets> {
    let enc_path = dir.join(ENCODER_FILE);
    require_stage_file(&enc_path, stage, "train-vae")?;
    let encoder = load_toynet(&enc_path, Activation::Tanh)?;
    let decoder = load_toynet(dir.join(DECODER_FILE), Activation::Tanh)?;
    let disc_net = load_toynet(dir.join(DISC_FILE), Activation::Tanh)?;
    let latent_dim = decoder.input_dim();
    let frame_len = decoder.output_dim();
    if encoder.output_dim() != 2 * latent_dim {
        bail!(
            "encoder head {} does not match decoder latent dim {latent_dim}",
            encoder.output_dim()
        );
    }
    let disc_frame = (disc_net.input_dim() - 1) * 2;
    Ok(VaeNets {
        encoder,
        decoder,
        disc: SpecDisc {
            net: disc_net,
            frame_len: disc_frame,
        },
        latent_dim,
        frame_len,
    })
}

pub fn load_prior_encoder(dir: &Path, stage: &str) -> Result<ToyNet> {
    let path = dir.join(PRIOR_FILE);
    require_stage_file(&path, stage, "train-prior")?;
    Ok(load_toynet(&path, Activation::Tanh)?)
}

/// Load the predictor (plus latent statistics) from a bridge or finetune
/// stage directory.
pub fn load_predictor_stage(
    dir: &Path,
    stage: &str,
    latent_dim: usize,
) -> Result<(BridgePredictor, LatentStats)> {
    let path = dir.join(PREDICTOR_FILE);
    require_stage_file(&path, stage, "train-bridge")?;
    let net = load_toynet(&path, Activation::Tanh)?;
    let stats_path = dir.join(LATENT_STATS_FILE);
    let stats = if stats_path.exists() {
        LatentStats::load(&stats_path)?
    } else {
        LatentStats::identity(latent_dim)
    };
    Ok((BridgePredictor::new(net, latent_dim)?, stats))
}

/// Write a corpus to disk: WAVs, a manifest, and one applied-ops JSON
/// line per file.
pub fn save_corpus(out: &Path, corpus: &ToyCorpus) -> Result<()> {
    std::fs::create_dir_all(out.join("clean"))?;
    std::fs::create_dir_all(out.join("lq"))?;
    let mut manifest = Manifest::new(out, corpus.sample_rate);
    let mut ops_lines = String::new();
    let mut index = 0usize;
    for (signals, split) in [(&corpus.train, Split::Train), (&corpus.heldout, Split::Heldout)] {
        for sig in signals.iter() {
            let clean_rel = format!("clean/{index:05}.wav");
            let lq_rel = format!("lq/{index:05}.wav");
            bridgekit::audio::write_wav(
                &sig.clean,
                out.join(&clean_rel),
                bridgekit::audio::WavFormat::Float32,
            )?;
            bridgekit::audio::write_wav(
                &sig.degraded,
                out.join(&lq_rel),
                bridgekit::audio::WavFormat::Float32,
            )?;
            ops_lines.push_str(&serde_json::to_string(&serde_json::json!({
                "file": clean_rel,
                "seed": sig.seed,
                "ops": sig.ops,
            }))?);
            ops_lines.push('\n');
            manifest.entries.push(ManifestEntry {
                clean_path: clean_rel,
                lq_path: Some(lq_rel),
                seed: sig.seed,
                split: split.clone(),
                applied_ops: Some(sig.ops.clone()),
            });
            index += 1;
        }
    }
    manifest.save(out.join("manifest.jsonl"))?;
    std::fs::write(out.join("ops.jsonl"), ops_lines)?;
    Ok(())
}

/// Reload a corpus written by [`save_corpus`].
pub fn load_corpus(dir: &Path, frame_len: usize, stage: &str) -> Result<ToyCorpus> {
    let manifest_path = dir.join("manifest.jsonl");
    require_stage_file(&manifest_path, stage, "make-toy-corpus")?;
    let manifest = Manifest::load(&manifest_path)?;
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    for entry in &manifest.entries {
        let clean = read_wav(manifest.root.join(&entry.clean_path))?;
        let lq_path = entry
            .lq_path
            .as_ref()
            .with_context(|| format!("{}: no degraded twin", entry.clean_path))?;
        let degraded = read_wav(manifest.root.join(lq_path))?;
        let sig = PairedSignal {
            clean,
            degraded,
            ops: entry.applied_ops.clone().unwrap_or_default(),
            seed: entry.seed,
        };
        match entry.split {
            Split::Train => train.push(sig),
            Split::Heldout => heldout.push(sig),
        }
    }
    if train.is_empty() {
        bail!("corpus at {} has no training split", dir.display());
    }
    Ok(ToyCorpus {
        train,
        heldout,
        frame_len,
        sample_rate: manifest.sample_rate,
    })
}
