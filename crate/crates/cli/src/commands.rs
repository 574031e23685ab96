//! Subcommand implementations.

use crate::stages::*;
use crate::Common;
use anyhow::{bail, Context, Result};
use bridgekit::analysis::{lsd, snr_db, w2_matrix};
use bridgekit::audio::{read_wav, write_wav, WavFormat};
use bridgekit::degrade::degrade;
use bridgekit::dsp::{resample, FilterFamily};
use bridgekit::net::bridge_train::{encode_pairs, train_bridge as fit_bridge, LatentStats};
use bridgekit::net::checkpoint::save_toynet;
use bridgekit::net::corpus::{build_corpus, ToyCorpus};
use bridgekit::net::finetune::{finetune_perceptual, FinetuneItem, FinetuneVariant};
use bridgekit::net::losses::LogSpectralProxy;
use bridgekit::net::prior::{mean_latent_distance, train_joint_prior};
use bridgekit::net::restore::{restore_buffer, RestoreModel};
use bridgekit::net::vae::{train_ep_vae, VaeNets};
use bridgekit::net::TrainConfig;
use bridgekit::pipeline::{degradation_type_groups as core_groups, heldout_metrics as core_heldout, SWEEP_GRID};
use bridgekit::sampler::{SamplerConfig, SamplerMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn with_seed(mut cfg: TrainConfig, seed: u64, salt: u64) -> TrainConfig {
    cfg.seed = seed ^ salt;
    cfg
}

fn parse_sampler_mode(s: &str) -> Result<SamplerMode> {
    match s {
        "sde" => Ok(SamplerMode::Sde),
        "ode" => Ok(SamplerMode::Ode),
        other => bail!("--sampler must be `sde` or `ode`, got {other:?}"),
    }
}

pub fn make_toy_corpus(common: &Common) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let mut corpus_cfg = cfg.corpus.clone();
    corpus_cfg.seed = common.seed;
    let corpus = build_corpus(&corpus_cfg)?;
    save_corpus(&common.out, &corpus)?;
    println!(
        "wrote {} train + {} held-out paired signals to {}",
        corpus.train.len(),
        corpus.heldout.len(),
        common.out.display()
    );
    Ok(())
}

pub fn degrade_files(common: &Common, input: &Path) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let files: Vec<std::path::PathBuf> = if input.is_dir() {
        let mut v: Vec<_> = std::fs::read_dir(input)
            .with_context(|| format!("reading {}", input.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .map(|e| e.eq_ignore_ascii_case("wav"))
                    .unwrap_or(false)
            })
            .collect();
        v.sort();
        v
    } else {
        vec![input.to_path_buf()]
    };
    if files.is_empty() {
        bail!("no .wav files under {}", input.display());
    }
    let mut ops_lines = String::new();
    let mut manifest = bridgekit::audio::Manifest::new(&common.out, 0);
    for (i, path) in files.iter().enumerate() {
        let clean = read_wav(path)?;
        if manifest.sample_rate == 0 {
            manifest.sample_rate = clean.sample_rate_hz;
        }
        let seed = common.seed ^ i as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lq, ops) = degrade(&clean, &cfg.corpus.degradation, &mut rng)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| format!("{i:05}"));
        let lq_rel = format!("{stem}_lq.wav");
        write_wav(&lq, common.out.join(&lq_rel), WavFormat::Float32)?;
        ops_lines.push_str(&serde_json::to_string(&serde_json::json!({
            "file": path.display().to_string(),
            "seed": seed,
            "ops": ops,
        }))?);
        ops_lines.push('\n');
        manifest.entries.push(bridgekit::audio::ManifestEntry {
            clean_path: path.display().to_string(),
            lq_path: Some(lq_rel),
            seed,
            split: bridgekit::audio::manifest::Split::Heldout,
            applied_ops: Some(ops),
        });
    }
    std::fs::write(common.out.join("ops.jsonl"), ops_lines)?;
    manifest.save(common.out.join("manifest.jsonl"))?;
    println!("degraded {} file(s) into {}", files.len(), common.out.display());
    Ok(())
}

pub fn train_vae(common: &Common, corpus_dir: &Path, ep: bool) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let corpus = load_corpus(corpus_dir, cfg.corpus.frame_len, "train-vae")?;
    let frames = corpus.train_clean_frames();
    let tcfg = with_seed(cfg.train_vae.clone(), common.seed, 0x0001);
    println!(
        "training autoencoder on {} frames for {} steps (ep = {ep})",
        frames.len(),
        tcfg.steps
    );
    let (nets, history) = train_ep_vae(&frames, &cfg.vae_arch, &tcfg, ep)?;
    save_vae_stage(&common.out, &nets)?;
    history.save(common.out.join("history.csv"))?;
    std::fs::write(common.out.join("ep.txt"), format!("{ep}\n"))?;
    println!("saved encoder/decoder/disc to {}", common.out.display());
    Ok(())
}

pub fn train_prior(common: &Common, corpus_dir: &Path, vae_dir: &Path) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let vae = load_vae_stage(vae_dir, "train-prior")?;
    let corpus = load_corpus(corpus_dir, vae.frame_len, "train-prior")?;
    let pairs = corpus.train_pairs();
    let tcfg = with_seed(cfg.train_prior.clone(), common.seed, 0x0002);
    println!(
        "fine-tuning prior encoder on {} frame pairs for {} steps",
        pairs.len(),
        tcfg.steps
    );
    let before = mean_latent_distance(&vae.encoder, &vae, &corpus.heldout_pairs())?;
    let out = train_joint_prior(&vae.encoder, &vae, &pairs, &tcfg)?;
    let after = mean_latent_distance(&out.encoder_np, &vae, &corpus.heldout_pairs())?;
    save_toynet(&out.encoder_np, common.out.join(PRIOR_FILE))?;
    save_toynet(&out.disc.net, common.out.join(DISC_FILE))?;
    out.history.save(common.out.join("history.csv"))?;
    println!("held-out latent distance: {before:.4} -> {after:.4}");
    Ok(())
}

pub fn train_bridge(
    common: &Common,
    corpus_dir: &Path,
    vae_dir: &Path,
    prior_dir: &Path,
) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let vae = load_vae_stage(vae_dir, "train-bridge")?;
    let enc_np = load_prior_encoder(prior_dir, "train-bridge")?;
    let corpus = load_corpus(corpus_dir, vae.frame_len, "train-bridge")?;
    let pairs = encode_pairs(&vae, &enc_np, &corpus.train_pairs())?;
    let stats = LatentStats::fit(&pairs)?;
    let normed = stats.normalize_pairs(&pairs);
    let tcfg = with_seed(cfg.train_bridge.clone(), common.seed, 0x0003);
    println!(
        "training bridge predictor on {} latent pairs for {} steps",
        normed.len(),
        tcfg.steps
    );
    let (pred, history) = fit_bridge(&normed, &cfg.schedule, &cfg.bridge_arch, &tcfg)?;
    save_toynet(&pred.net, common.out.join(PREDICTOR_FILE))?;
    stats.save(common.out.join(LATENT_STATS_FILE))?;
    history.save(common.out.join("history.csv"))?;
    println!("saved predictor to {}", common.out.display());
    Ok(())
}

fn build_finetune_items(
    corpus: &ToyCorpus,
    vae: &VaeNets,
    enc_np: &bridgekit::net::ToyNet,
    stats: &LatentStats,
) -> Result<Vec<FinetuneItem>> {
    let pairs = corpus.train_pairs();
    let latents = encode_pairs(vae, enc_np, &pairs)?;
    Ok(latents
        .into_iter()
        .zip(pairs)
        .map(|((z0, z1), (clean_frame, _))| FinetuneItem {
            z0: stats.normalize(&z0),
            z1: stats.normalize(&z1),
            clean_frame,
        })
        .collect())
}

pub fn finetune(
    common: &Common,
    corpus_dir: &Path,
    vae_dir: &Path,
    prior_dir: &Path,
    bridge_dir: &Path,
    variant: &str,
) -> Result<()> {
    let variant: FinetuneVariant = variant.parse()?;
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let vae = load_vae_stage(vae_dir, "finetune")?;
    let enc_np = load_prior_encoder(prior_dir, "finetune")?;
    let (pred, stats) = load_predictor_stage(bridge_dir, "finetune", vae.latent_dim)?;
    let corpus = load_corpus(corpus_dir, vae.frame_len, "finetune")?;
    let items = build_finetune_items(&corpus, &vae, &enc_np, &stats)?;
    let tcfg = with_seed(cfg.finetune.clone(), common.seed, 0x0004);
    println!(
        "fine-tuning variant {} on {} items for {} steps",
        variant.name(),
        items.len(),
        tcfg.steps
    );
    let proxy = LogSpectralProxy {
        weight_a: tcfg.lambda_pesq_proxy,
        weight_b: tcfg.lambda_utmos_proxy,
    };
    let out = finetune_perceptual(
        &pred,
        &vae.decoder,
        &vae.disc,
        &proxy,
        &stats,
        &items,
        &cfg.schedule,
        &tcfg,
        variant,
    )?;
    save_toynet(&out.predictor.net, common.out.join(PREDICTOR_FILE))?;
    save_toynet(&out.decoder, common.out.join(DECODER_FILE))?;
    save_toynet(&out.disc.net, common.out.join(DISC_FILE))?;
    stats.save(common.out.join(LATENT_STATS_FILE))?;
    out.history.save(common.out.join("history.csv"))?;
    let frozen = !variant.decoder_trainable();
    let unchanged = out.decoder == vae.decoder;
    if frozen != unchanged {
        bail!(
            "freeze contract violated for {}: decoder changed = {}",
            variant.name(),
            !unchanged
        );
    }
    println!(
        "variant {}: decoder {} (contract holds)",
        variant.name(),
        if unchanged { "frozen" } else { "updated" }
    );
    Ok(())
}

fn load_restore_model(
    vae_dir: &Path,
    prior_dir: &Path,
    model_dir: &Path,
    stage: &str,
) -> Result<(RestoreModel, VaeNets)> {
    let vae = load_vae_stage(vae_dir, stage)?;
    let enc_np = load_prior_encoder(prior_dir, stage)?;
    let (pred, stats) = load_predictor_stage(model_dir, stage, vae.latent_dim)?;
    // A finetune stage may carry an updated decoder.
    let decoder_path = model_dir.join(DECODER_FILE);
    let decoder = if decoder_path.exists() {
        bridgekit::net::checkpoint::load_toynet(&decoder_path, bridgekit::net::Activation::Tanh)?
    } else {
        vae.decoder.clone()
    };
    let model = RestoreModel {
        enc_np,
        decoder,
        predictor: pred,
        stats,
        frame_len: vae.frame_len,
        latent_dim: vae.latent_dim,
    };
    Ok((model, vae))
}

#[allow(clippy::too_many_arguments)]
pub fn restore(
    common: &Common,
    input: &Path,
    vae_dir: &Path,
    prior_dir: &Path,
    model_dir: &Path,
    sampler: Option<&str>,
    steps: Option<usize>,
    reference: Option<&Path>,
) -> Result<()> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(mode) = sampler {
        cfg.sampler.mode = parse_sampler_mode(mode)?;
    }
    if let Some(n) = steps {
        cfg.sampler.n_steps = n;
    }
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let (model, _) = load_restore_model(vae_dir, prior_dir, model_dir, "restore")?;
    let mut lq = read_wav(input)?;
    if lq.sample_rate_hz != cfg.corpus.sample_rate {
        lq = resample(&lq, cfg.corpus.sample_rate, FilterFamily::Butterworth)?;
    }
    let restored = restore_buffer(&model, &lq, &cfg.schedule, &cfg.sampler, common.seed)?;
    let out_path = common.out.join("restored.wav");
    write_wav(&restored, &out_path, WavFormat::Float32)?;
    println!("restored {} -> {}", input.display(), out_path.display());
    if let Some(ref_path) = reference {
        let mut clean = read_wav(ref_path)?;
        if clean.sample_rate_hz != cfg.corpus.sample_rate {
            clean = resample(&clean, cfg.corpus.sample_rate, FilterFamily::Butterworth)?;
        }
        if clean.len() == restored.len() {
            let snr_in = snr_db(&clean, &lq)?;
            let snr_out = snr_db(&clean, &restored)?;
            let lsd_in = lsd(&clean, &lq)?;
            let lsd_out = lsd(&clean, &restored)?;
            let report = format!(
                "metric,input,restored\nsnr_db,{snr_in},{snr_out}\nlsd,{lsd_in},{lsd_out}\n"
            );
            std::fs::write(common.out.join("metrics.csv"), &report)?;
            println!(
                "snr {snr_in:.2} -> {snr_out:.2} dB, lsd {lsd_in:.4} -> {lsd_out:.4}"
            );
        } else {
            println!("reference length differs; skipping metrics");
        }
    }
    Ok(())
}

pub fn analyze_priors(
    common: &Common,
    corpus_dir: &Path,
    vae_dir: &Path,
    prior_dir: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let vae = load_vae_stage(vae_dir, "analyze-priors")?;
    let encoder = match prior_dir {
        Some(dir) => load_prior_encoder(dir, "analyze-priors")?,
        None => vae.encoder.clone(),
    };
    let corpus = load_corpus(corpus_dir, vae.frame_len, "analyze-priors")?;
    let groups = core_groups(
        &cfg.corpus.degradation,
        &corpus,
        &encoder,
        vae.latent_dim,
        common.seed,
    )?;
    let (labels, matrix) = w2_matrix(&groups)?;
    let mut csv = String::from("group");
    for l in &labels {
        csv.push(',');
        csv.push_str(l);
    }
    csv.push('\n');
    for (i, l) in labels.iter().enumerate() {
        csv.push_str(l);
        for j in 0..labels.len() {
            csv.push_str(&format!(",{}", matrix[(i, j)]));
        }
        csv.push('\n');
    }
    let name = if prior_dir.is_some() {
        "w2_matrix_np.csv"
    } else {
        "w2_matrix.csv"
    };
    std::fs::write(common.out.join(name), &csv)?;
    println!("{csv}");
    Ok(())
}

pub fn sweep_steps(
    common: &Common,
    corpus_dir: &Path,
    vae_dir: &Path,
    prior_dir: &Path,
    model_dir: &Path,
    sampler: Option<&str>,
) -> Result<()> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(mode) = sampler {
        cfg.sampler.mode = parse_sampler_mode(mode)?;
    }
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let (model, _) = load_restore_model(vae_dir, prior_dir, model_dir, "sweep-steps")?;
    let corpus = load_corpus(corpus_dir, model.frame_len, "sweep-steps")?;
    let mut csv = String::from(
        "# quality columns are snr_db / lsd / mrstft; stand-ins for external perceptual scorers\n",
    );
    csv.push_str("steps,snr_db,lsd,mrstft\n");
    for steps in SWEEP_GRID {
        let sampler_cfg = SamplerConfig {
            n_steps: steps,
            ..cfg.sampler
        };
        let (snr, lsd_v, mr) = core_heldout(&corpus, &model, &cfg.schedule, &sampler_cfg, common.seed)?;
        csv.push_str(&format!("{steps},{snr},{lsd_v},{mr}\n"));
        println!("steps {steps:>2}: snr {snr:.2} dB, lsd {lsd_v:.4}, mrstft {mr:.4}");
    }
    std::fs::write(common.out.join("sweep.csv"), csv)?;
    Ok(())
}

pub fn ablate_finetune(
    common: &Common,
    corpus_dir: &Path,
    vae_dir: &Path,
    prior_dir: &Path,
    bridge_dir: &Path,
    variant: Option<&str>,
) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    prepare_out_dir(&common.out, &cfg, common.seed)?;
    let vae = load_vae_stage(vae_dir, "ablate-finetune")?;
    let enc_np = load_prior_encoder(prior_dir, "ablate-finetune")?;
    let (pred, stats) = load_predictor_stage(bridge_dir, "ablate-finetune", vae.latent_dim)?;
    let corpus = load_corpus(corpus_dir, vae.frame_len, "ablate-finetune")?;
    let items = build_finetune_items(&corpus, &vae, &enc_np, &stats)?;
    let variants: Vec<FinetuneVariant> = match variant {
        Some(v) => vec![v.parse()?],
        None => FinetuneVariant::ALL.to_vec(),
    };
    let tcfg = with_seed(cfg.finetune.clone(), common.seed, 0x0004);
    let proxy = LogSpectralProxy {
        weight_a: tcfg.lambda_pesq_proxy,
        weight_b: tcfg.lambda_utmos_proxy,
    };
    let mut csv = String::from("variant,decoder_frozen,freeze_contract,snr_db,lsd,mrstft\n");
    for v in variants {
        let out = finetune_perceptual(
            &pred,
            &vae.decoder,
            &vae.disc,
            &proxy,
            &stats,
            &items,
            &cfg.schedule,
            &tcfg,
            v,
        )?;
        let unchanged = out.decoder == vae.decoder;
        let contract_ok = unchanged == !v.decoder_trainable();
        let model = RestoreModel {
            enc_np: enc_np.clone(),
            decoder: out.decoder.clone(),
            predictor: out.predictor,
            stats: stats.clone(),
            frame_len: vae.frame_len,
            latent_dim: vae.latent_dim,
        };
        let (snr, lsd_v, mr) = core_heldout(&corpus, &model, &cfg.schedule, &cfg.sampler, common.seed)?;
        csv.push_str(&format!(
            "{},{},{},{snr},{lsd_v},{mr}\n",
            v.name(),
            unchanged,
            if contract_ok { "ok" } else { "VIOLATED" }
        ));
        println!(
            "{:8} decoder_frozen={unchanged} contract={} snr {snr:.2} dB lsd {lsd_v:.4}",
            v.name(),
            if contract_ok { "ok" } else { "VIOLATED" }
        );
        if !contract_ok {
            bail!("freeze contract violated for variant {}", v.name());
        }
    }
    std::fs::write(common.out.join("ablation.csv"), csv)?;
    Ok(())
}

pub fn selftest() -> Result<()> {
    let results = bridgekit::selftest::run_all();
    let mut failed = 0;
    for r in &results {
        println!(
            "{} {} - {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failed += 1;
        }
    }
    println!("{} / {} properties passed", results.len() - failed, results.len());
    if failed > 0 {
        bail!("{failed} self-test properties failed");
    }
    Ok(())
}
