//! Ad-hoc tuning harness: runs the full pipeline in-process and prints
//! the numbers behind each trend criterion.

use bridgekit::analysis::w2_matrix;
use bridgekit::bridge::BridgePredictor;
use bridgekit::config::RunConfig;
use bridgekit::net::bridge_train::{encode_pairs, train_bridge, LatentStats};
use bridgekit::net::corpus::build_corpus;
use bridgekit::net::finetune::{finetune_perceptual, FinetuneItem, FinetuneVariant};
use bridgekit::net::losses::LogSpectralProxy;
use bridgekit::net::prior::{mean_latent_distance, train_joint_prior};
use bridgekit::net::restore::RestoreModel;
use bridgekit::net::vae::{equivariance_error, train_ep_vae};
use bridgekit::pipeline::*;
use bridgekit::sampler::SamplerConfig;
use std::time::Instant;

fn offdiag_mean(m: &nalgebra::DMatrix<f64>) -> f64 {
    let k = m.nrows();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                acc += m[(i, j)];
            }
        }
    }
    acc / (k * (k - 1)) as f64
}

fn main() {
    let t0 = Instant::now();
    let mut cfg = RunConfig::default();
    let args: Vec<String> = std::env::args().collect();
    for kv in &args[1..] {
        let (k, v) = kv.split_once('=').expect("key=value");
        cfg.apply_kv(k, v).unwrap();
    }
    let mut ccfg = cfg.corpus.clone();
    ccfg.seed = 0;
    let corpus = build_corpus(&ccfg).unwrap();
    println!("[{:?}] corpus: {} train, {} heldout", t0.elapsed(), corpus.train.len(), corpus.heldout.len());

    let frames = corpus.train_clean_frames();
    let mut vcfg = cfg.train_vae.clone();
    vcfg.seed = 0 ^ 1;
    let (vae, _) = train_ep_vae(&frames, &cfg.vae_arch, &vcfg, true).unwrap();
    println!("[{:?}] vae trained", t0.elapsed());
    {
        // Diagnostic: clean-frame reconstruction SNR of the autoencoder.
        let mut acc = 0.0;
        let mut count = 0;
        for sig in corpus.heldout.iter().take(10) {
            for frame in bridgekit::net::corpus::frames_of(&sig.clean, corpus.frame_len) {
                let z = vae.encode_mean(&frame).unwrap();
                let xhat = vae.decode(&z).unwrap();
                let p_ref: f64 = frame.iter().map(|v| v * v).sum();
                let p_err: f64 = frame.iter().zip(&xhat).map(|(a, b)| (a - b) * (a - b)).sum();
                acc += 10.0 * (p_ref / p_err.max(1e-300)).log10();
                count += 1;
            }
        }
        println!("diag: vae recon snr {:.2} dB over {count} held-out frames", acc / count as f64);
    }
    let (baseline, _) = train_ep_vae(&frames, &cfg.vae_arch, &vcfg, false).unwrap();
    println!("[{:?}] baseline trained", t0.elapsed());

    // Criterion 6: equivariance ratio
    let held_frames: Vec<Vec<f64>> = corpus.heldout.iter().flat_map(|s| bridgekit::net::corpus::frames_of(&s.clean, corpus.frame_len)).take(256).collect();
    let scales = [0.5, 1.5, 2.0];
    let e_ep = equivariance_error(&vae, &held_frames, &scales).unwrap();
    let e_base = equivariance_error(&baseline, &held_frames, &scales).unwrap();
    println!("C6: ep {e_ep:.4} vs baseline {e_base:.4} ratio {:.3} (need <= 0.5)", e_ep / e_base);

    // Stage 2
    let pairs = corpus.train_pairs();
    let mut pcfg = cfg.train_prior.clone();
    pcfg.seed = 0 ^ 2;
    let held_pairs = corpus.heldout_pairs();
    let d_before = mean_latent_distance(&vae.encoder, &vae, &held_pairs).unwrap();
    let prior_out = train_joint_prior(&vae.encoder, &vae, &pairs, &pcfg).unwrap();
    let d_after = mean_latent_distance(&prior_out.encoder_np, &vae, &held_pairs).unwrap();
    println!("[{:?}] C7a: held-out latent distance {d_before:.4} -> {d_after:.4} (need decrease)", t0.elapsed());

    // C7b: W2 off-diagonal before/after
    let groups_before = degradation_type_groups(&cfg.corpus.degradation, &corpus, &vae.encoder, vae.latent_dim, 7).unwrap();
    let (_, m_before) = w2_matrix(&groups_before).unwrap();
    let groups_after = degradation_type_groups(&cfg.corpus.degradation, &corpus, &prior_out.encoder_np, vae.latent_dim, 7).unwrap();
    let (_, m_after) = w2_matrix(&groups_after).unwrap();
    println!("C7b: mean offdiag W2 {:.4} -> {:.4} (need decrease)", offdiag_mean(&m_before), offdiag_mean(&m_after));

    // Stage 3
    let latents = encode_pairs(&vae, &prior_out.encoder_np, &pairs).unwrap();
    let stats = LatentStats::fit(&latents).unwrap();
    let normed = stats.normalize_pairs(&latents);
    let mut bcfg = cfg.train_bridge.clone();
    bcfg.seed = 0 ^ 3;
    let (pred, _) = train_bridge(&normed, &cfg.schedule, &cfg.bridge_arch, &bcfg).unwrap();
    println!("[{:?}] bridge trained", t0.elapsed());

    // Stage 4 (RHAF)
    let ft_items: Vec<FinetuneItem> = latents.iter().zip(&pairs).map(|((z0, z1), (clean, _))| FinetuneItem {
        z0: stats.normalize(z0), z1: stats.normalize(z1), clean_frame: clean.clone(),
    }).collect();
    let mut fcfg = cfg.finetune.clone();
    fcfg.seed = 0 ^ 4;
    let proxy = LogSpectralProxy::default();
    let ft = finetune_perceptual(&pred, &vae.decoder, &vae.disc, &proxy, &stats, &ft_items, &cfg.schedule, &fcfg, FinetuneVariant::Rhaf).unwrap();
    println!("[{:?}] finetune done", t0.elapsed());

    // C8: restoration quality (after bridge, and after finetune)
    let (in_snr, in_lsd) = heldout_input_metrics(&corpus).unwrap();
    let model_bridge = RestoreModel {
        enc_np: prior_out.encoder_np.clone(), decoder: vae.decoder.clone(),
        predictor: BridgePredictor::new(pred.net.clone(), vae.latent_dim).unwrap(),
        stats: stats.clone(), frame_len: vae.frame_len, latent_dim: vae.latent_dim,
    };
    let (snr_b, lsd_b, _) = heldout_metrics(&corpus, &model_bridge, &cfg.schedule, &cfg.sampler, 9).unwrap();
    println!("C8(bridge): input snr {in_snr:.2} lsd {in_lsd:.4} -> restored snr {snr_b:.2} lsd {lsd_b:.4} (need snr +3 dB, lsd down)");
    let model_ft = RestoreModel {
        enc_np: prior_out.encoder_np.clone(), decoder: ft.decoder.clone(),
        predictor: ft.predictor, stats: stats.clone(), frame_len: vae.frame_len, latent_dim: vae.latent_dim,
    };
    let (snr_f, lsd_f, _) = heldout_metrics(&corpus, &model_ft, &cfg.schedule, &cfg.sampler, 9).unwrap();
    println!("C8(ft):     restored snr {snr_f:.2} lsd {lsd_f:.4}");

    // C10: sweep trend under both sampler modes
    for mode in [bridgekit::sampler::SamplerMode::Ode, bridgekit::sampler::SamplerMode::Sde] {
        print!("C10 sweep {mode:?}:");
        let mut by_steps = std::collections::BTreeMap::new();
        for steps in SWEEP_GRID {
            let sc = SamplerConfig { n_steps: steps, mode, ..cfg.sampler };
            let (snr, _, _) = heldout_metrics(&corpus, &model_ft, &cfg.schedule, &sc, 9).unwrap();
            by_steps.insert(steps, snr);
            print!(" {steps}:{snr:.2}");
        }
        println!();
        println!("C10 {mode:?}: snr(4)={:.3} vs snr(1)={:.3} (need >=)", by_steps[&4], by_steps[&1]);
    }
    println!("[{:?}] total", t0.elapsed());
}
