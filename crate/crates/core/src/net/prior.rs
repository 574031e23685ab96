//! Joint-neural-prior fine-tuning: adapt a copy of the clean encoder so
//! that every degraded input lands near its clean target latent.
//!
//! The decoder and the clean encoder stay frozen. The loss combines the
//! scaled data-space terms (against the decoder reconstruction of the
//! clean latent) with an MSE + cosine latent convergence term.

use super::losses::{mrstft_loss_grad, wave_mse_grad, SpecDisc};
use super::optim::Optimizer;
use super::vae::{derive_rng, sample_scale, VaeNets};
use super::{grad_check, Grads, ToyNet, TrainConfig, TrainHistory};
use crate::error::{Error, Result};
use crate::par;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One frozen fine-tuning item: degraded input frame, pre-computed clean
/// latent and its decoder reconstruction, and the energy scale.
#[derive(Debug, Clone)]
pub struct PriorItem {
    pub lq_frame: Vec<f64>,
    pub z0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub scale: f64,
}

pub struct PriorEval {
    pub total: f64,
    pub rec: f64,
    pub wav: f64,
    pub adv: f64,
    pub fm: f64,
    pub mse: f64,
    pub cos: f64,
    pub grads: Grads,
    pub fakes: Vec<Vec<f64>>,
    pub reals: Vec<Vec<f64>>,
}

/// Loss and gradients of the prior encoder over a frozen batch.
pub fn prior_loss(
    enc_np: &ToyNet,
    decoder: &ToyNet,
    disc: &SpecDisc,
    latent_dim: usize,
    items: &[PriorItem],
    cfg: &TrainConfig,
) -> Result<PriorEval> {
    if items.is_empty() {
        return Err(Error::EmptyInput("prior_loss batch".into()));
    }
    struct ItemOut {
        rec: f64,
        wav: f64,
        adv: f64,
        fm: f64,
        mse: f64,
        cos: f64,
        grads: Grads,
        fake: Vec<f64>,
        real: Vec<f64>,
    }
    let outs = par::map_indexed(items, |_, item| -> Result<ItemOut> {
        let (enc_out, enc_trace) = enc_np.forward_trace(&item.lq_frame)?;
        let znp = &enc_out[..latent_dim];
        let s = item.scale;
        let zs: Vec<f64> = znp.iter().map(|v| s * v).collect();
        let (xhat, dec_trace) = decoder.forward_trace(&zs)?;
        let target: Vec<f64> = item.xhat0.iter().map(|v| s * v).collect();

        let (l_rec, g_rec) = mrstft_loss_grad(&xhat, &target, &cfg.resolutions);
        let (l_wav, g_wav) = wave_mse_grad(&xhat, &target);
        let (l_adv, g_adv) = disc.gen_adv_grad(&xhat)?;
        let (l_fm, g_fm) = disc.fm_grad(&xhat, &target)?;
        let dxhat: Vec<f64> = (0..xhat.len())
            .map(|i| {
                cfg.lambda_rec * g_rec[i]
                    + cfg.lambda_wav * g_wav[i]
                    + cfg.lambda_adv * g_adv[i]
                    + cfg.lambda_fm * g_fm[i]
            })
            .collect();
        let (_, dzs) = decoder.backward(&dec_trace, &dxhat);

        // Latent convergence: MSE (mean over dims) and cosine distance.
        let d = latent_dim as f64;
        let mut l_mse = 0.0;
        let mut dot = 0.0;
        let mut na2 = 0.0;
        let mut nb2 = 0.0;
        for (a, b) in znp.iter().zip(&item.z0) {
            l_mse += (a - b) * (a - b) / d;
            dot += a * b;
            na2 += a * a;
            nb2 += b * b;
        }
        let na = na2.sqrt().max(1e-12);
        let nb = nb2.sqrt().max(1e-12);
        let cos = dot / (na * nb);
        let l_cos = 1.0 - cos;

        let mut denc = vec![0.0; enc_out.len()];
        for i in 0..latent_dim {
            let (a, b) = (znp[i], item.z0[i]);
            let dmse = 2.0 * (a - b) / d;
            let dcos = -(b / (na * nb) - cos * a / na2.max(1e-300));
            denc[i] = s * dzs[i] + cfg.lambda_mse * dmse + cfg.lambda_cos * dcos;
        }
        let (grads, _) = enc_np.backward(&enc_trace, &denc);
        Ok(ItemOut {
            rec: l_rec,
            wav: l_wav,
            adv: l_adv,
            fm: l_fm,
            mse: l_mse,
            cos: l_cos,
            grads,
            fake: xhat,
            real: target,
        })
    });

    let n = items.len() as f64;
    let mut eval = PriorEval {
        total: 0.0,
        rec: 0.0,
        wav: 0.0,
        adv: 0.0,
        fm: 0.0,
        mse: 0.0,
        cos: 0.0,
        grads: Grads::zeros_like(enc_np),
        fakes: Vec::with_capacity(items.len()),
        reals: Vec::with_capacity(items.len()),
    };
    for out in outs {
        let o = out?;
        eval.rec += o.rec;
        eval.wav += o.wav;
        eval.adv += o.adv;
        eval.fm += o.fm;
        eval.mse += o.mse;
        eval.cos += o.cos;
        eval.grads.add(&o.grads);
        eval.fakes.push(o.fake);
        eval.reals.push(o.real);
    }
    eval.rec /= n;
    eval.wav /= n;
    eval.adv /= n;
    eval.fm /= n;
    eval.mse /= n;
    eval.cos /= n;
    eval.grads.scale(1.0 / n);
    eval.total = cfg.lambda_rec * eval.rec
        + cfg.lambda_wav * eval.wav
        + cfg.lambda_adv * eval.adv
        + cfg.lambda_fm * eval.fm
        + cfg.lambda_mse * eval.mse
        + cfg.lambda_cos * eval.cos;
    Ok(eval)
}

pub struct PriorOut {
    pub encoder_np: ToyNet,
    pub disc: SpecDisc,
    pub history: TrainHistory,
}

/// Fine-tune a copy of the clean encoder on (clean, degraded) frame
/// pairs. The decoder and clean encoder of `vae` are frozen throughout;
/// the discriminator keeps training alongside.
pub fn train_joint_prior(
    encoder_init: &ToyNet,
    vae: &VaeNets,
    pairs: &[(Vec<f64>, Vec<f64>)],
    cfg: &TrainConfig,
) -> Result<PriorOut> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("train_joint_prior pairs".into()));
    }
    let decoder_before = vae.decoder.clone();
    let mut enc_np = encoder_init.clone();
    let mut disc = vae.disc.clone();
    let latent_dim = vae.latent_dim;

    // Clean-side latents and reconstructions are constants of the stage.
    let precomp: Vec<(Vec<f64>, Vec<f64>)> = {
        let outs = par::map_indexed(pairs, |_, (clean, _)| -> Result<(Vec<f64>, Vec<f64>)> {
            let z0 = vae.encode_mean(clean)?;
            let xhat0 = vae.decode(&z0)?;
            Ok((z0, xhat0))
        });
        outs.into_iter().collect::<Result<_>>()?
    };

    let mut batch_rng = derive_rng(cfg.seed, 12);
    let mut scale_rng = derive_rng(cfg.seed, 13);
    let make_batch = |batch_rng: &mut ChaCha8Rng, scale_rng: &mut ChaCha8Rng, size: usize| {
        (0..size)
            .map(|_| {
                let idx = batch_rng.random_range(0..pairs.len());
                PriorItem {
                    lq_frame: pairs[idx].1.clone(),
                    z0: precomp[idx].0.clone(),
                    xhat0: precomp[idx].1.clone(),
                    scale: sample_scale(scale_rng, true),
                }
            })
            .collect::<Vec<_>>()
    };

    if cfg.preflight {
        let items = make_batch(&mut derive_rng(cfg.seed, 14), &mut derive_rng(cfg.seed, 15), 2);
        let err = grad_check(
            &enc_np,
            |n| {
                let e = prior_loss(n, &vae.decoder, &disc, latent_dim, &items, cfg)?;
                Ok((e.total, e.grads))
            },
            1e-5,
        )?;
        if err > 1e-4 {
            return Err(Error::GradCheckFailed { err, tol: 1e-4 });
        }
    }

    let mut opt = Optimizer::from_config(&enc_np, cfg);
    let mut opt_disc = Optimizer::from_config(&disc.net, cfg);
    let mut history =
        TrainHistory::new(&["total", "rec", "wav", "adv", "fm", "mse", "cos", "disc"]);
    for step in 0..cfg.steps {
        let items = make_batch(&mut batch_rng, &mut scale_rng, cfg.batch_size);
        let eval = prior_loss(&enc_np, &vae.decoder, &disc, latent_dim, &items, cfg)?;
        if !eval.total.is_finite() || !eval.grads.is_finite() {
            return Err(Error::TrainDiverged {
                step,
                term: "prior total".into(),
            });
        }
        let mut grads = eval.grads.clone();
        grads.clip_global_norm(cfg.clip_norm);
        opt.step(&mut enc_np, &grads);

        let disc_outs =
            par::map_indexed(&eval.fakes, |i, fake| disc.disc_grads(&eval.reals[i], fake));
        let mut disc_loss = 0.0;
        let mut disc_grads = Grads::zeros_like(&disc.net);
        for o in disc_outs {
            let (l, g) = o?;
            disc_loss += l;
            disc_grads.add(&g);
        }
        let nb = eval.fakes.len() as f64;
        disc_grads.scale(1.0 / nb);
        disc_grads.clip_global_norm(cfg.clip_norm);
        opt_disc.step(&mut disc.net, &disc_grads);

        history.push(
            step,
            vec![
                eval.total,
                eval.rec,
                eval.wav,
                eval.adv,
                eval.fm,
                eval.mse,
                eval.cos,
                disc_loss / nb,
            ],
        );
    }
    debug_assert_eq!(vae.decoder, decoder_before);
    Ok(PriorOut {
        encoder_np: enc_np,
        disc,
        history,
    })
}

/// Mean distance between prior-encoded degraded latents and clean
/// latents over frame pairs.
pub fn mean_latent_distance(
    enc_np: &ToyNet,
    vae: &VaeNets,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("mean_latent_distance".into()));
    }
    let latent_dim = vae.latent_dim;
    let outs = par::map_indexed(pairs, |_, (clean, lq)| -> Result<f64> {
        let z0 = vae.encode_mean(clean)?;
        let znp = &enc_np.forward(lq)?[..latent_dim];
        Ok(znp
            .iter()
            .zip(&z0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    });
    let mut total = 0.0;
    for v in outs {
        total += v?;
    }
    Ok(total / pairs.len() as f64)
}
