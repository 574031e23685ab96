//! Perceptual-aware joint fine-tuning of the predictor and decoder.
//!
//! On top of the latent prediction loss, selected data-space terms are
//! evaluated on the decoded prediction against the clean frame:
//! reconstruction (R), a perceptual proxy (H), and adversarial plus
//! feature matching (AF). The encoder is never touched; the `Cont` and
//! `RHAF-B` variants keep the decoder frozen as well.

use super::bridge_train::LatentStats;
use super::losses::{mrstft_loss_grad, wave_mse_grad, PerceptualProxy, SpecDisc};
use super::optim::Optimizer;
use super::vae::derive_rng;
use super::{grad_check, Grads, ToyNet, TrainConfig, TrainHistory};
use crate::bridge::{interpolate, predictor_input, sample_training_time, BridgePredictor, LatentVec};
use crate::error::{Error, Result};
use crate::par;
use crate::schedule::NoiseSchedule;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinetuneVariant {
    /// Continue with the latent prediction loss only.
    Cont,
    /// + reconstruction.
    R,
    /// + reconstruction + perceptual proxy.
    Rh,
    /// + reconstruction + adversarial + feature matching.
    Raf,
    /// All data-space terms.
    Rhaf,
    /// All data-space terms, decoder frozen.
    RhafBridgeOnly,
}

impl FinetuneVariant {
    pub const ALL: [FinetuneVariant; 6] = [
        FinetuneVariant::Cont,
        FinetuneVariant::R,
        FinetuneVariant::Rh,
        FinetuneVariant::Raf,
        FinetuneVariant::Rhaf,
        FinetuneVariant::RhafBridgeOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FinetuneVariant::Cont => "Cont",
            FinetuneVariant::R => "R",
            FinetuneVariant::Rh => "RH",
            FinetuneVariant::Raf => "RAF",
            FinetuneVariant::Rhaf => "RHAF",
            FinetuneVariant::RhafBridgeOnly => "RHAF-B",
        }
    }

    fn uses_rec(&self) -> bool {
        !matches!(self, FinetuneVariant::Cont)
    }

    fn uses_hf(&self) -> bool {
        matches!(
            self,
            FinetuneVariant::Rh | FinetuneVariant::Rhaf | FinetuneVariant::RhafBridgeOnly
        )
    }

    fn uses_af(&self) -> bool {
        matches!(
            self,
            FinetuneVariant::Raf | FinetuneVariant::Rhaf | FinetuneVariant::RhafBridgeOnly
        )
    }

    pub fn decoder_trainable(&self) -> bool {
        matches!(
            self,
            FinetuneVariant::R | FinetuneVariant::Rh | FinetuneVariant::Raf | FinetuneVariant::Rhaf
        )
    }
}

impl FromStr for FinetuneVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Cont" => Ok(FinetuneVariant::Cont),
            "R" => Ok(FinetuneVariant::R),
            "RH" => Ok(FinetuneVariant::Rh),
            "RAF" => Ok(FinetuneVariant::Raf),
            "RHAF" => Ok(FinetuneVariant::Rhaf),
            "RHAF-B" => Ok(FinetuneVariant::RhafBridgeOnly),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }
}

/// One fine-tuning example: paired latents plus the clean target frame.
#[derive(Debug, Clone)]
pub struct FinetuneItem {
    pub z0: LatentVec,
    pub z1: LatentVec,
    pub clean_frame: Vec<f64>,
}

/// Frozen per-step draws.
struct StepItem {
    idx: usize,
    t: f64,
    zt: LatentVec,
}

struct FtEval {
    total: f64,
    bridge: f64,
    rec: f64,
    hf: f64,
    adv: f64,
    fm: f64,
    pred_grads: Grads,
    dec_grads: Grads,
    fakes: Vec<Vec<f64>>,
    reals: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn ft_loss(
    pred_net: &ToyNet,
    decoder: &ToyNet,
    disc: &SpecDisc,
    proxy: &dyn PerceptualProxy,
    stats: &LatentStats,
    items: &[FinetuneItem],
    draws: &[StepItem],
    variant: FinetuneVariant,
    cfg: &TrainConfig,
) -> Result<FtEval> {
    struct ItemOut {
        bridge: f64,
        rec: f64,
        hf: f64,
        adv: f64,
        fm: f64,
        pg: Grads,
        dg: Grads,
        fake: Option<Vec<f64>>,
        real: Option<Vec<f64>>,
    }
    let outs = par::map_indexed(draws, |_, draw| -> Result<ItemOut> {
        let item = &items[draw.idx];
        let input = predictor_input(&draw.zt, draw.t, &item.z1);
        let (zhat, pred_trace) = pred_net.forward_trace(&input)?;
        let mut l_bridge = 0.0;
        let mut dzhat: Vec<f64> = zhat
            .iter()
            .zip(&item.z0.0)
            .map(|(a, b)| {
                let r = a - b;
                l_bridge += r * r;
                2.0 * r
            })
            .collect();

        let mut rec = 0.0;
        let mut hf = 0.0;
        let mut adv = 0.0;
        let mut fm = 0.0;
        let mut dg = Grads::zeros_like(decoder);
        let mut fake = None;
        let mut real = None;
        if variant.uses_rec() {
            // The predictor works on standardised latents; the decoder
            // consumes raw ones.
            let z_raw = stats.denormalize(&LatentVec(zhat.clone()));
            let (xhat, dec_trace) = decoder.forward_trace(&z_raw.0)?;
            let target = &item.clean_frame;
            let mut dxhat = vec![0.0; xhat.len()];
            let (l_rec, g_rec) = mrstft_loss_grad(&xhat, target, &cfg.resolutions);
            let (l_wav, g_wav) = wave_mse_grad(&xhat, target);
            rec = l_rec + cfg.lambda_wav / cfg.lambda_rec * l_wav;
            for i in 0..xhat.len() {
                dxhat[i] += cfg.lambda_rec * g_rec[i] + cfg.lambda_wav * g_wav[i];
            }
            if variant.uses_hf() {
                let (l_hf, g_hf) = proxy.loss_grad(&xhat, target);
                hf = l_hf;
                for i in 0..xhat.len() {
                    dxhat[i] += g_hf[i];
                }
            }
            if variant.uses_af() {
                let (l_adv, g_adv) = disc.gen_adv_grad(&xhat)?;
                let (l_fm, g_fm) = disc.fm_grad(&xhat, target)?;
                adv = l_adv;
                fm = l_fm;
                for i in 0..xhat.len() {
                    dxhat[i] += cfg.lambda_adv * g_adv[i] + cfg.lambda_fm * g_fm[i];
                }
                fake = Some(xhat.clone());
                real = Some(target.clone());
            }
            let (dgrads, dzraw) = decoder.backward(&dec_trace, &dxhat);
            dg = dgrads;
            for (i, a) in dzhat.iter_mut().enumerate() {
                *a += dzraw[i] * stats.std[i];
            }
        }
        let (pg, _) = pred_net.backward(&pred_trace, &dzhat);
        Ok(ItemOut {
            bridge: l_bridge,
            rec,
            hf,
            adv,
            fm,
            pg,
            dg,
            fake,
            real,
        })
    });

    let n = draws.len() as f64;
    let mut eval = FtEval {
        total: 0.0,
        bridge: 0.0,
        rec: 0.0,
        hf: 0.0,
        adv: 0.0,
        fm: 0.0,
        pred_grads: Grads::zeros_like(pred_net),
        dec_grads: Grads::zeros_like(decoder),
        fakes: Vec::new(),
        reals: Vec::new(),
    };
    for out in outs {
        let o = out?;
        eval.bridge += o.bridge;
        eval.rec += o.rec;
        eval.hf += o.hf;
        eval.adv += o.adv;
        eval.fm += o.fm;
        eval.pred_grads.add(&o.pg);
        eval.dec_grads.add(&o.dg);
        if let (Some(f), Some(r)) = (o.fake, o.real) {
            eval.fakes.push(f);
            eval.reals.push(r);
        }
    }
    eval.bridge /= n;
    eval.rec /= n;
    eval.hf /= n;
    eval.adv /= n;
    eval.fm /= n;
    eval.pred_grads.scale(1.0 / n);
    eval.dec_grads.scale(1.0 / n);
    eval.total = eval.bridge
        + cfg.lambda_rec * eval.rec
        + eval.hf
        + cfg.lambda_adv * eval.adv
        + cfg.lambda_fm * eval.fm;
    Ok(eval)
}

pub struct FinetuneOut {
    pub predictor: BridgePredictor,
    pub decoder: ToyNet,
    pub disc: SpecDisc,
    pub history: TrainHistory,
}

/// Jointly fine-tune predictor and decoder under the selected variant.
/// `stats` is the latent standardisation the predictor was trained with
/// (identity when none).
#[allow(clippy::too_many_arguments)]
pub fn finetune_perceptual(
    predictor: &BridgePredictor,
    decoder: &ToyNet,
    disc: &SpecDisc,
    proxy: &dyn PerceptualProxy,
    stats: &LatentStats,
    items: &[FinetuneItem],
    sched: &NoiseSchedule,
    cfg: &TrainConfig,
    variant: FinetuneVariant,
) -> Result<FinetuneOut> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::EmptyInput("finetune items".into()));
    }
    let latent_dim = predictor.latent_dim;
    let mut pred_net = predictor.net.clone();
    let mut dec = decoder.clone();
    let mut disc = disc.clone();
    let sched = NoiseSchedule {
        t_min: cfg.t_min,
        ..*sched
    };

    let mut batch_rng = derive_rng(cfg.seed, 41);
    let make_draws = |rng: &mut rand_chacha::ChaCha8Rng, size: usize| -> Result<Vec<StepItem>> {
        (0..size)
            .map(|_| {
                let idx = rng.random_range(0..items.len());
                let t = sample_training_time(rng, sched.t_min);
                let zt = interpolate(&items[idx].z0, &items[idx].z1, t, &sched, rng)?;
                Ok(StepItem { idx, t, zt })
            })
            .collect()
    };

    if cfg.preflight {
        let draws = make_draws(&mut derive_rng(cfg.seed, 42), 2)?;
        let pred_err = grad_check(
            &pred_net,
            |n| {
                let e = ft_loss(n, &dec, &disc, proxy, stats, items, &draws, variant, cfg)?;
                Ok((e.total, e.pred_grads))
            },
            1e-5,
        )?;
        let dec_err = if variant.uses_rec() {
            grad_check(
                &dec,
                |n| {
                    let e =
                        ft_loss(&pred_net, n, &disc, proxy, stats, items, &draws, variant, cfg)?;
                    Ok((e.total, e.dec_grads))
                },
                1e-5,
            )?
        } else {
            0.0
        };
        let err = pred_err.max(dec_err);
        if err > 1e-4 {
            return Err(Error::GradCheckFailed { err, tol: 1e-4 });
        }
    }

    let mut opt_pred = Optimizer::from_config(&pred_net, cfg);
    let mut opt_dec = Optimizer::from_config(&dec, cfg);
    let mut opt_disc = Optimizer::from_config(&disc.net, cfg);
    let mut history = TrainHistory::new(&["total", "bridge", "rec", "hf", "adv", "fm"]);

    for step in 0..cfg.steps {
        let draws = make_draws(&mut batch_rng, cfg.batch_size)?;
        let eval = ft_loss(&pred_net, &dec, &disc, proxy, stats, items, &draws, variant, cfg)?;
        if !eval.total.is_finite() || !eval.pred_grads.is_finite() {
            return Err(Error::TrainDiverged {
                step,
                term: format!("finetune {} total", variant.name()),
            });
        }
        let mut pg = eval.pred_grads.clone();
        pg.clip_global_norm(cfg.clip_norm);
        opt_pred.step(&mut pred_net, &pg);
        if variant.decoder_trainable() {
            let mut dg = eval.dec_grads.clone();
            dg.clip_global_norm(cfg.clip_norm);
            opt_dec.step(&mut dec, &dg);
        }
        if variant.uses_af() && !eval.fakes.is_empty() {
            let disc_outs =
                par::map_indexed(&eval.fakes, |i, fake| disc.disc_grads(&eval.reals[i], fake));
            let mut dg = Grads::zeros_like(&disc.net);
            for o in disc_outs {
                dg.add(&o?.1);
            }
            dg.scale(1.0 / eval.fakes.len() as f64);
            dg.clip_global_norm(cfg.clip_norm);
            opt_disc.step(&mut disc.net, &dg);
        }
        history.push(
            step,
            vec![eval.total, eval.bridge, eval.rec, eval.hf, eval.adv, eval.fm],
        );
    }

    Ok(FinetuneOut {
        predictor: BridgePredictor::new(pred_net, latent_dim)?,
        decoder: dec,
        disc,
        history,
    })
}
