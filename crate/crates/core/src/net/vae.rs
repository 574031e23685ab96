//! Energy-preserving autoencoder training.
//!
//! The objective couples a data-space loss evaluated at a random energy
//! level with a latent KL regulariser: the latent is scaled by
//! `s ~ U(0.5, 2)` before decoding and the reconstruction is compared
//! against `s * x`, so rescaling a latent must rescale the decoded
//! waveform. Disabling the energy-preserving constraint (`ep = false`)
//! fixes `s = 1` and recovers the plain autoencoder baseline used for
//! comparison.

use super::losses::{mrstft_loss_grad, wave_mse_grad, SpecDisc};
use super::optim::Optimizer;
use super::{grad_check, Activation, Grads, ToyNet, TrainConfig, TrainHistory};
use crate::error::{Error, Result};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Network shapes of the autoencoder stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeArch {
    pub frame_len: usize,
    pub latent_dim: usize,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
}

impl Default for VaeArch {
    fn default() -> Self {
        VaeArch {
            frame_len: 256,
            latent_dim: 8,
            enc_hidden: vec![128, 64],
            dec_hidden: vec![64, 128],
            disc_hidden: vec![48],
        }
    }
}

impl VaeArch {
    pub fn build(&self, rng: &mut impl Rng) -> VaeNets {
        let mut enc_dims = vec![self.frame_len];
        enc_dims.extend_from_slice(&self.enc_hidden);
        enc_dims.push(2 * self.latent_dim);
        let mut dec_dims = vec![self.latent_dim];
        dec_dims.extend_from_slice(&self.dec_hidden);
        dec_dims.push(self.frame_len);
        let mut encoder = ToyNet::new(&enc_dims, Activation::Tanh, rng);
        // Start the posterior tight: a log-variance head biased to -4
        // keeps early reparameterisation noise well below the latent
        // signal, so the decoder never learns to decode blur.
        let head = encoder.layers.last_mut().unwrap();
        for b in head.b[self.latent_dim..].iter_mut() {
            *b = -4.0;
        }
        VaeNets {
            encoder,
            decoder: ToyNet::new(&dec_dims, Activation::Tanh, rng),
            disc: SpecDisc::new(self.frame_len, &self.disc_hidden, rng),
            latent_dim: self.latent_dim,
            frame_len: self.frame_len,
        }
    }
}

/// Encoder (diagonal-Gaussian head), decoder, and the training
/// discriminator.
#[derive(Debug, Clone)]
pub struct VaeNets {
    pub encoder: ToyNet,
    pub decoder: ToyNet,
    pub disc: SpecDisc,
    pub latent_dim: usize,
    pub frame_len: usize,
}

impl VaeNets {
    pub fn encode_stats(&self, frame: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.encoder.forward(frame)?;
        let (mu, logvar) = out.split_at(self.latent_dim);
        Ok((mu.to_vec(), logvar.to_vec()))
    }

    /// Deterministic encoding: the posterior mean.
    pub fn encode_mean(&self, frame: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode_stats(frame)?.0)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(z)
    }
}

/// One frozen training item: every random draw materialised up front so
/// the loss is a deterministic function of the parameters.
#[derive(Debug, Clone)]
pub struct EpItem {
    pub frame: Vec<f64>,
    pub eps: Vec<f64>,
    pub scale: f64,
}

#[derive(Debug)]
pub struct EpVaeEval {
    pub total: f64,
    pub rec: f64,
    pub wav: f64,
    pub adv: f64,
    pub fm: f64,
    pub kl: f64,
    pub enc_grads: Grads,
    pub dec_grads: Grads,
    /// Decoded outputs and scaled targets, reused by the discriminator
    /// update.
    pub fakes: Vec<Vec<f64>>,
    pub reals: Vec<Vec<f64>>,
}

/// Generator-side loss and gradients over a frozen batch.
pub fn ep_vae_loss(
    encoder: &ToyNet,
    decoder: &ToyNet,
    disc: &SpecDisc,
    latent_dim: usize,
    items: &[EpItem],
    cfg: &TrainConfig,
) -> Result<EpVaeEval> {
    if items.is_empty() {
        return Err(Error::EmptyInput("ep_vae_loss batch".into()));
    }
    struct ItemOut {
        rec: f64,
        wav: f64,
        adv: f64,
        fm: f64,
        kl: f64,
        eg: Grads,
        dg: Grads,
        fake: Vec<f64>,
        real: Vec<f64>,
    }
    let outs = par::map_indexed(items, |_, item| -> Result<ItemOut> {
        let (enc_out, enc_trace) = encoder.forward_trace(&item.frame)?;
        let (mu, logvar) = enc_out.split_at(latent_dim);
        let s = item.scale;
        let zs: Vec<f64> = mu
            .iter()
            .zip(logvar)
            .zip(&item.eps)
            .map(|((m, lv), e)| s * (m + (0.5 * lv).exp() * e))
            .collect();
        let (xhat, dec_trace) = decoder.forward_trace(&zs)?;
        let target: Vec<f64> = item.frame.iter().map(|v| s * v).collect();

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
        let (dg, dzs) = decoder.backward(&dec_trace, &dxhat);

        let mut denc = vec![0.0; 2 * latent_dim];
        let mut l_kl = 0.0;
        for i in 0..latent_dim {
            let (m, lv, e) = (mu[i], logvar[i], item.eps[i]);
            let dz = s * dzs[i];
            denc[i] = dz + cfg.lambda_kl * m;
            denc[latent_dim + i] =
                dz * e * 0.5 * (0.5 * lv).exp() + cfg.lambda_kl * 0.5 * (lv.exp() - 1.0);
            l_kl += -0.5 * (1.0 + lv - m * m - lv.exp());
        }
        let (eg, _) = encoder.backward(&enc_trace, &denc);
        Ok(ItemOut {
            rec: l_rec,
            wav: l_wav,
            adv: l_adv,
            fm: l_fm,
            kl: l_kl,
            eg,
            dg,
            fake: xhat,
            real: target,
        })
    });

    let n = items.len() as f64;
    let mut eval = EpVaeEval {
        total: 0.0,
        rec: 0.0,
        wav: 0.0,
        adv: 0.0,
        fm: 0.0,
        kl: 0.0,
        enc_grads: Grads::zeros_like(encoder),
        dec_grads: Grads::zeros_like(decoder),
        fakes: Vec::with_capacity(items.len()),
        reals: Vec::with_capacity(items.len()),
    };
    for out in outs {
        let o = out?;
        eval.rec += o.rec;
        eval.wav += o.wav;
        eval.adv += o.adv;
        eval.fm += o.fm;
        eval.kl += o.kl;
        eval.enc_grads.add(&o.eg);
        eval.dec_grads.add(&o.dg);
        eval.fakes.push(o.fake);
        eval.reals.push(o.real);
    }
    eval.rec /= n;
    eval.wav /= n;
    eval.adv /= n;
    eval.fm /= n;
    eval.kl /= n;
    eval.enc_grads.scale(1.0 / n);
    eval.dec_grads.scale(1.0 / n);
    eval.total = cfg.lambda_rec * eval.rec
        + cfg.lambda_wav * eval.wav
        + cfg.lambda_adv * eval.adv
        + cfg.lambda_fm * eval.fm
        + cfg.lambda_kl * eval.kl;
    Ok(eval)
}

pub(crate) fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream))
}

pub(crate) fn sample_scale(rng: &mut impl Rng, ep: bool) -> f64 {
    if ep {
        rng.random_range(0.5..2.0)
    } else {
        1.0
    }
}

fn preflight(
    nets: &VaeNets,
    items: &[EpItem],
    cfg: &TrainConfig,
) -> Result<()> {
    let latent_dim = nets.latent_dim;
    let enc_err = grad_check(
        &nets.encoder,
        |n| {
            let e = ep_vae_loss(n, &nets.decoder, &nets.disc, latent_dim, items, cfg)?;
            Ok((e.total, e.enc_grads))
        },
        1e-5,
    )?;
    let dec_err = grad_check(
        &nets.decoder,
        |n| {
            let e = ep_vae_loss(&nets.encoder, n, &nets.disc, latent_dim, items, cfg)?;
            Ok((e.total, e.dec_grads))
        },
        1e-5,
    )?;
    let err = enc_err.max(dec_err);
    if err > 1e-4 {
        return Err(Error::GradCheckFailed { err, tol: 1e-4 });
    }
    Ok(())
}

/// Train the autoencoder on clean frames. With `ep = false` the scale is
/// pinned to 1 (baseline); RNG streams are shared either way so the two
/// runs see identical batches and reparameterisation noise.
pub fn train_ep_vae(
    frames: &[Vec<f64>],
    arch: &VaeArch,
    cfg: &TrainConfig,
    ep: bool,
) -> Result<(VaeNets, TrainHistory)> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::EmptyInput("train_ep_vae frames".into()));
    }
    let mut init_rng = derive_rng(cfg.seed, 1);
    let mut nets = arch.build(&mut init_rng);
    let mut batch_rng = derive_rng(cfg.seed, 2);
    let mut noise_rng = derive_rng(cfg.seed, 3);
    let mut scale_rng = derive_rng(cfg.seed, 4);

    let make_batch = |batch_rng: &mut ChaCha8Rng,
                      noise_rng: &mut ChaCha8Rng,
                      scale_rng: &mut ChaCha8Rng,
                      size: usize| {
        (0..size)
            .map(|_| {
                let idx = batch_rng.random_range(0..frames.len());
                EpItem {
                    frame: frames[idx].clone(),
                    eps: (0..arch.latent_dim)
                        .map(|_| noise_rng.sample(StandardNormal))
                        .collect(),
                    scale: sample_scale(scale_rng, ep),
                }
            })
            .collect::<Vec<_>>()
    };

    if cfg.preflight {
        let items = make_batch(
            &mut derive_rng(cfg.seed, 5),
            &mut derive_rng(cfg.seed, 6),
            &mut derive_rng(cfg.seed, 7),
            2,
        );
        preflight(&nets, &items, cfg)?;
    }

    let mut opt_enc = Optimizer::from_config(&nets.encoder, cfg);
    let mut opt_dec = Optimizer::from_config(&nets.decoder, cfg);
    let mut opt_disc = Optimizer::from_config(&nets.disc.net, cfg);
    let mut history = TrainHistory::new(&["total", "rec", "wav", "adv", "fm", "kl", "disc"]);

    for step in 0..cfg.steps {
        let items = make_batch(&mut batch_rng, &mut noise_rng, &mut scale_rng, cfg.batch_size);
        let eval = ep_vae_loss(
            &nets.encoder,
            &nets.decoder,
            &nets.disc,
            nets.latent_dim,
            &items,
            cfg,
        )?;
        if !eval.total.is_finite() || !eval.enc_grads.is_finite() || !eval.dec_grads.is_finite() {
            return Err(Error::TrainDiverged {
                step,
                term: "ep-vae total".into(),
            });
        }
        let mut enc_grads = eval.enc_grads;
        let mut dec_grads = eval.dec_grads;
        enc_grads.clip_global_norm(cfg.clip_norm);
        dec_grads.clip_global_norm(cfg.clip_norm);
        opt_enc.step(&mut nets.encoder, &enc_grads);
        opt_dec.step(&mut nets.decoder, &dec_grads);

        // Discriminator update on the pre-update fakes.
        let disc_outs = par::map_indexed(&eval.fakes, |i, fake| {
            nets.disc.disc_grads(&eval.reals[i], fake)
        });
        let mut disc_loss = 0.0;
        let mut disc_grads = Grads::zeros_like(&nets.disc.net);
        for o in disc_outs {
            let (l, g) = o?;
            disc_loss += l;
            disc_grads.add(&g);
        }
        let nb = eval.fakes.len() as f64;
        disc_loss /= nb;
        disc_grads.scale(1.0 / nb);
        disc_grads.clip_global_norm(cfg.clip_norm);
        if !disc_loss.is_finite() {
            return Err(Error::TrainDiverged {
                step,
                term: "discriminator".into(),
            });
        }
        opt_disc.step(&mut nets.disc.net, &disc_grads);

        history.push(
            step,
            vec![eval.total, eval.rec, eval.wav, eval.adv, eval.fm, eval.kl, disc_loss],
        );
    }
    Ok((nets, history))
}

/// Mean relative scale-equivariance error over frames and scales:
/// `|D(s E(x)) - s D(E(x))| / |s D(E(x))|` with deterministic encoding.
pub fn equivariance_error(nets: &VaeNets, frames: &[Vec<f64>], scales: &[f64]) -> Result<f64> {
    if frames.is_empty() || scales.is_empty() {
        return Err(Error::EmptyInput("equivariance_error".into()));
    }
    let per_frame = par::map_indexed(frames, |_, frame| -> Result<f64> {
        let z = nets.encode_mean(frame)?;
        let base = nets.decode(&z)?;
        let mut acc = 0.0;
        for &s in scales {
            let zs: Vec<f64> = z.iter().map(|v| s * v).collect();
            let scaled = nets.decode(&zs)?;
            let mut num = 0.0;
            let mut den = 0.0;
            for (a, b) in scaled.iter().zip(&base) {
                let want = s * b;
                num += (a - want) * (a - want);
                den += want * want;
            }
            acc += (num / den.max(1e-300)).sqrt();
        }
        Ok(acc / scales.len() as f64)
    });
    let mut total = 0.0;
    for v in per_frame {
        total += v?;
    }
    Ok(total / frames.len() as f64)
}

/// Held-out reconstruction distance `mrstft(D(E(x)), x)` at scale 1.
pub fn heldout_recon_mrstft(
    nets: &VaeNets,
    frames: &[Vec<f64>],
    resolutions: &[usize],
) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("heldout_recon_mrstft".into()));
    }
    let per_frame = par::map_indexed(frames, |_, frame| -> Result<f64> {
        let z = nets.encode_mean(frame)?;
        let xhat = nets.decode(&z)?;
        let (loss, _) = mrstft_loss_grad(&xhat, frame, resolutions);
        Ok(loss)
    });
    let mut total = 0.0;
    for v in per_frame {
        total += v?;
    }
    Ok(total / frames.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_frames(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let f = rng.random_range(0.02..0.2);
                let p = rng.random_range(0.0..std::f64::consts::TAU);
                (0..len)
                    .map(|i| 0.5 * (f * i as f64 + p).sin())
                    .collect()
            })
            .collect()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            steps: 30,
            batch_size: 4,
            learning_rate: 0.01,
            resolutions: vec![16, 32],
            ..TrainConfig::default()
        }
    }

    fn tiny_arch() -> VaeArch {
        VaeArch {
            frame_len: 32,
            latent_dim: 4,
            enc_hidden: vec![24],
            dec_hidden: vec![24],
            disc_hidden: vec![12],
        }
    }

    #[test]
    fn gradients_pass_preflight_and_loss_decreases() {
        let frames = toy_frames(16, 32, 0);
        let (nets, history) = train_ep_vae(&frames, &tiny_arch(), &tiny_cfg(), true).unwrap();
        let first = history.window_mean("rec", 0, 5).unwrap();
        let last = history.window_mean("rec", 25, 30).unwrap();
        assert!(last < first, "rec {first} -> {last}");
        assert_eq!(nets.latent_dim, 4);
    }

    #[test]
    fn training_is_deterministic() {
        let frames = toy_frames(8, 32, 1);
        let cfg = TrainConfig {
            steps: 10,
            preflight: false,
            ..tiny_cfg()
        };
        let (a, _) = train_ep_vae(&frames, &tiny_arch(), &cfg, true).unwrap();
        let (b, _) = train_ep_vae(&frames, &tiny_arch(), &cfg, true).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.decoder, b.decoder);
        assert_eq!(a.disc.net, b.disc.net);
    }

    #[test]
    fn linear_nets_are_exactly_equivariant() {
        // With linear activations and zero biases, D(sE(x)) = sD(E(x))
        // identically: the energy constraint is vacuous.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let arch = tiny_arch();
        let mut nets = arch.build(&mut rng);
        for layer in nets
            .encoder
            .layers
            .iter_mut()
            .chain(nets.decoder.layers.iter_mut())
        {
            layer.act = Activation::Linear;
            layer.b.iter_mut().for_each(|b| *b = 0.0);
        }
        let frames = toy_frames(4, 32, 3);
        let err = equivariance_error(&nets, &frames, &[0.5, 1.5, 2.0]).unwrap();
        assert!(err < 1e-12, "linear equivariance error {err}");
    }

    #[test]
    fn diverging_lr_reports_nan() {
        let frames = toy_frames(8, 32, 4);
        let cfg = TrainConfig {
            steps: 400,
            learning_rate: 1e6,
            preflight: false,
            ..tiny_cfg()
        };
        match train_ep_vae(&frames, &tiny_arch(), &cfg, true) {
            Err(Error::TrainDiverged { .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|_| ())),
        }
    }
}
