//! Latent bridge training: fit the clean-latent predictor on paired
//! (clean, prior) latents with interpolation times drawn uniformly from
//! `[t_min, 1]`.

use super::optim::Optimizer;
use super::vae::{derive_rng, VaeNets};
use super::{grad_check, Activation, ToyNet, TrainConfig, TrainHistory};
use crate::bridge::{
    bridge_loss, interpolate, predictor_input_dim, sample_training_time, BridgeBatch,
    BridgePredictor, LatentVec,
};
use crate::error::{Error, Result};
use crate::par;
use crate::schedule::NoiseSchedule;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeArch {
    pub hidden: Vec<usize>,
}

impl Default for BridgeArch {
    fn default() -> Self {
        BridgeArch {
            hidden: vec![96, 96],
        }
    }
}

impl BridgeArch {
    pub fn build(&self, latent_dim: usize, rng: &mut impl Rng) -> Result<BridgePredictor> {
        let mut dims = vec![predictor_input_dim(latent_dim)];
        dims.extend_from_slice(&self.hidden);
        dims.push(latent_dim);
        BridgePredictor::new(ToyNet::new(&dims, Activation::Tanh, rng), latent_dim)
    }
}

/// Per-dimension standardisation applied around the bridge stage, so the
/// generative process and the predictor inputs run at unit scale no
/// matter how large the encoder's latents are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LatentStats {
    pub fn identity(dim: usize) -> Self {
        LatentStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fit over both sides of the latent pairs.
    pub fn fit(pairs: &[(LatentVec, LatentVec)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("LatentStats::fit".into()));
        }
        let d = pairs[0].0.dim();
        let n = (2 * pairs.len()) as f64;
        let mut mean = vec![0.0; d];
        for (a, b) in pairs {
            for i in 0..d {
                mean[i] += a.0[i] + b.0[i];
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for (a, b) in pairs {
            for i in 0..d {
                var[i] += (a.0[i] - mean[i]).powi(2) + (b.0[i] - mean[i]).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(1e-6)).collect();
        Ok(LatentStats { mean, std })
    }

    pub fn normalize(&self, z: &LatentVec) -> LatentVec {
        LatentVec(
            z.0.iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect(),
        )
    }

    pub fn denormalize(&self, z: &LatentVec) -> LatentVec {
        LatentVec(
            z.0.iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(v, (m, s))| v * s + m)
                .collect(),
        )
    }

    pub fn normalize_pairs(
        &self,
        pairs: &[(LatentVec, LatentVec)],
    ) -> Vec<(LatentVec, LatentVec)> {
        pairs
            .iter()
            .map(|(a, b)| (self.normalize(a), self.normalize(b)))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), serde_json::to_string_pretty(self).unwrap())
            .map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("bad latent stats: {e}")))
    }
}

/// Encode aligned (clean, degraded) frames into (z0, z1) latent pairs
/// with the frozen clean encoder and prior encoder.
pub fn encode_pairs(
    vae: &VaeNets,
    enc_np: &ToyNet,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<(LatentVec, LatentVec)>> {
    let latent_dim = vae.latent_dim;
    let outs = par::map_indexed(pairs, |_, (clean, lq)| -> Result<(LatentVec, LatentVec)> {
        let z0 = vae.encode_mean(clean)?;
        let z1 = enc_np.forward(lq)?[..latent_dim].to_vec();
        Ok((LatentVec(z0), LatentVec(z1)))
    });
    outs.into_iter().collect()
}

/// Train the predictor by stochastic descent on the clean-latent
/// prediction loss.
pub fn train_bridge(
    pairs: &[(LatentVec, LatentVec)],
    sched: &NoiseSchedule,
    arch: &BridgeArch,
    cfg: &TrainConfig,
) -> Result<(BridgePredictor, TrainHistory)> {
    cfg.validate()?;
    sched.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("train_bridge pairs".into()));
    }
    let latent_dim = pairs[0].0.dim();
    let mut init_rng = derive_rng(cfg.seed, 21);
    let mut pred = arch.build(latent_dim, &mut init_rng)?;
    let sched = NoiseSchedule {
        t_min: cfg.t_min,
        ..*sched
    };

    let mut batch_rng = derive_rng(cfg.seed, 22);
    let make_batch = |rng: &mut rand_chacha::ChaCha8Rng, size: usize| -> Result<BridgeBatch> {
        let mut batch = BridgeBatch {
            z0: Vec::with_capacity(size),
            z1: Vec::with_capacity(size),
            t: Vec::with_capacity(size),
            zt: Vec::with_capacity(size),
        };
        for _ in 0..size {
            let idx = rng.random_range(0..pairs.len());
            let (z0, z1) = &pairs[idx];
            let t = sample_training_time(rng, sched.t_min);
            let zt = interpolate(z0, z1, t, &sched, rng)?;
            batch.z0.push(z0.clone());
            batch.z1.push(z1.clone());
            batch.t.push(t);
            batch.zt.push(zt);
        }
        Ok(batch)
    };

    if cfg.preflight {
        let batch = make_batch(&mut derive_rng(cfg.seed, 23), 2)?;
        let err = grad_check(
            &pred.net,
            |n| {
                let p = BridgePredictor::new(n.clone(), latent_dim)?;
                bridge_loss(&p, &batch)
            },
            1e-5,
        )?;
        if err > 1e-4 {
            return Err(Error::GradCheckFailed { err, tol: 1e-4 });
        }
    }

    let mut opt = Optimizer::from_config(&pred.net, cfg);
    let mut history = TrainHistory::new(&["loss"]);
    for step in 0..cfg.steps {
        let batch = make_batch(&mut batch_rng, cfg.batch_size)?;
        let (loss, grads) = bridge_loss(&pred, &batch)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::TrainDiverged {
                step,
                term: "bridge loss".into(),
            });
        }
        let mut grads = grads;
        grads.clip_global_norm(cfg.clip_norm);
        opt.step(&mut pred.net, &grads);
        history.push(step, vec![loss]);
    }
    Ok((pred, history))
}

/// Evaluate the prediction loss at one fixed time over all pairs,
/// averaging the interpolation noise over `n_draws` seeds per pair.
pub fn loss_at_time(
    pred: &BridgePredictor,
    pairs: &[(LatentVec, LatentVec)],
    sched: &NoiseSchedule,
    t: f64,
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    let outs = par::map_indexed(pairs, |i, (z0, z1)| -> Result<f64> {
        let mut rng = derive_rng(seed ^ i as u64, 31);
        let mut acc = 0.0;
        for _ in 0..n_draws {
            let zt = interpolate(z0, z1, t, sched, &mut rng)?;
            let zhat = pred.net.forward(&crate::bridge::predictor_input(&zt, t, z1))?;
            acc += zhat
                .iter()
                .zip(&z0.0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        Ok(acc / n_draws as f64)
    });
    let mut total = 0.0;
    for v in outs {
        total += v?;
    }
    Ok(total / pairs.len() as f64)
}
