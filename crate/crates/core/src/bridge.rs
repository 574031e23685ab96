//! Gaussian bridge interpolation between paired latents and the
//! clean-latent prediction loss.
//!
//! With both endpoints pinned, the bridge marginal at time `t` is the
//! Gaussian
//!
//! ```text
//! mean = (alpha_t sigma_bar2_t / sigma2_1) z0 + (alpha_bar_t sigma2_t / sigma2_1) z1
//! var  = alpha_t^2 sigma_bar2_t sigma2_t / sigma2_1        (isotropic)
//! ```
//!
//! The predictor is trained to output `z0` directly from `(z_t, t, z1)`,
//! with a mean-squared-norm loss over the batch.

use crate::error::{Error, Result};
use crate::net::{Grads, ToyNet};
use crate::par;
use crate::schedule::{eval_schedule, NoiseSchedule};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A fixed-dimension real vector standing in for a latent frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVec(pub Vec<f64>);

impl LatentVec {
    pub fn zeros(d: usize) -> Self {
        LatentVec(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &LatentVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn check_dim(&self, other: &LatentVec) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

impl From<Vec<f64>> for LatentVec {
    fn from(v: Vec<f64>) -> Self {
        LatentVec(v)
    }
}

/// Mean and isotropic variance of the bridge marginal at time `t`.
///
/// At `t == 0`/`t == 1` the endpoint is returned bit-exactly with zero
/// variance. A degenerate schedule (`sigma2(1) == 0`) only admits the
/// constant bridge, so it is accepted when `z0 == z1` and rejected
/// otherwise.
pub fn interpolate_mean_var(
    z0: &LatentVec,
    z1: &LatentVec,
    t: f64,
    sched: &NoiseSchedule,
) -> Result<(LatentVec, f64)> {
    z0.check_dim(z1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [0, 1], got {t}")));
    }
    if t == 0.0 {
        return Ok((z0.clone(), 0.0));
    }
    if t == 1.0 {
        return Ok((z1.clone(), 0.0));
    }
    let total = sched.sigma2_total();
    if total <= 0.0 {
        if z0 == z1 {
            return Ok((z0.clone(), 0.0));
        }
        return Err(Error::Singular(
            "sigma2(1) = 0: degenerate schedule cannot bridge distinct endpoints".into(),
        ));
    }
    let p = eval_schedule(sched, t)?;
    let c0 = p.alpha * p.sigma_bar2 / total;
    let c1 = p.alpha_bar * p.sigma2 / total;
    let var = p.alpha * p.alpha * p.sigma_bar2 * p.sigma2 / total;
    let mean = z0
        .0
        .iter()
        .zip(&z1.0)
        .map(|(a, b)| c0 * a + c1 * b)
        .collect::<Vec<_>>();
    Ok((LatentVec(mean), var))
}

/// Draw one sample of the bridge marginal: `mean + sqrt(var) * eps` with
/// per-coordinate standard normal noise. No RNG is consumed when the
/// variance is zero, so endpoint draws are bit-exact.
pub fn interpolate(
    z0: &LatentVec,
    z1: &LatentVec,
    t: f64,
    sched: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<LatentVec> {
    let (mut mean, var) = interpolate_mean_var(z0, z1, t, sched)?;
    if var > 0.0 {
        let sd = var.sqrt();
        for m in mean.0.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *m += sd * eps;
        }
    }
    Ok(mean)
}

/// Uniform training-time draw on `[t_min, 1]`.
pub fn sample_training_time(rng: &mut impl Rng, t_min: f64) -> f64 {
    debug_assert!(t_min > 0.0 && t_min < 1.0);
    let u: f64 = rng.random();
    t_min + u * (1.0 - t_min)
}

/// Number of values in the sinusoidal time embedding (16 frequencies,
/// sine and cosine each).
pub const TIME_EMBED_DIM: usize = 32;

/// Sinusoidal embedding of `t` with 16 geometrically spaced frequencies.
pub fn time_embedding(t: f64) -> [f64; TIME_EMBED_DIM] {
    let mut out = [0.0; TIME_EMBED_DIM];
    for k in 0..TIME_EMBED_DIM / 2 {
        let omega = std::f64::consts::TAU * 2f64.powf(k as f64 / 2.0);
        out[2 * k] = (omega * t).sin();
        out[2 * k + 1] = (omega * t).cos();
    }
    out
}

/// Predictor input layout: `[z_t, time_embedding(t), z1]`.
pub fn predictor_input(zt: &LatentVec, t: f64, z1: &LatentVec) -> Vec<f64> {
    let mut v = Vec::with_capacity(predictor_input_dim(zt.dim()));
    v.extend_from_slice(&zt.0);
    v.extend_from_slice(&time_embedding(t));
    v.extend_from_slice(&z1.0);
    v
}

pub fn predictor_input_dim(latent_dim: usize) -> usize {
    2 * latent_dim + TIME_EMBED_DIM
}

/// Anything that can estimate the clean latent from `(z_t, t, z1)`.
pub trait Z0Predictor: Sync {
    fn predict_z0(&self, zt: &LatentVec, t: f64, z1: &LatentVec) -> Result<LatentVec>;
}

/// Network-backed predictor using the concatenated input convention.
#[derive(Debug, Clone)]
pub struct BridgePredictor {
    pub net: ToyNet,
    pub latent_dim: usize,
}

impl BridgePredictor {
    pub fn new(net: ToyNet, latent_dim: usize) -> Result<Self> {
        if net.input_dim() != predictor_input_dim(latent_dim) {
            return Err(Error::DimMismatch {
                expected: predictor_input_dim(latent_dim),
                got: net.input_dim(),
            });
        }
        if net.output_dim() != latent_dim {
            return Err(Error::DimMismatch {
                expected: latent_dim,
                got: net.output_dim(),
            });
        }
        Ok(BridgePredictor { net, latent_dim })
    }
}

impl Z0Predictor for BridgePredictor {
    fn predict_z0(&self, zt: &LatentVec, t: f64, z1: &LatentVec) -> Result<LatentVec> {
        let out = self.net.forward(&predictor_input(zt, t, z1))?;
        Ok(LatentVec(out))
    }
}

/// A batch of interpolated training items.
#[derive(Debug, Clone)]
pub struct BridgeBatch {
    pub z0: Vec<LatentVec>,
    pub z1: Vec<LatentVec>,
    pub t: Vec<f64>,
    pub zt: Vec<LatentVec>,
}

impl BridgeBatch {
    /// Interpolate each `(z0, z1)` pair at a fresh `t ~ U(t_min, 1)`.
    pub fn sample(
        pairs: &[(LatentVec, LatentVec)],
        sched: &NoiseSchedule,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut batch = BridgeBatch {
            z0: Vec::with_capacity(pairs.len()),
            z1: Vec::with_capacity(pairs.len()),
            t: Vec::with_capacity(pairs.len()),
            zt: Vec::with_capacity(pairs.len()),
        };
        for (z0, z1) in pairs {
            let t = sample_training_time(rng, sched.t_min);
            let zt = interpolate(z0, z1, t, sched, rng)?;
            batch.z0.push(z0.clone());
            batch.z1.push(z1.clone());
            batch.t.push(t);
            batch.zt.push(zt);
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.z0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z0.is_empty()
    }
}

/// Mean over the batch of the squared-norm prediction error, with
/// analytic gradients for every predictor parameter.
pub fn bridge_loss(pred: &BridgePredictor, batch: &BridgeBatch) -> Result<(f64, Grads)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("bridge batch".into()));
    }
    let n = batch.len();
    let items: Vec<usize> = (0..n).collect();
    let per_item = par::map_indexed(&items, |_, &i| -> Result<(f64, Grads)> {
        let input = predictor_input(&batch.zt[i], batch.t[i], &batch.z1[i]);
        let (y, trace) = pred.net.forward_trace(&input)?;
        if y.len() != batch.z0[i].dim() {
            return Err(Error::DimMismatch {
                expected: batch.z0[i].dim(),
                got: y.len(),
            });
        }
        let mut loss = 0.0;
        let mut dl: Vec<f64> = Vec::with_capacity(y.len());
        for (a, b) in y.iter().zip(&batch.z0[i].0) {
            let r = a - b;
            loss += r * r;
            dl.push(2.0 * r / n as f64);
        }
        let (g, _) = pred.net.backward(&trace, &dl);
        Ok((loss, g))
    });
    let mut total = 0.0;
    let mut grads = Grads::zeros_like(&pred.net);
    for item in per_item {
        let (l, g) = item?;
        total += l;
        grads.add(&g);
    }
    Ok((total / n as f64, grads))
}
