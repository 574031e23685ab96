//! First-order exponential-integrator reverse samplers.
//!
//! Both steppers carry a step from time `s` down to `t < s`:
//!
//! ```text
//! SDE:  z_t = (a_t s2_t)/(a_s s2_s) z_s + a_t (1 - s2_t/s2_s) zhat0
//!             + a_t sqrt(s2_t) sqrt(1 - s2_t/s2_s) eps
//! ODE:  z_t = (a_t st sbt)/(a_s ss sbs) z_s
//!             + a_t/s2_1 [ (sb2_t - sbs st sbt / ss) zhat0
//!                        + (s2_t - ss st sbt / sbs) z1 / a_1 ]
//! ```
//!
//! where `s2` is `sigma2`, `sb2` is `sigma_bar2`, and lowercase `st`,
//! `sbt` are their square roots. The ODE form divides by `sigma_bar(s)`,
//! which vanishes at `s = 1`; the first step from `s = 1` therefore uses
//! the analytic limit, which is the noise-free marginal mean
//! `(a_t sb2_t / s2_1) zhat0 + (ab_t s2_t / s2_1) z1`.

use crate::bridge::{LatentVec, Z0Predictor};
use crate::error::{Error, Result};
use crate::schedule::{eval_schedule, NoiseSchedule};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerMode {
    Sde,
    Ode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeGrid {
    UniformT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    pub n_steps: usize,
    /// Terminal time of the reverse pass; both steppers are regular at 0.
    pub t_min: f64,
    pub grid: TimeGrid,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            mode: SamplerMode::Ode,
            n_steps: 4,
            t_min: 0.0,
            grid: TimeGrid::UniformT,
        }
    }
}

/// Trivial predictor returning a fixed latent; used by self-tests and as
/// the exact-oracle reference in sampler diagnostics.
pub struct ConstantPredictor(pub LatentVec);

impl Z0Predictor for ConstantPredictor {
    fn predict_z0(&self, _zt: &LatentVec, _t: f64, _z1: &LatentVec) -> Result<LatentVec> {
        Ok(self.0.clone())
    }
}

fn check_step_times(s: f64, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!(
            "step times must lie in [0, 1], got s={s}, t={t}"
        )));
    }
    if t > s {
        return Err(Error::StepOrder { s, t });
    }
    Ok(())
}

/// One stochastic reverse step from `(z_s, s)` to time `t`.
///
/// `t == s` is the identity step and `t == 0` collapses onto `zhat0`
/// exactly; both short-circuit without consuming RNG.
pub fn sde_step(
    z_s: &LatentVec,
    s: f64,
    t: f64,
    z0_hat: &LatentVec,
    sched: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<LatentVec> {
    check_step_times(s, t)?;
    if z_s.dim() != z0_hat.dim() {
        return Err(Error::DimMismatch {
            expected: z_s.dim(),
            got: z0_hat.dim(),
        });
    }
    if t == s {
        return Ok(z_s.clone());
    }
    if t == 0.0 {
        return Ok(z0_hat.clone());
    }
    let ps = eval_schedule(sched, s)?;
    if ps.sigma2 <= 0.0 {
        return Err(Error::Singular(format!("sigma2({s}) = 0 in sde_step")));
    }
    let pt = eval_schedule(sched, t)?;
    let ratio = pt.sigma2 / ps.sigma2;
    let c_zs = pt.alpha * ratio / ps.alpha;
    let c_z0 = pt.alpha * (1.0 - ratio);
    let noise_sd = pt.alpha * pt.sigma2.sqrt() * (1.0 - ratio).max(0.0).sqrt();
    let out = z_s
        .0
        .iter()
        .zip(&z0_hat.0)
        .map(|(zs, z0)| {
            let eps: f64 = rng.sample(StandardNormal);
            c_zs * zs + c_z0 * z0 + noise_sd * eps
        })
        .collect();
    Ok(LatentVec(out))
}

/// One deterministic reverse step from `(z_s, s)` to time `t`.
///
/// The first step of a reverse pass starts at `s = 1`, where the generic
/// formula is singular; the analytic limit (the noise-free marginal mean)
/// is used there. For `s < 1` a vanishing `sigma_bar2(s)` is rejected with
/// a pointer at the limit form.
pub fn ode_step(
    z_s: &LatentVec,
    s: f64,
    t: f64,
    z0_hat: &LatentVec,
    z1: &LatentVec,
    sched: &NoiseSchedule,
) -> Result<LatentVec> {
    check_step_times(s, t)?;
    if z_s.dim() != z0_hat.dim() || z_s.dim() != z1.dim() {
        return Err(Error::DimMismatch {
            expected: z_s.dim(),
            got: z0_hat.dim().min(z1.dim()),
        });
    }
    if t == s {
        return Ok(z_s.clone());
    }
    if t == 0.0 {
        return Ok(z0_hat.clone());
    }
    let total = sched.sigma2_total();
    if total <= 0.0 {
        return Err(Error::Singular("sigma2(1) = 0 in ode_step".into()));
    }
    let pt = eval_schedule(sched, t)?;
    if s == 1.0 {
        let c0 = pt.alpha * pt.sigma_bar2 / total;
        let c1 = pt.alpha_bar * pt.sigma2 / total;
        let out = z0_hat
            .0
            .iter()
            .zip(&z1.0)
            .map(|(a, b)| c0 * a + c1 * b)
            .collect();
        return Ok(LatentVec(out));
    }
    let ps = eval_schedule(sched, s)?;
    if ps.sigma2 <= 0.0 {
        return Err(Error::Singular(format!("sigma2({s}) = 0 in ode_step")));
    }
    if ps.sigma_bar2 < 1e-12 {
        return Err(Error::Singular(format!(
            "sigma_bar2({s}) < 1e-12: start the reverse pass at s = 1 (analytic limit) or keep s <= 1 - t_min"
        )));
    }
    let alpha_1 = eval_schedule(sched, 1.0)?.alpha;
    let (ss, sbs) = (ps.sigma2.sqrt(), ps.sigma_bar2.sqrt());
    let (st, sbt) = (pt.sigma2.sqrt(), pt.sigma_bar2.sqrt());
    let c_zs = pt.alpha * st * sbt / (ps.alpha * ss * sbs);
    let c_z0 = pt.alpha / total * (pt.sigma_bar2 - sbs * st * sbt / ss);
    let c_z1 = pt.alpha / total * (pt.sigma2 - ss * st * sbt / sbs) / alpha_1;
    let out = z_s
        .0
        .iter()
        .zip(z0_hat.0.iter().zip(&z1.0))
        .map(|(zs, (z0, z1v))| c_zs * zs + c_z0 * z0 + c_z1 * z1v)
        .collect();
    Ok(LatentVec(out))
}

/// Run the reverse pass from `z1` at `s = 1` down a uniform time grid to
/// `cfg.t_min`, querying the predictor at each grid time. Returns the
/// final state and the whole trajectory (including the start).
pub fn sample_trajectory(
    predictor: &dyn Z0Predictor,
    z1: &LatentVec,
    cfg: &SamplerConfig,
    sched: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<(LatentVec, Vec<LatentVec>)> {
    if cfg.n_steps == 0 {
        return Err(Error::Domain("n_steps must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.t_min) {
        return Err(Error::Domain(format!(
            "sampler t_min must lie in [0, 1), got {}",
            cfg.t_min
        )));
    }
    let n = cfg.n_steps;
    let grid: Vec<f64> = (0..=n)
        .map(|i| {
            if i == n {
                cfg.t_min
            } else {
                1.0 - i as f64 * (1.0 - cfg.t_min) / n as f64
            }
        })
        .collect();
    let mut z = z1.clone();
    let mut trajectory = Vec::with_capacity(n + 1);
    trajectory.push(z.clone());
    for i in 0..n {
        let (s, t) = (grid[i], grid[i + 1]);
        let z0_hat = predictor.predict_z0(&z, s, z1)?;
        z = match cfg.mode {
            SamplerMode::Sde => sde_step(&z, s, t, &z0_hat, sched, rng)?,
            SamplerMode::Ode => ode_step(&z, s, t, &z0_hat, z1, sched)?,
        };
        trajectory.push(z.clone());
    }
    Ok((z, trajectory))
}
