//! Tractable bridge noise schedules.
//!
//! A schedule is defined by a reference diffusion with drift factor `f`
//! and diffusion level `g`, through
//!
//! ```text
//! alpha(t)     = exp(int_0^t f)          alpha_bar(t) = exp(-int_t^1 f)
//! sigma2(t)    = int_0^t g^2 / alpha^2   sigma_bar2(t) = int_t^1 g^2 / alpha^2
//! ```
//!
//! Both shipped kinds have `f == 0`, so `alpha == alpha_bar == 1` and the
//! integrals close in elementary form. [`verify_schedule`] re-derives the
//! closed forms by trapezoid quadrature as an independent self-check.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// Constant diffusion level: `g(t) = g0`.
    BrownianBridge,
    /// Linearly interpolated squared diffusion: `g^2(t) = g0 + t (g1 - g0)`.
    GmaxLinear,
}

/// Parameters of a tractable bridge schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    /// Diffusion level at t = 0 (squared level for `GmaxLinear`).
    pub g0: f64,
    /// Diffusion level at t = 1; ignored for `BrownianBridge`.
    pub g1: f64,
    /// Sampling-time floor used by training-time draws.
    pub t_min: f64,
}

impl NoiseSchedule {
    pub fn brownian_bridge(g0: f64) -> Self {
        NoiseSchedule {
            kind: ScheduleKind::BrownianBridge,
            g0,
            g1: g0,
            t_min: 1e-4,
        }
    }

    pub fn gmax_linear(g0: f64, g1: f64) -> Self {
        NoiseSchedule {
            kind: ScheduleKind::GmaxLinear,
            g0,
            g1,
            t_min: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g0.is_finite() || self.g0 < 0.0 {
            return Err(Error::Domain(format!("g0 must be >= 0, got {}", self.g0)));
        }
        if !self.g1.is_finite() || self.g1 < 0.0 {
            return Err(Error::Domain(format!("g1 must be >= 0, got {}", self.g1)));
        }
        if !(self.t_min > 0.0 && self.t_min <= 0.1) {
            return Err(Error::Domain(format!(
                "t_min must lie in (0, 0.1], got {}",
                self.t_min
            )));
        }
        Ok(())
    }

    /// Squared diffusion level `g^2(t)`.
    pub fn g_squared(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::BrownianBridge => self.g0 * self.g0,
            ScheduleKind::GmaxLinear => self.g0 + t * (self.g1 - self.g0),
        }
    }

    fn sigma2_closed(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::BrownianBridge => self.g0 * self.g0 * t,
            ScheduleKind::GmaxLinear => self.g0 * t + 0.5 * (self.g1 - self.g0) * t * t,
        }
    }

    /// Terminal variance `sigma2(1)`, the bridge normaliser.
    pub fn sigma2_total(&self) -> f64 {
        self.sigma2_closed(1.0)
    }
}

/// Closed-form coefficients of the schedule at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub t: f64,
    pub alpha: f64,
    pub alpha_bar: f64,
    pub sigma2: f64,
    pub sigma_bar2: f64,
}

/// Evaluate the closed-form schedule coefficients at `t` in `[0, 1]`.
///
/// `sigma2(0)` and `sigma_bar2(1)` are exactly zero, and for the shipped
/// `f == 0` kinds `sigma2 + sigma_bar2 == sigma2(1)` holds exactly because
/// `sigma_bar2` is computed as the complement.
pub fn eval_schedule(sched: &NoiseSchedule, t: f64) -> Result<SchedulePoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [0, 1], got {t}")));
    }
    let sigma2 = sched.sigma2_closed(t);
    let total = sched.sigma2_total();
    let sigma_bar2 = if t == 1.0 { 0.0 } else { total - sigma2 };
    Ok(SchedulePoint {
        t,
        alpha: 1.0,
        alpha_bar: 1.0,
        sigma2,
        sigma_bar2,
    })
}

/// Check the closed forms against trapezoid quadrature of the defining
/// integrals over an `n_grid`-interval uniform grid. Returns the maximum
/// absolute deviation across both `sigma2` and `sigma_bar2`.
pub fn verify_schedule(sched: &NoiseSchedule, n_grid: usize) -> Result<f64> {
    if n_grid < 100 {
        return Err(Error::Domain(format!(
            "n_grid must be >= 100, got {n_grid}"
        )));
    }
    let n = n_grid;
    let h = 1.0 / n as f64;
    // Prefix trapezoid sums of g^2 / alpha^2 (alpha == 1 for both kinds).
    let mut prefix = vec![0.0f64; n + 1];
    let mut acc = 0.0;
    let mut prev = sched.g_squared(0.0);
    for i in 1..=n {
        let ti = i as f64 * h;
        let cur = sched.g_squared(ti);
        acc += 0.5 * (prev + cur) * h;
        prefix[i] = acc;
        prev = cur;
    }
    let total_quad = prefix[n];
    let mut max_err = 0.0f64;
    for (i, &quad_sigma2) in prefix.iter().enumerate() {
        let ti = (i as f64 * h).min(1.0);
        let p = eval_schedule(sched, ti)?;
        max_err = max_err.max((p.sigma2 - quad_sigma2).abs());
        max_err = max_err.max((p.sigma_bar2 - (total_quad - quad_sigma2)).abs());
    }
    Ok(max_err)
}
