//! Fast invariant suite behind the `selftest` CLI subcommand: one named
//! check per core property, each returning a pass/fail verdict with a
//! short detail string.

use crate::analysis::{fit_gaussian, lsd, snr_db, w2_gaussian, w2_matrix_from_fits, GaussianFit};
use crate::bridge::{interpolate, interpolate_mean_var, LatentVec};
use crate::degrade::{degrade, mix_at_snr, op_clip, DegradationSpec};
use crate::dsp::filter::{design_lowpass, FilterFamily};
use crate::dsp::{mrstft_distance, resample, AudioBuffer};
use crate::error::Result;
use crate::net::checkpoint::{load_toynet, save_toynet};
use crate::net::{grad_check, Activation, Grads, ToyNet};
use crate::sampler::{ode_step, sample_trajectory, sde_step, ConstantPredictor, SamplerConfig, SamplerMode};
use crate::schedule::{eval_schedule, verify_schedule, NoiseSchedule};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String>) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(crate::Error::Domain(msg.into()))
    }
}

fn tone(freq: f64, fs: u32, n: usize) -> AudioBuffer {
    let s: Vec<f64> = (0..n)
        .map(|i| 0.5 * (std::f64::consts::TAU * freq * i as f64 / fs as f64).sin())
        .collect();
    AudioBuffer::new(s, fs)
}

/// Run every check; the caller decides how to render results.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("schedule closed forms vs quadrature", || {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let s = if rng.random::<bool>() {
                    NoiseSchedule::brownian_bridge(rng.random_range(1e-3..10.0))
                } else {
                    NoiseSchedule::gmax_linear(
                        rng.random_range(1e-3..10.0),
                        rng.random_range(1e-3..30.0),
                    )
                };
                worst = worst.max(verify_schedule(&s, 10_000)?);
            }
            ensure(worst < 1e-6, format!("max quadrature error {worst}"))?;
            Ok(format!("max error {worst:.2e} over 20 random schedules"))
        }),
        check("schedule endpoints exact", || {
            for g0 in [0.1, 1.0, 7.3] {
                let s = NoiseSchedule::brownian_bridge(g0);
                ensure(eval_schedule(&s, 0.0)?.sigma2 == 0.0, "sigma2(0) != 0")?;
                ensure(eval_schedule(&s, 1.0)?.sigma_bar2 == 0.0, "sigma_bar2(1) != 0")?;
            }
            Ok("sigma2(0) = 0 and sigma_bar2(1) = 0 exactly".into())
        }),
        check("bridge endpoint identity", || {
            let z0 = LatentVec(vec![0.3, -0.7]);
            let z1 = LatentVec(vec![2.0, 5.0]);
            let s = NoiseSchedule::brownian_bridge(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            ensure(interpolate(&z0, &z1, 0.0, &s, &mut rng)? == z0, "t=0 not z0")?;
            ensure(interpolate(&z0, &z1, 1.0, &s, &mut rng)? == z1, "t=1 not z1")?;
            Ok("interpolate returns endpoints bit-exactly".into())
        }),
        check("bridge Monte-Carlo moments", || {
            let z0 = LatentVec(vec![0.0]);
            let z1 = LatentVec(vec![1.0]);
            let s = NoiseSchedule::brownian_bridge(1.0);
            let (mean_want, var_want) = interpolate_mean_var(&z0, &z1, 0.3, &s)?;
            let n = 20_000;
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for _ in 0..n {
                let z = interpolate(&z0, &z1, 0.3, &s, &mut rng)?.0[0];
                acc += z;
                acc2 += z * z;
            }
            let mean = acc / n as f64;
            let var = acc2 / n as f64 - mean * mean;
            ensure(
                (mean - mean_want.0[0]).abs() < 0.02 && (var - var_want).abs() < 0.02,
                format!("mean {mean} var {var}"),
            )?;
            Ok(format!("mean {mean:.4}, var {var:.4} at t = 0.3"))
        }),
        check("sampler identity and terminal steps", || {
            let s = NoiseSchedule::brownian_bridge(1.0);
            let z = LatentVec(vec![0.4]);
            let zhat = LatentVec(vec![-0.9]);
            let z1 = LatentVec(vec![1.0]);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            ensure(sde_step(&z, 0.5, 0.5, &zhat, &s, &mut rng)? == z, "sde t=s")?;
            ensure(sde_step(&z, 0.5, 0.0, &zhat, &s, &mut rng)? == zhat, "sde t=0")?;
            ensure(ode_step(&z, 0.5, 0.5, &zhat, &z1, &s)? == z, "ode t=s")?;
            ensure(ode_step(&z, 0.5, 0.0, &zhat, &z1, &s)? == zhat, "ode t=0")?;
            Ok("both steppers: identity at t=s, collapse at t=0".into())
        }),
        check("sampler one-step exact recovery", || {
            let s = NoiseSchedule::brownian_bridge(1.0);
            let z0 = LatentVec(vec![0.25, -0.5]);
            let z1 = LatentVec(vec![2.0, 3.0]);
            let oracle = ConstantPredictor(z0.clone());
            for mode in [SamplerMode::Ode, SamplerMode::Sde] {
                let cfg = SamplerConfig {
                    mode,
                    n_steps: 1,
                    ..SamplerConfig::default()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(4);
                let (out, _) = sample_trajectory(&oracle, &z1, &cfg, &s, &mut rng)?;
                ensure(out == z0, "one-step restore not exact")?;
            }
            Ok("1-step SDE and ODE return the oracle latent exactly".into())
        }),
        check("sde marginal preservation", || {
            let s = NoiseSchedule::brownian_bridge(1.0);
            let z0 = LatentVec(vec![0.0]);
            let z1 = LatentVec(vec![1.0]);
            let n = 20_000;
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for _ in 0..n {
                let z = sde_step(&z1, 1.0, 0.5, &z0, &s, &mut rng)?.0[0];
                acc += z;
                acc2 += z * z;
            }
            let mean = acc / n as f64;
            let var = acc2 / n as f64 - mean * mean;
            ensure(
                (var - 0.25).abs() < 0.02,
                format!("var {var} should be 0.25"),
            )?;
            Ok(format!("Var(z_0.5) = {var:.4} (expect t(1-t) = 0.25)"))
        }),
        check("ode limit consistency at s=1", || {
            let s = NoiseSchedule::brownian_bridge(1.0);
            let zhat = LatentVec(vec![0.0]);
            let z1 = LatentVec(vec![1.0]);
            let exact = ode_step(&z1, 1.0, 0.5, &zhat, &z1, &s)?;
            let (z_near, _) = interpolate_mean_var(&zhat, &z1, 1.0 - 1e-6, &s)?;
            let near = ode_step(&z_near, 1.0 - 1e-6, 0.5, &zhat, &z1, &s)?;
            let rel = (exact.0[0] - near.0[0]).abs() / exact.0[0].abs();
            ensure(rel < 1e-4, format!("relative gap {rel}"))?;
            Ok(format!("limit form and near-limit agree (rel {rel:.1e})"))
        }),
        check("clip ratio endpoints", || {
            let x = tone(220.0, 8000, 2000);
            let peak = x.peak();
            for ratio in [0.06, 0.9] {
                let y = op_clip(&x, ratio)?;
                ensure(
                    (y.peak() - ratio * peak).abs() < 1e-12,
                    format!("ratio {ratio}"),
                )?;
            }
            Ok("clip peaks land exactly on 0.06 and 0.9 of input peak".into())
        }),
        check("snr mixing accuracy", || {
            let clean = tone(220.0, 8000, 4000);
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            for _ in 0..20 {
                let noise = AudioBuffer::new(
                    (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    8000,
                );
                let snr = rng.random_range(-5.0..20.0);
                let mixed = mix_at_snr(&clean, &noise, snr)?;
                let pn: f64 = mixed
                    .samples
                    .iter()
                    .zip(&clean.samples)
                    .map(|(m, c)| (m - c) * (m - c))
                    .sum();
                let pc: f64 = clean.samples.iter().map(|v| v * v).sum();
                let measured = 10.0 * (pc / pn).log10();
                ensure((measured - snr).abs() < 0.1, format!("snr {measured} vs {snr}"))?;
            }
            Ok("20 random mixes within 0.1 dB of requested SNR".into())
        }),
        check("degradation replay determinism", || {
            let x = tone(220.0, 8000, 4000);
            let spec = DegradationSpec {
                bw_targets_hz: vec![2000, 4000],
                eq_f0_range: (10.0, 3500.0),
                rir_rt60_range: (0.1, 0.2),
                ..DegradationSpec::default()
            };
            let mut r1 = ChaCha8Rng::seed_from_u64(7);
            let (a, ops_a) = degrade(&x, &spec, &mut r1)?;
            let mut r2 = ChaCha8Rng::seed_from_u64(7);
            let (b, ops_b) = degrade(&x, &spec, &mut r2)?;
            ensure(a.samples == b.samples && ops_a == ops_b, "replay differs")?;
            let replayed = crate::degrade::apply_ops(&x, &ops_a)?;
            ensure(replayed.samples == a.samples, "ops replay differs")?;
            Ok("seeded degrade and its ops replay are bit-identical".into())
        }),
        check("filter stability over random designs", || {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for _ in 0..100 {
                let fam = FilterFamily::ALL[rng.random_range(0..3)];
                let order = rng.random_range(2..=12);
                let cutoff = rng.random_range(0.002..0.45) * 48000.0;
                let f = design_lowpass(fam, order, cutoff, 48000.0)?;
                ensure(f.max_pole_radius() < 1.0, "unstable design")?;
            }
            Ok("100 random designs all stable".into())
        }),
        check("resample identity and round trip", || {
            let x = tone(1000.0, 48000, 48000);
            let same = resample(&x, 48000, FilterFamily::Butterworth)?;
            ensure(same.samples == x.samples, "identity resample changed data")?;
            let down = resample(&x, 8000, FilterFamily::Butterworth)?;
            let up = resample(&down, 48000, FilterFamily::Butterworth)?;
            ensure(up.len() == x.len(), "round trip length")?;
            Ok("identity exact; 48k->8k->48k length preserved".into())
        }),
        check("mrstft premetric", || {
            let a = tone(1000.0, 8000, 2048);
            let b = tone(2000.0, 8000, 2048);
            let res = [256usize, 512];
            ensure(mrstft_distance(&a, &a, &res)? == 0.0, "self distance")?;
            let dab = mrstft_distance(&a, &b, &res)?;
            let dba = mrstft_distance(&b, &a, &res)?;
            ensure(dab > 0.0 && (dab - dba).abs() < 1e-12, "symmetry")?;
            Ok(format!("d(a,b) = {dab:.4}, symmetric, zero on self"))
        }),
        check("w2 closed forms", || {
            let a = GaussianFit::new(vec![0.0, 0.0], DMatrix::identity(2, 2));
            let b = GaussianFit::new(vec![3.0, 4.0], DMatrix::identity(2, 2));
            ensure((w2_gaussian(&a, &b)? - 5.0).abs() < 1e-10, "3-4-5 case")?;
            let fits = vec![
                GaussianFit::new(
                    vec![0.0, 0.0],
                    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0])),
                ),
                a,
            ];
            let m = w2_matrix_from_fits(&fits)?;
            ensure(m[(0, 0)] == 5f64.sqrt(), "diagonal trace convention")?;
            Ok("equal-covariance and point-mass conventions exact".into())
        }),
        check("gaussian fit oracle", || {
            let samples = vec![
                LatentVec(vec![0.0, 0.0]),
                LatentVec(vec![2.0, 0.0]),
                LatentVec(vec![0.0, 2.0]),
                LatentVec(vec![2.0, 2.0]),
            ];
            let fit = fit_gaussian(&samples)?;
            ensure(
                fit.mu.as_slice() == [1.0, 1.0]
                    && (fit.sigma[(0, 0)] - 4.0 / 3.0).abs() < 1e-14,
                "hand-computed covariance",
            )?;
            Ok("sample mean/covariance match the hand computation".into())
        }),
        check("snr and lsd sanity", || {
            let x = tone(440.0, 8000, 4096);
            ensure(snr_db(&x, &x)? == 300.0, "exact-match cap")?;
            ensure(lsd(&x, &x)? == 0.0, "self lsd")?;
            Ok("snr cap 300 dB and lsd(x, x) = 0".into())
        }),
        check("gradient check exactness on quadratics", || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let net = ToyNet::new(&[4, 3], Activation::Linear, &mut rng);
            let x = [0.5, -1.0, 2.0, 0.25];
            let err = grad_check(
                &net,
                |n: &ToyNet| -> Result<(f64, Grads)> {
                    let (y, trace) = n.forward_trace(&x)?;
                    let l: f64 = y.iter().map(|v| v * v).sum();
                    let dl: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
                    let (g, _) = n.backward(&trace, &dl);
                    Ok((l, g))
                },
                1e-5,
            )?;
            ensure(err < 1e-7, format!("grad error {err}"))?;
            Ok(format!("linear net + quadratic loss: max rel {err:.1e}"))
        }),
        check("checkpoint round trip", || {
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            let net = ToyNet::new(&[6, 5, 2], Activation::Tanh, &mut rng);
            let path = std::env::temp_dir().join(format!(
                "bridgekit-selftest-{}.vbtk",
                std::process::id()
            ));
            save_toynet(&net, &path)?;
            let back = load_toynet(&path, Activation::Tanh)?;
            let _ = std::fs::remove_file(&path);
            ensure(back == net, "checkpoint round trip")?;
            Ok("VBTK save/load is bit-exact".into())
        }),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_selftest_checks_pass() {
        let results = super::run_all();
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(results.len() >= 15);
    }
}
