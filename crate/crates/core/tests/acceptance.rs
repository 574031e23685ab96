//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (run with `--nocapture` to see
//! them). Trend criteria share a lazily trained four-stage pipeline
//! fixture so the suite stays within its time budget.

use bridgekit::analysis::{w2_gaussian, w2_matrix, w2_matrix_from_fits, GaussianFit};
use bridgekit::bridge::{interpolate, interpolate_mean_var, BridgePredictor, LatentVec};
use bridgekit::config::RunConfig;
use bridgekit::degrade::{degrade, mix_at_snr, op_clip, DegradationSpec};
use bridgekit::dsp::{resample, AudioBuffer, FilterFamily};
use bridgekit::net::bridge_train::{encode_pairs, train_bridge, BridgeArch, LatentStats};
use bridgekit::net::corpus::{build_corpus, frames_of, CorpusConfig, ToyCorpus};
use bridgekit::net::finetune::{finetune_perceptual, FinetuneItem, FinetuneVariant};
use bridgekit::net::losses::LogSpectralProxy;
use bridgekit::net::prior::{mean_latent_distance, prior_loss, train_joint_prior, PriorItem};
use bridgekit::net::restore::RestoreModel;
use bridgekit::net::vae::{ep_vae_loss, equivariance_error, train_ep_vae, EpItem, VaeArch, VaeNets};
use bridgekit::net::{grad_check, ToyNet, TrainConfig};
use bridgekit::pipeline::{
    degradation_type_groups, heldout_input_metrics, heldout_metrics, SWEEP_GRID,
};
use bridgekit::sampler::{
    ode_step, sample_trajectory, sde_step, ConstantPredictor, SamplerConfig, SamplerMode,
};
use bridgekit::schedule::{verify_schedule, NoiseSchedule};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

// ---------------------------------------------------------------------
// Shared fixture: the full four-stage toy pipeline.
// ---------------------------------------------------------------------

struct Fixture {
    cfg: RunConfig,
    corpus: ToyCorpus,
    vae: VaeNets,
    baseline_vae: VaeNets,
    enc_np: ToyNet,
    stats: LatentStats,
    predictor: BridgePredictor,
    latents: Vec<(LatentVec, LatentVec)>,
}

fn fixture_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.corpus.n_train = 64;
    cfg.corpus.n_heldout = 50;
    cfg
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = fixture_config();
        let mut corpus_cfg = cfg.corpus.clone();
        corpus_cfg.seed = 0;
        let corpus = build_corpus(&corpus_cfg).expect("corpus");

        let frames = corpus.train_clean_frames();
        let mut vcfg = cfg.train_vae.clone();
        vcfg.seed = 1;
        let (vae, _) = train_ep_vae(&frames, &cfg.vae_arch, &vcfg, true).expect("vae");
        let (baseline_vae, _) =
            train_ep_vae(&frames, &cfg.vae_arch, &vcfg, false).expect("baseline vae");

        let pairs = corpus.train_pairs();
        let mut pcfg = cfg.train_prior.clone();
        pcfg.seed = 2;
        let prior_out = train_joint_prior(&vae.encoder, &vae, &pairs, &pcfg).expect("prior");

        let latents = encode_pairs(&vae, &prior_out.encoder_np, &pairs).expect("latents");
        let stats = LatentStats::fit(&latents).expect("stats");
        let normed = stats.normalize_pairs(&latents);
        let mut bcfg = cfg.train_bridge.clone();
        bcfg.seed = 3;
        let (predictor, _) =
            train_bridge(&normed, &cfg.schedule, &cfg.bridge_arch, &bcfg).expect("bridge");

        Fixture {
            cfg,
            corpus,
            vae,
            baseline_vae,
            enc_np: prior_out.encoder_np,
            stats,
            predictor,
            latents,
        }
    })
}

fn restore_model(fx: &Fixture) -> RestoreModel {
    RestoreModel {
        enc_np: fx.enc_np.clone(),
        decoder: fx.vae.decoder.clone(),
        predictor: BridgePredictor::new(fx.predictor.net.clone(), fx.vae.latent_dim).unwrap(),
        stats: fx.stats.clone(),
        frame_len: fx.vae.frame_len,
        latent_dim: fx.vae.latent_dim,
    }
}

fn offdiag_mean(m: &DMatrix<f64>) -> f64 {
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

// ---------------------------------------------------------------------
// Criterion 1: schedule exactness.
// ---------------------------------------------------------------------

#[test]
fn criterion_01_schedule_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let sched = if i % 2 == 0 {
            NoiseSchedule::brownian_bridge(rng.random_range(1e-3..10.0))
        } else {
            NoiseSchedule::gmax_linear(rng.random_range(1e-3..10.0), rng.random_range(1e-3..30.0))
        };
        let err = verify_schedule(&sched, 100_000).unwrap();
        assert!(err < 1e-6, "schedule {sched:?}: quadrature error {err}");
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 1 PASS: closed forms within {worst:.2e} of 1e5-point quadrature over 100 schedules in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------
// Criterion 2: bridge endpoint laws and Monte-Carlo moments.
// ---------------------------------------------------------------------

#[test]
fn criterion_02_bridge_endpoint_laws() {
    let start = Instant::now();
    let sched = NoiseSchedule::brownian_bridge(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..20 {
        let z0 = LatentVec(vec![rng.random_range(-2.0..2.0)]);
        let z1 = LatentVec(vec![rng.random_range(-2.0..2.0)]);
        assert_eq!(interpolate(&z0, &z1, 0.0, &sched, &mut rng).unwrap(), z0);
        assert_eq!(interpolate(&z0, &z1, 1.0, &sched, &mut rng).unwrap(), z1);
    }

    let n = 100_000usize;
    let z0 = LatentVec(vec![-0.5]);
    let z1 = LatentVec(vec![1.5]);
    let mut max_sigma = 0.0f64;
    for _ in 0..20 {
        let t = rng.random_range(0.02..0.98);
        let (mean_want, var_want) = interpolate_mean_var(&z0, &z1, t, &sched).unwrap();
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let z = interpolate(&z0, &z1, t, &sched, &mut rng).unwrap().0[0];
            acc += z;
            acc2 += z * z;
        }
        let mean = acc / n as f64;
        let var = acc2 / n as f64 - mean * mean;
        let se_mean = (var_want / n as f64).sqrt();
        let se_var = var_want * (2.0 / (n as f64 - 1.0)).sqrt();
        let dev_mean = (mean - mean_want.0[0]).abs() / se_mean;
        let dev_var = (var - var_want).abs() / se_var;
        assert!(dev_mean <= 4.0, "t={t}: mean off by {dev_mean} SE");
        assert!(dev_var <= 4.0, "t={t}: var off by {dev_var} SE");
        max_sigma = max_sigma.max(dev_mean).max(dev_var);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 2 PASS: endpoints bit-exact; MC moments within {max_sigma:.2} SE (limit 4) at N=1e5, 20 random t, in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------
// Criterion 3: sampler exactness.
// ---------------------------------------------------------------------

#[test]
fn criterion_03_sampler_exactness() {
    let sched = NoiseSchedule::brownian_bridge(1.0);
    let z0 = LatentVec(vec![0.25, -0.75]);
    let z1 = LatentVec(vec![1.5, 2.5]);
    let oracle = ConstantPredictor(z0.clone());
    for mode in [SamplerMode::Sde, SamplerMode::Ode] {
        let cfg = SamplerConfig {
            mode,
            n_steps: 1,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        let (out, _) = sample_trajectory(&oracle, &z1, &cfg, &sched, &mut rng).unwrap();
        for (a, b) in out.0.iter().zip(&z0.0) {
            assert!((a - b).abs() <= 1e-12, "{mode:?} one-step error {}", (a - b).abs());
        }
    }

    // Marginal preservation: Var(z_t) = t(1-t) for the scalar case.
    let n = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let s0 = LatentVec(vec![0.0]);
    let s1 = LatentVec(vec![1.0]);
    let mut max_sigma = 0.0f64;
    for (s, t) in [(1.0, 0.5), (1.0, 0.25), (0.75, 0.5), (0.5, 0.2)] {
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let z_s = interpolate(&s0, &s1, s, &sched, &mut rng).unwrap();
            let z = sde_step(&z_s, s, t, &s0, &sched, &mut rng).unwrap().0[0];
            acc += z;
            acc2 += z * z;
        }
        let mean = acc / n as f64;
        let var = acc2 / n as f64 - mean * mean;
        let want = t * (1.0 - t);
        let se_var = want * (2.0 / (n as f64 - 1.0)).sqrt();
        let dev = (var - want).abs() / se_var;
        assert!(dev <= 4.0, "(s={s}, t={t}): var {var} vs {want} ({dev:.2} SE)");
        max_sigma = max_sigma.max(dev);
    }

    // Limit consistency of the deterministic step at s = 1.
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    let s_near = 1.0 - 1e-6;
    let mut worst_rel = 0.0f64;
    for _ in 0..50 {
        let zhat = LatentVec(vec![rng.random_range(-2.0..2.0)]);
        let z1v = LatentVec(vec![rng.random_range(-2.0..2.0)]);
        let t = rng.random_range(0.05..0.9);
        let exact = ode_step(&z1v, 1.0, t, &zhat, &z1v, &sched).unwrap();
        let (z_s, _) = interpolate_mean_var(&zhat, &z1v, s_near, &sched).unwrap();
        let near = ode_step(&z_s, s_near, t, &zhat, &z1v, &sched).unwrap();
        let rel = (exact.0[0] - near.0[0]).abs() / exact.0[0].abs().max(1e-12);
        assert!(rel < 1e-4, "limit gap {rel}");
        worst_rel = worst_rel.max(rel);
    }
    println!(
        "criterion 3 PASS: one-step restores exact (<=1e-12); SDE marginals within {max_sigma:.2} SE of t(1-t); s=1 limit within {worst_rel:.1e} relative"
    );
}

// ---------------------------------------------------------------------
// Criterion 4: degradation fidelity.
// ---------------------------------------------------------------------

#[test]
fn criterion_04_degradation_fidelity() {
    // Clip endpoints.
    let fs = 8000u32;
    let clean = AudioBuffer::new(
        (0..8000)
            .map(|i| {
                0.6 * (std::f64::consts::TAU * 220.0 * i as f64 / fs as f64).sin()
                    + 0.3 * (std::f64::consts::TAU * 1700.0 * i as f64 / fs as f64).sin()
            })
            .collect(),
        fs,
    );
    let peak = clean.peak();
    for ratio in [0.06, 0.9] {
        let clipped = op_clip(&clean, ratio).unwrap();
        assert!(
            (clipped.peak() - ratio * peak).abs() < 1e-12,
            "clip ratio {ratio}"
        );
    }

    // SNR mixing over 100 random cases.
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    for _ in 0..100 {
        let noise = AudioBuffer::new((0..8000).map(|_| rng.random_range(-1.0..1.0)).collect(), fs);
        let snr = rng.random_range(-5.0..20.0);
        let mixed = mix_at_snr(&clean, &noise, snr).unwrap();
        let p_ref: f64 = clean.samples.iter().map(|v| v * v).sum();
        let p_err: f64 = mixed
            .samples
            .iter()
            .zip(&clean.samples)
            .map(|(m, c)| (m - c) * (m - c))
            .sum();
        let measured = 10.0 * (p_ref / p_err).log10();
        assert!((measured - snr).abs() < 0.1, "snr {measured} vs {snr}");
    }

    // 48k -> 8k -> 48k round trip.
    let sine = |freq: f64, n: usize| -> AudioBuffer {
        AudioBuffer::new(
            (0..n)
                .map(|i| 0.5 * (std::f64::consts::TAU * freq * i as f64 / 48000.0).sin())
                .collect(),
            48000,
        )
    };
    let tone_mag = |x: &AudioBuffer, freq: f64| -> f64 {
        let tail = &x.samples[x.len() / 2..];
        let w = std::f64::consts::TAU * freq / x.sample_rate_hz as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &v) in tail.iter().enumerate() {
            re += v * (w * n as f64).cos();
            im -= v * (w * n as f64).sin();
        }
        (re * re + im * im).sqrt() / tail.len() as f64
    };
    let round = |x: &AudioBuffer| {
        let down = resample(x, 8000, FilterFamily::Butterworth).unwrap();
        resample(&down, 48000, FilterFamily::Butterworth).unwrap()
    };
    let pass = sine(1000.0, 48000);
    let pass_db = 20.0 * (tone_mag(&round(&pass), 1000.0) / tone_mag(&pass, 1000.0)).log10();
    assert!(pass_db.abs() < 1.0, "passband {pass_db} dB");
    let stop = sine(6000.0, 48000);
    let stop_db = 20.0 * (tone_mag(&round(&stop), 6000.0) / tone_mag(&stop, 6000.0)).log10();
    assert!(stop_db <= -40.0, "stopband {stop_db} dB");

    // Firing rates over 1e4 seeded runs.
    let small = AudioBuffer::new(clean.samples[..512].to_vec(), fs);
    let spec = DegradationSpec {
        bw_targets_hz: vec![2000, 4000],
        eq_f0_range: (10.0, 3500.0),
        rir_rt60_range: (0.1, 0.12),
        ..DegradationSpec::default()
    };
    let n_runs = 10_000usize;
    let counts = bridgekit::par::map_range(n_runs, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i as u64);
        let (_, ops) = degrade(&small, &spec, &mut rng).unwrap();
        let mut c = [0u32; 5];
        for op in &ops.ops {
            match op {
                bridgekit::degrade::OpRecord::Eq { .. } => c[0] += 1,
                bridgekit::degrade::OpRecord::Reverb { .. } => c[1] += 1,
                bridgekit::degrade::OpRecord::Noise { .. } => c[2] += 1,
                bridgekit::degrade::OpRecord::Clip { .. } => c[3] += 1,
                bridgekit::degrade::OpRecord::Bandwidth { .. } => c[4] += 1,
            }
        }
        c
    });
    let mut totals = [0f64; 5];
    for c in counts {
        for (t, v) in totals.iter_mut().zip(c) {
            *t += v as f64;
        }
    }
    let nf = n_runs as f64;
    for (name, rate, p, trials) in [
        ("eq", totals[0] / nf, 0.5, nf),
        ("rev", totals[1] / (2.0 * nf), 0.5, 2.0 * nf),
        ("noise", totals[2] / nf, 0.9, nf),
        ("clip", totals[3] / nf, 0.25, nf),
        ("bw", totals[4] / nf, 0.5, nf),
    ] {
        let sd = (p * (1.0 - p) / trials).sqrt();
        assert!(
            (rate - p).abs() <= 3.0 * sd,
            "{name}: {rate} vs {p} (3sd = {})",
            3.0 * sd
        );
    }

    // Bit-deterministic replay.
    let mut r1 = ChaCha8Rng::seed_from_u64(600);
    let (lq1, ops1) = degrade(&clean, &spec, &mut r1).unwrap();
    let mut r2 = ChaCha8Rng::seed_from_u64(600);
    let (lq2, ops2) = degrade(&clean, &spec, &mut r2).unwrap();
    assert_eq!(lq1.samples, lq2.samples);
    assert_eq!(ops1, ops2);
    assert_eq!(
        bridgekit::degrade::apply_ops(&clean, &ops1).unwrap().samples,
        lq1.samples
    );

    println!(
        "criterion 4 PASS: clip endpoints exact, SNR within 0.1 dB (100 cases), round trip {pass_db:.2}/{stop_db:.1} dB, firing rates within 3 SD over 1e4 runs, replay bit-identical"
    );
}

// ---------------------------------------------------------------------
// Criterion 5: gradient correctness of every training loss.
// ---------------------------------------------------------------------

#[test]
fn criterion_05_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let arch = VaeArch {
        frame_len: 32,
        latent_dim: 4,
        enc_hidden: vec![24],
        dec_hidden: vec![24],
        disc_hidden: vec![12],
    };
    let nets = arch.build(&mut rng);
    let cfg = TrainConfig {
        resolutions: vec![16, 32],
        ..TrainConfig::default()
    };
    let frames: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let f: f64 = rng.random_range(0.05..0.3);
            (0..32).map(|i| 0.5 * (f * i as f64).sin()).collect()
        })
        .collect();

    // Stage 1 loss.
    let ep_items: Vec<EpItem> = frames
        .iter()
        .map(|f| EpItem {
            frame: f.clone(),
            eps: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            scale: rng.random_range(0.5..2.0),
        })
        .collect();
    let enc_err = grad_check(
        &nets.encoder,
        |n| {
            let e = ep_vae_loss(n, &nets.decoder, &nets.disc, 4, &ep_items, &cfg)?;
            Ok((e.total, e.enc_grads))
        },
        1e-5,
    )
    .unwrap();
    let dec_err = grad_check(
        &nets.decoder,
        |n| {
            let e = ep_vae_loss(&nets.encoder, n, &nets.disc, 4, &ep_items, &cfg)?;
            Ok((e.total, e.dec_grads))
        },
        1e-5,
    )
    .unwrap();

    // Stage 2 loss.
    let prior_items: Vec<PriorItem> = frames
        .iter()
        .map(|f| {
            let z0 = nets.encode_mean(f).unwrap();
            let xhat0 = nets.decode(&z0).unwrap();
            PriorItem {
                lq_frame: f.iter().map(|v| 0.7 * v).collect(),
                z0,
                xhat0,
                scale: 1.3,
            }
        })
        .collect();
    let prior_err = grad_check(
        &nets.encoder,
        |n| {
            let e = prior_loss(n, &nets.decoder, &nets.disc, 4, &prior_items, &cfg)?;
            Ok((e.total, e.grads))
        },
        1e-5,
    )
    .unwrap();

    // Stage 3 loss.
    let sched = NoiseSchedule::brownian_bridge(1.0);
    let pairs: Vec<(LatentVec, LatentVec)> = frames
        .iter()
        .map(|f| {
            let z0 = LatentVec(nets.encode_mean(f).unwrap());
            let z1 = LatentVec(z0.0.iter().map(|v| 0.8 * v + 0.1).collect());
            (z0, z1)
        })
        .collect();
    let batch = bridgekit::bridge::BridgeBatch::sample(&pairs, &sched, &mut rng).unwrap();
    let pred = BridgeArch { hidden: vec![24] }.build(4, &mut rng).unwrap();
    let bridge_err = grad_check(
        &pred.net,
        |n| {
            let p = BridgePredictor::new(n.clone(), 4)?;
            bridgekit::bridge::bridge_loss(&p, &batch)
        },
        1e-5,
    )
    .unwrap();

    // Stage 4: the trainers run their own pre-flight checks; exercise
    // every variant end to end with preflight on.
    let items: Vec<FinetuneItem> = pairs
        .iter()
        .zip(&frames)
        .map(|((z0, z1), f)| FinetuneItem {
            z0: z0.clone(),
            z1: z1.clone(),
            clean_frame: f.clone(),
        })
        .collect();
    let proxy = LogSpectralProxy::default();
    let ft_cfg = TrainConfig {
        steps: 1,
        batch_size: 2,
        preflight: true,
        resolutions: vec![16, 32],
        ..TrainConfig::default()
    };
    for variant in FinetuneVariant::ALL {
        finetune_perceptual(
            &pred,
            &nets.decoder,
            &nets.disc,
            &proxy,
            &LatentStats::identity(4),
            &items,
            &sched,
            &ft_cfg,
            variant,
        )
        .unwrap_or_else(|e| panic!("variant {} pre-flight: {e}", variant.name()));
    }

    // Discriminator objective.
    let disc_err = grad_check(
        &nets.disc.net,
        |n| {
            let d = bridgekit::net::losses::SpecDisc {
                net: n.clone(),
                frame_len: 32,
            };
            d.disc_grads(&frames[0], &frames[1])
        },
        1e-5,
    )
    .unwrap();

    let worst = enc_err
        .max(dec_err)
        .max(prior_err)
        .max(bridge_err)
        .max(disc_err);
    assert!(worst < 1e-4, "max gradient error {worst}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "criterion 5 PASS: all training losses within {worst:.2e} of finite differences (limit 1e-4) in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------
// Criterion 6: the energy-preserving constraint halves the
// scale-equivariance error against an identically-seeded baseline.
// ---------------------------------------------------------------------

#[test]
fn criterion_06_ep_vae_effect() {
    let fx = fixture();
    let held_frames: Vec<Vec<f64>> = fx
        .corpus
        .heldout
        .iter()
        .flat_map(|s| frames_of(&s.clean, fx.corpus.frame_len))
        .collect();
    let scales = [0.5, 1.5, 2.0];
    let e_ep = equivariance_error(&fx.vae, &held_frames, &scales).unwrap();
    let e_base = equivariance_error(&fx.baseline_vae, &held_frames, &scales).unwrap();
    assert!(
        e_ep <= 0.5 * e_base,
        "equivariance error {e_ep:.4} vs baseline {e_base:.4} (need <= 0.5x)"
    );
    println!(
        "criterion 6 PASS: scale-equivariance error {e_ep:.4} vs non-EP baseline {e_base:.4} (ratio {:.3}, limit 0.5)",
        e_ep / e_base
    );
}

// ---------------------------------------------------------------------
// Criterion 7: prior convergence in latent distance and in the
// transport-distance matrix.
// ---------------------------------------------------------------------

#[test]
fn criterion_07_prior_convergence() {
    let fx = fixture();
    let held_pairs = fx.corpus.heldout_pairs();
    let before = mean_latent_distance(&fx.vae.encoder, &fx.vae, &held_pairs).unwrap();
    let after = mean_latent_distance(&fx.enc_np, &fx.vae, &held_pairs).unwrap();
    assert!(
        after < before,
        "held-out latent distance {before:.4} -> {after:.4}"
    );

    let groups_before = degradation_type_groups(
        &fx.cfg.corpus.degradation,
        &fx.corpus,
        &fx.vae.encoder,
        fx.vae.latent_dim,
        71,
    )
    .unwrap();
    assert!(groups_before.len() >= 3);
    let (_, m_before) = w2_matrix(&groups_before).unwrap();
    let groups_after = degradation_type_groups(
        &fx.cfg.corpus.degradation,
        &fx.corpus,
        &fx.enc_np,
        fx.vae.latent_dim,
        71,
    )
    .unwrap();
    let (_, m_after) = w2_matrix(&groups_after).unwrap();
    let od_before = offdiag_mean(&m_before);
    let od_after = offdiag_mean(&m_after);
    assert!(
        od_after < od_before,
        "off-diagonal W2 {od_before:.4} -> {od_after:.4}"
    );
    println!(
        "criterion 7 PASS: held-out latent distance {before:.4} -> {after:.4}; mean off-diagonal W2 {od_before:.4} -> {od_after:.4} over {} groups",
        groups_before.len()
    );
}

// ---------------------------------------------------------------------
// Criterion 8: end-to-end restoration on 50 held-out signals.
// ---------------------------------------------------------------------

#[test]
fn criterion_08_end_to_end_restoration() {
    let fx = fixture();
    assert!(fx.corpus.heldout.len() >= 50);
    let model = restore_model(fx);
    let (in_snr, in_lsd) = heldout_input_metrics(&fx.corpus).unwrap();
    let (out_snr, out_lsd, _) = heldout_metrics(
        &fx.corpus,
        &model,
        &fx.cfg.schedule,
        &fx.cfg.sampler,
        80,
    )
    .unwrap();
    assert!(
        out_snr >= in_snr + 3.0,
        "restored SNR {out_snr:.2} dB vs degraded {in_snr:.2} dB (need +3 dB)"
    );
    assert!(
        out_lsd < in_lsd,
        "restored LSD {out_lsd:.4} vs degraded {in_lsd:.4}"
    );
    println!(
        "criterion 8 PASS: over {} held-out signals, SNR {in_snr:.2} -> {out_snr:.2} dB (gain {:.2} dB, need >= 3), LSD {in_lsd:.4} -> {out_lsd:.4}",
        fx.corpus.heldout.len(),
        out_snr - in_snr
    );
}

// ---------------------------------------------------------------------
// Criterion 9: Gaussian transport closed forms.
// ---------------------------------------------------------------------

#[test]
fn criterion_09_w2_closed_forms() {
    let a = GaussianFit::new(vec![0.0, 0.0], DMatrix::identity(2, 2));
    let b = GaussianFit::new(vec![3.0, 4.0], DMatrix::identity(2, 2));
    let d = w2_gaussian(&a, &b).unwrap();
    assert!((d - 5.0).abs() < 1e-10, "3-4-5 case: {d}");

    let c = GaussianFit::new(
        vec![0.0, 0.0],
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
    );
    let m = w2_matrix_from_fits(&[c, a]).unwrap();
    assert_eq!(m[(0, 0)], 5f64.sqrt(), "diagonal convention");
    println!(
        "criterion 9 PASS: equal-covariance distance {d} (= 5 within 1e-10); diag(1,4) spread exactly sqrt(5)"
    );
}

// ---------------------------------------------------------------------
// Criterion 10: step sweep structure and 4-vs-1 quality trend.
// ---------------------------------------------------------------------

#[test]
fn criterion_10_step_sweep() {
    let fx = fixture();
    assert_eq!(SWEEP_GRID, [1, 2, 3, 4, 5, 10, 20, 50]);
    let model = restore_model(fx);
    let mut snr_by_steps = std::collections::BTreeMap::new();
    for steps in SWEEP_GRID {
        let sampler = SamplerConfig {
            n_steps: steps,
            ..fx.cfg.sampler
        };
        let (snr, _, _) =
            heldout_metrics(&fx.corpus, &model, &fx.cfg.schedule, &sampler, 80).unwrap();
        snr_by_steps.insert(steps, snr);
    }
    assert_eq!(snr_by_steps.len(), 8);
    let one = snr_by_steps[&1];
    let four = snr_by_steps[&4];
    assert!(
        four >= one,
        "4-step SNR {four:.3} dB must be >= 1-step {one:.3} dB"
    );
    println!(
        "criterion 10 PASS: sweep grid {:?}; 4-step SNR {four:.2} dB >= 1-step {one:.2} dB",
        SWEEP_GRID
    );
}

// ---------------------------------------------------------------------
// Criterion 11: the fine-tuning ablation variants and their freeze
// contracts.
// ---------------------------------------------------------------------

#[test]
fn criterion_11_ablation_harness() {
    let fx = fixture();
    let pairs = fx.corpus.train_pairs();
    let items: Vec<FinetuneItem> = fx
        .latents
        .iter()
        .zip(&pairs)
        .map(|((z0, z1), (clean, _))| FinetuneItem {
            z0: fx.stats.normalize(z0),
            z1: fx.stats.normalize(z1),
            clean_frame: clean.clone(),
        })
        .collect();
    let proxy = LogSpectralProxy::default();
    let mut ft_cfg = fx.cfg.finetune.clone();
    ft_cfg.seed = 4;
    ft_cfg.steps = 60;
    let mut summary = Vec::new();
    for variant in FinetuneVariant::ALL {
        let out = finetune_perceptual(
            &fx.predictor,
            &fx.vae.decoder,
            &fx.vae.disc,
            &proxy,
            &fx.stats,
            &items,
            &fx.cfg.schedule,
            &ft_cfg,
            variant,
        )
        .unwrap_or_else(|e| panic!("variant {}: {e}", variant.name()));
        let decoder_unchanged = out.decoder == fx.vae.decoder;
        assert_eq!(
            decoder_unchanged,
            !variant.decoder_trainable(),
            "freeze contract for {}",
            variant.name()
        );
        assert_ne!(out.predictor.net, fx.predictor.net, "{} predictor", variant.name());
        summary.push(format!(
            "{}:{}",
            variant.name(),
            if decoder_unchanged { "frozen" } else { "updated" }
        ));
    }
    println!(
        "criterion 11 PASS: all six variants completed; decoder contracts bit-exact ({})",
        summary.join(", ")
    );
}
