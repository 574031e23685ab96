//! Differentiable data-space losses: multi-resolution spectral loss,
//! waveform anchor, the spectrogram discriminator (adversarial + feature
//! matching), and the pluggable perceptual proxy.
//!
//! Every loss here returns its value together with the gradient w.r.t.
//! the estimated waveform, so trainers can chain it through the decoder
//! and predictor backward passes. Gradients of `|STFT|`-based terms use
//! the exact adjoint of the windowed DFT, evaluated with FFTs.

use super::{Activation, Grads, ToyNet};
use crate::dsp::stft::{hann, magnitude_spectrogram, spectral_terms, stft_complex, Spectrogram, MAG_FLOOR};
use crate::error::Result;
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Adjoint of the one-sided windowed STFT: accumulate `dl_dmag` back onto
/// the time signal. `frames` are the forward complex frames of the same
/// signal.
fn stft_adjoint(
    frames: &[Vec<Complex<f64>>],
    mags: &Spectrogram,
    dl_dmag: &[f64],
    win: usize,
    hop: usize,
    x_len: usize,
) -> Vec<f64> {
    let window = hann(win);
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(win);
    let mut dx = vec![0.0; x_len.max(win)];
    let bins = mags.bins;
    let mut buf = vec![Complex::new(0.0, 0.0); win];
    for (f, frame) in frames.iter().enumerate() {
        for b in buf.iter_mut() {
            *b = Complex::new(0.0, 0.0);
        }
        for k in 0..bins {
            let m = mags.mag[f * bins + k];
            if m < 1e-300 {
                continue;
            }
            let g = dl_dmag[f * bins + k];
            if g == 0.0 {
                continue;
            }
            let c = frame[k];
            // d|X|/dX applied to g: g * conj-direction, as a spectrum to
            // be synthesised with e^{+i 2 pi k n / N}.
            let coeff = Complex::new(g * c.re / m, g * c.im / m);
            buf[k] += coeff;
            // Mirror bins (their magnitudes equal the one-sided ones but
            // are not part of the loss) are untouched; the adjoint of the
            // one-sided loss only synthesises the bins it reads.
        }
        ifft.process(&mut buf);
        for n in 0..win {
            dx[f * hop + n] += window[n] * buf[n].re;
        }
    }
    dx.truncate(x_len);
    dx
}

/// Multi-resolution spectral loss between `est` and `target` with the
/// gradient w.r.t. `est`. The value matches
/// [`crate::dsp::mrstft_distance`] on buffers of the same content.
pub fn mrstft_loss_grad(est: &[f64], target: &[f64], resolutions: &[usize]) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut grad = vec![0.0; est.len()];
    for &win in resolutions {
        let hop = (win / 4).max(1);
        let frames_est = stft_complex(est, win, hop);
        let m_est = {
            let bins = frames_est.first().map_or(0, Vec::len);
            let mut mag = Vec::with_capacity(frames_est.len() * bins);
            for frame in &frames_est {
                mag.extend(frame.iter().map(|c| c.norm()));
            }
            Spectrogram {
                frames: frames_est.len(),
                bins,
                mag,
            }
        };
        let m_ref = magnitude_spectrogram(target, win, hop);
        let (sc, lm) = spectral_terms(&m_ref, &m_est);
        total += sc + lm;

        // Gradient w.r.t. est magnitudes.
        let count = m_est.mag.len() as f64;
        let norm_ref = m_ref.frobenius();
        let norm_est = m_est.frobenius();
        let denom = norm_ref.max(norm_est);
        let diff_norm: f64 = m_ref
            .mag
            .iter()
            .zip(&m_est.mag)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let mut dl_dmag = vec![0.0; m_est.mag.len()];
        for (i, g) in dl_dmag.iter_mut().enumerate() {
            let (ma, mb) = (m_ref.mag[i], m_est.mag[i]);
            // Spectral convergence.
            if diff_norm > 0.0 && denom > 0.0 {
                let dnum = (mb - ma) / diff_norm;
                *g += if norm_est > norm_ref {
                    dnum / denom - diff_norm * (mb / norm_est) / (denom * denom)
                } else {
                    dnum / denom
                };
            }
            // Log-magnitude L1 (subgradient 0 at exact ties).
            if mb > MAG_FLOOR {
                let ld = mb.max(MAG_FLOOR).ln() - ma.max(MAG_FLOOR).ln();
                if ld != 0.0 {
                    *g += ld.signum() / (mb * count);
                }
            }
        }
        let dx = stft_adjoint(&frames_est, &m_est, &dl_dmag, win, hop, est.len());
        for (a, b) in grad.iter_mut().zip(&dx) {
            *a += b;
        }
    }
    (total, grad)
}

/// Mean squared waveform error with gradient w.r.t. `est`. Anchors the
/// reconstruction in the time domain, which the magnitude-only spectral
/// loss cannot do.
pub fn wave_mse_grad(est: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = est.len() as f64;
    let mut loss = 0.0;
    let grad = est
        .iter()
        .zip(target)
        .map(|(e, t)| {
            let r = e - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    (loss / n, grad)
}

/// Log-magnitude front end shared by the discriminator: one Hann-windowed
/// frame, `ln(|X| + 1e-6)` per bin.
pub struct SpecFront {
    frame: Vec<Complex<f64>>,
    mags: Spectrogram,
    win: usize,
}

pub fn spec_front(x: &[f64]) -> (Vec<f64>, SpecFront) {
    let win = x.len();
    let frames = stft_complex(x, win, win.max(1));
    let mags = {
        let bins = frames[0].len();
        Spectrogram {
            frames: 1,
            bins,
            mag: frames[0].iter().map(|c| c.norm()).collect(),
        }
    };
    let spec = mags.mag.iter().map(|&m| (m + 1e-6).ln()).collect();
    (
        spec,
        SpecFront {
            frame: frames.into_iter().next().unwrap(),
            mags,
            win,
        },
    )
}

pub fn spec_front_adjoint(front: &SpecFront, dl_dspec: &[f64], x_len: usize) -> Vec<f64> {
    let dl_dmag: Vec<f64> = dl_dspec
        .iter()
        .zip(&front.mags.mag)
        .map(|(g, m)| g / (m + 1e-6))
        .collect();
    stft_adjoint(
        std::slice::from_ref(&front.frame),
        &front.mags,
        &dl_dmag,
        front.win,
        front.win,
        x_len,
    )
}

/// Small spectrogram discriminator: log-magnitude front end followed by a
/// scalar-output network. Least-squares GAN objectives keep every term
/// smooth.
#[derive(Debug, Clone)]
pub struct SpecDisc {
    pub net: ToyNet,
    pub frame_len: usize,
}

impl SpecDisc {
    pub fn new(frame_len: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let bins = frame_len / 2 + 1;
        let mut dims = vec![bins];
        dims.extend_from_slice(hidden);
        dims.push(1);
        SpecDisc {
            net: ToyNet::new(&dims, Activation::Tanh, rng),
            frame_len,
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let (spec, _) = spec_front(x);
        Ok(self.net.forward(&spec)?[0])
    }

    fn hidden_features(&self, trace_inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        trace_inputs[1..].to_vec()
    }

    /// Generator-side adversarial loss `(D(fake) - 1)^2` and its gradient
    /// w.r.t. the fake waveform. Discriminator parameters are read-only.
    pub fn gen_adv_grad(&self, fake: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (spec, front) = spec_front(fake);
        let (out, trace) = self.net.forward_trace(&spec)?;
        let r = out[0] - 1.0;
        let (_, dspec) = self.net.backward(&trace, &[2.0 * r]);
        Ok((r * r, spec_front_adjoint(&front, &dspec, fake.len())))
    }

    /// Feature-matching loss: mean L1 distance between the hidden
    /// activations on fake and real inputs, real side treated constant.
    pub fn fm_grad(&self, fake: &[f64], real: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (spec_f, front_f) = spec_front(fake);
        let (_, trace_f) = self.net.forward_trace(&spec_f)?;
        let (spec_r, _) = spec_front(real);
        let (_, trace_r) = self.net.forward_trace(&spec_r)?;
        let feats_f = self.hidden_features(&trace_f.inputs);
        let feats_r = self.hidden_features(&trace_r.inputs);
        let total_count: usize = feats_f.iter().map(Vec::len).sum();
        if total_count == 0 {
            return Ok((0.0, vec![0.0; fake.len()]));
        }
        let mut loss = 0.0;
        // dl_dhidden[l] aligns with layer l's *output*; feature j of
        // feats (input of layer j+1) is the output of layer j.
        let mut dl_dhidden: Vec<Option<Vec<f64>>> = vec![None; self.net.layers.len()];
        for (j, (ff, fr)) in feats_f.iter().zip(&feats_r).enumerate() {
            let mut g = vec![0.0; ff.len()];
            for ((gi, a), b) in g.iter_mut().zip(ff).zip(fr) {
                loss += (a - b).abs();
                *gi = if a == b {
                    0.0
                } else {
                    (a - b).signum() / total_count as f64
                };
            }
            dl_dhidden[j] = Some(g);
        }
        loss /= total_count as f64;
        let zero = vec![0.0; 1];
        let (_, dspec) = self.net.backward_with_hidden(&trace_f, &zero, &dl_dhidden);
        Ok((loss, spec_front_adjoint(&front_f, &dspec, fake.len())))
    }

    /// Discriminator objective `(D(real) - 1)^2 + D(fake)^2` with
    /// parameter gradients.
    pub fn disc_grads(&self, real: &[f64], fake: &[f64]) -> Result<(f64, Grads)> {
        let (spec_r, _) = spec_front(real);
        let (out_r, trace_r) = self.net.forward_trace(&spec_r)?;
        let rr = out_r[0] - 1.0;
        let (mut grads, _) = self.net.backward(&trace_r, &[2.0 * rr]);
        let (spec_f, _) = spec_front(fake);
        let (out_f, trace_f) = self.net.forward_trace(&spec_f)?;
        let (gf, _) = self.net.backward(&trace_f, &[2.0 * out_f[0]]);
        grads.add(&gf);
        Ok((rr * rr + out_f[0] * out_f[0], grads))
    }
}

/// A differentiable stand-in for external perceptual scorers.
pub trait PerceptualProxy: Sync {
    /// Loss value and gradient w.r.t. `est`.
    fn loss_grad(&self, est: &[f64], reference: &[f64]) -> (f64, Vec<f64>);
}

/// Log-spectral proxy: the mean absolute log-magnitude ratio `d` of one
/// full-signal frame, pushed through two monotone saturating maps with
/// the configured weights: `wa * tanh(d) + wb * d / (1 + d)`.
#[derive(Debug, Clone, Copy)]
pub struct LogSpectralProxy {
    pub weight_a: f64,
    pub weight_b: f64,
}

impl Default for LogSpectralProxy {
    fn default() -> Self {
        // Mirrors the two-term perceptual weighting (1 and 10).
        LogSpectralProxy {
            weight_a: 1.0,
            weight_b: 10.0,
        }
    }
}

impl PerceptualProxy for LogSpectralProxy {
    fn loss_grad(&self, est: &[f64], reference: &[f64]) -> (f64, Vec<f64>) {
        let (spec_e, front) = spec_front(est);
        let (spec_r, _) = spec_front(reference);
        let count = spec_e.len() as f64;
        let mut d = 0.0;
        let mut dd_dspec = vec![0.0; spec_e.len()];
        for (i, (e, r)) in spec_e.iter().zip(&spec_r).enumerate() {
            d += (e - r).abs() / count;
            dd_dspec[i] = if e == r { 0.0 } else { (e - r).signum() / count };
        }
        let th = d.tanh();
        let loss = self.weight_a * th + self.weight_b * d / (1.0 + d);
        let dloss_dd =
            self.weight_a * (1.0 - th * th) + self.weight_b / ((1.0 + d) * (1.0 + d));
        for g in dd_dspec.iter_mut() {
            *g *= dloss_dd;
        }
        (loss, spec_front_adjoint(&front, &dd_dspec, est.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{mrstft_distance, AudioBuffer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randvec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-0.8..0.8)).collect()
    }

    /// Central finite differences on a waveform-input loss.
    fn fd_check(
        loss: impl Fn(&[f64]) -> (f64, Vec<f64>),
        x: &[f64],
        eps: f64,
        tol: f64,
    ) -> f64 {
        let (_, grad) = loss(x);
        let mut max_rel = 0.0f64;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += eps;
            let mut xm = x.to_vec();
            xm[i] -= eps;
            let fd = (loss(&xp).0 - loss(&xm).0) / (2.0 * eps);
            let denom = fd.abs().max(grad[i].abs());
            if denom < 1e-8 {
                continue;
            }
            let mut rel = (fd - grad[i]).abs() / denom;
            if rel > tol {
                // Retry at a smaller step to rule out kink crossings.
                let mut xp = x.to_vec();
                xp[i] += eps / 8.0;
                let mut xm = x.to_vec();
                xm[i] -= eps / 8.0;
                let fd2 = (loss(&xp).0 - loss(&xm).0) / (eps / 4.0);
                rel = rel.min((fd2 - grad[i]).abs() / fd2.abs().max(grad[i].abs()));
            }
            max_rel = max_rel.max(rel);
        }
        max_rel
    }

    #[test]
    fn mrstft_value_matches_dsp_metric() {
        let est = randvec(256, 1);
        let target = randvec(256, 2);
        let res = [64usize, 128, 256];
        let (loss, _) = mrstft_loss_grad(&est, &target, &res);
        let metric = mrstft_distance(
            &AudioBuffer::new(target.clone(), 8000),
            &AudioBuffer::new(est.clone(), 8000),
            &res,
        )
        .unwrap();
        assert!((loss - metric).abs() < 1e-9, "loss {loss} vs metric {metric}");
    }

    #[test]
    fn mrstft_gradient_matches_fd() {
        let est = randvec(128, 3);
        let target = randvec(128, 4);
        let res = [32usize, 64];
        let max_rel = fd_check(
            |x| mrstft_loss_grad(x, &target, &res),
            &est,
            1e-6,
            1e-4,
        );
        assert!(max_rel < 1e-4, "max rel {max_rel}");
    }

    #[test]
    fn wave_mse_gradient_matches_fd() {
        let est = randvec(64, 5);
        let target = randvec(64, 6);
        let max_rel = fd_check(|x| wave_mse_grad(x, &target), &est, 1e-6, 1e-6);
        assert!(max_rel < 1e-6, "max rel {max_rel}");
    }

    #[test]
    fn gen_adv_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let disc = SpecDisc::new(64, &[16], &mut rng);
        let fake = randvec(64, 8);
        let max_rel = fd_check(
            |x| {
                let (l, g) = disc.gen_adv_grad(x).unwrap();
                (l, g)
            },
            &fake,
            1e-6,
            1e-4,
        );
        assert!(max_rel < 1e-4, "max rel {max_rel}");
    }

    #[test]
    fn fm_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let disc = SpecDisc::new(64, &[12, 8], &mut rng);
        let fake = randvec(64, 10);
        let real = randvec(64, 11);
        let max_rel = fd_check(
            |x| {
                let (l, g) = disc.fm_grad(x, &real).unwrap();
                (l, g)
            },
            &fake,
            1e-6,
            1e-4,
        );
        assert!(max_rel < 1e-4, "max rel {max_rel}");
    }

    #[test]
    fn disc_param_gradients_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let disc = SpecDisc::new(32, &[8], &mut rng);
        let real = randvec(32, 14);
        let fake = randvec(32, 15);
        let err = crate::net::grad_check(
            &disc.net,
            |n| {
                let d = SpecDisc {
                    net: n.clone(),
                    frame_len: 32,
                };
                d.disc_grads(&real, &fake)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "max rel {err}");
    }

    #[test]
    fn perceptual_proxy_gradient_matches_fd() {
        let proxy = LogSpectralProxy::default();
        let est = randvec(64, 16);
        let reference = randvec(64, 17);
        let max_rel = fd_check(|x| proxy.loss_grad(x, &reference), &est, 1e-6, 1e-4);
        assert!(max_rel < 1e-4, "max rel {max_rel}");
    }

    #[test]
    fn proxy_zero_at_identical_signals() {
        let proxy = LogSpectralProxy::default();
        let x = randvec(64, 18);
        let (loss, _) = proxy.loss_grad(&x, &x);
        assert!(loss.abs() < 1e-12);
    }
}
