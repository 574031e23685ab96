//! Latent-distribution and signal metrics: Gaussian fits, 2-Wasserstein
//! distances, SNR, and log-spectral distance.

use crate::bridge::LatentVec;
use crate::dsp::stft::magnitude_spectrogram;
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::par;
use nalgebra::{DMatrix, DVector};

/// SNR sentinel for an exact match.
pub const SNR_CAP_DB: f64 = 300.0;

/// Shrinkage added to empirical covariances before matrix square roots.
pub const COV_SHRINKAGE: f64 = 1e-6;

/// Sample mean and covariance of a latent group.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl GaussianFit {
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>) -> Self {
        GaussianFit {
            mu: DVector::from_vec(mu),
            sigma,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Within-group variance proxy: distance to a point mass at the mean,
    /// `sqrt(trace(sigma))`.
    pub fn spread(&self) -> f64 {
        self.sigma.trace().max(0.0).sqrt()
    }
}

/// Unbiased sample mean and covariance (1/(n-1)), symmetrised.
pub fn fit_gaussian(samples: &[LatentVec]) -> Result<GaussianFit> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyInput("fit_gaussian".into()));
    }
    let d = samples[0].dim();
    if n < d + 1 {
        return Err(Error::Domain(format!(
            "fit_gaussian needs at least d+1 = {} samples, got {n}",
            d + 1
        )));
    }
    let mut mu = vec![0.0; d];
    for s in samples {
        if s.dim() != d {
            return Err(Error::DimMismatch {
                expected: d,
                got: s.dim(),
            });
        }
        for (m, v) in mu.iter_mut().zip(&s.0) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= n as f64;
    }
    let mut sigma = DMatrix::<f64>::zeros(d, d);
    for s in samples {
        for i in 0..d {
            let di = s.0[i] - mu[i];
            for j in i..d {
                sigma[(i, j)] += di * (s.0[j] - mu[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = sigma[(i, j)] / denom;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    Ok(GaussianFit::new(mu, sigma))
}

/// Symmetric PSD square root via eigendecomposition, clamping negative
/// eigenvalues to zero.
fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// 2-Wasserstein distance between two Gaussians:
/// `sqrt(|mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2))`.
pub fn w2_gaussian(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let dmu = (&a.mu - &b.mu).norm_squared();
    let ra = sym_sqrt(&a.sigma);
    let inner = &ra * &b.sigma * &ra;
    let cross = sym_sqrt(&inner).trace();
    let val = dmu + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
    Ok(val.max(0.0).sqrt())
}

/// Pairwise distance matrix over pre-computed fits. Off-diagonal entries
/// are [`w2_gaussian`]; diagonal entries use the point-mass convention
/// `sqrt(trace(sigma))`.
pub fn w2_matrix_from_fits(fits: &[GaussianFit]) -> Result<DMatrix<f64>> {
    let k = fits.len();
    if k < 2 {
        return Err(Error::Domain("w2_matrix needs at least 2 groups".into()));
    }
    let entries = par::map_range(k * k, |idx| {
        let (i, j) = (idx / k, idx % k);
        if i == j {
            Ok(fits[i].spread())
        } else {
            w2_gaussian(&fits[i], &fits[j])
        }
    });
    let mut m = DMatrix::zeros(k, k);
    for (idx, e) in entries.into_iter().enumerate() {
        m[(idx / k, idx % k)] = e?;
    }
    Ok(m)
}

/// Fit each labelled group (with covariance shrinkage for numerical
/// stability of the square roots) and compute the pairwise matrix.
pub fn w2_matrix(groups: &[(String, Vec<LatentVec>)]) -> Result<(Vec<String>, DMatrix<f64>)> {
    if groups.len() < 2 {
        return Err(Error::Domain("w2_matrix needs at least 2 groups".into()));
    }
    let mut fits = Vec::with_capacity(groups.len());
    for (_, samples) in groups {
        let mut fit = fit_gaussian(samples)?;
        for i in 0..fit.dim() {
            fit.sigma[(i, i)] += COV_SHRINKAGE;
        }
        fits.push(fit);
    }
    let labels = groups.iter().map(|(l, _)| l.clone()).collect();
    Ok((labels, w2_matrix_from_fits(&fits)?))
}

/// `10 log10(|ref|^2 / |ref - est|^2)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    reference.check_same_len(estimate)?;
    let p_ref: f64 = reference.samples.iter().map(|v| v * v).sum();
    if p_ref == 0.0 {
        return Err(Error::SilentSignal("snr_db reference".into()));
    }
    let p_err: f64 = reference
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    if p_err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (p_ref / p_err).log10()).min(SNR_CAP_DB))
}

/// Log-spectral distance: mean over frames of the RMS over bins of
/// log10-magnitude differences (window 2048, hop 512, Hann, floor 1e-8).
pub fn lsd(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    reference.check_same_rate(estimate)?;
    reference.check_same_len(estimate)?;
    const WIN: usize = 2048;
    const HOP: usize = 512;
    const FLOOR: f64 = 1e-8;
    let sr = magnitude_spectrogram(&reference.samples, WIN, HOP);
    let se = magnitude_spectrogram(&estimate.samples, WIN, HOP);
    let mut total = 0.0;
    for f in 0..sr.frames {
        let row = f * sr.bins;
        let mut acc = 0.0;
        for k in 0..sr.bins {
            let d = (sr.mag[row + k].max(FLOOR)).log10() - (se.mag[row + k].max(FLOOR)).log10();
            acc += d * d;
        }
        total += (acc / sr.bins as f64).sqrt();
    }
    Ok(total / sr.frames as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn lv(v: &[f64]) -> LatentVec {
        LatentVec(v.to_vec())
    }

    #[test]
    fn constant_samples_give_zero_covariance() {
        let samples = vec![lv(&[2.0, -1.0]); 5];
        let fit = fit_gaussian(&samples).unwrap();
        assert_eq!(fit.mu.as_slice(), &[2.0, -1.0]);
        assert!(fit.sigma.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_covariance() {
        // {(0,0),(2,0),(0,2),(2,2)} -> mu=(1,1), sigma=diag(4/3,4/3).
        let samples = vec![lv(&[0.0, 0.0]), lv(&[2.0, 0.0]), lv(&[0.0, 2.0]), lv(&[2.0, 2.0])];
        let fit = fit_gaussian(&samples).unwrap();
        assert_eq!(fit.mu.as_slice(), &[1.0, 1.0]);
        assert!((fit.sigma[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        assert!((fit.sigma[(1, 1)] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(fit.sigma[(0, 1)], 0.0);
    }

    #[test]
    fn monte_carlo_standard_normal_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 3;
        let samples: Vec<LatentVec> = (0..100_000)
            .map(|_| LatentVec((0..d).map(|_| rng.sample(StandardNormal)).collect()))
            .collect();
        let fit = fit_gaussian(&samples).unwrap();
        assert!(fit.mu.norm() < 0.02, "mu norm {}", fit.mu.norm());
        let eye = DMatrix::<f64>::identity(d, d);
        assert!((fit.sigma.clone() - eye).norm() < 0.05);
    }

    #[test]
    fn too_few_samples_rejected() {
        let samples = vec![lv(&[0.0, 0.0]), lv(&[1.0, 1.0])];
        assert!(fit_gaussian(&samples).is_err());
    }

    #[test]
    fn w2_identical_gaussians_zero() {
        let f = GaussianFit::new(vec![1.0, 2.0], DMatrix::identity(2, 2));
        assert_eq!(w2_gaussian(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn w2_equal_covariance_reduces_to_mean_distance() {
        let a = GaussianFit::new(vec![0.0, 0.0], DMatrix::identity(2, 2));
        let b = GaussianFit::new(vec![3.0, 4.0], DMatrix::identity(2, 2));
        assert!((w2_gaussian(&a, &b).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn w2_commuting_diagonal_closed_form() {
        let a = GaussianFit::new(vec![0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])));
        let b = GaussianFit::new(vec![0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])));
        // sqrt(2*(1+4) - 2*(2+2)) = sqrt(2)
        assert!((w2_gaussian(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn w2_matrix_identical_groups_zero_offdiag() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<LatentVec> = (0..50)
            .map(|_| LatentVec((0..2).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let groups = vec![
            ("a".to_string(), samples.clone()),
            ("b".to_string(), samples),
        ];
        let (labels, m) = w2_matrix(&groups).unwrap();
        assert_eq!(labels, vec!["a", "b"]);
        assert!(m[(0, 1)] < 1e-9);
        assert!(m[(1, 0)] < 1e-9);
    }

    #[test]
    fn w2_matrix_diagonal_uses_trace_convention() {
        let fits = vec![
            GaussianFit::new(vec![0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))),
            GaussianFit::new(vec![1.0, 1.0], DMatrix::identity(2, 2)),
        ];
        let m = w2_matrix_from_fits(&fits).unwrap();
        assert_eq!(m[(0, 0)], 5f64.sqrt());
        assert!((m[(0, 1)] - m[(1, 0)]).abs() < 1e-12);
        assert!(m.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn w2_symmetry_and_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let mut rand_fit = || {
                let d = 3;
                let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                let sigma = &m * m.transpose() + DMatrix::identity(d, d) * 0.1;
                GaussianFit::new(mu, sigma)
            };
            let (a, b, c) = (rand_fit(), rand_fit(), rand_fit());
            let dab = w2_gaussian(&a, &b).unwrap();
            let dba = w2_gaussian(&b, &a).unwrap();
            assert!((dab - dba).abs() < 1e-8, "symmetry {dab} vs {dba}");
            let dac = w2_gaussian(&a, &c).unwrap();
            let dcb = w2_gaussian(&c, &b).unwrap();
            assert!(dab <= dac + dcb + 1e-8, "triangle {dab} > {dac} + {dcb}");
        }
    }

    #[test]
    fn snr_exact_match_capped() {
        let x = AudioBuffer::new(vec![0.5; 100], 8000);
        assert_eq!(snr_db(&x, &x).unwrap(), SNR_CAP_DB);
    }

    #[test]
    fn snr_equal_power_noise_zero_db() {
        let r = AudioBuffer::new(vec![0.5; 100], 8000);
        let e = AudioBuffer::new(
            (0..100).map(|i| 0.5 + if i % 2 == 0 { 0.5 } else { -0.5 }).collect(),
            8000,
        );
        assert!((snr_db(&r, &e).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn snr_power_ratio_case() {
        // est = ref + 0.1 * orthogonal noise of equal norm -> 20 dB.
        let n = 1000;
        let r: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.5 } else { 0.0 }).collect();
        let noise: Vec<f64> = (0..n).map(|i| if i % 2 == 1 { 0.5 } else { 0.0 }).collect();
        let e: Vec<f64> = r.iter().zip(&noise).map(|(a, b)| a + 0.1 * b).collect();
        let got = snr_db(
            &AudioBuffer::new(r, 8000),
            &AudioBuffer::new(e, 8000),
        )
        .unwrap();
        assert!((got - 20.0).abs() < 1e-9, "snr {got}");
    }

    #[test]
    fn snr_zero_reference_rejected() {
        let z = AudioBuffer::new(vec![0.0; 10], 8000);
        let e = AudioBuffer::new(vec![0.1; 10], 8000);
        assert!(snr_db(&z, &e).is_err());
    }

    #[test]
    fn lsd_identical_zero_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = AudioBuffer::new((0..4096).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000);
        let b = AudioBuffer::new((0..4096).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000);
        assert_eq!(lsd(&a, &a).unwrap(), 0.0);
        let dab = lsd(&a, &b).unwrap();
        let dba = lsd(&b, &a).unwrap();
        assert!((dab - dba).abs() < 1e-12);
    }

    #[test]
    fn lsd_constant_ratio_is_one() {
        // est = 10 * ref gives log10 ratio exactly 1 in every bin, as
        // long as every bin magnitude clears the floor; broadband noise
        // at unit scale does.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<f64> = (0..8192).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let e: Vec<f64> = r.iter().map(|v| 10.0 * v).collect();
        let got = lsd(
            &AudioBuffer::new(r, 8000),
            &AudioBuffer::new(e, 8000),
        )
        .unwrap();
        assert!((got - 1.0).abs() < 1e-9, "lsd {got}");
    }

    #[test]
    fn snr_and_lsd_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4096;
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift = 777;
        let rot = |v: &[f64]| -> Vec<f64> {
            let mut out = v[shift..].to_vec();
            out.extend_from_slice(&v[..shift]);
            out
        };
        let s0 = snr_db(&AudioBuffer::new(a.clone(), 8000), &AudioBuffer::new(b.clone(), 8000)).unwrap();
        let s1 = snr_db(&AudioBuffer::new(rot(&a), 8000), &AudioBuffer::new(rot(&b), 8000)).unwrap();
        assert!((s0 - s1).abs() < 1e-9);
    }
}
