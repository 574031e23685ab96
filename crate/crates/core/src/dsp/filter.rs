//! IIR lowpass design (Butterworth, Chebyshev I, Bessel) as cascades of
//! second-order sections, plus filtering and the peaking-EQ biquad.
//!
//! Butterworth and Chebyshev prototypes are closed-form and digitised by
//! the bilinear transform with frequency prewarping; the Bessel prototype
//! roots come from the companion matrix of the reverse Bessel polynomial,
//! scaled to a -3 dB cutoff found by bisection, and digitised by the
//! matched-z transform.

use super::AudioBuffer;
use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterFamily {
    Bessel,
    Chebyshev1,
    Butterworth,
}

impl FilterFamily {
    pub const ALL: [FilterFamily; 3] = [
        FilterFamily::Bessel,
        FilterFamily::Chebyshev1,
        FilterFamily::Butterworth,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FilterFamily::Bessel => "bessel",
            FilterFamily::Chebyshev1 => "chebyshev1",
            FilterFamily::Butterworth => "butterworth",
        }
    }
}

/// Passband ripple used for Chebyshev type-I designs, in dB.
pub const CHEBYSHEV_RIPPLE_DB: f64 = 1.0;

/// One second-order section, `a[0]` normalised to 1. A first-order
/// section is stored with the `z^-2` coefficients at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn new(b: [f64; 3], a: [f64; 3]) -> Self {
        let a0 = a[0];
        Biquad {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [1.0, a[1] / a0, a[2] / a0],
        }
    }

    pub fn identity() -> Self {
        Biquad {
            b: [1.0, 0.0, 0.0],
            a: [1.0, 0.0, 0.0],
        }
    }

    /// Radii of the section poles.
    pub fn pole_radii(&self) -> [f64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc >= 0.0 {
            let r = disc.sqrt();
            [((-a1 + r) / 2.0).abs(), ((-a1 - r) / 2.0).abs()]
        } else {
            let m = (a1 * a1 / 4.0 + (-disc) / 4.0).sqrt();
            [m, m]
        }
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// In-place direct-form-II-transposed filtering.
    pub fn process(&self, x: &mut [f64]) {
        let [b0, b1, b2] = self.b;
        let (a1, a2) = (self.a[1], self.a[2]);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + s1;
            s1 = b1 * xin - a1 * y + s2;
            s2 = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// A lowpass filter as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub family: FilterFamily,
    pub order: usize,
    pub cutoff_hz: f64,
    pub biquad_sections: Vec<Biquad>,
}

impl IirFilter {
    pub fn max_pole_radius(&self) -> f64 {
        self.biquad_sections
            .iter()
            .flat_map(|s| s.pole_radii())
            .fold(0.0f64, f64::max)
    }

    pub fn dc_gain(&self) -> f64 {
        self.biquad_sections.iter().map(Biquad::dc_gain).product()
    }
}

fn butterworth_poles(order: usize) -> Vec<Complex<f64>> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            Complex::new(-theta.sin(), theta.cos())
        })
        .collect()
}

fn chebyshev1_poles(order: usize, ripple_db: f64) -> (Vec<Complex<f64>>, f64) {
    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / order as f64;
    let poles = (0..order)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            Complex::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos())
        })
        .collect();
    // Passband peaks at unity; even orders sit 1/sqrt(1+eps^2) down at DC.
    let dc_gain = if order % 2 == 0 {
        1.0 / (1.0 + eps * eps).sqrt()
    } else {
        1.0
    };
    (poles, dc_gain)
}

/// Coefficients of the reverse Bessel polynomial of degree `n`,
/// `theta_n(s) = sum_k a_k s^k` with
/// `a_k = (2n-k)! / (2^(n-k) k! (n-k)!)`.
fn reverse_bessel_coeffs(n: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0f64; n + 1];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut v = 1.0f64;
        // (2n-k)! / (n-k)! = product of the n terms 2n-k, 2n-k-1, ..., n-k+1
        for i in 0..n {
            v *= (2 * n - k - i) as f64;
        }
        for i in 1..=k {
            v /= i as f64;
        }
        v /= 2f64.powi((n - k) as i32);
        *c = v;
    }
    coeffs
}

fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    // Companion matrix of the monic polynomial.
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i] / lead;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

fn poly_eval_complex(coeffs: &[f64], s: Complex<f64>) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

fn bessel_poles(order: usize) -> Vec<Complex<f64>> {
    let coeffs = reverse_bessel_coeffs(order);
    let roots = polynomial_roots(&coeffs);
    // Normalise so the -3 dB point sits at omega = 1: |H(jw)|^2 =
    // a0^2 / |theta(jw)|^2, find w3 by bisection and divide the poles.
    let a0 = coeffs[0];
    let mag2 = |w: f64| {
        let v = poly_eval_complex(&coeffs, Complex::new(0.0, w));
        a0 * a0 / v.norm_sqr()
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    while mag2(hi) > 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mag2(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w3 = 0.5 * (lo + hi);
    roots.into_iter().map(|p| p / w3).collect()
}

/// Pair analog/digital poles into conjugate pairs plus at most one real
/// pole. Assumes the list is closed under conjugation.
fn pair_conjugates(poles: &[Complex<f64>]) -> (Vec<(Complex<f64>, Complex<f64>)>, Option<f64>) {
    let mut complex: Vec<Complex<f64>> = poles.iter().copied().filter(|p| p.im > 1e-9).collect();
    complex.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    let reals: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= 1e-9)
        .map(|p| p.re)
        .collect();
    let pairs = complex.iter().map(|p| (*p, p.conj())).collect();
    (pairs, reals.first().copied())
}

fn sections_from_digital(
    pole_pairs: &[(Complex<f64>, Complex<f64>)],
    real_pole: Option<f64>,
    zeros_at_minus_one: bool,
    overall_dc: f64,
) -> Vec<Biquad> {
    let mut sections: Vec<Biquad> = Vec::new();
    for (p, q) in pole_pairs {
        let a = [1.0, -(p.re + q.re), (p * q).re];
        let b = if zeros_at_minus_one {
            [1.0, 2.0, 1.0]
        } else {
            [1.0, 0.0, 0.0]
        };
        sections.push(Biquad::new(b, a));
    }
    if let Some(r) = real_pole {
        let a = [1.0, -r, 0.0];
        let b = if zeros_at_minus_one {
            [1.0, 1.0, 0.0]
        } else {
            [1.0, 0.0, 0.0]
        };
        sections.push(Biquad::new(b, a));
    }
    // Unit DC per section, then fold the target overall DC into the first.
    for sec in sections.iter_mut() {
        let g = sec.dc_gain();
        for bv in sec.b.iter_mut() {
            *bv /= g;
        }
    }
    if let Some(first) = sections.first_mut() {
        for bv in first.b.iter_mut() {
            *bv *= overall_dc;
        }
    }
    sections
}

/// Design a stable lowpass cascade of second-order sections.
pub fn design_lowpass(
    family: FilterFamily,
    order: usize,
    cutoff_hz: f64,
    fs_hz: f64,
) -> Result<IirFilter> {
    if !(2..=12).contains(&order) {
        return Err(Error::Domain(format!(
            "filter order must lie in [2, 12], got {order}"
        )));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < fs_hz / 2.0) {
        return Err(Error::Domain(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) for fs = {fs_hz} Hz",
            fs_hz / 2.0
        )));
    }

    let sections = match family {
        FilterFamily::Butterworth | FilterFamily::Chebyshev1 => {
            let (proto, dc) = match family {
                FilterFamily::Butterworth => (butterworth_poles(order), 1.0),
                FilterFamily::Chebyshev1 => chebyshev1_poles(order, CHEBYSHEV_RIPPLE_DB),
                FilterFamily::Bessel => unreachable!(),
            };
            // Bilinear transform with prewarping: s-plane poles scaled by
            // tan(pi fc / fs), mapped through z = (1 + s)/(1 - s), with
            // `order` zeros at z = -1.
            let warp = (PI * cutoff_hz / fs_hz).tan();
            let digital: Vec<Complex<f64>> = proto
                .iter()
                .map(|p| {
                    let s = p * warp;
                    (Complex::new(1.0, 0.0) + s) / (Complex::new(1.0, 0.0) - s)
                })
                .collect();
            let (pairs, real) = pair_conjugates(&digital);
            sections_from_digital(&pairs, real, true, dc)
        }
        FilterFamily::Bessel => {
            // Matched-z: z = exp(s / fs) with analog poles in rad/s.
            let omega_c = 2.0 * PI * cutoff_hz;
            let digital: Vec<Complex<f64>> = bessel_poles(order)
                .iter()
                .map(|p| (p * omega_c / fs_hz).exp())
                .collect();
            let (pairs, real) = pair_conjugates(&digital);
            sections_from_digital(&pairs, real, false, 1.0)
        }
    };

    let filt = IirFilter {
        family,
        order,
        cutoff_hz,
        biquad_sections: sections,
    };
    let radius = filt.max_pole_radius();
    if !(radius < 1.0) {
        return Err(Error::UnstableFilter(format!(
            "{} order {order} at {cutoff_hz} Hz / {fs_hz} Hz: pole radius {radius}",
            family.name()
        )));
    }
    Ok(filt)
}

/// Cascaded direct-form-II-transposed filtering; output length equals
/// input length.
pub fn apply_iir(x: &AudioBuffer, filt: &IirFilter) -> AudioBuffer {
    let mut samples = x.samples.clone();
    for sec in &filt.biquad_sections {
        sec.process(&mut samples);
    }
    AudioBuffer::new(samples, x.sample_rate_hz)
}

/// Standard peaking-EQ biquad (unit gain at DC and Nyquist, `gain_db`
/// at `f0_hz`).
pub fn bell_biquad(f0_hz: f64, gain_db: f64, q: f64, fs_hz: f64) -> Result<Biquad> {
    if f0_hz >= fs_hz / 2.0 {
        return Err(Error::Domain(format!(
            "bell centre {f0_hz} Hz must lie below Nyquist {}",
            fs_hz / 2.0
        )));
    }
    let a = 10f64.powf(gain_db / 40.0);
    let w0 = 2.0 * PI * f0_hz / fs_hz;
    let alpha = w0.sin() / (2.0 * q);
    let cosw = w0.cos();
    Ok(Biquad::new(
        [1.0 + alpha * a, -2.0 * cosw, 1.0 - alpha * a],
        [1.0 + alpha / a, -2.0 * cosw, 1.0 - alpha / a],
    ))
}

/// Apply one bell filter over the whole buffer.
pub fn bell_eq(x: &AudioBuffer, f0_hz: f64, gain_db: f64, q: f64) -> Result<AudioBuffer> {
    if !(10.0..=12000.0).contains(&f0_hz) {
        return Err(Error::Domain(format!(
            "bell centre {f0_hz} Hz outside [10, 12000]"
        )));
    }
    if !(0.5..=2.0).contains(&q) {
        return Err(Error::Domain(format!("bell Q {q} outside [0.5, 2]")));
    }
    if gain_db.abs() > 5.0 {
        return Err(Error::Domain(format!(
            "bell gain {gain_db} dB outside [-5, 5]"
        )));
    }
    let biq = bell_biquad(f0_hz, gain_db, q, x.sample_rate_hz as f64)?;
    let mut samples = x.samples.clone();
    biq.process(&mut samples);
    Ok(AudioBuffer::new(samples, x.sample_rate_hz))
}
