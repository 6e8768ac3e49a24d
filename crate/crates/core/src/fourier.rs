//! Thin wrappers over `rustfft` fixing the Fourier-series convention used
//! throughout the crate.
//!
//! A signal on `[0, 1)` sampled at `t_j = j / L` is identified with its
//! Fourier coefficients `f̂(ξ) = (1/L) Σ_j f(t_j) e^{-2πiξ t_j}` so that
//! `f(t_j) = Σ_ξ f̂(ξ) e^{2πiξ t_j}`. Bin `k` carries frequency `k` for
//! `k < L/2` and `k - L` otherwise.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse plans for one transform length.
#[derive(Clone)]
pub struct FourierPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierPlan").field("len", &self.len).finish()
    }
}

impl FourierPlan {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Fourier-series coefficients of `samples` (scaled by `1/L`).
    pub fn coefficients(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut buf = samples.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Sample values from Fourier-series coefficients (no scaling).
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf
    }

    /// In-place unscaled inverse transform.
    pub fn synthesize_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// Signed frequency of FFT bin `k` for a length-`len` transform.
#[inline]
pub fn bin_frequency(k: usize, len: usize) -> i64 {
    if k < len.div_ceil(2) {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

/// FFT bin holding signed frequency `xi`, if it is representable.
#[inline]
pub fn frequency_bin(xi: i64, len: usize) -> Option<usize> {
    let n = len as i64;
    let lo = -(n / 2);
    let hi = (n - 1) / 2;
    if xi < lo || xi > hi {
        None
    } else {
        Some(xi.rem_euclid(n) as usize)
    }
}

/// Analytic signal: negative-frequency bins zeroed, positive bins doubled.
/// DC and the Nyquist bin are kept as they are.
pub fn analytic(samples: &[Complex64]) -> Vec<Complex64> {
    let len = samples.len();
    let plan = FourierPlan::new(len);
    let mut coeffs = plan.coefficients(samples);
    for (k, c) in coeffs.iter_mut().enumerate() {
        let xi = bin_frequency(k, len);
        if xi < 0 {
            *c = Complex64::new(0.0, 0.0);
        } else if xi > 0 && !(len % 2 == 0 && k == len / 2) {
            *c *= 2.0;
        }
    }
    plan.synthesize(&coeffs)
}

/// Zero-phase low-pass by Fourier truncation: all bins with `|ξ| > cutoff`
/// are removed. The mean (DC bin) is untouched.
pub fn truncate_real(values: &[f64], cutoff: f64) -> Vec<f64> {
    let len = values.len();
    if len < 2 {
        return values.to_vec();
    }
    let plan = FourierPlan::new(len);
    let input: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut coeffs = plan.coefficients(&input);
    for (k, c) in coeffs.iter_mut().enumerate() {
        if (bin_frequency(k, len).abs() as f64) > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    plan.synthesize(&coeffs).iter().map(|c| c.re).collect()
}
