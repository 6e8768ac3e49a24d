//! Signal model: general shape functions, intrinsic mode type functions and
//! their superpositions on the unit interval.

pub mod csv;
pub mod fixtures;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GmdError, Result};

/// Default number of samples on `[0, 1)`.
pub const DEFAULT_SAMPLES: usize = 1 << 13;

/// A 2π-periodic, mean-zero waveform given by its Fourier coefficients.
///
/// Coefficients are normalized so that `Σ |ŝ(n)|² = 1` and the harmonic
/// indices in use have greatest common divisor one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    coeffs: BTreeMap<i64, Complex64>,
    /// Factor the input indices were divided by to reach gcd one.
    gcd_factor: i64,
    /// Factor the input coefficients were divided by to reach unit norm.
    norm_factor: f64,
}

impl ShapeFunction {
    /// Build a normalized shape from raw harmonic coefficients.
    pub fn new<I>(coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let mut raw = BTreeMap::new();
        for (n, c) in coeffs {
            if n == 0 {
                return Err(GmdError::InvalidShape(
                    "harmonic 0 is not allowed (shape functions are mean-zero)".into(),
                ));
            }
            if c.norm() > 0.0 {
                *raw.entry(n).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
        raw.retain(|_, c: &mut Complex64| c.norm() > 0.0);
        if raw.is_empty() {
            return Err(GmdError::InvalidShape("no nonzero coefficient".into()));
        }
        let g = raw.keys().fold(0i64, |acc, n| gcd(acc, n.abs()));
        let norm = raw.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let coeffs = raw.into_iter().map(|(n, c)| (n / g, c / norm)).collect();
        Ok(Self {
            coeffs,
            gcd_factor: g,
            norm_factor: norm,
        })
    }

    /// Convenience constructor from real coefficients.
    pub fn from_real(coeffs: &[(i64, f64)]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&(n, c)| (n, Complex64::new(c, 0.0))))
    }

    pub fn coefficients(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    pub fn coefficient(&self, n: i64) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    pub fn gcd_factor(&self) -> i64 {
        self.gcd_factor
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    pub fn max_harmonic(&self) -> i64 {
        self.coeffs.keys().map(|n| n.abs()).max().unwrap_or(0)
    }

    /// `Σ |ŝ(n)|`, the Wiener-algebra norm.
    pub fn wiener_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// `s(θ) = Σ ŝ(n) e^{inθ}`.
    pub fn eval(&self, theta: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&n, &c)| c * Complex64::from_polar(1.0, n as f64 * theta))
            .sum()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A smooth real function on `[0, 1]` with a known derivative.
pub trait SmoothFunction: Send + Sync + std::fmt::Debug {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

/// `Σ_i poly[i] tⁱ + Σ_k amp_k sin(2π freq_k t + phase_k)`.
///
/// Covers every amplitude and phase law used by the built-in fixtures and is
/// the expression format accepted in signal spec files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    #[serde(default)]
    pub poly: Vec<f64>,
    #[serde(default)]
    pub sines: Vec<SineTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amp: f64,
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self {
            poly: vec![c],
            sines: Vec::new(),
        }
    }

    /// The identity phase `φ(t) = t`.
    pub fn identity() -> Self {
        Self {
            poly: vec![0.0, 1.0],
            sines: Vec::new(),
        }
    }

    pub fn with_sine(mut self, amp: f64, freq: f64, phase: f64) -> Self {
        self.sines.push(SineTerm { amp, freq, phase });
        self
    }

    /// `amp·cos(2π freq t)` expressed as a shifted sine.
    pub fn with_cosine(self, amp: f64, freq: f64) -> Self {
        self.with_sine(amp, freq, PI / 2.0)
    }
}

impl SmoothFunction for TrigPoly {
    fn value(&self, t: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
        let s: f64 = self
            .sines
            .iter()
            .map(|s| s.amp * (2.0 * PI * s.freq * t + s.phase).sin())
            .sum();
        p + s
    }

    fn derivative(&self, t: f64) -> f64 {
        let p = self
            .poly
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * t + i as f64 * c);
        let s: f64 = self
            .sines
            .iter()
            .map(|s| s.amp * 2.0 * PI * s.freq * (2.0 * PI * s.freq * t + s.phase).cos())
            .sum();
        p + s
    }
}

/// A general intrinsic mode type function `α(t)·s(2πNφ(t))`.
#[derive(Debug, Clone)]
pub struct GimtSpec {
    pub shape: ShapeFunction,
    pub amplitude: Arc<dyn SmoothFunction>,
    pub wavenumber: f64,
    pub phase: Arc<dyn SmoothFunction>,
}

impl GimtSpec {
    pub fn new(
        shape: ShapeFunction,
        amplitude: impl SmoothFunction + 'static,
        wavenumber: f64,
        phase: impl SmoothFunction + 'static,
    ) -> Self {
        Self {
            shape,
            amplitude: Arc::new(amplitude),
            wavenumber,
            phase: Arc::new(phase),
        }
    }

    /// Fundamental instantaneous frequency `N φ'(t)`.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.wavenumber * self.phase.derivative(t)
    }

    /// Smallest `M` bounding `α`, `1/α`, `|α'|`, `φ'`, `1/φ'`, `|φ''|` and
    /// `Σ|ŝ(n)|` on a grid of `samples` points. The generator reports this
    /// rather than enforcing a target.
    pub fn empirical_bound(&self, samples: usize) -> f64 {
        let h = 1.0 / samples as f64;
        let mut m = self.shape.wiener_norm();
        for j in 0..=samples {
            let t = j as f64 * h;
            let a = self.amplitude.value(t);
            let da = self.amplitude.derivative(t);
            let dp = self.phase.derivative(t);
            // second derivative of the phase by central difference
            let ddp = (self.phase.derivative((t + h).min(1.0)) - self.phase.derivative((t - h).max(0.0)))
                / (2.0 * h);
            for v in [a, 1.0 / a, da.abs(), dp, 1.0 / dp, ddp.abs()] {
                if v.is_finite() {
                    m = m.max(v);
                } else {
                    m = f64::INFINITY;
                }
            }
        }
        m
    }
}

/// Complex samples `f(j/L)` on the uniform grid of `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    samples: Vec<Complex64>,
}

impl SampledSignal {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() < 2 || !samples.len().is_power_of_two() {
            return Err(GmdError::NotPowerOfTwo(samples.len()));
        }
        Ok(Self { samples })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample rate in samples per unit time.
    pub fn sample_rate(&self) -> f64 {
        self.samples.len() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.samples.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    /// `‖f‖_{L²[0,1]}` approximated by the rectangle rule.
    pub fn norm_l2(&self) -> f64 {
        (self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.len() as f64).sqrt()
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|c| c.im == 0.0)
    }

    /// Analytic counterpart of the signal (negative frequencies removed).
    pub fn to_analytic(&self) -> Self {
        Self {
            samples: crate::fourier::analytic(&self.samples),
        }
    }

    /// Relative L² distance `‖self − other‖ / ‖other‖`.
    pub fn relative_error(&self, reference: &SampledSignal) -> f64 {
        let num: f64 = self
            .samples
            .iter()
            .zip(&reference.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = reference.samples.iter().map(|c| c.norm_sqr()).sum();
        (num / den).sqrt()
    }

    pub fn sub(&self, other: &SampledSignal) -> Result<SampledSignal> {
        check_len(self.len(), other.len())?;
        SampledSignal::new(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        Err(GmdError::LengthMismatch { expected, actual })
    } else {
        Ok(())
    }
}

/// Sample `α(t_j)·Σ_n ŝ(n)·exp(2πi·n·N·φ(t_j))` at `t_j = j/L`.
pub fn synth(spec: &GimtSpec, len: usize) -> Result<SampledSignal> {
    if len < 2 || !len.is_power_of_two() {
        return Err(GmdError::NotPowerOfTwo(len));
    }
    let max_n = spec.shape.max_harmonic() as f64;
    let required = (4.0 * max_n * spec.wavenumber).ceil() as usize;
    if required > len {
        return Err(GmdError::Aliasing {
            frequency: max_n * spec.wavenumber,
            required,
            available: len,
        });
    }
    let peak_rate = (0..len)
        .map(|j| spec.phase.derivative(j as f64 / len as f64).abs())
        .fold(0.0, f64::max);
    let top = max_n * spec.wavenumber * peak_rate;
    if 2.0 * top >= len as f64 {
        return Err(GmdError::Aliasing {
            frequency: top,
            required: (2.0 * top).ceil() as usize + 1,
            available: len,
        });
    }
    let samples = (0..len)
        .map(|j| {
            let t = j as f64 / len as f64;
            let theta = 2.0 * PI * spec.wavenumber * spec.phase.value(t);
            spec.shape.eval(theta) * spec.amplitude.value(t)
        })
        .collect();
    SampledSignal::new(samples)
}

/// Pointwise sum of equally long signals.
pub fn superpose(modes: &[SampledSignal]) -> Result<SampledSignal> {
    let first = modes
        .first()
        .ok_or_else(|| crate::error::invalid("modes", "at least one signal is required"))?;
    let mut acc = first.samples.clone();
    for m in &modes[1..] {
        check_len(acc.len(), m.len())?;
        for (a, b) in acc.iter_mut().zip(&m.samples) {
            *a += b;
        }
    }
    SampledSignal::new(acc)
}

/// Noise variance realizing `SNR = min_i 10·log10(‖f_i‖ / σ²)`.
pub fn noise_variance(modes: &[SampledSignal], snr_db: f64) -> Result<f64> {
    if modes.is_empty() {
        return Err(crate::error::invalid("modes", "SNR needs at least one mode"));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let weakest = modes
        .iter()
        .map(SampledSignal::norm_l2)
        .fold(f64::INFINITY, f64::min);
    Ok(weakest / 10f64.powf(snr_db / 10.0))
}

/// Add complex circular Gaussian noise whose variance matches `snr_db`
/// against the weakest of `modes`. Deterministic for a given `seed`.
pub fn add_noise(
    f: &SampledSignal,
    modes: &[SampledSignal],
    snr_db: f64,
    seed: u64,
) -> Result<SampledSignal> {
    let variance = noise_variance(modes, snr_db)?;
    if variance == 0.0 {
        return Ok(f.clone());
    }
    let scale = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = f
        .samples
        .iter()
        .map(|&c| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c + Complex64::new(re, im) * scale
        })
        .collect();
    SampledSignal::new(samples)
}

/// One mode of a signal spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeFile {
    /// `[n, re, im]` triples.
    pub shape: Vec<(i64, f64, f64)>,
    pub amplitude: TrigPoly,
    pub wavenumber: f64,
    pub phase: TrigPoly,
}

/// JSON description of a synthetic superposition accepted by `generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalSpecFile {
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub modes: Vec<ModeFile>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl SignalSpecFile {
    pub fn gimts(&self) -> Result<Vec<GimtSpec>> {
        self.modes
            .iter()
            .map(|m| {
                let shape = ShapeFunction::new(
                    m.shape
                        .iter()
                        .map(|&(n, re, im)| (n, Complex64::new(re, im))),
                )?;
                Ok(GimtSpec::new(
                    shape,
                    m.amplitude.clone(),
                    m.wavenumber,
                    m.phase.clone(),
                ))
            })
            .collect()
    }

    /// Synthesize the superposition (with noise when `snr_db` is set).
    pub fn realize(&self) -> Result<SampledSignal> {
        let modes = self
            .gimts()?
            .iter()
            .map(|g| synth(g, self.samples))
            .collect::<Result<Vec<_>>>()?;
        let clean = superpose(&modes)?;
        match self.snr_db {
            Some(snr) => add_noise(&clean, &modes, snr, self.seed),
            None => Ok(clean),
        }
    }
}
