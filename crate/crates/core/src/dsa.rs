//! Diffeomorphism-based spectral analysis: greedy extraction of warped
//! Fourier atoms `α_k(t)·e^{2πiτ p_k(t)}` from a residual.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GmdError, Result};
use crate::fourier::{bin_frequency, FourierPlan};
use crate::interp::{cumulative_integral, pchip_complex, Pchip};
use crate::ridges::IFCurve;
use crate::signal::SampledSignal;

pub const DEFAULT_MAX_ITER: usize = 200;
/// Default stop norm relative to `‖f‖`.
pub const DEFAULT_STOP_FRACTION: f64 = 1e-3;
/// Default amplitude floor relative to `max α`.
pub const DEFAULT_AMP_FLOOR: f64 = 1e-6;
/// Default peak-to-median ratio below which a peak counts as noise.
pub const DEFAULT_MIN_PEAK_RATIO: f64 = 5.0;

/// `p(t) = (1/m) ∫₀ᵗ ψ` with `m = (max ψ + min ψ)/2`, and its inverse.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseProfile {
    /// `p` at `t_j = j/L`, `j = 0..=L`.
    pub p: Vec<f64>,
    pub m: f64,
    /// Harmonic index `n_k` of the curve the profile was built from.
    pub harmonic: usize,
    /// `p⁻¹` at `u_i = i·p(1)/L`, `i = 0..=L`.
    pub p_inv: Vec<f64>,
}

impl PhaseProfile {
    pub fn len(&self) -> usize {
        self.p.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> f64 {
        self.p[self.len()]
    }

    /// `p(t_j)/p(1)` for `j < L`.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total();
        self.p[..self.len()].iter().map(|v| v / total).collect()
    }

    /// Harmonic index of a recorded `τ`.
    pub fn harmonic_of(&self, tau: f64) -> f64 {
        tau * self.harmonic as f64 / self.m
    }
}

/// Profile of the curve `psi`, which tracks harmonic `harmonic` of its mode.
pub fn make_profile(psi: &IFCurve, harmonic: usize) -> Result<PhaseProfile> {
    let len = psi.len();
    if len < 4 {
        return Err(invalid("psi", "curve is too short"));
    }
    if harmonic < 1 {
        return Err(invalid("harmonic", "harmonic index starts at 1"));
    }
    if psi.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("psi", "instantaneous frequency must be positive"));
    }
    let max = psi.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = psi.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let m = 0.5 * (max + min);
    let p: Vec<f64> = cumulative_integral(&psi.values).into_iter().map(|v| v / m).collect();
    let nodes: Vec<f64> = (0..=len).map(|j| j as f64 / len as f64).collect();
    let total = p[len];
    let queries: Vec<f64> = (0..=len).map(|i| i as f64 * total / len as f64).collect();
    let mut p_inv = Pchip::new(p.clone(), nodes)?.eval_sorted(&queries);
    p_inv[len] = 1.0;
    Ok(PhaseProfile { p, m, harmonic, p_inv })
}

fn check_amp(amp: &[f64], floor: f64) -> Result<()> {
    let max = amp.iter().cloned().fold(0.0, f64::max);
    let limit = floor * max;
    match amp.iter().position(|&a| !(a > limit)) {
        Some(index) => Err(GmdError::IllConditionedAmplitude { index, floor: limit }),
        None => Ok(()),
    }
}

/// `h(x) = r(p⁻¹(x·p(1))) / α(p⁻¹(x·p(1)))` on the uniform grid of `[0,1)`.
/// The signal and amplitude are extended periodically to `t = 1`.
pub fn inverse_warp(r: &SampledSignal, profile: &PhaseProfile, amp: &[f64]) -> Result<SampledSignal> {
    inverse_warp_with_floor(r, profile, amp, DEFAULT_AMP_FLOOR)
}

pub fn inverse_warp_with_floor(
    r: &SampledSignal,
    profile: &PhaseProfile,
    amp: &[f64],
    floor: f64,
) -> Result<SampledSignal> {
    let len = r.len();
    if profile.len() != len || amp.len() != len {
        return Err(GmdError::LengthMismatch {
            expected: len,
            actual: if profile.len() != len { profile.len() } else { amp.len() },
        });
    }
    check_amp(amp, floor)?;
    let nodes: Vec<f64> = (0..=len).map(|j| j as f64 / len as f64).collect();
    let mut ratio: Vec<Complex64> = r.samples().iter().zip(amp).map(|(c, a)| c / a).collect();
    ratio.push(ratio[0]);
    let times = &profile.p_inv[..len];
    SampledSignal::new(pchip_complex(&nodes, &ratio, times)?)
}

/// Stopping and search settings of [`pursue`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsaConfig {
    /// Stop once `‖r‖ ≤ stop_fraction·‖f‖`.
    pub stop_fraction: f64,
    pub max_iter: usize,
    /// Zero-padding factor of the argmax DFT (1 = none).
    pub padding: usize,
    /// Stop when the best peak is below this multiple of the median
    /// spectral magnitude of its profile; `None` disables the test.
    pub min_peak_ratio: Option<f64>,
    pub amp_floor: f64,
}

impl Default for DsaConfig {
    fn default() -> Self {
        Self {
            stop_fraction: DEFAULT_STOP_FRACTION,
            max_iter: DEFAULT_MAX_ITER,
            padding: 1,
            min_peak_ratio: Some(DEFAULT_MIN_PEAK_RATIO),
            amp_floor: DEFAULT_AMP_FLOOR,
        }
    }
}

/// One extracted atom frequency of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub tau: f64,
    pub beta: Complex64,
}

/// The `(τ, β)` pairs extracted for one mode, in order of first extraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub mode_index: usize,
    pub entries: Vec<SpectrumEntry>,
    /// `m_k` and `n_k` of the profile, for the harmonic axis.
    pub midrange: f64,
    pub harmonic: usize,
}

impl SpectrumTable {
    /// Add `beta` to the entry at `tau`, creating it if new.
    fn accumulate(&mut self, tau: f64, beta: Complex64) {
        match self.entries.iter_mut().find(|e| e.tau == tau) {
            Some(e) => e.beta += beta,
            None => self.entries.push(SpectrumEntry { tau, beta }),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One point of the normalized spectrum `d_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub tau: f64,
    /// `τ·n_k/m_k`; integer at exact harmonics.
    pub harmonic: f64,
    /// `|β| / |β_seed|`.
    pub magnitude: f64,
    pub phase: f64,
}

/// `d_k(τ) = |β(τ)| / |β(τ_seed)|` with `τ_seed` the first atom extracted,
/// sorted by `τ`.
pub fn spectrum(table: &SpectrumTable) -> Vec<SpectrumPoint> {
    let Some(seed) = table.entries.first() else {
        return Vec::new();
    };
    let norm = seed.beta.norm();
    let mut points: Vec<SpectrumPoint> = table
        .entries
        .iter()
        .map(|e| SpectrumPoint {
            tau: e.tau,
            harmonic: e.tau * table.harmonic as f64 / table.midrange,
            magnitude: if norm > 0.0 { e.beta.norm() / norm } else { 0.0 },
            phase: e.beta.arg(),
        })
        .collect();
    points.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    points
}

/// Why the pursuit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Best peak indistinguishable from the spectral floor.
    NoiseFloor,
    /// The projection no longer reduces the residual.
    Stalled,
}

/// Outcome of [`pursue`].
#[derive(Debug, Clone, Serialize)]
pub struct DsaResult {
    pub modes: Vec<SampledSignal>,
    pub tables: Vec<SpectrumTable>,
    /// `‖r‖` before the first and after every iteration.
    pub residual_norm_history: Vec<f64>,
    pub residual: SampledSignal,
    pub iterations: usize,
    pub stop: StopReason,
    /// Iterations in which two warped spectra peaked on the same bin.
    pub ill_conditioned: Vec<usize>,
    pub atoms: Vec<AtomRecord>,
}

/// One accepted pursuit step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomRecord {
    pub mode: usize,
    pub tau: f64,
    pub beta: Complex64,
    /// `‖φ‖²` in the normalized `L²[0,1]` norm.
    pub atom_energy: f64,
}

fn norm(c: &[Complex64]) -> f64 {
    (c.iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64).sqrt()
}

struct Peak {
    magnitude: f64,
    bin: usize,
    median: f64,
}

fn warped_peak(
    r: &SampledSignal,
    profile: &PhaseProfile,
    amp: &[f64],
    plan: &FourierPlan,
    padding: usize,
    floor: f64,
) -> Result<Peak> {
    let h = inverse_warp_with_floor(r, profile, amp, floor)?;
    let mut buf = h.into_samples();
    buf.resize(plan.len(), Complex64::new(0.0, 0.0));
    let mags: Vec<f64> = plan.coefficients(&buf).iter().map(|c| c.norm() * padding as f64).collect();
    let bin = (0..mags.len())
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]).then(b.cmp(&a)))
        .unwrap();
    let mut sorted = mags.clone();
    let mid = sorted.len() / 2;
    let median = *sorted.select_nth_unstable_by(mid, f64::total_cmp).1;
    Ok(Peak {
        magnitude: mags[bin],
        bin,
        median,
    })
}

/// Greedy warped-atom pursuit. Each iteration warps the residual by every
/// profile, picks the largest DFT peak over all profiles, fits its atom by
/// orthogonal projection and subtracts it.
pub fn pursue(
    f: &SampledSignal,
    profiles: &[PhaseProfile],
    amps: &[Vec<f64>],
    config: &DsaConfig,
) -> Result<DsaResult> {
    let len = f.len();
    if profiles.is_empty() {
        return Err(invalid("profiles", "at least one profile is required"));
    }
    if profiles.len() != amps.len() {
        return Err(invalid("amps", "one amplitude vector per profile is required"));
    }
    if config.padding < 1 || !config.padding.is_power_of_two() {
        return Err(invalid("padding", "padding factor must be a power of two"));
    }
    for (p, a) in profiles.iter().zip(amps) {
        if p.len() != len || a.len() != len {
            return Err(GmdError::LengthMismatch {
                expected: len,
                actual: if p.len() != len { p.len() } else { a.len() },
            });
        }
        check_amp(a, config.amp_floor)?;
    }
    // unit-RMS amplitudes keep peaks comparable across profiles
    let amps: Vec<Vec<f64>> = amps
        .iter()
        .map(|a| {
            let rms = (a.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
            a.iter().map(|v| v / rms).collect()
        })
        .collect();
    let warps: Vec<Vec<f64>> = profiles.iter().map(PhaseProfile::normalized).collect();
    let plan = FourierPlan::new(len * config.padding);
    let zero = Complex64::new(0.0, 0.0);

    let mut r = f.samples().to_vec();
    let mut modes = vec![vec![zero; len]; profiles.len()];
    let mut tables: Vec<SpectrumTable> = profiles
        .iter()
        .enumerate()
        .map(|(k, p)| SpectrumTable {
            mode_index: k,
            entries: Vec::new(),
            midrange: p.m,
            harmonic: p.harmonic,
        })
        .collect();
    let target = config.stop_fraction * norm(f.samples());
    let mut history = vec![norm(&r)];
    let mut ill_conditioned = Vec::new();
    let mut atoms = Vec::new();
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    loop {
        let current = *history.last().unwrap();
        if current <= target {
            stop = StopReason::Converged;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        let residual = SampledSignal::new(r.clone())?;
        let peaks: Vec<Peak> = profiles
            .par_iter()
            .zip(&amps)
            .map(|(p, a)| warped_peak(&residual, p, a, &plan, config.padding, config.amp_floor))
            .collect::<Result<_>>()?;
        let k = (0..peaks.len())
            .max_by(|&a, &b| peaks[a].magnitude.total_cmp(&peaks[b].magnitude).then(b.cmp(&a)))
            .unwrap();
        let best = &peaks[k];
        if peaks.iter().enumerate().any(|(j, p)| j != k && p.bin == best.bin) {
            ill_conditioned.push(iterations);
        }
        if let Some(ratio) = config.min_peak_ratio {
            if best.magnitude < ratio * best.median {
                stop = StopReason::NoiseFloor;
                break;
            }
        }
        let xi = bin_frequency(best.bin, plan.len()) as f64 / config.padding as f64;
        let atom: Vec<Complex64> = warps[k]
            .iter()
            .zip(&amps[k])
            .map(|(&q, &a)| Complex64::from_polar(a, 2.0 * std::f64::consts::PI * xi * q))
            .collect();
        let atom_energy: f64 = atom.iter().map(|c| c.norm_sqr()).sum();
        if !(atom_energy > 0.0) {
            return Err(GmdError::DegenerateAtom { iteration: iterations });
        }
        let beta = r.iter().zip(&atom).map(|(x, y)| x * y.conj()).sum::<Complex64>() / atom_energy;
        let mut next = r.clone();
        for ((x, m), y) in next.iter_mut().zip(modes[k].iter_mut()).zip(&atom) {
            *x -= beta * y;
            *m += beta * y;
        }
        let after = norm(&next);
        if after > current * (1.0 + 1e-12) {
            return Err(GmdError::ResidualStalled {
                iteration: iterations,
                before: current,
                after,
            });
        }
        if !(after < current) {
            // undo the bookkeeping of a step that changed nothing
            for (m, y) in modes[k].iter_mut().zip(&atom) {
                *m -= beta * y;
            }
            stop = StopReason::Stalled;
            break;
        }
        r = next;
        let tau = xi / profiles[k].total();
        tables[k].accumulate(tau, beta);
        atoms.push(AtomRecord {
            mode: k,
            tau,
            beta,
            atom_energy: atom_energy / len as f64,
        });
        history.push(after);
        iterations += 1;
    }

    Ok(DsaResult {
        modes: modes.into_iter().map(SampledSignal::new).collect::<Result<_>>()?,
        tables,
        residual_norm_history: history,
        residual: SampledSignal::new(r)?,
        iterations,
        stop,
        ill_conditioned,
        atoms,
    })
}

/// Relative spectrum magnitudes of `table` rounded to the nearest harmonic
/// index, summing entries that land on the same index.
pub fn harmonic_magnitudes(table: &SpectrumTable) -> BTreeMap<i64, f64> {
    let mut out: BTreeMap<i64, Complex64> = BTreeMap::new();
    let Some(seed) = table.entries.first() else {
        return BTreeMap::new();
    };
    for e in &table.entries {
        let n = (e.tau * table.harmonic as f64 / table.midrange).round() as i64;
        *out.entry(n).or_default() += e.beta;
    }
    let seed_n = (seed.tau * table.harmonic as f64 / table.midrange).round() as i64;
    let norm = out[&seed_n].norm();
    out.into_iter().map(|(n, b)| (n, b.norm() / norm)).collect()
}
