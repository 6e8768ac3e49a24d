//! Mode-level reconstruction from classified ridge supports: per-term and
//! per-mode signals, instantaneous amplitude and shape function estimates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, GmdError, Result};
use crate::fourier::{bin_frequency, FourierPlan};
use crate::interp::{cumulative_integral, pchip_complex, Pchip};
use crate::ridges::{IFCurve, RidgeSupport};
use crate::signal::{ShapeFunction, SampledSignal};
use crate::squeeze::{IfInfo, SqueezedPlane};
use crate::wavepacket::{dual_reconstruct, CellMask, WavePacketPlane};

/// Samples per period of an estimated shape.
pub const SHAPE_SAMPLES: usize = 1024;

/// Cells whose `Re v_f` falls, in the same column, on a bin of one of
/// `supports`. Cells below the squeeze gate are left out, so the mask is
/// exactly the preimage of the supports under the reassignment.
pub fn support_mask(
    plane: &WavePacketPlane,
    vf: &IfInfo,
    squeezed: &SqueezedPlane,
    supports: &[&RidgeSupport],
) -> Result<CellMask> {
    let len = plane.len();
    let bands = plane.num_bands();
    if vf.bands() != bands || vf.len() != len || squeezed.len() != len {
        return Err(invalid("plane", "plane, v_f and squeezed plane disagree in shape"));
    }
    let mut by_column: Vec<Vec<u32>> = vec![Vec::new(); len];
    for s in supports {
        for &(b, t) in s.cells() {
            by_column[t as usize].push(b);
        }
    }
    by_column.iter_mut().for_each(|c| {
        c.sort_unstable();
        c.dedup();
    });
    let ladder = plane.ladder();
    let s = ladder.scaling();
    let root_eps = squeezed.epsilon().sqrt();
    let vgrid = squeezed.vgrid();
    let rows: Vec<Vec<bool>> = (0..bands)
        .into_par_iter()
        .map(|j| {
            let gate = ladder.centers()[j].abs().powf(-s / 2.0) * root_eps;
            (0..len)
                .map(|t| {
                    let bins = &by_column[t];
                    if bins.is_empty() {
                        return false;
                    }
                    let mag = plane.coeff(j, t).norm();
                    if mag < gate || mag == 0.0 {
                        return false;
                    }
                    let v = vf.get(j, t);
                    if IfInfo::is_sentinel(v) {
                        return false;
                    }
                    vgrid
                        .bin_of(v.re)
                        .is_some_and(|b| bins.binary_search(&(b as u32)).is_ok())
                })
                .collect()
        })
        .collect();
    let mut mask = CellMask::filled(bands, len, false);
    for (j, row) in rows.iter().enumerate() {
        for (t, &on) in row.iter().enumerate() {
            if on {
                mask.set(j, t, true);
            }
        }
    }
    Ok(mask)
}

/// Mask of every cell not claimed by any of `supports`.
pub fn remainder_mask(
    plane: &WavePacketPlane,
    vf: &IfInfo,
    squeezed: &SqueezedPlane,
    supports: &[&RidgeSupport],
) -> Result<CellMask> {
    Ok(support_mask(plane, vf, squeezed, supports)?.complement())
}

/// Pointwise root-sum-square of the term moduli.
pub fn amplitude_estimate(per_term: &[SampledSignal]) -> Result<Vec<f64>> {
    let first = per_term
        .first()
        .ok_or_else(|| invalid("per_term", "at least one term is required"))?;
    let len = first.len();
    if let Some(bad) = per_term.iter().find(|s| s.len() != len) {
        return Err(GmdError::LengthMismatch {
            expected: len,
            actual: bad.len(),
        });
    }
    Ok((0..len)
        .map(|t| per_term.iter().map(|s| s.samples()[t].norm_sqr()).sum::<f64>().sqrt())
        .collect())
}

/// `2π ∫₀^{t_j} F` by the trapezoid rule; `L + 1` values, the last at
/// `t = 1`. Fails unless `F > 0` everywhere.
pub fn integrate_phase(fundamental: &IFCurve) -> Result<Vec<f64>> {
    if fundamental.len() < 2 {
        return Err(invalid("fundamental", "curve is too short"));
    }
    if let Some(index) = fundamental.values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(GmdError::NonMonotonePhase { index });
    }
    let phase: Vec<f64> = cumulative_integral(&fundamental.values)
        .into_iter()
        .map(|v| 2.0 * PI * v)
        .collect();
    if let Some(index) = phase.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(GmdError::NonMonotonePhase { index });
    }
    Ok(phase)
}

/// One recovered general mode.
#[derive(Debug, Clone, Serialize)]
pub struct ModeEstimate {
    pub signal: SampledSignal,
    /// Root-sum-square of the term moduli; `α` up to a constant factor.
    pub amplitude: Vec<f64>,
    pub fundamental: IFCurve,
    /// `2π ∫₀ᵗ F` at the sample times.
    pub phase: Vec<f64>,
    pub per_term: Vec<SampledSignal>,
    /// Support label behind each term.
    pub term_labels: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Reconstruct each support of one class through the dual frame and sum
/// the terms. The per-support masks are disjoint, so the sum equals the
/// reconstruction over the union mask.
pub fn reconstruct_mode(
    plane: &WavePacketPlane,
    vf: &IfInfo,
    squeezed: &SqueezedPlane,
    supports: &[&RidgeSupport],
    fundamental: &IFCurve,
) -> Result<ModeEstimate> {
    let len = plane.len();
    if fundamental.len() != len {
        return Err(GmdError::LengthMismatch {
            expected: len,
            actual: fundamental.len(),
        });
    }
    let phase = integrate_phase(fundamental)?;
    let mut warnings = Vec::new();
    let mut per_term = Vec::with_capacity(supports.len());
    for s in supports {
        let mask = support_mask(plane, vf, squeezed, &[*s])?;
        if mask.is_empty() {
            warnings.push(format!("support {} maps to no transform cell", s.label()));
        }
        per_term.push(dual_reconstruct(plane, &mask)?);
    }
    if per_term.is_empty() {
        warnings.push("class has no supports; mode is zero".into());
        per_term.push(SampledSignal::zeros(len)?);
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    for term in &per_term {
        for (a, b) in acc.iter_mut().zip(term.samples()) {
            *a += b;
        }
    }
    Ok(ModeEstimate {
        signal: SampledSignal::new(acc)?,
        amplitude: amplitude_estimate(&per_term)?,
        fundamental: fundamental.clone(),
        phase: phase[..len].to_vec(),
        per_term,
        term_labels: supports.iter().map(|s| s.label()).collect(),
        warnings,
    })
}

/// One period of an estimated shape function on `[0, 2π)`.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeEstimate {
    pub samples: Vec<Complex64>,
    /// Factor applied to reach unit RMS.
    pub normalization: f64,
    /// Phase shift `u₀` applied so that the dominant harmonic is real
    /// and positive.
    pub rotation: f64,
    pub dominant_harmonic: i64,
    /// Complete cycles averaged.
    pub cycles: usize,
}

impl ShapeEstimate {
    /// Fourier coefficients over one period (index by signed harmonic with
    /// [`bin_frequency`]).
    pub fn coefficients(&self) -> Vec<Complex64> {
        FourierPlan::new(self.samples.len()).coefficients(&self.samples)
    }

    /// `|⟨ŝ, s⟩| / (‖ŝ‖‖s‖)` against a reference shape on the same grid.
    pub fn correlation(&self, reference: &ShapeFunction) -> f64 {
        let p = self.samples.len();
        let r: Vec<Complex64> = (0..p).map(|m| reference.eval(2.0 * PI * m as f64 / p as f64)).collect();
        correlation(&self.samples, &r)
    }
}

/// Normalized inner product modulus of two equally long sequences.
pub fn correlation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot.norm() / (na * nb)
    }
}

/// `s(u) ≈ f(Φ⁻¹(u)) / α̃(Φ⁻¹(u))`, averaged over every complete cycle of
/// `Φ = 2π∫F`, normalized to unit RMS and rotated so that the largest
/// harmonic has zero phase.
pub fn shape_estimate(mode: &ModeEstimate) -> Result<ShapeEstimate> {
    let len = mode.signal.len();
    if mode.amplitude.len() != len || mode.fundamental.len() != len {
        return Err(invalid("mode", "signal, amplitude and fundamental differ in length"));
    }
    let phase = integrate_phase(&mode.fundamental)?;
    let amax = mode.amplitude.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-6 * amax;
    if let Some(index) = mode.amplitude.iter().position(|&a| !(a > floor)) {
        return Err(GmdError::IllConditionedAmplitude { index, floor });
    }
    let cycles = (phase[len] / (2.0 * PI)).floor() as usize;
    if cycles < 1 {
        return Err(invalid("fundamental", "phase covers less than one cycle"));
    }
    let nodes: Vec<f64> = (0..=len).map(|j| j as f64 / len as f64).collect();
    let mut ratio: Vec<Complex64> = mode
        .signal
        .samples()
        .iter()
        .zip(&mode.amplitude)
        .map(|(f, a)| f / a)
        .collect();
    ratio.push(ratio[0]);

    let inverse = Pchip::new(phase, nodes.clone())?;
    let p = SHAPE_SAMPLES;
    let queries: Vec<f64> = (0..cycles * p)
        .map(|i| 2.0 * PI * i as f64 / p as f64)
        .collect();
    let times = inverse.eval_sorted(&queries);
    let values = pchip_complex(&nodes, &ratio, &times)?;
    let mut avg = vec![Complex64::new(0.0, 0.0); p];
    for (i, v) in values.iter().enumerate() {
        avg[i % p] += v;
    }
    avg.iter_mut().for_each(|c| *c /= cycles as f64);

    let plan = FourierPlan::new(p);
    let mut coeffs = plan.coefficients(&avg);
    let dominant = (0..p)
        .max_by(|&a, &b| coeffs[a].norm().total_cmp(&coeffs[b].norm()).then(b.cmp(&a)))
        .unwrap();
    let n_star = bin_frequency(dominant, p);
    let rotation = if n_star != 0 {
        -coeffs[dominant].arg() / n_star as f64
    } else {
        0.0
    };
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, bin_frequency(k, p) as f64 * rotation);
    }
    let mut samples = plan.synthesize(&coeffs);
    let rms = (samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / p as f64).sqrt();
    if rms == 0.0 {
        return Err(invalid("mode", "mode signal is identically zero"));
    }
    let normalization = 1.0 / rms;
    samples.iter_mut().for_each(|c| *c *= normalization);
    Ok(ShapeEstimate {
        samples,
        normalization,
        rotation,
        dominant_harmonic: n_star,
        cycles,
    })
}
