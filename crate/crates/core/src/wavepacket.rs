//! Wave packet transform on a discrete frequency ladder.
//!
//! For a band centred at `a` with geometric scaling `s`, the packet in the
//! Fourier domain is `|a|^{-s/2} e^{-2πibξ} ŵ(|a|^{-s}(ξ - a))`, so one row of
//! the transform is an inverse FFT of `f̂` times a compactly supported window.
//! Each row costs `O(L log L)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GmdError, Result};
use crate::fourier::{bin_frequency, frequency_bin, FourierPlan};
use crate::signal::SampledSignal;

/// Default geometric scaling parameter.
pub const DEFAULT_SCALING: f64 = 2.0 / 3.0;
/// Default support radius of the mother packet in the Fourier domain.
pub const DEFAULT_RADIUS: f64 = 1.0;
/// Default fractional overlap of consecutive bands.
pub const DEFAULT_OVERLAP: f64 = 0.5;

/// Mother wave packet, described by its Fourier profile
/// `ŵ(ξ) = exp(1 − 1/(1 − (ξ/d)²))` on `(−d, d)` and zero elsewhere.
///
/// The profile is even, non-negative, `C^∞`, peaks at `ŵ(0) = 1` and
/// vanishes with all derivatives at `±d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotherWavePacket {
    radius: f64,
}

impl MotherWavePacket {
    pub const PROFILE_NAME: &'static str = "exp-inverse-quadratic bump";

    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(invalid("d", format!("support radius must lie in (0, 1], got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `ŵ(ξ)`.
    #[inline]
    pub fn profile(&self, xi: f64) -> f64 {
        let u = xi / self.radius;
        let q = 1.0 - u * u;
        if q <= 0.0 {
            0.0
        } else {
            (1.0 - 1.0 / q).exp()
        }
    }
}

pub fn build_mother(radius: f64) -> Result<MotherWavePacket> {
    MotherWavePacket::new(radius)
}

/// Discretization of the scale axis: band centres `a_j` with geometric
/// widths `d·|a_j|^s`, plus quadrature weights for `∫·da`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyLadder {
    centers: Vec<f64>,
    weights: Vec<f64>,
    scaling: f64,
    radius: f64,
    overlap: f64,
    len: usize,
}

impl FrequencyLadder {
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Quadrature weight of each band for integrals over `a`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scaling(&self) -> f64 {
        self.scaling
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// Signal length the ladder was built for.
    pub fn signal_len(&self) -> usize {
        self.len
    }

    pub fn num_bands(&self) -> usize {
        self.centers.len()
    }

    /// Whether `s` lies in the open interval `(1/2, 1)` required by the
    /// concentration theory. Values outside are accepted for experiments.
    pub fn in_theory_range(&self) -> bool {
        self.scaling > 0.5 && self.scaling < 1.0
    }

    /// Half-width `d·|a_j|^s` of band `j`.
    pub fn band_radius(&self, j: usize) -> f64 {
        self.radius * self.centers[j].abs().powf(self.scaling)
    }

    /// Add the mirrored negative-frequency bands (for non-analytic input).
    pub fn mirrored(mut self) -> Self {
        let neg: Vec<f64> = self.centers.iter().rev().map(|a| -a).collect();
        let neg_w: Vec<f64> = self.weights.iter().rev().copied().collect();
        self.centers.splice(0..0, neg);
        self.weights.splice(0..0, neg_w);
        self
    }

    /// Nonzero samples `(bin, ξ, |a|^{-s/2} ŵ(|a|^{-s}(ξ − a)))` of band `j`
    /// on the integer frequencies representable at this length.
    pub fn window(&self, j: usize, mother: &MotherWavePacket) -> Vec<(usize, i64, f64)> {
        let a = self.centers[j];
        let scale = a.abs().powf(-self.scaling);
        let amp = a.abs().powf(-self.scaling / 2.0);
        let r = mother.radius() * a.abs().powf(self.scaling);
        let lo = (a - r).ceil() as i64;
        let hi = (a + r).floor() as i64;
        (lo..=hi)
            .filter_map(|xi| {
                let v = amp * mother.profile(scale * (xi as f64 - a));
                if v > 0.0 {
                    frequency_bin(xi, self.len).map(|bin| (bin, xi, v))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Discrete frame normalizer `C(ξ) = Σ_j |a_j|^{-s} ŵ(|a_j|^{-s}(ξ − a_j))²`
    /// indexed by FFT bin.
    pub fn normalizer(&self, mother: &MotherWavePacket) -> Vec<f64> {
        let mut c = vec![0.0; self.len];
        for j in 0..self.num_bands() {
            for (bin, _, v) in self.window(j, mother) {
                c[bin] += v * v;
            }
        }
        c
    }

    /// `G(ξ) = Σ_j weight_j |a_j|^{-s} ŵ(...)²`; the transform energy of a
    /// signal is `Σ_ξ G(ξ)|f̂(ξ)|²`.
    pub fn energy_gain(&self, mother: &MotherWavePacket) -> Vec<f64> {
        let mut g = vec![0.0; self.len];
        for j in 0..self.num_bands() {
            for (bin, _, v) in self.window(j, mother) {
                g[bin] += self.weights[j] * v * v;
            }
        }
        g
    }
}

/// Build a geometric ladder covering `[1, L/2]`.
///
/// Consecutive centres satisfy
/// `a_{j+1} − d·a_{j+1}^s = a_j + (1 − 2·overlap)·d·a_j^s`, so `overlap = 0`
/// tiles the axis and `overlap = 0.5` puts each band's lower edge on the
/// previous centre. When that equation has no root (`s = 1`, `d = 1`) the
/// step falls back to `a_{j+1} = a_j + 2(1 − overlap)·d·a_j^s`.
pub fn make_ladder(len: usize, scaling: f64, radius: f64, overlap: f64) -> Result<FrequencyLadder> {
    if len < 4 {
        return Err(invalid("L", "need at least 4 samples"));
    }
    if !(scaling > 0.0 && scaling <= 1.0) {
        return Err(invalid("s", format!("scaling must lie in (0, 1], got {scaling}")));
    }
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(invalid("d", format!("support radius must lie in (0, 1], got {radius}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(invalid("overlap", format!("overlap must lie in [0, 1), got {overlap}")));
    }
    let nyquist = (len / 2) as f64;
    let mut centers = vec![1.0f64];
    loop {
        let a = *centers.last().unwrap();
        if a + radius * a.powf(scaling) >= nyquist {
            break;
        }
        centers.push(next_center(a, scaling, radius, overlap));
    }
    let n = centers.len();
    let weights = (0..n)
        .map(|j| {
            let lo = if j == 0 { centers[0] } else { centers[j - 1] };
            let hi = if j + 1 == n { centers[n - 1] } else { centers[j + 1] };
            if n == 1 {
                1.0
            } else if j == 0 || j + 1 == n {
                hi - lo
            } else {
                (hi - lo) / 2.0
            }
        })
        .collect();
    Ok(FrequencyLadder {
        centers,
        weights,
        scaling,
        radius,
        overlap,
        len,
    })
}

fn next_center(a: f64, s: f64, d: f64, overlap: f64) -> f64 {
    let edge = |x: f64| x - d * x.powf(s);
    let target = a + (1.0 - 2.0 * overlap) * d * a.powf(s);
    let fallback = a + 2.0 * (1.0 - overlap) * d * a.powf(s);
    // the edge map must be increasing past `a` for a root to exist
    if s >= 1.0 && d >= 1.0 {
        return fallback;
    }
    let mut hi = a.max(1.0) * 2.0;
    while edge(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return fallback;
        }
    }
    let mut lo = a;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if edge(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let next = 0.5 * (lo + hi);
    if next <= a {
        fallback
    } else {
        next
    }
}

/// Boolean selection of `(band, time)` cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    bands: usize,
    len: usize,
    bits: Vec<bool>,
}

impl CellMask {
    pub fn filled(bands: usize, len: usize, value: bool) -> Self {
        Self {
            bands,
            len,
            bits: vec![value; bands * len],
        }
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, band: usize, t: usize) -> bool {
        self.bits[band * self.len + t]
    }

    #[inline]
    pub fn set(&mut self, band: usize, t: usize, value: bool) {
        self.bits[band * self.len + t] = value;
    }

    pub fn complement(&self) -> Self {
        Self {
            bands: self.bands,
            len: self.len,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            bands: self.bands,
            len: self.len,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn row(&self, band: usize) -> &[bool] {
        &self.bits[band * self.len..(band + 1) * self.len]
    }
}

/// `W_f(a_j, b_l)` (and `∂_b W_f`) on the ladder × uniform time grid.
#[derive(Debug, Clone)]
pub struct WavePacketPlane {
    coeffs: Vec<Complex64>,
    dcoeffs: Option<Vec<Complex64>>,
    ladder: FrequencyLadder,
    mother: MotherWavePacket,
    len: usize,
}

impl WavePacketPlane {
    pub fn ladder(&self) -> &FrequencyLadder {
        &self.ladder
    }

    pub fn mother(&self) -> &MotherWavePacket {
        &self.mother
    }

    pub fn num_bands(&self) -> usize {
        self.ladder.num_bands()
    }

    /// Number of time samples.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, band: usize) -> &[Complex64] {
        &self.coeffs[band * self.len..(band + 1) * self.len]
    }

    pub fn drow(&self, band: usize) -> Option<&[Complex64]> {
        self.dcoeffs
            .as_ref()
            .map(|d| &d[band * self.len..(band + 1) * self.len])
    }

    pub fn coeff(&self, band: usize, t: usize) -> Complex64 {
        self.coeffs[band * self.len + t]
    }

    pub fn has_derivative(&self) -> bool {
        self.dcoeffs.is_some()
    }
}

/// Forward transform with the exact `∂_b` multiplier `2πiξ`.
pub fn forward(
    f: &SampledSignal,
    mother: &MotherWavePacket,
    ladder: &FrequencyLadder,
) -> Result<WavePacketPlane> {
    transform(f, mother, ladder, true)
}

/// Forward transform without the derivative plane.
pub fn forward_coefficients(
    f: &SampledSignal,
    mother: &MotherWavePacket,
    ladder: &FrequencyLadder,
) -> Result<WavePacketPlane> {
    transform(f, mother, ladder, false)
}

fn transform(
    f: &SampledSignal,
    mother: &MotherWavePacket,
    ladder: &FrequencyLadder,
    derivative: bool,
) -> Result<WavePacketPlane> {
    let len = f.len();
    if ladder.signal_len() != len {
        return Err(GmdError::LengthMismatch {
            expected: ladder.signal_len(),
            actual: len,
        });
    }
    let plan = FourierPlan::new(len);
    let spectrum = plan.coefficients(f.samples());
    let zero = Complex64::new(0.0, 0.0);
    let rows: Vec<(Vec<Complex64>, Option<Vec<Complex64>>)> = (0..ladder.num_bands())
        .into_par_iter()
        .map(|j| {
            let window = ladder.window(j, mother);
            let mut buf = vec![zero; len];
            for &(bin, _, v) in &window {
                buf[bin] = spectrum[bin] * v;
            }
            let dbuf = derivative.then(|| {
                let mut d = vec![zero; len];
                for &(bin, xi, _) in &window {
                    d[bin] = buf[bin] * Complex64::new(0.0, 2.0 * std::f64::consts::PI * xi as f64);
                }
                plan.synthesize_in_place(&mut d);
                d
            });
            plan.synthesize_in_place(&mut buf);
            (buf, dbuf)
        })
        .collect();
    let mut coeffs = Vec::with_capacity(len * rows.len());
    let mut dcoeffs = derivative.then(|| Vec::with_capacity(len * rows.len()));
    for (row, drow) in rows {
        coeffs.extend_from_slice(&row);
        if let (Some(d), Some(r)) = (dcoeffs.as_mut(), drow) {
            d.extend_from_slice(&r);
        }
    }
    Ok(WavePacketPlane {
        coeffs,
        dcoeffs,
        ladder: ladder.clone(),
        mother: *mother,
        len,
    })
}

/// Ratio of transform energy to signal energy with frame-bound witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRatio {
    /// `∬|W_f|² da db / ∫|f|² dt` with the ladder's quadrature weights.
    pub ratio: f64,
    /// `min G(ξ)` over the covered bins `1 ≤ ξ < L/2`.
    pub lower: f64,
    /// `max G(ξ)` over the same bins.
    pub upper: f64,
    /// Set when the signal carries energy at `|ξ| < 1`, outside the
    /// regime where the norm equivalence holds.
    pub low_frequency_warning: bool,
}

pub fn energy_ratio(plane: &WavePacketPlane, f: &SampledSignal) -> Result<EnergyRatio> {
    let len = plane.len();
    if f.len() != len {
        return Err(GmdError::LengthMismatch {
            expected: len,
            actual: f.len(),
        });
    }
    let signal_energy: f64 = f.samples().iter().map(|c| c.norm_sqr()).sum::<f64>() / len as f64;
    if signal_energy == 0.0 {
        return Err(GmdError::ZeroSignal);
    }
    let weights = plane.ladder().weights();
    let plane_energy: f64 = (0..plane.num_bands())
        .map(|j| weights[j] * plane.row(j).iter().map(|c| c.norm_sqr()).sum::<f64>() / len as f64)
        .sum();
    let gain = plane.ladder().energy_gain(plane.mother());
    let two_sided = plane.ladder().centers().iter().any(|&a| a < 0.0);
    let covered = gain.iter().enumerate().filter(|&(k, _)| {
        let xi = bin_frequency(k, len);
        let mag = xi.unsigned_abs() as usize;
        mag >= 1 && mag < len / 2 && (xi > 0 || two_sided)
    });
    let (lower, upper) = covered.fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, &g)| (lo.min(g), hi.max(g)));
    let spectrum = FourierPlan::new(len).coefficients(f.samples());
    let low = spectrum[0].norm_sqr();
    let total: f64 = spectrum.iter().map(|c| c.norm_sqr()).sum();
    Ok(EnergyRatio {
        ratio: plane_energy / signal_energy,
        lower,
        upper,
        low_frequency_warning: low > 1e-12 * total,
    })
}

/// Dual-frame synthesis from the masked coefficients:
/// `ĝ(ξ) = Σ_j |a_j|^{-s/2} ŵ_j(ξ) · DFT_b(mask_j ⊙ W_j)(ξ) / C(ξ)`.
pub fn dual_reconstruct(plane: &WavePacketPlane, mask: &CellMask) -> Result<SampledSignal> {
    let len = plane.len();
    if mask.bands() != plane.num_bands() || mask.len() != len {
        return Err(GmdError::LengthMismatch {
            expected: plane.num_bands() * len,
            actual: mask.bands() * mask.len(),
        });
    }
    let plan = FourierPlan::new(len);
    let zero = Complex64::new(0.0, 0.0);
    let contributions: Vec<Option<Vec<(usize, Complex64)>>> = (0..plane.num_bands())
        .into_par_iter()
        .map(|j| {
            let row_mask = mask.row(j);
            if !row_mask.iter().any(|&b| b) {
                return None;
            }
            let masked: Vec<Complex64> = plane
                .row(j)
                .iter()
                .zip(row_mask)
                .map(|(&c, &m)| if m { c } else { zero })
                .collect();
            let spec = plan.coefficients(&masked);
            Some(
                plane
                    .ladder()
                    .window(j, plane.mother())
                    .into_iter()
                    .map(|(bin, _, v)| (bin, spec[bin] * v))
                    .collect(),
            )
        })
        .collect();
    let mut numerator = vec![zero; len];
    for contrib in contributions.into_iter().flatten() {
        for (bin, v) in contrib {
            numerator[bin] += v;
        }
    }
    let normalizer = plane.ladder().normalizer(plane.mother());
    let floor = 1e-10 * normalizer.iter().cloned().fold(0.0, f64::max);
    let mut spectrum = vec![zero; len];
    for k in 0..len {
        if numerator[k] == zero {
            continue;
        }
        if normalizer[k] <= floor {
            return Err(GmdError::CoverageGap {
                bin: bin_frequency(k, len),
            });
        }
        spectrum[k] = numerator[k] / normalizer[k];
    }
    SampledSignal::new(plan.synthesize(&spectrum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{fixtures, GimtSpec, ShapeFunction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn tone(n: f64, len: usize) -> SampledSignal {
        fixtures::harmonic(n, len).signal().unwrap()
    }

    // Reference bump evaluated independently of the implementation.
    fn bump(x: f64, d: f64) -> f64 {
        if x.abs() >= d {
            0.0
        } else {
            let u = x / d;
            (-1.0 / (1.0 - u * u)).exp() * std::f64::consts::E
        }
    }

    #[test]
    fn mother_profile_values() {
        let w = build_mother(1.0).unwrap();
        assert_eq!(w.profile(1.0), 0.0);
        assert_eq!(w.profile(-1.0), 0.0);
        assert!((w.profile(0.0) - 1.0).abs() < 1e-15);
        assert!(w.profile(0.0) > w.profile(0.5) && w.profile(0.5) > 0.0);
        // ŵ(0.5) = exp(1 − 4/3)
        assert!((w.profile(0.5) - (-1.0f64 / 3.0).exp()).abs() < 1e-15);
        assert!((w.profile(0.3) - bump(0.3, 1.0)).abs() < 1e-15);
        assert_eq!(w.profile(0.3), w.profile(-0.3));
        let half = build_mother(0.5).unwrap();
        assert_eq!(half.profile(0.6), 0.0);
        assert!(build_mother(0.0).is_err());
        assert!(build_mother(-1.0).is_err());
    }

    #[test]
    fn ladder_covers_every_frequency() {
        let ladder = make_ladder(8192, 2.0 / 3.0, 1.0, 0.5).unwrap();
        for xi in 1..=4096i64 {
            let covered = (0..ladder.num_bands()).any(|j| {
                let a = ladder.centers()[j];
                (xi as f64 - a).abs() < ladder.band_radius(j)
            });
            assert!(covered, "frequency {xi} uncovered");
        }
    }

    #[test]
    fn zero_overlap_tiles() {
        let (s, d) = (2.0 / 3.0, 1.0);
        let ladder = make_ladder(4096, s, d, 0.0).unwrap();
        for w in ladder.centers().windows(2) {
            let lhs = w[1] - d * w[1].powf(s);
            let rhs = w[0] + d * w[0].powf(s);
            assert!((lhs - rhs).abs() < 1e-9 * rhs, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn wavelet_limit_band_radius_equals_center() {
        let ladder = make_ladder(1024, 1.0, 1.0, 0.5).unwrap();
        assert!(!ladder.in_theory_range());
        for j in 0..ladder.num_bands() {
            assert!((ladder.band_radius(j) - ladder.centers()[j]).abs() < 1e-12);
        }
        assert!(make_ladder(1024, 1.2, 1.0, 0.5).is_err());
        assert!(make_ladder(1024, 2.0 / 3.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn pure_harmonic_closed_form() {
        let len = 1024;
        let n = 64.0;
        let f = tone(n, len);
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(len, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let plane = forward(&f, &w, &ladder).unwrap();
        let s = ladder.scaling();
        for j in 0..plane.num_bands() {
            let a = ladder.centers()[j];
            let amp = a.powf(-s / 2.0) * w.profile(a.powf(-s) * (a - n));
            for l in (0..len).step_by(37) {
                let expected = Complex64::from_polar(amp, 2.0 * PI * n * l as f64 / len as f64);
                assert!((plane.coeff(j, l) - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_signal_gives_zero_plane() {
        let f = SampledSignal::zeros(256).unwrap();
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(256, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let plane = forward(&f, &w, &ladder).unwrap();
        for j in 0..plane.num_bands() {
            assert!(plane.row(j).iter().all(|c| c.norm() == 0.0));
        }
        assert!(matches!(energy_ratio(&plane, &f), Err(GmdError::ZeroSignal)));
    }

    /// Periodized packet `w_ab(t)` evaluated by direct summation over ξ.
    fn packet_time_domain(a: f64, s: f64, w: &MotherWavePacket, len: usize) -> Vec<Complex64> {
        let r = w.radius() * a.abs().powf(s);
        let lo = (a - r).ceil() as i64;
        let hi = (a + r).floor() as i64;
        (0..len)
            .map(|m| {
                let tau = m as f64 / len as f64;
                (lo..=hi)
                    .filter(|&xi| xi >= -(len as i64) / 2 && xi < len as i64 / 2)
                    .map(|xi| {
                        let v = a.abs().powf(-s / 2.0) * bump(a.abs().powf(-s) * (xi as f64 - a), w.radius());
                        Complex64::from_polar(v, 2.0 * PI * xi as f64 * tau)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn brute_force_quadrature_oracle() {
        let len = 256;
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(len, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = SampledSignal::new(
            (0..len)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        )
        .unwrap();
        let plane = forward(&f, &w, &ladder).unwrap();
        for j in 0..ladder.num_bands() {
            let packet = packet_time_domain(ladder.centers()[j], ladder.scaling(), &w, len);
            for l in 0..len {
                // ⟨w_ab, f⟩ = ∫ conj(w(t − b)) f(t) dt on the periodic grid
                let direct: Complex64 = (0..len)
                    .map(|m| packet[(m + len - l) % len].conj() * f.samples()[m])
                    .sum::<Complex64>()
                    / len as f64;
                let fast = plane.coeff(j, l);
                assert!(
                    (direct - fast).norm() <= 1e-8 * direct.norm().max(1e-3),
                    "band {j} time {l}: {direct} vs {fast}"
                );
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        use crate::signal::{synth, TrigPoly};
        let len = 8192;
        let spec = GimtSpec::new(
            ShapeFunction::from_real(&[(1, 1.0), (2, 0.5)]).unwrap(),
            TrigPoly::constant(1.0).with_sine(0.1, 1.0, 0.0),
            12.0,
            TrigPoly::identity().with_sine(0.01, 1.0, 0.0),
        );
        let f = synth(&spec, len).unwrap();
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(len, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let plane = forward(&f, &w, &ladder).unwrap();
        let h = 1.0 / len as f64;
        for j in 0..plane.num_bands() {
            let row = plane.row(j);
            let drow = plane.drow(j).unwrap();
            let scale = drow.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if scale < 1e-8 {
                continue;
            }
            for l in 0..len {
                let fd = (row[(l + 1) % len] - row[(l + len - 1) % len]) / (2.0 * h);
                assert!((fd - drow[l]).norm() <= 1e-4 * scale, "band {j} time {l}");
            }
        }
    }

    #[test]
    fn forward_is_linear() {
        let len = 512;
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(len, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let f = tone(40.0, len);
        let g = fixtures::example1(len).signal().unwrap_or_else(|_| tone(17.0, len));
        let (alpha, beta) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let combo = SampledSignal::new(
            f.samples()
                .iter()
                .zip(g.samples())
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
        .unwrap();
        let pf = forward(&f, &w, &ladder).unwrap();
        let pg = forward(&g, &w, &ladder).unwrap();
        let pc = forward(&combo, &w, &ladder).unwrap();
        for j in 0..pc.num_bands() {
            for l in 0..len {
                let lin = alpha * pf.coeff(j, l) + beta * pg.coeff(j, l);
                assert!((pc.coeff(j, l) - lin).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn all_true_mask_reconstructs() {
        let len = 8192;
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(len, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let f = tone(64.0, len);
        let plane = forward(&f, &w, &ladder).unwrap();
        let full = CellMask::filled(plane.num_bands(), len, true);
        let g = dual_reconstruct(&plane, &full).unwrap();
        assert!(g.relative_error(&f) <= 1e-6);
        let none = CellMask::filled(plane.num_bands(), len, false);
        let z = dual_reconstruct(&plane, &none).unwrap();
        assert!(z.samples().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn energy_ratio_is_bracketed() {
        let len = 4096;
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(len, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let f = tone(64.0, len);
        let plane = forward(&f, &w, &ladder).unwrap();
        let e = energy_ratio(&plane, &f).unwrap();
        assert!(e.ratio > 0.0 && e.ratio.is_finite());
        assert!(e.lower <= e.ratio && e.ratio <= e.upper);
        assert!(!e.low_frequency_warning);

        // two equal-norm signals with disjoint spectra in [32, 128]
        let a = tone(40.0, len);
        let b = tone(110.0, len);
        let ra = energy_ratio(&forward(&a, &w, &ladder).unwrap(), &a).unwrap().ratio;
        let rb = energy_ratio(&forward(&b, &w, &ladder).unwrap(), &b).unwrap().ratio;
        assert!((ra - rb).abs() <= 0.2 * ra.max(rb), "{ra} vs {rb}");

        let dc = SampledSignal::new(vec![Complex64::new(1.0, 0.0); len]).unwrap();
        let pdc = forward(&dc, &w, &ladder).unwrap();
        assert!(energy_ratio(&pdc, &dc).unwrap().low_frequency_warning);
    }

    #[test]
    fn reconstruction_is_bitwise_deterministic() {
        let len = 4096;
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(len, 2.0 / 3.0, 1.0, 0.5).unwrap();
        let f = fixtures::example1(len).signal().unwrap();
        let p1 = forward(&f, &w, &ladder).unwrap();
        let p2 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| forward(&f, &w, &ladder).unwrap());
        assert_eq!(p1.coeffs, p2.coeffs);
        assert_eq!(p1.dcoeffs, p2.dcoeffs);
    }
}
