//! Instantaneous frequency information and synchrosqueezed energy.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::wavepacket::WavePacketPlane;

/// Default gate threshold ε.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Marker stored where `W_f = 0`.
pub const SENTINEL: Complex64 = Complex64::new(f64::INFINITY, f64::INFINITY);

/// `v_f(a_j, b_l) = ∂_b W_f / (2πi W_f)` on the plane's grid.
#[derive(Debug, Clone)]
pub struct IfInfo {
    values: Vec<Complex64>,
    bands: usize,
    len: usize,
}

impl IfInfo {
    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, band: usize, t: usize) -> Complex64 {
        self.values[band * self.len + t]
    }

    pub fn row(&self, band: usize) -> &[Complex64] {
        &self.values[band * self.len..(band + 1) * self.len]
    }

    pub fn is_sentinel(v: Complex64) -> bool {
        !v.re.is_finite() || !v.im.is_finite()
    }
}

/// Evaluate `v_f`. Requires the derivative plane.
pub fn if_info(plane: &WavePacketPlane) -> Result<IfInfo> {
    if !plane.has_derivative() {
        return Err(invalid("plane", "the derivative plane is required for v_f"));
    }
    let len = plane.len();
    let bands = plane.num_bands();
    let denom = Complex64::new(0.0, 2.0 * PI);
    let rows: Vec<Vec<Complex64>> = (0..bands)
        .into_par_iter()
        .map(|j| {
            let w = plane.row(j);
            let dw = plane.drow(j).expect("checked above");
            w.iter()
                .zip(dw)
                .map(|(&w, &dw)| if w.norm() > 0.0 { dw / (denom * w) } else { SENTINEL })
                .collect()
        })
        .collect();
    Ok(IfInfo {
        values: rows.concat(),
        bands,
        len,
    })
}

/// Linear frequency grid with centres `k·width`, `k = 0..bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VGrid {
    pub width: f64,
    pub bins: usize,
}

impl VGrid {
    /// Grid of the given bin width covering `[0, L/2]`.
    pub fn covering(len: usize, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid("vbin", format!("bin width must be positive, got {width}")));
        }
        let bins = ((len / 2) as f64 / width).floor() as usize + 1;
        Ok(Self { width, bins })
    }

    /// Unit-width grid covering `[0, L/2]`.
    pub fn unit(len: usize) -> Self {
        Self { width: 1.0, bins: len / 2 + 1 }
    }

    #[inline]
    pub fn center(&self, bin: usize) -> f64 {
        bin as f64 * self.width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|k| self.center(k)).collect()
    }

    /// Nearest bin to frequency `v`, if it lies on the grid.
    #[inline]
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if !v.is_finite() {
            return None;
        }
        let k = (v / self.width).round();
        if k < 0.0 || k >= self.bins as f64 {
            None
        } else {
            Some(k as usize)
        }
    }
}

/// `T_f(v, b)` stored column by column as sorted `(bin, energy)` pairs.
///
/// Every column receives at most one contribution per band, so the sparse
/// form is far smaller than the `bins × L` matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SqueezedPlane {
    columns: Vec<Vec<(u32, f64)>>,
    vgrid: VGrid,
    epsilon: f64,
    retained_energy: f64,
    warnings: Vec<String>,
}

impl SqueezedPlane {
    pub fn vgrid(&self) -> &VGrid {
        &self.vgrid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of time samples.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().all(|c| c.is_empty())
    }

    pub fn column(&self, t: usize) -> &[(u32, f64)] {
        &self.columns[t]
    }

    pub fn columns(&self) -> &[Vec<(u32, f64)>] {
        &self.columns
    }

    pub fn energy(&self, bin: usize, t: usize) -> f64 {
        let col = &self.columns[t];
        match col.binary_search_by_key(&(bin as u32), |&(b, _)| b) {
            Ok(i) => col[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.columns.iter().flatten().map(|&(_, e)| e).sum()
    }

    pub fn max(&self) -> f64 {
        self.columns.iter().flatten().map(|&(_, e)| e).fold(0.0, f64::max)
    }

    /// `Σ |W_f|²·weight` over the gated cells, accumulated independently of
    /// the histogram.
    pub fn retained_energy(&self) -> f64 {
        self.retained_energy
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Dense `bins × L` matrix, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let len = self.len();
        let mut out = vec![0.0; self.vgrid.bins * len];
        for (t, col) in self.columns.iter().enumerate() {
            for &(b, e) in col {
                out[b as usize * len + t] = e;
            }
        }
        out
    }

    /// Iterate over all nonzero `(bin, t, energy)` cells.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(t, col)| col.iter().map(move |&(b, e)| (b as usize, t, e)))
    }
}

/// Reassign `|W_f|²·weight_j` from each gated cell to the bin nearest
/// `Re v_f`. A cell is gated in when `|W_f| ≥ |a_j|^{-s/2}·√ε` and `v_f`
/// is finite and on the grid.
pub fn squeeze(
    plane: &WavePacketPlane,
    vf: &IfInfo,
    epsilon: f64,
    vgrid: VGrid,
) -> Result<SqueezedPlane> {
    if !(epsilon >= 0.0) {
        return Err(invalid("epsilon", format!("threshold must be non-negative, got {epsilon}")));
    }
    if vf.bands() != plane.num_bands() || vf.len() != plane.len() {
        return Err(invalid("vf", "v_f does not match the plane"));
    }
    let ladder = plane.ladder();
    let s = ladder.scaling();
    let gates: Vec<f64> = ladder
        .centers()
        .iter()
        .map(|a| a.abs().powf(-s / 2.0) * epsilon.sqrt())
        .collect();
    let weights = ladder.weights();
    let len = plane.len();
    let bands = plane.num_bands();

    let per_column: Vec<(Vec<(u32, f64)>, f64)> = (0..len)
        .into_par_iter()
        .map(|t| {
            let mut hits: Vec<(u32, usize, f64)> = Vec::new();
            for j in 0..bands {
                let w = plane.coeff(j, t);
                let mag = w.norm();
                if mag < gates[j] || mag == 0.0 {
                    continue;
                }
                let v = vf.get(j, t);
                if IfInfo::is_sentinel(v) {
                    continue;
                }
                if let Some(bin) = vgrid.bin_of(v.re) {
                    hits.push((bin as u32, j, mag * mag * weights[j]));
                }
            }
            // fixed reduction order: by bin, then by band
            hits.sort_by_key(|&(b, j, _)| (b, j));
            let retained: f64 = hits.iter().map(|h| h.2).sum();
            let mut col: Vec<(u32, f64)> = Vec::new();
            for (b, _, e) in hits {
                match col.last_mut() {
                    Some(last) if last.0 == b => last.1 += e,
                    _ => col.push((b, e)),
                }
            }
            (col, retained)
        })
        .collect();

    let mut warnings = Vec::new();
    let min_spacing = ladder
        .centers()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if vgrid.width > min_spacing {
        warnings.push(format!(
            "frequency bin width {} exceeds the minimum band spacing {min_spacing:.3}",
            vgrid.width
        ));
    }
    let retained_energy = per_column.iter().map(|c| c.1).sum();
    Ok(SqueezedPlane {
        columns: per_column.into_iter().map(|c| c.0).collect(),
        vgrid,
        epsilon,
        retained_energy,
        warnings,
    })
}

/// `log10` of the dense energy with zeros mapped to `floor`.
pub fn log10_energy(plane: &SqueezedPlane, floor: f64) -> Vec<f64> {
    plane
        .to_dense()
        .into_iter()
        .map(|e| if e > 0.0 { e.log10().max(floor) } else { floor })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{fixtures, synth, GimtSpec, ShapeFunction, TrigPoly};
    use crate::wavepacket::{build_mother, forward, make_ladder};
    use proptest::prelude::*;

    fn analyse(f: &crate::SampledSignal) -> (WavePacketPlane, IfInfo) {
        let w = build_mother(1.0).unwrap();
        let ladder = make_ladder(f.len(), 2.0 / 3.0, 1.0, 0.5).unwrap();
        let plane = forward(f, &w, &ladder).unwrap();
        let vf = if_info(&plane).unwrap();
        (plane, vf)
    }

    #[test]
    fn pure_harmonic_is_exact() {
        let len = 8192;
        let f = fixtures::harmonic(64.0, len).signal().unwrap();
        let (plane, vf) = analyse(&f);
        let gate_count = (0..plane.num_bands())
            .map(|j| {
                let a = plane.ladder().centers()[j];
                let gate = a.powf(-1.0 / 3.0) * 1e-3;
                (0..len)
                    .filter(|&l| plane.coeff(j, l).norm() >= gate)
                    .inspect(|&l| {
                        let v = vf.get(j, l);
                        assert!((v.re - 64.0).abs() / 64.0 <= 1e-6, "band {j}: {v}");
                    })
                    .count()
            })
            .sum::<usize>();
        assert!(gate_count > 0);
        let t = squeeze(&plane, &vf, DEFAULT_EPSILON, VGrid::unit(len)).unwrap();
        for (bin, _, _) in t.cells() {
            assert_eq!(bin, 64);
        }
        assert!(t.total() > 0.0);
    }

    #[test]
    fn zero_coefficient_gives_sentinel() {
        let f = crate::SampledSignal::zeros(1024).unwrap();
        let (plane, vf) = analyse(&f);
        for j in 0..plane.num_bands() {
            assert!(vf.row(j).iter().all(|&v| IfInfo::is_sentinel(v)));
        }
    }

    #[test]
    fn huge_epsilon_empties_the_plane() {
        let f = fixtures::harmonic(64.0, 1024).signal().unwrap();
        let (plane, vf) = analyse(&f);
        let t = squeeze(&plane, &vf, 1e6, VGrid::unit(1024)).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.total(), 0.0);
    }

    #[test]
    fn conservation_on_example1() {
        let f = fixtures::example1(8192).signal().unwrap();
        let (plane, vf) = analyse(&f);
        let t = squeeze(&plane, &vf, DEFAULT_EPSILON, VGrid::unit(8192)).unwrap();
        // independent sum over gated cells
        let s = plane.ladder().scaling();
        let mut expected = 0.0;
        for j in 0..plane.num_bands() {
            let a = plane.ladder().centers()[j];
            let w = plane.ladder().weights()[j];
            for l in 0..8192 {
                let c = plane.coeff(j, l);
                if c.norm() > 0.0 && c.norm() >= a.powf(-s / 2.0) * 1e-3 && VGrid::unit(8192).bin_of(vf.get(j, l).re).is_some() {
                    expected += c.norm_sqr() * w;
                }
            }
        }
        assert!((t.total() - expected).abs() <= 1e-12 * expected);
        assert!((t.retained_energy() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn example1_if_matches_harmonic_laws() {
        let len = 8192;
        let fx = fixtures::example1(len);
        let f = fx.signal().unwrap();
        let (plane, vf) = analyse(&f);
        let ladder = plane.ladder();
        let comps: Vec<(f64, &GimtSpec)> = fx
            .modes
            .iter()
            .flat_map(|m| m.shape.coefficients().keys().map(move |&n| (n as f64, m)))
            .collect();
        let mut checked = 0usize;
        for j in 0..plane.num_bands() {
            let a = ladder.centers()[j];
            let r = ladder.band_radius(j);
            for l in (0..len).step_by(16) {
                let w = plane.coeff(j, l);
                if w.norm() < a.powf(-1.0 / 3.0) * 1e-3 {
                    continue;
                }
                let b = l as f64 / len as f64;
                let inside: Vec<f64> = comps
                    .iter()
                    .map(|(n, m)| n * m.instantaneous_frequency(b))
                    .filter(|&freq| (a - freq).abs() < r + 0.1 * freq)
                    .collect();
                if inside.len() != 1 {
                    continue;
                }
                let v = vf.get(j, l).re;
                assert!((v - inside[0]).abs() / inside[0] <= 0.02, "a={a} b={b}: {v} vs {}", inside[0]);
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn single_harmonic_concentrates() {
        let len = 8192;
        let spec = GimtSpec::new(
            ShapeFunction::from_real(&[(1, 1.0)]).unwrap(),
            TrigPoly::constant(1.0).with_sine(0.1, 1.0, 0.0),
            80.0,
            TrigPoly::identity().with_sine(0.01, 1.0, 0.0),
        );
        let f = synth(&spec, len).unwrap();
        let (plane, vf) = analyse(&f);
        let t = squeeze(&plane, &vf, DEFAULT_EPSILON, VGrid::unit(len)).unwrap();
        let near: f64 = t
            .cells()
            .filter(|&(bin, l, _)| {
                let target = spec.instantaneous_frequency(l as f64 / len as f64);
                (bin as f64 - target).abs() <= 2.0
            })
            .map(|c| c.2)
            .sum();
        assert!(near >= 0.99 * t.total(), "{near} / {}", t.total());
    }

    #[test]
    fn coarse_grid_warns() {
        let f = fixtures::harmonic(64.0, 1024).signal().unwrap();
        let (plane, vf) = analyse(&f);
        let fine = squeeze(&plane, &vf, DEFAULT_EPSILON, VGrid::unit(1024)).unwrap();
        assert!(fine.warnings().is_empty());
        let coarse = squeeze(&plane, &vf, DEFAULT_EPSILON, VGrid::covering(1024, 8.0).unwrap()).unwrap();
        assert!(!coarse.warnings().is_empty());
    }

    #[test]
    fn dense_and_log_exports_agree() {
        let f = fixtures::harmonic(20.0, 256).signal().unwrap();
        let (plane, vf) = analyse(&f);
        let t = squeeze(&plane, &vf, DEFAULT_EPSILON, VGrid::unit(256)).unwrap();
        let dense = t.to_dense();
        assert_eq!(dense.len(), 129 * 256);
        assert!((dense.iter().sum::<f64>() - t.total()).abs() < 1e-12 * t.total());
        let logs = log10_energy(&t, -12.0);
        assert_eq!(logs[0], -12.0);
        assert!((logs[20 * 256] - t.energy(20, 0).log10()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn retained_energy_is_monotone_in_epsilon(e1 in -12.0f64..0.0, e2 in -12.0f64..0.0, n in 10.0f64..60.0) {
            let len = 512;
            let spec = GimtSpec::new(
                ShapeFunction::from_real(&[(1, 1.0), (2, 0.3)]).unwrap(),
                TrigPoly::constant(1.0),
                n.round(),
                TrigPoly::identity().with_sine(0.005, 1.0, 0.0),
            );
            let f = synth(&spec, len).unwrap();
            let (plane, vf) = analyse(&f);
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let a = squeeze(&plane, &vf, 10f64.powf(lo), VGrid::unit(len)).unwrap();
            let b = squeeze(&plane, &vf, 10f64.powf(hi), VGrid::unit(len)).unwrap();
            prop_assert!(b.total() <= a.total());
        }
    }
}
