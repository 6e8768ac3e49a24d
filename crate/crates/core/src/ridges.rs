//! Essential supports of the squeezed plane and their instantaneous
//! frequency curves.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, GmdError, Result};
use crate::fourier::truncate_real;
use crate::squeeze::{IfInfo, SqueezedPlane, VGrid};
use crate::wavepacket::{FrequencyLadder, WavePacketPlane};

/// Default cell threshold relative to the plane maximum.
pub const DEFAULT_LEVEL: f64 = 1e-2;
/// Default component floor relative to the plane total.
pub const DEFAULT_FLOOR: f64 = 1e-3;

/// One 8-connected component of above-threshold cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSupport {
    label: usize,
    /// `(bin, t)` pairs sorted by time, then bin.
    cells: Vec<(u32, u32)>,
    energy: f64,
    mean_frequency: f64,
}

impl RidgeSupport {
    /// Build a support from explicit cells; energy and mean frequency are
    /// read from `plane`.
    pub fn from_cells(label: usize, mut cells: Vec<(u32, u32)>, plane: &SqueezedPlane) -> Self {
        cells.sort_by_key(|&(b, t)| (t, b));
        cells.dedup();
        let mut energy = 0.0;
        let mut moment = 0.0;
        for &(b, t) in &cells {
            let e = plane.energy(b as usize, t as usize);
            energy += e;
            moment += e * plane.vgrid().center(b as usize);
        }
        let mean_frequency = if energy > 0.0 { moment / energy } else { 0.0 };
        Self {
            label,
            cells,
            energy,
            mean_frequency,
        }
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn cells(&self) -> &[(u32, u32)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Energy-weighted mean frequency.
    pub fn mean_frequency(&self) -> f64 {
        self.mean_frequency
    }

    /// Bins occupied in each column.
    pub fn bins_by_column(&self, len: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); len];
        for &(b, t) in &self.cells {
            out[t as usize].push(b);
        }
        out
    }

    /// Number of separate bin runs in each column.
    pub fn runs_by_column(&self, len: usize) -> Vec<usize> {
        self.bins_by_column(len)
            .iter()
            .map(|bins| {
                if bins.is_empty() {
                    0
                } else {
                    1 + bins.windows(2).filter(|w| w[1] > w[0] + 1).count()
                }
            })
            .collect()
    }
}

/// Threshold the plane at `level·max`, label 8-connected components and
/// drop those carrying less than `floor·total` energy. Components are
/// returned in order of increasing mean frequency.
pub fn extract_supports(plane: &SqueezedPlane, level: f64, floor: f64) -> Result<Vec<RidgeSupport>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    if !(0.0..1.0).contains(&floor) {
        return Err(invalid("floor", format!("must lie in [0, 1), got {floor}")));
    }
    let max = plane.max();
    if max <= 0.0 {
        return Err(GmdError::EmptyDecomposition);
    }
    let cut = level * max;
    let cells: Vec<(u32, u32)> = plane
        .cells()
        .filter(|&(_, _, e)| e >= cut)
        .map(|(b, t, _)| (b as u32, t as u32))
        .collect();
    if cells.is_empty() {
        return Err(GmdError::EmptyDecomposition);
    }
    let index: HashMap<(u32, u32), usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut uf = UnionFind::new(cells.len());
    for (i, &(b, t)) in cells.iter().enumerate() {
        // forward half of the 8-neighbourhood
        let mut neighbours = vec![(b + 1, t), (b, t + 1), (b + 1, t + 1)];
        if b > 0 {
            neighbours.push((b - 1, t + 1));
        }
        for n in neighbours {
            if let Some(&k) = index.get(&n) {
                uf.union(i, k);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<(u32, u32)>> = HashMap::new();
    for (i, &c) in cells.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(c);
    }
    let total = plane.total();
    let mut supports: Vec<RidgeSupport> = groups
        .into_values()
        .map(|cells| RidgeSupport::from_cells(0, cells, plane))
        .filter(|s| s.energy >= floor * total)
        .collect();
    if supports.is_empty() {
        return Err(GmdError::EmptyDecomposition);
    }
    supports.sort_by(|a, b| {
        a.mean_frequency
            .total_cmp(&b.mean_frequency)
            .then_with(|| a.cells.cmp(&b.cells))
    });
    for (i, s) in supports.iter_mut().enumerate() {
        s.label = i;
    }
    Ok(supports)
}

/// Keep supports present in at least `coverage` of the `len` columns and
/// relabel the survivors in order. Every mode spans the whole interval, so
/// short components are fragments of noise or of a broken weak ridge.
pub fn retain_persistent(supports: Vec<RidgeSupport>, len: usize, coverage: f64) -> Result<Vec<RidgeSupport>> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(invalid("coverage", format!("must lie in [0, 1], got {coverage}")));
    }
    let need = coverage * len as f64;
    let mut kept: Vec<RidgeSupport> = supports
        .into_iter()
        .filter(|s| {
            let mut cols: Vec<u32> = s.cells.iter().map(|c| c.1).collect();
            cols.sort_unstable();
            cols.dedup();
            cols.len() as f64 >= need
        })
        .collect();
    if kept.is_empty() {
        return Err(GmdError::EmptyDecomposition);
    }
    for (i, s) in kept.iter_mut().enumerate() {
        s.label = i;
    }
    Ok(kept)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Two support cells in one column belong to different ridges when they are
/// further apart than this fraction of the local band radius `d·v^s`.
pub const RIDGE_SPLIT_FRACTION: f64 = 0.5;

/// Number of simultaneously distinguishable ridges: the largest `k` such
/// that at least `persistence` of the columns show `k` or more separate
/// groups of support cells.
///
/// Within a column, cells closer than `RIDGE_SPLIT_FRACTION·d·v^s` form one
/// group. Ridges that touch where they cross end up in one connected
/// component; counting per column still separates them away from the
/// crossing.
pub fn ridge_count(
    supports: &[RidgeSupport],
    vgrid: &VGrid,
    ladder: &FrequencyLadder,
    len: usize,
    persistence: f64,
) -> usize {
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); len];
    for s in supports {
        for &(b, t) in s.cells() {
            cols[t as usize].push(b);
        }
    }
    let (d, sc) = (ladder.radius(), ladder.scaling());
    let mut counts: Vec<usize> = cols
        .iter_mut()
        .map(|bins| {
            bins.sort_unstable();
            if bins.is_empty() {
                return 0;
            }
            1 + bins
                .windows(2)
                .filter(|w| {
                    let v = vgrid.center(w[0] as usize).max(1.0);
                    vgrid.center(w[1] as usize) - v > RIDGE_SPLIT_FRACTION * d * v.powf(sc)
                })
                .count()
        })
        .collect();
    let need = (persistence * len as f64).ceil().clamp(1.0, len as f64) as usize;
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts[need - 1]
}

/// `ψ(b)` sampled on every time index, with the energy of each column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IFCurve {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Columns with no support energy whose value was interpolated.
    pub gaps: Vec<bool>,
    pub label: usize,
}

impl IFCurve {
    pub fn from_values(values: Vec<f64>, label: usize) -> Self {
        let n = values.len();
        Self {
            values,
            weights: vec![1.0; n],
            gaps: vec![false; n],
            label,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn gap_count(&self) -> usize {
        self.gaps.iter().filter(|&&g| g).count()
    }

    /// Multiply every value by `factor` (weights and gaps unchanged).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// `max_b |ψ(b) − reference(b)| / scale`.
    pub fn max_relative_error(&self, reference: &[f64], scale: f64) -> f64 {
        self.values
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Bins of the most energetic run of adjacent bins of `support` in each
/// column. Detached runs are interference between neighbouring ridges.
pub fn dominant_runs(plane: &SqueezedPlane, support: &RidgeSupport) -> Vec<Vec<u32>> {
    let len = plane.len();
    let mut out = vec![Vec::new(); len];
    let cells = support.cells();
    let mut i = 0;
    while i < cells.len() {
        let t = cells[i].1;
        let mut j = i;
        while j < cells.len() && cells[j].1 == t {
            j += 1;
        }
        // cells[i..j] are the column's bins in increasing order
        let mut best: (f64, usize, usize) = (-1.0, i, i);
        let mut start = i;
        for k in i..j {
            if k + 1 == j || cells[k + 1].0 > cells[k].0 + 1 {
                let e: f64 = cells[start..=k]
                    .iter()
                    .map(|&(b, _)| plane.energy(b as usize, t as usize))
                    .sum();
                if e > best.0 {
                    best = (e, start, k + 1);
                }
                start = k + 1;
            }
        }
        out[t as usize] = cells[best.1..best.2].iter().map(|c| c.0).collect();
        i = j;
    }
    out
}

/// Curve from per-column first and zeroth moments; empty columns are
/// filled by linear interpolation (held constant past the ends).
fn curve_from_moments(num: &[f64], den: Vec<f64>, label: usize) -> IFCurve {
    let len = num.len();
    let known: Vec<usize> = (0..len).filter(|&t| den[t] > 0.0).collect();
    let mut values = vec![0.0; len];
    let mut gaps = vec![true; len];
    for &t in &known {
        values[t] = num[t] / den[t];
        gaps[t] = false;
    }
    if let (Some(&first), Some(&last)) = (known.first(), known.last()) {
        for v in values.iter_mut().take(first) {
            *v = num[first] / den[first];
        }
        for v in values.iter_mut().skip(last + 1) {
            *v = num[last] / den[last];
        }
        for w in known.windows(2) {
            let (a, b) = (w[0], w[1]);
            for t in a + 1..b {
                let u = (t - a) as f64 / (b - a) as f64;
                values[t] = values[a] * (1.0 - u) + values[b] * u;
            }
        }
    }
    IFCurve {
        values,
        weights: den,
        gaps,
        label,
    }
}

/// Energy-weighted mean frequency of the dominant run of `support` in each
/// column; empty columns are filled by linear interpolation.
pub fn condense(plane: &SqueezedPlane, support: &RidgeSupport) -> IFCurve {
    let len = plane.len();
    let mut num = vec![0.0; len];
    let mut den = vec![0.0; len];
    for (t, bins) in dominant_runs(plane, support).iter().enumerate() {
        for &b in bins {
            let e = plane.energy(b as usize, t);
            num[t] += e * plane.vgrid().center(b as usize);
            den[t] += e;
        }
    }
    curve_from_moments(&num, den, support.label())
}

/// Unquantized curves: per column, the energy-weighted mean of `Re v_f`
/// over transform cells whose band window `|a − ψ_k| < d·a^s` contains
/// ridge `k` and no other ridge of `coarse`, restricted to cells the squeeze
/// sent into the support. Columns without such a cell fall back to the
/// cells reassigned into the dominant run. Bands that straddle two ridges
/// report a mixture frequency and are what this excludes.
pub fn refine_curves(
    plane: &WavePacketPlane,
    vf: &IfInfo,
    squeezed: &SqueezedPlane,
    supports: &[RidgeSupport],
    coarse: &[IFCurve],
) -> Result<Vec<IFCurve>> {
    if supports.len() != coarse.len() {
        return Err(invalid("coarse", "one coarse curve per support is required"));
    }
    let len = squeezed.len();
    let ladder = plane.ladder();
    let s = ladder.scaling();
    let root_eps = squeezed.epsilon().sqrt();
    let centers = ladder.centers();
    let gates: Vec<f64> = centers.iter().map(|a| a.abs().powf(-s / 2.0) * root_eps).collect();
    let radii: Vec<f64> = (0..centers.len()).map(|j| ladder.band_radius(j)).collect();
    let weights = ladder.weights();
    let vgrid = squeezed.vgrid();
    let inside = |j: usize, v: f64| (v - centers[j]).abs() < radii[j];
    Ok(supports
        .iter()
        .enumerate()
        .map(|(k, support)| {
            let all_bins = support.bins_by_column(len);
            let runs = dominant_runs(squeezed, support);
            let mut num = vec![0.0; len];
            let mut den = vec![0.0; len];
            for t in 0..len {
                if all_bins[t].is_empty() {
                    continue;
                }
                let mut fallback = (0.0, 0.0);
                for j in 0..plane.num_bands() {
                    let mag = plane.coeff(j, t).norm();
                    if mag < gates[j] || mag == 0.0 {
                        continue;
                    }
                    let v = vf.get(j, t);
                    if IfInfo::is_sentinel(v) {
                        continue;
                    }
                    let Some(b) = vgrid.bin_of(v.re) else {
                        continue;
                    };
                    let b = b as u32;
                    let e = mag * mag * weights[j];
                    if runs[t].contains(&b) {
                        fallback.0 += e * v.re;
                        fallback.1 += e;
                    }
                    let exclusive = inside(j, coarse[k].values[t])
                        && coarse
                            .iter()
                            .enumerate()
                            .all(|(i, c)| i == k || !inside(j, c.values[t]));
                    if exclusive && all_bins[t].binary_search(&b).is_ok() {
                        num[t] += e * v.re;
                        den[t] += e;
                    }
                }
                if den[t] == 0.0 {
                    num[t] = fallback.0;
                    den[t] = fallback.1;
                }
            }
            curve_from_moments(&num, den, support.label())
        })
        .collect())
}

/// Zero-phase low-pass: remove the line through the end points, drop
/// Fourier bins above `cutoff` cycles, restore the line.
pub fn smooth(curve: &IFCurve, cutoff: f64) -> Result<IFCurve> {
    if !(cutoff > 0.0) {
        return Err(invalid("cutoff", format!("must be positive, got {cutoff}")));
    }
    let n = curve.len();
    if n < 2 || cutoff >= (n / 2) as f64 {
        return Ok(curve.clone());
    }
    let (y0, y1) = (curve.values[0], curve.values[n - 1]);
    let line = |t: usize| y0 + (y1 - y0) * t as f64 / (n - 1) as f64;
    let detrended: Vec<f64> = curve.values.iter().enumerate().map(|(t, v)| v - line(t)).collect();
    let filtered = truncate_real(&detrended, cutoff);
    Ok(IFCurve {
        values: filtered.iter().enumerate().map(|(t, v)| v + line(t)).collect(),
        ..curve.clone()
    })
}
