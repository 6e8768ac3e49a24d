//! Grouping of instantaneous frequency curves into modes and estimation of
//! each mode's fundamental frequency.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GmdError, Result};
use crate::ridges::IFCurve;

/// Default upper bound of the integer search in [`fundamental`].
pub const DEFAULT_SEARCH_CAP: usize = 32;
/// Default k-means seed.
pub const DEFAULT_SEED: u64 = 0x5eed;

const MIN_SHARED_COLUMNS: usize = 8;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_ATTEMPTS: usize = 8;
const KMEANS_MAX_ITER: usize = 300;
const SIGMA_FLOOR: f64 = 1e-9;
const TIE_TOLERANCE: f64 = 1e-9;

/// RMS residual of the affine-in-`b` least-squares fit to
/// `ψ_k·m_j / (ψ_j·m_k)` with `m` the sup norms. Columns where either curve
/// was interpolated are skipped unless fewer than eight remain.
pub fn residual_matrix(curves: &[IFCurve]) -> Result<DMatrix<f64>> {
    if curves.is_empty() {
        return Err(invalid("curves", "need at least one curve"));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(invalid("curves", "curves differ in length"));
    }
    let n = curves.len();
    let sups: Vec<f64> = curves.iter().map(IFCurve::sup).collect();
    let mut r = DMatrix::zeros(n, n);
    for k in 0..n {
        for j in 0..n {
            if k != j {
                r[(k, j)] = pair_residual(&curves[k], &curves[j], sups[k], sups[j]);
            }
        }
    }
    Ok(r)
}

fn pair_residual(ck: &IFCurve, cj: &IFCurve, mk: f64, mj: f64) -> f64 {
    let len = ck.len();
    let usable = |t: usize| ck.values[t] > 0.0 && cj.values[t] > 0.0 && ck.values[t].is_finite() && cj.values[t].is_finite();
    let mut cols: Vec<usize> = (0..len).filter(|&t| usable(t) && !ck.gaps[t] && !cj.gaps[t]).collect();
    if cols.len() < MIN_SHARED_COLUMNS {
        cols = (0..len).filter(|&t| usable(t)).collect();
    }
    if cols.len() < 2 || mk <= 0.0 || mj <= 0.0 {
        return f64::INFINITY;
    }
    let x: Vec<f64> = cols.iter().map(|&t| t as f64 / len as f64).collect();
    let y: Vec<f64> = cols
        .iter()
        .map(|&t| ck.values[t] * mj / (cj.values[t] * mk))
        .collect();
    let nf = x.len() as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| {
            let e = b - (my + slope * (a - mx));
            e * e
        })
        .sum();
    (ss / nf).sqrt()
}

/// Smallest ratio between neighbouring sorted residuals that counts as a
/// class boundary for [`SigmaPolicy::LargestGap`].
pub const GAP_RATIO: f64 = 4.0;
/// Residuals below this are treated as estimation noise, never as a boundary.
pub const GAP_MIN_UPPER: f64 = 1e-3;
/// Residual beyond any estimation error: such curves are never harmonics of
/// one fundamental.
pub const UNRELATED_RESIDUAL: f64 = 0.02;

/// Choice of the Gaussian affinity bandwidth `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "kebab-case")]
pub enum SigmaPolicy {
    /// Geometric mean across the widest ratio gap of the sorted symmetric
    /// residuals, when that gap is at least [`GAP_RATIO`] and its upper side
    /// at least [`GAP_MIN_UPPER`]. Without such a gap, curves are all
    /// unrelated when even the closest pair reaches [`UNRELATED_RESIDUAL`],
    /// and otherwise the largest residual binds them all together.
    LargestGap,
    /// Median over rows of the smallest off-diagonal residual in the row.
    NearestNeighbourMedian,
    /// Median of all off-diagonal residuals.
    OffDiagonalMedian,
    Fixed(f64),
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        SigmaPolicy::LargestGap
    }
}

impl SigmaPolicy {
    pub fn resolve(&self, r: &DMatrix<f64>) -> f64 {
        let n = r.nrows();
        let sigma = match *self {
            SigmaPolicy::Fixed(s) => s,
            SigmaPolicy::OffDiagonalMedian => {
                let mut v: Vec<f64> = (0..n)
                    .flat_map(|k| (0..n).filter(move |&j| j != k).map(move |j| (k, j)))
                    .map(|(k, j)| r[(k, j)])
                    .filter(|x| x.is_finite())
                    .collect();
                median(&mut v)
            }
            SigmaPolicy::LargestGap => {
                let mut v: Vec<f64> = (0..n)
                    .flat_map(|k| (k + 1..n).map(move |j| (k, j)))
                    .map(|(k, j)| r[(k, j)].min(r[(j, k)]).max(SIGMA_FLOOR))
                    .filter(|x| x.is_finite())
                    .collect();
                v.sort_by(f64::total_cmp);
                let gap = v
                    .windows(2)
                    .filter(|w| w[1] >= GAP_MIN_UPPER)
                    .max_by(|a, b| (a[1] / a[0]).total_cmp(&(b[1] / b[0])));
                match gap {
                    Some(w) if w[1] / w[0] >= GAP_RATIO => (w[0] * w[1]).sqrt(),
                    _ if v.first().is_some_and(|&lo| lo >= UNRELATED_RESIDUAL) => v[0] / GAP_RATIO,
                    _ => v.last().copied().unwrap_or(f64::NAN),
                }
            }
            SigmaPolicy::NearestNeighbourMedian => {
                let mut v: Vec<f64> = (0..n)
                    .map(|k| {
                        (0..n)
                            .filter(|&j| j != k)
                            .map(|j| r[(k, j)].min(r[(j, k)]))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .filter(|x| x.is_finite())
                    .collect();
                median(&mut v)
            }
        };
        if sigma.is_finite() {
            sigma.max(SIGMA_FLOOR)
        } else {
            SIGMA_FLOOR
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Result of the curve classification.
#[derive(Debug, Clone, Serialize)]
pub struct CurveClassification {
    /// Number of classes.
    pub k: usize,
    /// Class of each curve; 0-based, numbered by first appearance.
    pub labels: Vec<usize>,
    #[serde(serialize_with = "serialize_matrix")]
    pub residuals: DMatrix<f64>,
    #[serde(serialize_with = "serialize_matrix")]
    pub affinity: DMatrix<f64>,
    /// Normalized Laplacian eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<Option<f64>> = (0..m.ncols())
            .map(|j| Some(m[(i, j)]).filter(|v| v.is_finite()))
            .collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl CurveClassification {
    /// Curve indices of each class.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Spectral clustering of the curves with a Gaussian affinity on the
/// residual matrix. The number of classes comes from the largest gap in the
/// normalized Laplacian spectrum.
///
/// Each node carries a self-loop of weight `2·g(0) = 2`, so an isolated
/// curve has nonzero degree and forms a class of its own.
pub fn classify(curves: &[IFCurve], sigma: SigmaPolicy, seed: u64) -> Result<CurveClassification> {
    let r = residual_matrix(curves)?;
    let n = curves.len();
    let sigma = sigma.resolve(&r);
    if n == 1 {
        return Ok(CurveClassification {
            k: 1,
            labels: vec![0],
            affinity: DMatrix::from_element(1, 1, 2.0),
            residuals: r,
            eigenvalues: vec![0.0],
            sigma,
            seed,
        });
    }
    let g = |x: f64| if x.is_finite() { (-x * x / (2.0 * sigma * sigma)).exp() } else { 0.0 };
    let a = DMatrix::from_fn(n, n, |k, j| g(r[(k, j)]) + g(r[(j, k)]));
    let deg: Vec<f64> = (0..n).map(|k| a.row(k).sum()).collect();
    let m = DMatrix::from_fn(n, n, |k, j| a[(k, j)] / (deg[k] * deg[j]).sqrt());
    let eig = SymmetricEigen::new(m);
    // Laplacian eigenvalue 1 − μ; sorting μ ascending sorts the Laplacian descending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let lap: Vec<f64> = order.iter().map(|&i| 1.0 - eig.eigenvalues[i]).collect();
    // A leading reference value of 1, where the eigenvalues of a connected
    // class sit, lets the gap rule reach K = n when no two curves connect.
    let ext: Vec<f64> = std::iter::once(1.0).chain(lap.iter().copied()).collect();
    let gap_at = (0..n)
        .max_by(|&x, &y| {
            (ext[x] - ext[x + 1])
                .total_cmp(&(ext[y] - ext[y + 1]))
                // first maximal gap wins
                .then(y.cmp(&x))
        })
        .unwrap();
    let k = n - gap_at;

    // top-k eigenvectors of D^{-1/2} A D^{-1/2}, rows normalized
    let top: Vec<usize> = order.iter().rev().take(k).copied().collect();
    let embed: Vec<Vec<f64>> = (0..n)
        .map(|row| {
            let mut v: Vec<f64> = top.iter().map(|&c| eig.eigenvectors[(row, c)]).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect();
    let raw = kmeans(&embed, k, seed)?;
    Ok(CurveClassification {
        k,
        labels: canonical_labels(&raw),
        residuals: r,
        affinity: a,
        eigenvalues: lap,
        sigma,
        seed,
    })
}

fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    raw.iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means with k-means++ seeding; the best of several restarts by inertia.
/// A run that leaves a cluster empty is discarded.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 1 {
        return Ok(vec![0; n]);
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut attempts = 0;
    let mut runs = 0;
    while runs < KMEANS_RESTARTS {
        attempts += 1;
        if attempts > KMEANS_RESTARTS * KMEANS_ATTEMPTS {
            break;
        }
        let Some((inertia, labels)) = kmeans_once(points, k, &mut rng) else {
            continue;
        };
        runs += 1;
        if best.as_ref().is_none_or(|(b, _)| inertia < *b - 1e-12) {
            best = Some((inertia, labels));
        }
    }
    best.map(|b| b.1).ok_or(GmdError::KMeansFailed { attempts })
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Option<(f64, Vec<usize>)> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in d.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        centers.push(points[pick].clone());
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let l = (0..k)
                .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                .unwrap();
            if labels[i] != l {
                labels[i] = l;
                changed = true;
            }
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for c in 0..k {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centers[l])).sum();
    Some((inertia, labels))
}

/// How much the estimate can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    /// The class has a single curve; its lowest harmonic is unknown.
    Low,
}

/// Fundamental instantaneous frequency of one class.
#[derive(Debug, Clone, Serialize)]
pub struct FundamentalEstimate {
    /// Harmonic index of the lowest curve `ψ₁`.
    pub n0: usize,
    /// Index (within the class) of `ψ₁`.
    pub lowest: usize,
    /// `|ψ₁| / n0`.
    pub fundamental: IFCurve,
    /// Least-squares fundamental `Σ n_i ψ_i / Σ n_i²` over all curves.
    pub refined: IFCurve,
    /// Harmonic index `round(n0·ψ_i/ψ₁)` of every curve.
    pub harmonics: Vec<i64>,
    /// `f(n)` for `n = 1..=M`.
    pub objective: Vec<f64>,
    pub confidence: Confidence,
}

/// Integer minimization for the harmonic index of the lowest curve:
/// `f(n) = (1/(N−1)) Σ_{i≥2} mean_b (x − ⌊x + 0.5⌋)²` with `x = n·ψ_i/ψ₁`;
/// the smallest minimizer (ties within 1e-9) wins.
pub fn fundamental(class_curves: &[IFCurve], cap: usize) -> Result<FundamentalEstimate> {
    if cap < 1 {
        return Err(invalid("M", "search cap must be at least 1"));
    }
    if class_curves.is_empty() {
        return Err(invalid("curves", "class has no curves"));
    }
    let lowest = (0..class_curves.len())
        .min_by(|&a, &b| class_curves[a].sup().total_cmp(&class_curves[b].sup()))
        .unwrap();
    let psi1 = &class_curves[lowest];
    if psi1.values.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("curves", "instantaneous frequencies must be positive"));
    }
    let others: Vec<&IFCurve> = class_curves
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != lowest)
        .map(|(_, c)| c)
        .collect();
    if others.is_empty() {
        return Ok(FundamentalEstimate {
            n0: 1,
            lowest,
            fundamental: psi1.clone(),
            refined: psi1.clone(),
            harmonics: vec![1],
            objective: vec![0.0; cap],
            confidence: Confidence::Low,
        });
    }
    let len = psi1.len();
    let ratios: Vec<Vec<f64>> = others
        .iter()
        .map(|c| (0..len).map(|t| c.values[t] / psi1.values[t]).collect())
        .collect();
    let objective: Vec<f64> = (1..=cap)
        .map(|n| {
            ratios
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|q| {
                            let x = n as f64 * q;
                            (x - (x + 0.5).floor()).powi(2)
                        })
                        .sum::<f64>()
                        / len as f64
                })
                .sum::<f64>()
                / others.len() as f64
        })
        .collect();
    let best = objective.iter().cloned().fold(f64::INFINITY, f64::min);
    let n0 = objective.iter().position(|&v| v <= best + TIE_TOLERANCE).unwrap() + 1;
    let fundamental = psi1.scaled(1.0 / n0 as f64);
    let harmonics: Vec<i64> = class_curves
        .iter()
        .map(|c| {
            let q: f64 = (0..len).map(|t| c.values[t] / fundamental.values[t]).sum::<f64>() / len as f64;
            q.round().max(1.0) as i64
        })
        .collect();
    let denom: f64 = harmonics.iter().map(|&h| (h * h) as f64).sum();
    let refined_values = (0..len)
        .map(|t| {
            class_curves
                .iter()
                .zip(&harmonics)
                .map(|(c, &h)| h as f64 * c.values[t])
                .sum::<f64>()
                / denom
        })
        .collect();
    Ok(FundamentalEstimate {
        n0,
        lowest,
        refined: IFCurve {
            values: refined_values,
            ..fundamental.clone()
        },
        fundamental,
        harmonics,
        objective,
        confidence: Confidence::High,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn curve(f: impl Fn(f64) -> f64, len: usize) -> IFCurve {
        IFCurve::from_values((0..len).map(|l| f(l as f64 / len as f64)).collect(), 0)
    }

    fn g1(t: f64) -> f64 {
        60.0 * (1.0 + 0.02 * PI * (2.0 * PI * t).cos())
    }

    fn g2(t: f64) -> f64 {
        90.0 * (1.0 - 0.02 * PI * (2.0 * PI * t).sin())
    }

    #[test]
    fn exact_multiples_have_zero_residual() {
        let a = curve(g1, 256);
        let b = a.scaled(2.0);
        let r = residual_matrix(&[a.clone(), b]).unwrap();
        assert!(r[(0, 1)] < 1e-14 && r[(1, 0)] < 1e-14);
        let r = residual_matrix(&[a.clone(), a]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn different_phases_have_large_residual() {
        let len = 512;
        let mode1 = [curve(g1, len), curve(|t| 2.0 * g1(t), len)];
        let mode2: Vec<IFCurve> = (1..=3).map(|n| curve(move |t| n as f64 * g2(t), len)).collect();
        let all: Vec<IFCurve> = mode1.iter().chain(&mode2).cloned().collect();
        let r = residual_matrix(&all).unwrap();
        let intra = [(0, 1), (1, 0), (2, 3), (3, 4), (2, 4)]
            .iter()
            .map(|&(a, b)| r[(a, b)])
            .fold(0.0, f64::max);
        for k in 0..2 {
            for j in 2..5 {
                assert!(r[(k, j)] >= 10.0 * intra.max(1e-12));
            }
        }
    }

    #[test]
    fn one_mode_gives_one_class() {
        let len = 256;
        let curves: Vec<IFCurve> = (1..=3).map(|n| curve(move |t| n as f64 * g1(t), len)).collect();
        let c = classify(&curves, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.labels, vec![0, 0, 0]);
    }

    fn noisy(f: impl Fn(f64) -> f64, len: usize, amp: f64, seed: u64) -> IFCurve {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IFCurve::from_values(
            (0..len)
                .map(|l| f(l as f64 / len as f64) * (1.0 + amp * (rng.random::<f64>() - 0.5)))
                .collect(),
            0,
        )
    }

    #[test]
    fn two_unrelated_curves_separate() {
        let len = 512;
        let curves = vec![noisy(g1, len, 1e-3, 1), noisy(g2, len, 1e-3, 2)];
        let c = classify(&curves, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        assert_eq!(c.k, 2);
        let related = vec![noisy(g1, len, 1e-3, 1), noisy(|t| 3.0 * g1(t), len, 1e-3, 2)];
        assert_eq!(classify(&related, SigmaPolicy::default(), DEFAULT_SEED).unwrap().k, 1);
    }

    #[test]
    fn singleton_and_group_separate() {
        let len = 512;
        let mut curves = vec![noisy(g1, len, 1e-3, 1)];
        curves.extend((1..=6).map(|n| noisy(move |t| n as f64 * g2(t), len, 1e-3, n + 1)));
        let c = classify(&curves, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.labels, vec![0, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn annual_and_semiannual_group_together() {
        // yearly cycle, its harmonic, and an unrelated slow component
        let len = 1024;
        let year = |t: f64| 30.0 * (1.0 + 0.01 * (2.0 * PI * t).sin());
        let curves = vec![
            noisy(year, len, 1e-3, 3),
            noisy(move |t| 2.0 * year(t), len, 1e-3, 4),
            noisy(|t| 4.0 + 1.5 * t, len, 1e-3, 5),
        ];
        let c = classify(&curves, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.labels[0], c.labels[1]);
        assert_ne!(c.labels[0], c.labels[2]);
    }

    #[test]
    fn common_scaling_leaves_classification_unchanged() {
        let len = 512;
        let mut curves = vec![noisy(g1, len, 1e-3, 1), noisy(|t| 2.0 * g1(t), len, 1e-3, 9)];
        curves.extend((1..=3).map(|n| noisy(move |t| n as f64 * g2(t), len, 1e-3, n + 1)));
        let scaled: Vec<IFCurve> = curves.iter().map(|c| c.scaled(7.5)).collect();
        let a = classify(&curves, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        let b = classify(&scaled, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        for (x, y) in a.residuals.iter().zip(b.residuals.iter()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-3));
        }
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn permutation_equivariance() {
        let len = 512;
        let mut curves = vec![noisy(g1, len, 1e-3, 1), noisy(|t| 2.0 * g1(t), len, 1e-3, 9)];
        curves.extend((1..=3).map(|n| noisy(move |t| n as f64 * g2(t), len, 1e-3, n + 1)));
        let perm = [3, 0, 4, 2, 1];
        let permuted: Vec<IFCurve> = perm.iter().map(|&i| curves[i].clone()).collect();
        let a = classify(&curves, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        let b = classify(&permuted, SigmaPolicy::default(), DEFAULT_SEED).unwrap();
        for x in 0..5 {
            for y in 0..5 {
                assert_eq!(
                    a.labels[perm[x]] == a.labels[perm[y]],
                    b.labels[x] == b.labels[y]
                );
            }
        }
    }

    #[test]
    fn sigma_policies() {
        let r = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 5.0, 0.2, 0.0, 6.0, 5.0, 6.0, 0.0]);
        assert_eq!(SigmaPolicy::OffDiagonalMedian.resolve(&r), 5.0);
        // nearest neighbours: 0.1, 0.1, 5.0
        assert_eq!(SigmaPolicy::NearestNeighbourMedian.resolve(&r), 0.1);
        assert_eq!(SigmaPolicy::Fixed(0.0).resolve(&r), SIGMA_FLOOR);
        // symmetric residuals 0.1, 5.0, 6.0: the widest gap is 0.1 -> 5.0
        assert!((SigmaPolicy::LargestGap.resolve(&r) - 0.5f64.sqrt()).abs() < 1e-12);
        let flat = DMatrix::from_row_slice(2, 2, &[0.0, 1e-4, 2e-4, 0.0]);
        assert_eq!(SigmaPolicy::LargestGap.resolve(&flat), 1e-4);
        let apart = DMatrix::from_row_slice(2, 2, &[0.0, 0.08, 0.09, 0.0]);
        assert_eq!(SigmaPolicy::LargestGap.resolve(&apart), 0.02);
    }

    // brute-force reference for f(n)
    fn objective_oracle(psis: &[Vec<f64>], n: usize) -> f64 {
        let p1 = &psis[0];
        let mut total = 0.0;
        for p in &psis[1..] {
            let mut acc = 0.0;
            for t in 0..p1.len() {
                let x = n as f64 * p[t] / p1[t];
                let nearest = (x + 0.5).floor();
                acc += (x - nearest) * (x - nearest);
            }
            total += acc / p1.len() as f64;
        }
        total / (psis.len() - 1) as f64
    }

    #[test]
    fn class_two_three() {
        let len = 128;
        let c2 = curve(|t| 2.0 * g1(t), len);
        let c3 = curve(|t| 3.0 * g1(t), len);
        let est = fundamental(&[c3.clone(), c2.clone()], 10).unwrap();
        assert_eq!(est.n0, 2);
        assert_eq!(est.lowest, 1);
        let psis = vec![c2.values.clone(), c3.values.clone()];
        assert!(objective_oracle(&psis, 1) > 0.0);
        for n in 1..=10 {
            assert!((est.objective[n - 1] - objective_oracle(&psis, n)).abs() < 1e-12);
        }
        assert!(est.objective[1] < 1e-20);
        for t in 0..len {
            assert!((est.fundamental.values[t] - g1(t as f64 / len as f64)).abs() < 1e-12);
        }
        assert_eq!(est.harmonics, vec![3, 2]);
    }

    #[test]
    fn single_curve_class_is_low_confidence() {
        let c = curve(g1, 64);
        let est = fundamental(std::slice::from_ref(&c), 32).unwrap();
        assert_eq!(est.n0, 1);
        assert_eq!(est.confidence, Confidence::Low);
        assert_eq!(est.fundamental.values, c.values);
        assert!(fundamental(&[c], 0).is_err());
    }

    #[test]
    fn lowest_curve_is_already_fundamental() {
        let len = 64;
        let curves: Vec<IFCurve> = (1..=3).map(|n| curve(move |t| n as f64 * g1(t), len)).collect();
        let est = fundamental(&curves, 32).unwrap();
        assert_eq!(est.n0, 1);
        assert_eq!(est.confidence, Confidence::High);
        for t in 0..len {
            assert!((est.refined.values[t] - g1(t as f64 / len as f64)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn canonical_labels_number_by_first_appearance(raw in proptest::collection::vec(0usize..5, 1..20)) {
            let c = canonical_labels(&raw);
            let mut next = 0;
            for (i, &l) in c.iter().enumerate() {
                prop_assert!(l <= next);
                if l == next { next += 1; }
                for j in 0..i {
                    prop_assert_eq!(raw[i] == raw[j], c[i] == c[j]);
                }
            }
        }
    }
}
