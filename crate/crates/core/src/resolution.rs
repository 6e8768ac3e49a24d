//! Closed-form resolution limits of the wave packet ladder: the single-scale
//! critical ratio `λ₀` and the multiscale count `n₀` of separable harmonics.

use serde::Serialize;

use crate::error::{invalid, GmdError, Result};

const BISECTION_TOL: f64 = 1e-12;

fn check(level: f64, radius: f64, scaling: f64) -> Result<()> {
    if !(level >= 1.0 && level.is_finite()) {
        return Err(invalid("N", format!("level must be at least 1, got {level}")));
    }
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(invalid("d", format!("radius must lie in (0, 1], got {radius}")));
    }
    if !(scaling > 0.5 && scaling <= 1.0) {
        return Err(invalid("s", format!("scaling must lie in (1/2, 1], got {scaling}")));
    }
    Ok(())
}

/// Root of `N − a = d·a^s` in `(0, N)` by bisection to 1e-12.
pub fn band_edge_center(level: f64, radius: f64, scaling: f64) -> Result<f64> {
    check(level, radius, scaling)?;
    let g = |a: f64| level - a - radius * a.powf(scaling);
    let (mut lo, mut hi) = (0.0, level);
    while hi - lo > BISECTION_TOL * level.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `λ₀ = (2a − N)/N` where the packet centred at `a` just reaches `N` from
/// below. Fails when `λ₀ ≤ 0`, i.e. when `d` is too large for `N`.
pub fn single_scale(level: f64, radius: f64, scaling: f64) -> Result<f64> {
    let a = band_edge_center(level, radius, scaling)?;
    let lambda = (2.0 * a - level) / level;
    if lambda > 0.0 {
        Ok(lambda.min(1.0 - f64::EPSILON))
    } else {
        Err(GmdError::NoResolutionRoot {
            level,
            radius,
            scaling,
        })
    }
}

/// `N^{1/s − 1} / (2d)^{1/s}` before flooring.
pub fn multiscale_raw(level: f64, radius: f64, scaling: f64) -> Result<f64> {
    check(level, radius, scaling)?;
    Ok(level.powf(1.0 / scaling - 1.0) / (2.0 * radius).powf(1.0 / scaling))
}

/// `n₀ = ⌊N^{1/s − 1} / (2d)^{1/s}⌋`, at least 1. A relative slack of
/// 1e-12 absorbs rounding at exact integers.
pub fn multiscale(level: f64, radius: f64, scaling: f64) -> Result<usize> {
    let raw = multiscale_raw(level, radius, scaling)?;
    Ok(((raw * (1.0 + 1e-12)).floor() as usize).max(1))
}

/// Both resolution figures for one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct ResolutionReport {
    #[serde(rename = "N")]
    pub level: f64,
    pub s: f64,
    pub d: f64,
    /// `None` when `d` is too large for `N` at this `s`.
    pub lambda0: Option<f64>,
    pub n0: usize,
    pub n0_raw: f64,
    /// `1/((n₀−1)N) − 1/(n₀N)` for `n₀ ≥ 2`.
    pub multiscale_gap: Option<f64>,
}

pub fn report(level: f64, radius: f64, scaling: f64) -> Result<ResolutionReport> {
    let n0_raw = multiscale_raw(level, radius, scaling)?;
    let n0 = multiscale(level, radius, scaling)?;
    let lambda0 = match single_scale(level, radius, scaling) {
        Ok(l) => Some(l),
        Err(GmdError::NoResolutionRoot { .. }) => None,
        Err(e) => return Err(e),
    };
    let multiscale_gap = (n0 >= 2).then(|| {
        let n = n0 as f64;
        1.0 / ((n - 1.0) * level) - 1.0 / (n * level)
    });
    Ok(ResolutionReport {
        level,
        s: scaling,
        d: radius,
        lambda0,
        n0,
        n0_raw,
        multiscale_gap,
    })
}
