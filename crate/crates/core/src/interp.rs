//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson slopes).

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Shape-preserving cubic interpolant through `(x_i, y_i)`.
///
/// On monotone data the interpolant is monotone; outside `[x_0, x_n]` it is
/// clamped to the end values.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid("x", "abscissae and ordinates differ in length"));
        }
        if x.len() < 2 {
            return Err(invalid("x", "need at least two nodes"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("x", "abscissae must be strictly increasing"));
        }
        let slopes = fritsch_carlson(&x, &y);
        Ok(Self { x, y, slopes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        // partition_point gives the first node strictly greater than t
        let i = self.x.partition_point(|&v| v <= t) - 1;
        self.eval_segment(i, t)
    }

    /// Evaluate at non-decreasing query points in one linear sweep.
    pub fn eval_sorted(&self, queries: &[f64]) -> Vec<f64> {
        let n = self.x.len();
        let mut seg = 0usize;
        queries
            .iter()
            .map(|&t| {
                if t <= self.x[0] {
                    return self.y[0];
                }
                if t >= self.x[n - 1] {
                    return self.y[n - 1];
                }
                while seg + 1 < n - 1 && self.x[seg + 1] <= t {
                    seg += 1;
                }
                if self.x[seg] > t {
                    seg = self.x.partition_point(|&v| v <= t) - 1;
                }
                self.eval_segment(seg, t)
            })
            .collect()
    }

    fn eval_segment(&self, i: usize, t: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.slopes[i] + h01 * self.y[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
        return m;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

// three-point end condition, clipped to keep shape
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Interpolate a complex sequence (real and imaginary parts separately) at
/// non-decreasing query points.
pub fn pchip_complex(x: &[f64], y: &[Complex64], queries: &[f64]) -> Result<Vec<Complex64>> {
    let re = Pchip::new(x.to_vec(), y.iter().map(|c| c.re).collect())?;
    let im = Pchip::new(x.to_vec(), y.iter().map(|c| c.im).collect())?;
    let re_q = re.eval_sorted(queries);
    let im_q = im.eval_sorted(queries);
    Ok(re_q
        .into_iter()
        .zip(im_q)
        .map(|(r, i)| Complex64::new(r, i))
        .collect())
}

/// Cumulative trapezoid integral of samples `y_j = y(j/L)` over `[0, 1]`;
/// `L + 1` values, the last at `t = 1`, where `y(1)` is extrapolated
/// quadratically from the final three samples.
pub fn cumulative_integral(y: &[f64]) -> Vec<f64> {
    let len = y.len();
    let h = 1.0 / len as f64;
    let end = match len {
        0 => return vec![0.0],
        1 => y[0],
        2 => 2.0 * y[1] - y[0],
        _ => 3.0 * y[len - 1] - 3.0 * y[len - 2] + y[len - 3],
    };
    let mut out = Vec::with_capacity(len + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for j in 0..len {
        let next = if j + 1 < len { y[j + 1] } else { end };
        acc += 0.5 * h * (y[j] + next);
        out.push(acc);
    }
    out
}
