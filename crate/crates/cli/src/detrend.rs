use num_complex::Complex64;

/// Least-squares line `c₀ + c₁·t` through complex samples; returns the
/// detrended samples and the line.
pub fn detrend(times: &[f64], samples: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = samples.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let nf = n as f64;
    let tm = times.iter().sum::<f64>() / nf;
    let ym = samples.iter().sum::<Complex64>() / nf;
    let stt: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
    let slope = if stt > 0.0 {
        times.iter().zip(samples).map(|(t, y)| (y - ym) * (t - tm)).sum::<Complex64>() / stt
    } else {
        Complex64::new(0.0, 0.0)
    };
    let trend: Vec<Complex64> = times.iter().map(|t| ym + slope * (t - tm)).collect();
    let rest = samples.iter().zip(&trend).map(|(y, l)| y - l).collect();
    (rest, trend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / n as f64).collect()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ramp_leaves_nothing() {
        let t = grid(1000);
        let y: Vec<Complex64> = t.iter().map(|t| Complex64::new(2.0 + 3.0 * t, -1.0 + 0.5 * t)).collect();
        let (rest, trend) = detrend(&t, &y);
        assert!(rest.iter().all(|r| r.norm() < 1e-12));
        assert!(trend.iter().zip(&y).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn constant_is_its_own_trend() {
        let t = grid(64);
        let y = vec![c(4.5); 64];
        let (rest, trend) = detrend(&t, &y);
        assert!(rest.iter().all(|r| r.norm() < 1e-12));
        assert!(trend.iter().all(|l| (l - c(4.5)).norm() < 1e-12));
    }

    #[test]
    fn ramp_plus_tone_keeps_the_tone_up_to_its_own_line() {
        let n = 8192;
        let t = grid(n);
        let tone: Vec<Complex64> = t.iter().map(|t| c((2.0 * PI * 64.0 * t).cos())).collect();
        let y: Vec<Complex64> = t.iter().zip(&tone).map(|(t, s)| s + c(1.0 - 2.0 * t)).collect();
        let (rest, _) = detrend(&t, &y);
        // a sampled tone is not exactly orthogonal to a line: the exact
        // result is the tone minus its own least-squares line
        let (tone_rest, _) = detrend(&t, &tone);
        let diff = rest.iter().zip(&tone_rest).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        let drift = rest.iter().zip(&tone).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(drift < 5.0 / n as f64, "{drift}");
    }

    #[test]
    fn empty_input() {
        let (a, b) = detrend(&[], &[]);
        assert!(a.is_empty() && b.is_empty());
    }
}
