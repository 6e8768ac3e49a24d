//! Built-in synthetic superpositions used by the CLI and the test suites.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{superpose, synth, GimtSpec, SampledSignal, ShapeFunction, TrigPoly};
use crate::error::{GmdError, Result};

/// A named superposition of known modes.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub modes: Vec<GimtSpec>,
    pub len: usize,
}

impl Fixture {
    pub fn mode_signals(&self) -> Result<Vec<SampledSignal>> {
        self.modes.iter().map(|m| synth(m, self.len)).collect()
    }

    pub fn signal(&self) -> Result<SampledSignal> {
        superpose(&self.mode_signals()?)
    }

    /// Look a fixture up by CLI name.
    pub fn by_name(name: &str, len: usize, wavenumber: Option<f64>) -> Result<Self> {
        match name {
            "example1" => Ok(example1(len)),
            "example2" => Ok(example2(len)),
            "example4" => Ok(example4(len)),
            "harmonic" => Ok(harmonic(wavenumber.unwrap_or(64.0), len)),
            other => Err(GmdError::UnknownFixture(other.to_string())),
        }
    }
}

fn polar(r: f64, theta: f64) -> Complex64 {
    Complex64::from_polar(r, theta)
}

/// Shape of the first Example 1 mode: one dominant term and two weak ones.
pub fn example1_shape1() -> ShapeFunction {
    ShapeFunction::new([(1, polar(1.0, 0.0)), (2, polar(0.06, 0.7)), (3, polar(0.055, -1.1))])
        .expect("static shape")
}

/// Shape of the second Example 1 mode: six strong harmonics and a weak tail.
pub fn example1_shape2() -> ShapeFunction {
    ShapeFunction::new([
        (1, polar(1.0, 0.0)),
        (2, polar(0.8, 0.9)),
        (3, polar(0.6, 1.8)),
        (4, polar(0.45, 2.7)),
        (5, polar(0.35, -2.7)),
        (6, polar(0.3, -1.8)),
        (7, polar(0.09, -0.9)),
        (8, polar(0.05, 0.0)),
    ])
    .expect("static shape")
}

/// Two general modes with `N₁ = 60`, `N₂ = 90`:
/// `(1+0.05 sin 4πt)·s₁(120π(t+0.01 sin 2πt)) + (1+0.1 sin 2πt)·s₂(180π(t+0.01 cos 2πt))`.
pub fn example1(len: usize) -> Fixture {
    let m1 = GimtSpec::new(
        example1_shape1(),
        TrigPoly::constant(1.0).with_sine(0.05, 2.0, 0.0),
        60.0,
        TrigPoly::identity().with_sine(0.01, 1.0, 0.0),
    );
    let m2 = GimtSpec::new(
        example1_shape2(),
        TrigPoly::constant(1.0).with_sine(0.1, 1.0, 0.0),
        90.0,
        TrigPoly::identity().with_cosine(0.01, 1.0),
    );
    Fixture {
        name: "example1".into(),
        modes: vec![m1, m2],
        len,
    }
}

/// A linear chirp from 100 to 1100 plus twenty unit harmonics of
/// `N = 100` with phase `t + 0.005 sin 2πt`.
pub fn example2(len: usize) -> Fixture {
    example2_with(20, len)
}

/// Example 2 with `harmonics` terms in the harmonic stack.
pub fn example2_with(harmonics: i64, len: usize) -> Fixture {
    let chirp = GimtSpec::new(
        ShapeFunction::from_real(&[(1, 1.0)]).expect("static shape"),
        TrigPoly::constant(1.0),
        100.0,
        TrigPoly {
            poly: vec![0.0, 1.0, 5.0],
            sines: Vec::new(),
        },
    );
    let stack: Vec<(i64, f64)> = (1..=harmonics).map(|n| (n, 1.0)).collect();
    let comb = GimtSpec::new(
        ShapeFunction::from_real(&stack).expect("static shape"),
        TrigPoly::constant((harmonics as f64).sqrt()),
        100.0,
        TrigPoly::identity().with_sine(0.005, 1.0, 0.0),
    );
    Fixture {
        name: "example2".into(),
        modes: vec![chirp, comb],
        len,
    }
}

/// Coefficients `1..=max_n` of the analytic part of a piecewise-constant
/// 2π-periodic function taking `levels[k]` on `[edges[k], edges[k+1])`.
fn piecewise_constant_shape(edges: &[f64], levels: &[f64], max_n: i64) -> ShapeFunction {
    let coeffs = (1..=max_n).map(|n| {
        let nf = n as f64;
        let c: Complex64 = levels
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let a = polar(1.0, -nf * edges[k]);
                let b = polar(1.0, -nf * edges[k + 1]);
                (b - a) * v / Complex64::new(0.0, -2.0 * PI * nf)
            })
            .sum();
        (n, c)
    });
    ShapeFunction::new(coeffs).expect("nonzero piecewise shape")
}

/// Square wave truncated at harmonic 11.
pub fn example4_shape3() -> ShapeFunction {
    piecewise_constant_shape(&[0.0, PI, 2.0 * PI], &[1.0, -1.0], 11)
}

/// Three-level staircase truncated at harmonic 11.
pub fn example4_shape4() -> ShapeFunction {
    let third = 2.0 * PI / 3.0;
    piecewise_constant_shape(
        &[0.0, third, 2.0 * third, 2.0 * PI],
        &[1.0, 0.0, -1.0],
        11,
    )
}

/// Two piecewise-constant modes with `N₃ = 120`, `N₄ = 185`.
pub fn example4(len: usize) -> Fixture {
    let m3 = GimtSpec::new(
        example4_shape3(),
        TrigPoly::constant(1.0).with_sine(0.4, 2.0, 0.0),
        120.0,
        TrigPoly::identity().with_sine(0.005, 1.0, 0.0),
    );
    let m4 = GimtSpec::new(
        example4_shape4(),
        TrigPoly::constant(1.0).with_sine(-0.3, 1.0, 0.0),
        185.0,
        TrigPoly::identity().with_cosine(0.01, 2.0),
    );
    Fixture {
        name: "example4".into(),
        modes: vec![m3, m4],
        len,
    }
}

/// Pure tone `e^{2πiNt}`.
pub fn harmonic(wavenumber: f64, len: usize) -> Fixture {
    Fixture {
        name: "harmonic".into(),
        modes: vec![GimtSpec::new(
            ShapeFunction::from_real(&[(1, 1.0)]).expect("static shape"),
            TrigPoly::constant(1.0),
            wavenumber,
            TrigPoly::identity(),
        )],
        len,
    }
}

/// `Σ_{n=1}^{count} e^{2πinNt}`, each harmonic a separate mode.
pub fn harmonic_stack(wavenumber: f64, count: usize, len: usize) -> Fixture {
    Fixture {
        name: "harmonic-stack".into(),
        modes: (1..=count)
            .map(|n| harmonic(n as f64 * wavenumber, len).modes.remove(0))
            .collect(),
        len,
    }
}
