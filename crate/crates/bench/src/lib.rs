//! Shared inputs for the benchmarks in `benches/`.

use gmd::signal::fixtures;
use gmd::SampledSignal;

/// Sample counts the benchmarks sweep over.
pub const SIZES: [usize; 2] = [4096, 8192];

/// The two-mode test signal at `len` samples.
pub fn two_modes(len: usize) -> SampledSignal {
    fixtures::example1(len).signal().expect("fixture is valid")
}
