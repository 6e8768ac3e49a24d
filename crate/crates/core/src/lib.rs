//! General mode decomposition by synchrosqueezed wave packet analysis,
//! curve classification and diffeomorphism-based spectral pursuit.

pub mod classify;
pub mod dsa;
pub mod error;
pub mod fourier;
pub mod gmdwp;
pub mod interp;
pub mod pipeline;
pub mod resolution;
pub mod ridges;
pub mod signal;
pub mod squeeze;
pub mod wavepacket;

pub use error::{GmdError, Result};
pub use pipeline::{decompose, Decomposition, PipelineConfig, Report};
pub use signal::{GimtSpec, SampledSignal, ShapeFunction};
pub use wavepacket::{CellMask, FrequencyLadder, MotherWavePacket, WavePacketPlane};
