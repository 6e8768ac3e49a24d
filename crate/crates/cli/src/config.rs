use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use gmd::PipelineConfig;

/// Pipeline settings: an optional JSON file, then flag overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with any subset of the pipeline settings.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Scaling parameter of the wave packet ladder.
    #[arg(long = "s", global = true, value_name = "S")]
    pub s: Option<f64>,
    /// Support radius of the mother wave packet.
    #[arg(long = "d", global = true, value_name = "D")]
    pub d: Option<f64>,
    /// Squeezing threshold.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Sample count of generated signals.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Seed for noise and clustering.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Add noise at this SNR in dB.
    #[arg(long = "snr-db", global = true, allow_negative_numbers = true)]
    pub snr_db: Option<f64>,
    /// Iteration cap of the spectral pursuit.
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.s {
            c.s = v;
        }
        if let Some(v) = self.d {
            c.d = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.snr_db {
            c.snr_db = Some(v);
        }
        if let Some(v) = self.max_iter {
            c.dsa.max_iter = v;
        }
        Ok(c)
    }
}
