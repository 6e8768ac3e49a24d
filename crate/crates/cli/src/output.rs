use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gmd::PipelineConfig;
use serde::Serialize;

/// Provenance written next to every artifact.
#[derive(Serialize)]
struct Sidecar<'a> {
    artifact: &'a str,
    command: &'a str,
    input: Option<&'a str>,
    config: &'a PipelineConfig,
}

/// Writes artifacts under one directory, each with a `.json` sidecar.
pub struct OutDir {
    root: PathBuf,
    command: String,
    input: Option<String>,
    config: PipelineConfig,
}

impl OutDir {
    pub fn create(root: &Path, command: &str, input: Option<&Path>, config: &PipelineConfig) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            input: input.map(|p| p.display().to_string()),
            config: config.clone(),
        })
    }

    fn sidecar(&self, name: &str) -> Result<()> {
        let path = self.root.join(format!("{name}.json"));
        let car = Sidecar {
            artifact: name,
            command: &self.command,
            input: self.input.as_deref(),
            config: &self.config,
        };
        write_json(&path, &car)
    }

    fn prepare(&self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(path)
    }

    /// CSV with a header row; every row must have the header's width.
    pub fn csv<I, R>(&self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.prepare(name)?;
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.sidecar(name)
    }

    pub fn signal(&self, name: &str, signal: &gmd::SampledSignal) -> Result<()> {
        let path = self.prepare(name)?;
        gmd::signal::csv::write_signal_file(signal, &path)?;
        self.sidecar(name)
    }

    /// JSON artifact; the resolved config travels inside it as well.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.prepare(name)?;
        write_json(&path, value)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn fmt(x: f64) -> String {
    x.to_string()
}
