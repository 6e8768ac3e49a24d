//! `t,re,im` signal files.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::SampledSignal;
use crate::error::{GmdError, Result};

pub const HEADER: [&str; 3] = ["t", "re", "im"];

pub fn write_signal<W: Write>(signal: &SampledSignal, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (j, v) in signal.samples().iter().enumerate() {
        w.write_record([
            signal.time(j).to_string(),
            v.re.to_string(),
            v.im.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_signal_file(signal: &SampledSignal, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_signal(signal, std::io::BufWriter::new(file))
}

/// Parse a signal and its time stamps. Times must be strictly increasing
/// and uniformly spaced.
pub fn read_signal<R: Read>(input: R) -> Result<(Vec<f64>, SampledSignal)> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() != 3 || headers.iter().zip(HEADER).any(|(a, b)| a.trim() != b) {
        return Err(GmdError::Format(format!(
            "expected header `t,re,im`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| GmdError::Format(format!("row {}: {e}", row + 2)))
        };
        times.push(parse(0)?);
        samples.push(Complex64::new(parse(1)?, parse(2)?));
    }
    check_uniform(&times)?;
    Ok((times, SampledSignal::new(samples)?))
}

pub fn read_signal_file(path: impl AsRef<Path>) -> Result<(Vec<f64>, SampledSignal)> {
    read_signal(std::fs::File::open(path)?)
}

fn check_uniform(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(GmdError::Format(format!(
                "time stamps must be strictly increasing (row {})",
                i + 3
            )));
        }
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step.abs().max(f64::MIN_POSITIVE) {
            return Err(GmdError::Format(format!(
                "time stamps are not uniform (row {})",
                i + 3
            )));
        }
    }
    Ok(())
}
