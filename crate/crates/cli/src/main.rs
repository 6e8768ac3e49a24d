mod config;
mod detrend;
mod output;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gmd::dsa::{make_profile, pursue, spectrum, DsaResult};
use gmd::pipeline::{analyze, prepare, Analysis};
use gmd::ridges::IFCurve;
use gmd::signal::csv::read_signal_file;
use gmd::signal::fixtures::Fixture;
use gmd::signal::{add_noise, SignalSpecFile};
use gmd::squeeze::SqueezedPlane;
use gmd::{decompose, PipelineConfig, Report, SampledSignal};
use num_complex::Complex64;

use config::ConfigArgs;
use output::{fmt, write_json, OutDir};

/// Time and frequency cells of the coarse log-energy grid.
const PLOT_CELLS: usize = 512;
const LOG_FLOOR: f64 = -12.0;

#[derive(Parser)]
#[command(name = "gmd", version, about = "General mode decomposition with synchrosqueezed wave packets")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in fixture (example1, example2, example4, harmonic)
    /// or a JSON signal spec as a `t,re,im` CSV.
    Generate {
        source: String,
        /// Wavenumber of the `harmonic` fixture.
        #[arg(long = "N")]
        wavenumber: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Forward wave packet transform.
    Transform {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Synchrosqueezed energy distribution.
    Squeeze {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Full pipeline: supports, curves, classes, modes and spectra.
    Decompose {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Spectral pursuit from given fundamental IF curves, or from the
    /// curves the pipeline estimates when none are given.
    Dsa {
        input: PathBuf,
        /// CSV whose second column is one mode's fundamental IF.
        #[arg(long = "curve")]
        curves: Vec<PathBuf>,
        /// CSV whose second column is one mode's amplitude (default 1).
        #[arg(long = "amplitude")]
        amplitudes: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Single-scale ratio and multiscale harmonic count for level N.
    Resolution {
        #[arg(long = "N")]
        level: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Remove the least-squares line.
    Detrend {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        trend: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = cli.config.resolve()?;
    match &cli.command {
        Command::Generate {
            source,
            wavenumber,
            output,
        } => generate(&cli.config, &config, source, *wavenumber, output),
        Command::Transform { input, output } => transform(&config, input, output),
        Command::Squeeze { input, output } => squeeze_cmd(&config, input, output),
        Command::Decompose { input, output } => decompose_cmd(&config, input, output),
        Command::Dsa {
            input,
            curves,
            amplitudes,
            output,
        } => dsa_cmd(&config, input, curves, amplitudes, output),
        Command::Resolution { level, output } => resolution(&config, *level, output.as_deref()),
        Command::Detrend { input, output, trend } => detrend_cmd(&config, input, output, trend),
    }
}

/// Directory and file name of a single-file artifact.
fn single(path: &Path, command: &str, input: Option<&Path>, config: &PipelineConfig) -> Result<(OutDir, String)> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .with_context(|| format!("bad output path {}", path.display()))?
        .to_string();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((OutDir::create(&dir, command, input, config)?, name))
}

fn read_input(path: &Path) -> Result<SampledSignal> {
    let (_, f) = read_signal_file(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(f)
}

fn generate(
    flags: &ConfigArgs,
    config: &PipelineConfig,
    source: &str,
    wavenumber: Option<f64>,
    output: &Path,
) -> Result<()> {
    let mut config = config.clone();
    let signal = if Path::new(source).is_file() {
        let text = std::fs::read_to_string(source)?;
        let mut spec: SignalSpecFile = serde_json::from_str(&text).with_context(|| format!("parsing {source}"))?;
        // explicit flags beat the spec file
        spec.samples = flags.samples.unwrap_or(spec.samples);
        spec.snr_db = flags.snr_db.or(spec.snr_db);
        spec.seed = flags.seed.unwrap_or(spec.seed);
        config.samples = spec.samples;
        config.snr_db = spec.snr_db;
        config.seed = spec.seed;
        spec.realize()?
    } else {
        let fx = Fixture::by_name(source, config.samples, wavenumber)?;
        let clean = fx.signal()?;
        match config.snr_db {
            Some(snr) => add_noise(&clean, &fx.mode_signals()?, snr, config.seed)?,
            None => clean,
        }
    };
    let (dir, name) = single(output, "generate", None, &config)?;
    dir.signal(&name, &signal)
}

fn maybe_noisy(f: SampledSignal, config: &PipelineConfig) -> Result<SampledSignal> {
    match config.snr_db {
        Some(snr) => Ok(add_noise(&f, std::slice::from_ref(&f), snr, config.seed)?),
        None => Ok(f),
    }
}

fn write_plane(dir: &OutDir, a: &Analysis) -> Result<()> {
    let plane = &a.plane;
    let ladder = plane.ladder();
    let len = plane.len();
    dir.csv(
        "ladder.csv",
        &["band", "a", "radius", "weight"],
        (0..plane.num_bands()).map(|j| {
            vec![
                j.to_string(),
                fmt(ladder.centers()[j]),
                fmt(ladder.band_radius(j)),
                fmt(ladder.weights()[j]),
            ]
        }),
    )?;
    dir.csv(
        "plane.csv",
        &["band", "a", "t", "re", "im"],
        (0..plane.num_bands()).flat_map(|j| {
            (0..len).map(move |t| {
                let c = plane.coeff(j, t);
                vec![
                    j.to_string(),
                    fmt(ladder.centers()[j]),
                    fmt(t as f64 / len as f64),
                    fmt(c.re),
                    fmt(c.im),
                ]
            })
        }),
    )
}

fn write_squeezed(dir: &OutDir, t: &SqueezedPlane) -> Result<()> {
    let len = t.len();
    let vg = t.vgrid();
    dir.csv(
        "squeezed.csv",
        &["t", "v", "energy"],
        t.columns().iter().enumerate().flat_map(|(b, col)| {
            col.iter()
                .map(move |&(bin, e)| vec![fmt(b as f64 / len as f64), fmt(vg.center(bin as usize)), fmt(e)])
        }),
    )?;
    // coarse grid for plotting: energy summed over blocks, then log10
    let top = t.cells().map(|(bin, _, _)| bin).max().unwrap_or(0) + 1;
    let tstep = len.div_ceil(PLOT_CELLS).max(1);
    let vstep = top.div_ceil(PLOT_CELLS).max(1);
    let (cols, rows) = (len.div_ceil(tstep), top.div_ceil(vstep));
    let mut grid = vec![0.0; rows * cols];
    for (bin, b, e) in t.cells() {
        grid[(bin / vstep) * cols + b / tstep] += e;
    }
    let mut header = vec!["v".to_string()];
    header.extend((0..cols).map(|c| fmt((c * tstep) as f64 / len as f64)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.csv(
        "squeezed_log10.csv",
        &header_refs,
        (0..rows).map(|r| {
            let mut row = vec![fmt(vg.center(r * vstep))];
            row.extend(grid[r * cols..(r + 1) * cols].iter().map(|&e| {
                let l = if e > 0.0 { e.log10().max(LOG_FLOOR) } else { LOG_FLOOR };
                fmt(l)
            }));
            row
        }),
    )
}

fn transform(config: &PipelineConfig, input: &Path, output: &Path) -> Result<()> {
    let f = prepare(&maybe_noisy(read_input(input)?, config)?);
    let a = analyze(&f, config)?;
    let dir = OutDir::create(output, "transform", Some(input), config)?;
    write_plane(&dir, &a)
}

fn squeeze_cmd(config: &PipelineConfig, input: &Path, output: &Path) -> Result<()> {
    let f = prepare(&maybe_noisy(read_input(input)?, config)?);
    let a = analyze(&f, config)?;
    let dir = OutDir::create(output, "squeeze", Some(input), config)?;
    write_squeezed(&dir, &a.squeezed)
}

fn curve_rows(c: &IFCurve) -> impl Iterator<Item = Vec<String>> + '_ {
    let len = c.len();
    (0..len).map(move |t| {
        vec![
            fmt(t as f64 / len as f64),
            fmt(c.values[t]),
            fmt(c.weights[t]),
            u8::from(c.gaps[t]).to_string(),
        ]
    })
}

fn write_dsa(dir: &OutDir, dsa: &DsaResult, gmdwp: Option<&[gmd::gmdwp::ModeEstimate]>) -> Result<()> {
    for (k, mode) in dsa.modes.iter().enumerate() {
        let len = mode.len();
        let mut header = vec!["t", "dsa_re", "dsa_im"];
        if gmdwp.is_some() {
            header.extend(["gmdwp_re", "gmdwp_im", "amplitude", "fundamental"]);
        }
        dir.csv(
            &format!("modes/{k}.csv"),
            &header,
            (0..len).map(|t| {
                let z = mode.samples()[t];
                let mut row = vec![fmt(t as f64 / len as f64), fmt(z.re), fmt(z.im)];
                if let Some(g) = gmdwp {
                    let w = g[k].signal.samples()[t];
                    row.extend([fmt(w.re), fmt(w.im), fmt(g[k].amplitude[t]), fmt(g[k].fundamental.values[t])]);
                }
                row
            }),
        )?;
        dir.csv(
            &format!("spectrum/{k}.csv"),
            &["tau", "harmonic", "magnitude", "phase"],
            spectrum(&dsa.tables[k])
                .into_iter()
                .map(|p| vec![fmt(p.tau), fmt(p.harmonic), fmt(p.magnitude), fmt(p.phase)]),
        )?;
    }
    dir.csv(
        "residual_history.csv",
        &["iteration", "norm"],
        dsa.residual_norm_history
            .iter()
            .enumerate()
            .map(|(i, r)| vec![i.to_string(), fmt(*r)]),
    )?;
    dir.csv(
        "atoms.csv",
        &["iteration", "mode", "tau", "beta_re", "beta_im", "energy"],
        dsa.atoms.iter().enumerate().map(|(i, a)| {
            vec![
                (i + 1).to_string(),
                a.mode.to_string(),
                fmt(a.tau),
                fmt(a.beta.re),
                fmt(a.beta.im),
                fmt(a.atom_energy),
            ]
        }),
    )?;
    dir.signal("residual.csv", &dsa.residual)
}

fn decompose_cmd(config: &PipelineConfig, input: &Path, output: &Path) -> Result<()> {
    let f = maybe_noisy(read_input(input)?, config)?;
    let dec = decompose(&f, config)?;
    let dir = OutDir::create(output, "decompose", Some(input), config)?;
    write_plane(&dir, &dec.analysis)?;
    write_squeezed(&dir, &dec.analysis.squeezed)?;
    let len = f.len();
    dir.csv(
        "supports.csv",
        &["support", "t", "v", "energy"],
        dec.supports.iter().enumerate().flat_map(|(i, s)| {
            let vg = dec.analysis.squeezed.vgrid();
            let t = &dec.analysis.squeezed;
            s.cells().iter().map(move |&(bin, b)| {
                vec![
                    i.to_string(),
                    fmt(b as f64 / len as f64),
                    fmt(vg.center(bin as usize)),
                    fmt(t.energy(bin as usize, b as usize)),
                ]
            })
        }),
    )?;
    for (i, c) in dec.curves.iter().enumerate() {
        dir.csv(&format!("curves/{i}.csv"), &["t", "if", "weight", "gap"], curve_rows(c))?;
    }
    for (k, shape) in dec.shapes.iter().enumerate() {
        if let Some(s) = shape {
            let n = s.samples.len();
            dir.csv(
                &format!("shapes/{k}.csv"),
                &["theta", "re", "im"],
                s.samples
                    .iter()
                    .enumerate()
                    .map(|(i, z)| vec![fmt(2.0 * std::f64::consts::PI * i as f64 / n as f64), fmt(z.re), fmt(z.im)]),
            )?;
        }
    }
    write_dsa(&dir, &dec.dsa, Some(&dec.modes))?;
    let c = &dec.classification;
    dir.json(
        "classification.json",
        &serde_json::json!({
            "K": c.k,
            "labels": c.labels,
            "sigma": c.sigma,
            "eigenvalues": c.eigenvalues,
            "seed": c.seed,
            "residuals": rows_of(&c.residuals),
            "affinity": rows_of(&c.affinity),
            "fundamentals": dec.fundamentals.iter().map(|e| serde_json::json!({
                "n0": e.n0,
                "lowest": e.lowest,
                "harmonics": e.harmonics,
                "objective": e.objective,
                "confidence": e.confidence,
            })).collect::<Vec<_>>(),
            "config": config,
        }),
    )?;
    dir.json("report.json", &Report::new(&dec))
}

fn rows_of(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<Option<f64>>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| Some(m[(r, c)]).filter(|x| x.is_finite())).collect())
        .collect()
}

/// Second column of a CSV with a header row.
fn read_column(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = rec
            .get(1)
            .with_context(|| format!("{}: row {} has no second column", path.display(), i + 2))?;
        out.push(v.trim().parse().with_context(|| format!("{}: row {}", path.display(), i + 2))?);
    }
    Ok(out)
}

fn dsa_cmd(
    config: &PipelineConfig,
    input: &Path,
    curves: &[PathBuf],
    amplitudes: &[PathBuf],
    output: &Path,
) -> Result<()> {
    let f = maybe_noisy(read_input(input)?, config)?;
    let dir = OutDir::create(output, "dsa", Some(input), config)?;
    if curves.is_empty() {
        let dec = decompose(&f, config)?;
        return write_dsa(&dir, &dec.dsa, None);
    }
    if !amplitudes.is_empty() && amplitudes.len() != curves.len() {
        bail!("give one --amplitude per --curve or none");
    }
    let len = f.len();
    let mut profiles = Vec::new();
    let mut amps = Vec::new();
    for (k, path) in curves.iter().enumerate() {
        let values = read_column(path)?;
        if values.len() != len {
            bail!("{}: {} values for a signal of length {len}", path.display(), values.len());
        }
        profiles.push(make_profile(&IFCurve::from_values(values, k), 1)?);
        amps.push(match amplitudes.get(k) {
            Some(p) => {
                let a = read_column(p)?;
                if a.len() != len {
                    bail!("{}: {} values for a signal of length {len}", p.display(), a.len());
                }
                a
            }
            None => vec![1.0; len],
        });
    }
    let f = prepare(&f);
    let out = pursue(&f, &profiles, &amps, &config.dsa)?;
    write_dsa(&dir, &out, None)
}

fn resolution(config: &PipelineConfig, level: f64, output: Option<&Path>) -> Result<()> {
    let r = gmd::resolution::report(level, config.d, config.s)?;
    match output {
        Some(path) => {
            let (dir, name) = single(path, "resolution", None, config)?;
            dir.json(&name, &r)
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(())
        }
    }
}

fn detrend_cmd(config: &PipelineConfig, input: &Path, output: &Path, trend: &Path) -> Result<()> {
    let (times, f) = read_signal_file(input).with_context(|| format!("reading {}", input.display()))?;
    let (rest, line) = detrend::detrend(&times, f.samples());
    let with_times = |v: Vec<Complex64>, path: &Path| -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(gmd::signal::csv::HEADER)?;
        for (t, z) in times.iter().zip(v) {
            w.write_record([fmt(*t), fmt(z.re), fmt(z.im)])?;
        }
        w.flush()?;
        Ok(())
    };
    with_times(rest, output)?;
    with_times(line, trend)?;
    for path in [output, trend] {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        write_json(
            &sidecar_path(path),
            &serde_json::json!({
                "artifact": name,
                "command": "detrend",
                "input": input.display().to_string(),
                "config": config,
            }),
        )?;
    }
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}
