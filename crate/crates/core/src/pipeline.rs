//! End-to-end decomposition: transform, squeeze, ridges, classification,
//! mode reconstruction and warped spectral pursuit.

use serde::{Deserialize, Serialize};

use crate::classify::{classify, fundamental, CurveClassification, FundamentalEstimate, SigmaPolicy, DEFAULT_SEARCH_CAP, DEFAULT_SEED};
use crate::dsa::{make_profile, pursue, DsaConfig, DsaResult, PhaseProfile};
use crate::error::{invalid, Result};
use crate::gmdwp::{reconstruct_mode, shape_estimate, ModeEstimate, ShapeEstimate};
use crate::ridges::{condense, extract_supports, refine_curves, retain_persistent, smooth, IFCurve, RidgeSupport, DEFAULT_FLOOR, DEFAULT_LEVEL};
use crate::signal::{SampledSignal, DEFAULT_SAMPLES};
use crate::squeeze::{if_info, squeeze, IfInfo, SqueezedPlane, VGrid, DEFAULT_EPSILON};
use crate::wavepacket::{
    build_mother, energy_ratio, forward, make_ladder, EnergyRatio, WavePacketPlane, DEFAULT_OVERLAP, DEFAULT_RADIUS,
    DEFAULT_SCALING,
};

/// Default low-pass cutoff (cycles per unit time) applied to condensed
/// instantaneous frequency curves.
pub const DEFAULT_SMOOTHING: f64 = 8.0;
/// Default minimum time coverage of a support.
pub const DEFAULT_COVERAGE: f64 = 0.9;

/// Every tunable of the pipeline, with the experiment defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub s: f64,
    pub d: f64,
    /// Relative overlap of neighbouring ladder bands.
    pub overlap: f64,
    pub epsilon: f64,
    /// Sample count used when generating fixtures.
    pub samples: usize,
    /// Width of the squeezed-plane frequency bins.
    pub vbin: f64,
    pub ridge_level: f64,
    pub ridge_floor: f64,
    /// Fraction of the time axis a support must cover to be kept.
    pub ridge_coverage: f64,
    /// Re-estimate IF curves from the exact `Re v_f` of cells that see a
    /// single ridge, instead of squeezed bin centres.
    pub precise_curves: bool,
    /// Low-pass cutoff for IF curves; `None` keeps the raw curves.
    pub smoothing: Option<f64>,
    pub sigma: SigmaPolicy,
    /// Upper bound `M` of the harmonic-index search.
    pub search_cap: usize,
    /// Use the least-squares fundamental over all curves of a class
    /// instead of `ψ₁/n₀` alone.
    pub refine_fundamental: bool,
    pub dsa: DsaConfig,
    pub seed: u64,
    /// Noise level added by `generate`; `None` for a clean signal.
    pub snr_db: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            s: DEFAULT_SCALING,
            d: DEFAULT_RADIUS,
            overlap: DEFAULT_OVERLAP,
            epsilon: DEFAULT_EPSILON,
            samples: DEFAULT_SAMPLES,
            vbin: 1.0,
            ridge_level: DEFAULT_LEVEL,
            ridge_floor: DEFAULT_FLOOR,
            ridge_coverage: DEFAULT_COVERAGE,
            precise_curves: true,
            smoothing: Some(DEFAULT_SMOOTHING),
            sigma: SigmaPolicy::default(),
            search_cap: DEFAULT_SEARCH_CAP,
            refine_fundamental: true,
            dsa: DsaConfig::default(),
            seed: DEFAULT_SEED,
            snr_db: None,
        }
    }
}

/// The transform stage: plane, `v_f` and squeezed plane.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub plane: WavePacketPlane,
    pub vf: IfInfo,
    pub squeezed: SqueezedPlane,
    pub energy: Option<EnergyRatio>,
}

/// Prepare a signal for analysis: real input is replaced by its analytic
/// counterpart so that every harmonic is a single positive frequency.
pub fn prepare(f: &SampledSignal) -> SampledSignal {
    if f.is_real() {
        f.to_analytic()
    } else {
        f.clone()
    }
}

pub fn analyze(f: &SampledSignal, config: &PipelineConfig) -> Result<Analysis> {
    let mother = build_mother(config.d)?;
    let ladder = make_ladder(f.len(), config.s, config.d, config.overlap)?;
    let plane = forward(f, &mother, &ladder)?;
    let vf = if_info(&plane)?;
    let squeezed = squeeze(&plane, &vf, config.epsilon, VGrid::covering(f.len(), config.vbin)?)?;
    let energy = energy_ratio(&plane, f).ok();
    Ok(Analysis {
        plane,
        vf,
        squeezed,
        energy,
    })
}

/// Supports and their (optionally smoothed) IF curves.
pub fn ridge_curves(analysis: &Analysis, config: &PipelineConfig) -> Result<(Vec<RidgeSupport>, Vec<IFCurve>)> {
    let squeezed = &analysis.squeezed;
    let supports = extract_supports(squeezed, config.ridge_level, config.ridge_floor)?;
    let supports = retain_persistent(supports, squeezed.len(), config.ridge_coverage)?;
    let mut curves: Vec<IFCurve> = supports.iter().map(|s| condense(squeezed, s)).collect();
    if config.precise_curves {
        curves = refine_curves(&analysis.plane, &analysis.vf, squeezed, &supports, &curves)?;
    }
    let curves = curves
        .into_iter()
        .map(|c| {
            match config.smoothing {
                Some(cut) => smooth(&c, cut),
                None => Ok(c),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((supports, curves))
}

/// Everything the pipeline computes.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub config: PipelineConfig,
    pub input: SampledSignal,
    pub analysis: Analysis,
    pub supports: Vec<RidgeSupport>,
    pub curves: Vec<IFCurve>,
    pub classification: CurveClassification,
    pub fundamentals: Vec<FundamentalEstimate>,
    pub modes: Vec<ModeEstimate>,
    pub shapes: Vec<Option<ShapeEstimate>>,
    pub profiles: Vec<PhaseProfile>,
    pub dsa: DsaResult,
    pub warnings: Vec<String>,
}

impl Decomposition {
    /// The fundamental curve used downstream for class `k`.
    pub fn fundamental_curve(&self, k: usize) -> &IFCurve {
        &self.modes[k].fundamental
    }
}

/// Floor for DSA amplitudes relative to their maximum.
const AMP_CLAMP: f64 = 1e-3;

pub fn decompose(f: &SampledSignal, config: &PipelineConfig) -> Result<Decomposition> {
    if config.search_cap < 1 {
        return Err(invalid("search_cap", "must be at least 1"));
    }
    let input = prepare(f);
    let analysis = analyze(&input, config)?;
    let mut warnings: Vec<String> = analysis.squeezed.warnings().to_vec();
    if let Some(e) = &analysis.energy {
        if e.low_frequency_warning {
            warnings.push("signal carries energy below the first ladder band".into());
        }
    }
    let (supports, curves) = ridge_curves(&analysis, config)?;
    let classification = classify(&curves, config.sigma, config.seed)?;
    let classes = classification.classes();

    let mut fundamentals = Vec::with_capacity(classes.len());
    let mut modes = Vec::with_capacity(classes.len());
    let mut shapes = Vec::with_capacity(classes.len());
    let mut profiles = Vec::with_capacity(classes.len());
    let mut amps = Vec::with_capacity(classes.len());
    for (k, members) in classes.iter().enumerate() {
        let class_curves: Vec<IFCurve> = members.iter().map(|&i| curves[i].clone()).collect();
        let est = fundamental(&class_curves, config.search_cap)?;
        let curve = if config.refine_fundamental {
            est.refined.clone()
        } else {
            est.fundamental.clone()
        };
        let class_supports: Vec<&RidgeSupport> = members.iter().map(|&i| &supports[i]).collect();
        let mode = reconstruct_mode(
            &analysis.plane,
            &analysis.vf,
            &analysis.squeezed,
            &class_supports,
            &curve,
        )?;
        warnings.extend(mode.warnings.iter().map(|w| format!("mode {k}: {w}")));
        match shape_estimate(&mode) {
            Ok(s) => shapes.push(Some(s)),
            Err(e) => {
                warnings.push(format!("mode {k}: no shape estimate: {e}"));
                shapes.push(None);
            }
        }
        profiles.push(make_profile(&curve, 1)?);
        let max = mode.amplitude.iter().cloned().fold(0.0, f64::max);
        let floor = AMP_CLAMP * max;
        if max <= 0.0 {
            return Err(invalid("amplitude", format!("mode {k} has zero amplitude")));
        }
        let clamped = mode.amplitude.iter().filter(|&&a| a < floor).count();
        if clamped > 0 {
            warnings.push(format!("mode {k}: amplitude clamped at {clamped} samples"));
        }
        let amp: Vec<f64> = mode.amplitude.iter().map(|&a| a.max(floor)).collect();
        let amp = match config.smoothing {
            Some(cut) => smooth(&IFCurve::from_values(amp, k), cut)?
                .values
                .into_iter()
                .map(|a| a.max(floor))
                .collect(),
            None => amp,
        };
        amps.push(amp);
        fundamentals.push(est);
        modes.push(mode);
    }
    let dsa = pursue(&input, &profiles, &amps, &config.dsa)?;
    if !dsa.ill_conditioned.is_empty() {
        warnings.push(format!(
            "{} pursuit iterations found two profiles peaking on the same bin",
            dsa.ill_conditioned.len()
        ));
    }
    Ok(Decomposition {
        config: config.clone(),
        input,
        analysis,
        supports,
        curves,
        classification,
        fundamentals,
        modes,
        shapes,
        profiles,
        dsa,
        warnings,
    })
}

/// Summary of one class in the report.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub curves: Vec<usize>,
    pub n0: usize,
    pub harmonics: Vec<i64>,
    pub confidence: crate::classify::Confidence,
    pub fundamental_mean: f64,
    pub gmdwp_terms: usize,
    pub dsa_atoms: usize,
    pub dominant_harmonic: Option<i64>,
}

/// Machine-readable run summary.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    #[serde(rename = "K")]
    pub k: usize,
    pub labels: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    pub sigma: f64,
    pub supports: usize,
    pub support_mean_frequencies: Vec<f64>,
    pub classes: Vec<ClassReport>,
    pub energy: Option<EnergyRatio>,
    pub retained_energy: f64,
    pub squeezed_total: f64,
    pub dsa_iterations: usize,
    pub dsa_stop: crate::dsa::StopReason,
    pub residual_norm_history: Vec<f64>,
    pub ill_conditioned_iterations: Vec<usize>,
    pub warnings: Vec<String>,
    pub config: PipelineConfig,
}

impl Report {
    pub fn new(dec: &Decomposition) -> Self {
        let classes = dec
            .classification
            .classes()
            .into_iter()
            .enumerate()
            .map(|(k, curves)| {
                let est = &dec.fundamentals[k];
                ClassReport {
                    n0: est.n0,
                    harmonics: est.harmonics.clone(),
                    confidence: est.confidence,
                    fundamental_mean: dec.modes[k].fundamental.mean(),
                    gmdwp_terms: dec.modes[k].per_term.len(),
                    dsa_atoms: dec.dsa.tables[k].entries.len(),
                    dominant_harmonic: dec.shapes[k].as_ref().map(|s| s.dominant_harmonic),
                    curves,
                }
            })
            .collect();
        Self {
            k: dec.classification.k,
            labels: dec.classification.labels.clone(),
            eigenvalues: dec.classification.eigenvalues.clone(),
            sigma: dec.classification.sigma,
            supports: dec.supports.len(),
            support_mean_frequencies: dec.supports.iter().map(|s| s.mean_frequency()).collect(),
            classes,
            energy: dec.analysis.energy,
            retained_energy: dec.analysis.squeezed.retained_energy(),
            squeezed_total: dec.analysis.squeezed.total(),
            dsa_iterations: dec.dsa.iterations,
            dsa_stop: dec.dsa.stop,
            residual_norm_history: dec.dsa.residual_norm_history.clone(),
            ill_conditioned_iterations: dec.dsa.ill_conditioned.clone(),
            warnings: dec.warnings.clone(),
            config: dec.config.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::fixtures;

    #[test]
    fn config_round_trips_and_fills_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"d": 0.5, "dsa": {"max_iter": 7}}"#).unwrap();
        assert_eq!(c.d, 0.5);
        assert_eq!(c.s, 2.0 / 3.0);
        assert_eq!(c.dsa.max_iter, 7);
        assert_eq!(c.dsa.stop_fraction, 1e-3);
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn defaults_match_experiments() {
        let c = PipelineConfig::default();
        assert_eq!((c.s, c.d, c.epsilon, c.samples), (2.0 / 3.0, 1.0, 1e-6, 8192));
    }

    #[test]
    fn pure_tone_is_one_mode() {
        let f = fixtures::harmonic(64.0, 2048).signal().unwrap();
        let dec = decompose(&f, &PipelineConfig::default()).unwrap();
        assert_eq!(dec.classification.k, 1);
        assert!(dec.dsa.modes[0].relative_error(&f) <= 1e-3);
        assert!(dec.modes[0].signal.relative_error(&f) <= 1e-3);
        let report = Report::new(&dec);
        assert_eq!(report.k, 1);
        assert!(serde_json::to_string(&report).is_ok());
    }
}
