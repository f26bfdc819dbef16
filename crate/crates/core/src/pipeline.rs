//! GA → BCG → CCA orchestration, configuration handling and run reports.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cca::{self, CcaCleaning, CcaParams};
use crate::error::{Error, Result};
use crate::evaluate::{artifact_attenuation, max_harmonics, AttenuationSpec};
use crate::gradient::{detect_gradient_onsets, repetition_length, subtract_gradient_artifact, GaParams};
use crate::pulse::{detect_r_peaks, subtract_pulse_artifact, BcgParams, RPeakReport};
use crate::signal::io::write_json;
use crate::signal::{load_recording, read_markers_csv, save_recording, ChannelSelector, MarkerList, Modality, Recording};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    pub gradient: bool,
    pub pulse: bool,
    pub cca: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            gradient: true,
            pulse: true,
            cca: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcaStageConfig {
    #[serde(flatten)]
    pub params: CcaParams,
    /// Explicit component indices; replaces threshold selection when set.
    pub reject: Option<Vec<usize>>,
    pub eeg: ChannelSelector,
    pub refs: ChannelSelector,
}

impl Default for CcaStageConfig {
    fn default() -> Self {
        CcaStageConfig {
            params: CcaParams::default(),
            reject: None,
            eeg: ChannelSelector::Modality(Modality::Eeg),
            refs: ChannelSelector::Modalities(vec![Modality::Emg, Modality::Eog]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub epoch_label: String,
    pub pre_s: f64,
    pub post_s: f64,
    pub baseline_s: Option<(f64, f64)>,
    /// Spectrum length for spectra tables.
    pub n_fft: usize,
    /// GA attenuation uses `n_fft = periods_per_fft × repetition length`, so
    /// every harmonic falls on a bin centre.
    pub ga_periods_per_fft: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            epoch_label: "STIM/*".into(),
            pre_s: 1.0,
            post_s: 1.0,
            baseline_s: None,
            n_fft: 5000,
            ga_periods_per_fft: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub keep_intermediate: bool,
    pub stages: StageToggles,
    pub gradient: GaParams,
    /// Onset markers to use instead of detection.
    pub ga_onsets: Option<PathBuf>,
    pub pulse: BcgParams,
    /// Reviewed R-peak markers to use instead of detection.
    pub r_peaks: Option<PathBuf>,
    pub cca: CcaStageConfig,
    pub evaluation: EvaluationConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.gradient.validate()?;
        self.pulse.validate()?;
        self.cca.params.validate()?;
        let paths: Vec<&PathBuf> = [&self.input, &self.output, &self.report, &self.ga_onsets, &self.r_peaks]
            .into_iter()
            .flatten()
            .collect();
        for (i, a) in paths.iter().enumerate() {
            if paths[i + 1..].contains(a) {
                return Err(Error::Config(format!("path {} is used twice", a.display())));
            }
        }
        if !(self.evaluation.pre_s >= 0.0 && self.evaluation.post_s > 0.0) {
            return Err(Error::Config("evaluation window must have pre >= 0 and post > 0".into()));
        }
        Ok(())
    }

    pub fn any_stage(&self) -> bool {
        self.stages.gradient || self.stages.pulse || self.stages.cca
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDb {
    pub channel: String,
    pub db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub parameters: Value,
    /// Onsets or R-peaks used by the stage.
    pub markers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suspects: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlations: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected_components: Option<Vec<usize>>,
    /// GA: harmonic band power; BCG: cardiac-locked average power; CCA:
    /// variance reduction.
    pub attenuation_db: Vec<ChannelDb>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intermediate: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub rate_hz: f64,
    pub n_channels: usize,
    pub n_samples: usize,
    pub markers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `ok`, `no-op` or `failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    pub parameters: PipelineConfig,
    pub input: InputSummary,
    pub stages: Vec<StageReport>,
    pub rejected_components: Vec<usize>,
    /// Set when a stage failed after earlier outputs were written.
    pub partial: bool,
}

fn params_value<T: Serialize>(p: &T) -> Value {
    serde_json::to_value(p).unwrap_or(Value::Null)
}

fn per_channel(rec: &Recording, db: Vec<f64>, idx: Option<&[usize]>) -> Vec<ChannelDb> {
    let names: Vec<&str> = rec.channels().iter().map(|c| c.name.as_str()).collect();
    db.into_iter()
        .enumerate()
        .filter(|(i, _)| idx.is_none_or(|s| s.contains(i)))
        .map(|(i, db)| ChannelDb {
            channel: names[i].to_string(),
            db,
        })
        .collect()
}

/// Gradient correction. Uses `onsets` when given, detection otherwise. The
/// output is quantized to the stored 32-bit precision and carries the onsets.
pub fn gradient_stage(rec: &Recording, params: &GaParams, onsets: Option<&MarkerList>) -> Result<(Recording, StageReport)> {
    let onsets = match onsets {
        Some(m) => m.clone(),
        None => detect_gradient_onsets(rec, params)?,
    };
    let out = subtract_gradient_artifact(rec, &onsets, params)?;
    let mut markers = out.markers().clone();
    markers.merge(&onsets);
    let out = out.with_markers(markers)?.quantized_f32();

    let mut attenuation = Vec::new();
    if let Some(len) = repetition_length(&onsets) {
        let n_fft = len * 50;
        let f0 = rec.rate_hz() / len as f64;
        let n_h = max_harmonics(f0, rec.rate_hz(), n_fft);
        if rec.n_samples() >= n_fft && n_h > 0 {
            let spec = AttenuationSpec::Harmonic {
                f0_hz: f0,
                n_harmonics: n_h,
                n_fft,
            };
            let idx = params.channels.resolve(rec.channels())?;
            attenuation = per_channel(rec, artifact_attenuation(rec, &out, &spec)?, Some(&idx));
        }
    }
    Ok((
        out,
        StageReport {
            stage: "gradient".into(),
            parameters: params_value(params),
            markers: onsets.len(),
            suspects: None,
            correlations: None,
            rejected_components: None,
            attenuation_db: attenuation,
            intermediate: None,
        },
    ))
}

/// Pulse correction with detected or supplied R peaks.
pub fn pulse_stage(
    rec: &Recording,
    params: &BcgParams,
    peaks: Option<&MarkerList>,
) -> Result<(Recording, StageReport, Option<RPeakReport>)> {
    let (peaks, report) = match peaks {
        Some(p) => (p.clone(), None),
        None => {
            let r = detect_r_peaks(rec)?;
            (r.peaks.clone(), Some(r))
        }
    };
    let out = subtract_pulse_artifact(rec, &peaks, params)?;
    let mut markers = out.markers().clone();
    markers.merge(&peaks);
    let out = out.with_markers(markers)?.quantized_f32();

    let s = peaks.samples();
    let rr = if s.len() > 1 {
        let iv: Vec<f64> = s.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        crate::stats::median(&iv) / rec.rate_hz()
    } else {
        1.0
    };
    let spec = AttenuationSpec::CardiacLocked {
        peaks: peaks.clone(),
        pre_s: 0.0,
        post_s: rr,
    };
    let idx: Vec<usize> = params
        .channels
        .resolve(rec.channels())?
        .into_iter()
        .filter(|&i| rec.channels()[i].modality != Modality::Ecg)
        .collect();
    let attenuation = per_channel(rec, artifact_attenuation(rec, &out, &spec)?, Some(&idx));
    Ok((
        out,
        StageReport {
            stage: "pulse".into(),
            parameters: params_value(params),
            markers: peaks.len(),
            suspects: report.as_ref().map(|r| r.suspects.len()),
            correlations: None,
            rejected_components: None,
            attenuation_db: attenuation,
            intermediate: None,
        },
        report,
    ))
}

/// CCA cleaning of the EEG block against the reference block.
pub fn cca_stage(rec: &Recording, cfg: &CcaStageConfig) -> Result<(Recording, StageReport, Vec<CcaCleaning>)> {
    let eeg = rec.select_channels(&cfg.eeg)?;
    let refs = rec.select_channels(&cfg.refs)?;
    let (cleaned, passes) = match (cfg.params.window_s, &cfg.reject) {
        (Some(_), None) => cca::clean_windowed(&eeg, &refs, &cfg.params)?,
        (Some(_), Some(_)) => {
            return Err(Error::Config("manual rejection applies to whole-segment CCA only".into()));
        }
        (None, manual) => {
            let pass = cca::clean(&eeg, &refs, &cfg.params, manual.as_deref())?;
            (pass.cleaned.clone(), vec![pass])
        }
    };
    let out = rec.replace_channels(&cleaned)?.quantized_f32();
    let db: Vec<f64> = eeg
        .data()
        .outer_iter()
        .zip(cleaned.data().outer_iter())
        .map(|(a, b)| {
            let va = variance(a.iter());
            let vb = variance(b.iter());
            if vb <= 0.0 {
                crate::evaluate::ATTENUATION_CAP_DB
            } else {
                10.0 * (va / vb).log10()
            }
        })
        .collect();
    let mut rejected: Vec<usize> = passes.iter().flat_map(|p| p.rejected.iter().copied()).collect();
    rejected.sort_unstable();
    rejected.dedup();
    let report = StageReport {
        stage: "cca".into(),
        parameters: params_value(cfg),
        markers: 0,
        suspects: None,
        correlations: passes.first().map(|p| p.result.correlations.clone()),
        rejected_components: Some(rejected),
        attenuation_db: per_channel(&eeg, db, None),
        intermediate: None,
    };
    Ok((out, report, passes))
}

fn variance<'a>(x: impl Iterator<Item = &'a f64>) -> f64 {
    let v: Vec<f64> = x.copied().collect();
    let m = crate::stats::mean(&v);
    v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len().max(1) as f64
}

/// Outcome of a pipeline run held in memory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: RunReport,
    pub output: Recording,
    /// Output of each executed stage, in order.
    pub intermediates: Vec<(String, Recording)>,
}

/// A failed run: the error, the report so far and the stage outputs that
/// completed.
#[derive(Debug)]
pub struct PipelineFailure {
    pub error: Error,
    pub report: RunReport,
    pub intermediates: Vec<(String, Recording)>,
}

fn summary(rec: &Recording) -> InputSummary {
    InputSummary {
        rate_hz: rec.rate_hz(),
        n_channels: rec.n_channels(),
        n_samples: rec.n_samples(),
        markers: rec.markers().len(),
    }
}

/// Runs the enabled stages in the fixed order GA → BCG → CCA.
pub fn run_pipeline(input: &Recording, cfg: &PipelineConfig) -> std::result::Result<PipelineRun, Box<PipelineFailure>> {
    let mut report = RunReport {
        status: "ok".into(),
        error: None,
        failed_stage: None,
        parameters: cfg.clone(),
        input: summary(input),
        stages: Vec::new(),
        rejected_components: Vec::new(),
        partial: false,
    };
    let mut intermediates: Vec<(String, Recording)> = Vec::new();
    let fail = |stage: &str, error: Error, mut report: RunReport, intermediates: Vec<(String, Recording)>| {
        report.status = "failed".into();
        report.error = Some(error.to_string());
        report.failed_stage = Some(stage.to_string());
        report.partial = !intermediates.is_empty();
        Box::new(PipelineFailure {
            error,
            report,
            intermediates,
        })
    };
    if let Err(e) = cfg.validate() {
        return Err(fail("config", e, report, intermediates));
    }
    if !cfg.any_stage() {
        report.status = "no-op".into();
        return Ok(PipelineRun {
            report,
            output: input.clone(),
            intermediates,
        });
    }

    let mut rec = input.clone();
    if cfg.stages.gradient {
        let onsets = match cfg.ga_onsets.as_ref().map(read_markers_csv).transpose() {
            Ok(o) => o,
            Err(e) => return Err(fail("gradient", e, report, intermediates)),
        };
        match gradient_stage(&rec, &cfg.gradient, onsets.as_ref()) {
            Ok((out, stage)) => {
                report.stages.push(stage);
                rec = out;
                intermediates.push(("gradient".into(), rec.clone()));
            }
            Err(e) => return Err(fail("gradient", e, report, intermediates)),
        }
    }
    if cfg.stages.pulse {
        let peaks = match cfg.r_peaks.as_ref().map(read_markers_csv).transpose() {
            Ok(p) => p,
            Err(e) => return Err(fail("pulse", e, report, intermediates)),
        };
        match pulse_stage(&rec, &cfg.pulse, peaks.as_ref()) {
            Ok((out, stage, _)) => {
                report.stages.push(stage);
                rec = out;
                intermediates.push(("pulse".into(), rec.clone()));
            }
            Err(e) => return Err(fail("pulse", e, report, intermediates)),
        }
    }
    if cfg.stages.cca {
        match cca_stage(&rec, &cfg.cca) {
            Ok((out, stage, _)) => {
                report.rejected_components = stage.rejected_components.clone().unwrap_or_default();
                report.stages.push(stage);
                rec = out;
                intermediates.push(("cca".into(), rec.clone()));
            }
            Err(e) => return Err(fail("cca", e, report, intermediates)),
        }
    }
    Ok(PipelineRun {
        report,
        output: rec,
        intermediates,
    })
}

/// Loads `cfg.input`, runs, writes `cfg.output`, the optional stage
/// containers next to it, and the JSON report (also on failure).
pub fn run_files(cfg: &PipelineConfig) -> Result<RunReport> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input path".into()))?;
    let output = cfg
        .output
        .as_ref()
        .ok_or_else(|| Error::Config("no output path".into()))?;
    let report_path = cfg.report.clone().unwrap_or_else(|| sibling(output, "report.json"));
    let rec = load_recording(input)?;
    let write_stages = |stages: &mut [StageReport], inter: &[(String, Recording)]| -> Result<()> {
        if !cfg.keep_intermediate {
            return Ok(());
        }
        for (name, r) in inter {
            let path = sibling(output, &format!("stage_{name}"));
            save_recording(r, &path)?;
            if let Some(s) = stages.iter_mut().find(|s| &s.stage == name) {
                s.intermediate = Some(path);
            }
        }
        Ok(())
    };
    match run_pipeline(&rec, cfg) {
        Ok(mut run) => {
            write_stages(&mut run.report.stages, &run.intermediates)?;
            save_recording(&run.output, output)?;
            write_json(&report_path, &run.report)?;
            Ok(run.report)
        }
        Err(failure) => {
            let PipelineFailure {
                error,
                mut report,
                intermediates,
            } = *failure;
            write_stages(&mut report.stages, &intermediates)?;
            write_json(&report_path, &report)?;
            Err(error)
        }
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    let stem = path.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{name}"))
}

/// Reads a JSON config (or a run report, whose `parameters` are used) and
/// applies `key=value` overrides, where `key` is a dotted field path.
pub fn load_config<T: DeserializeOwned + Serialize + Default>(path: Option<&Path>, overrides: &[(String, String)]) -> Result<T> {
    let mut value = match path {
        None => serde_json::to_value(T::default()).map_err(|e| Error::Config(e.to_string()))?,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let mut v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            if let Some(params) = v.get("parameters").filter(|_| v.get("status").is_some()) {
                v = params.clone();
            }
            // fill absent fields with defaults so overrides can address them
            let parsed: T = serde_json::from_value(v).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::to_value(parsed).map_err(|e| Error::Config(e.to_string()))?
        }
    };
    for (k, v) in overrides {
        apply_override(&mut value, k, v)?;
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Sets the dotted `key` in `value`. `raw` is parsed as JSON when possible
/// and taken as a string otherwise. Unknown keys are an error, except that a
/// `null` leaf (an unset optional) may be filled.
pub fn apply_override(value: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {} is not an object", parts[..i].join("."))))?;
        if !obj.contains_key(*part) {
            return Err(Error::Config(format!("unknown config key {key}")));
        }
        if i + 1 == parts.len() {
            let slot = obj.get_mut(*part).expect("checked");
            // strings stay strings even when they look like numbers
            *slot = match (&*slot, parsed) {
                (Value::String(_), Value::Number(n)) => Value::String(n.to_string()),
                (_, p) => p,
            };
            return Ok(());
        }
        cur = obj.get_mut(*part).expect("checked");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_session, GradientConfig, ProtocolConfig, SessionConfig};

    fn small_session() -> Recording {
        let cfg = SessionConfig {
            rate_hz: 1000.0,
            protocol: ProtocolConfig {
                n_trials: 4,
                rest_s: 30.0,
                ..ProtocolConfig::default()
            },
            gradient: GradientConfig {
                period_samples: 40,
                ..GradientConfig::default()
            },
            ..SessionConfig::default()
        };
        generate_session(&cfg, 7).unwrap().contaminated.quantized_f32()
    }

    #[test]
    fn all_stages_off_is_a_no_op() {
        let rec = small_session();
        let cfg = PipelineConfig {
            stages: StageToggles {
                gradient: false,
                pulse: false,
                cca: false,
            },
            ..PipelineConfig::default()
        };
        let run = run_pipeline(&rec, &cfg).unwrap();
        assert_eq!(run.report.status, "no-op");
        assert_eq!(run.output, rec);
    }

    #[test]
    fn full_run_reports_every_stage() {
        let rec = small_session();
        let run = run_pipeline(&rec, &PipelineConfig::default()).unwrap();
        let names: Vec<&str> = run.report.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(names, vec!["gradient", "pulse", "cca"]);
        assert_eq!(run.intermediates.len(), 3);
        assert!(run.report.stages[0].markers > 100);
        assert!(run.report.stages[0].attenuation_db.iter().all(|c| c.db > 20.0), "{:?}", run.report.stages[0].attenuation_db);
        assert_eq!(run.report.stages[2].correlations.as_ref().unwrap().len(), 5);
        assert_eq!(run.output.n_samples(), rec.n_samples());
    }

    #[test]
    fn chained_stages_equal_the_full_run() {
        let rec = small_session();
        let cfg = PipelineConfig::default();
        let full = run_pipeline(&rec, &cfg).unwrap().output;
        let (a, _) = gradient_stage(&rec, &cfg.gradient, None).unwrap();
        let (b, _, _) = pulse_stage(&a, &cfg.pulse, None).unwrap();
        let (c, _, _) = cca_stage(&b, &cfg.cca).unwrap();
        assert_eq!(c, full);
    }

    #[test]
    fn stage_failure_is_reported_with_partial_outputs() {
        let rec = small_session();
        let mut cfg = PipelineConfig::default();
        cfg.cca.eeg = ChannelSelector::names(&["Z9"]);
        let failure = run_pipeline(&rec, &cfg).unwrap_err();
        assert_eq!(failure.report.status, "failed");
        assert_eq!(failure.report.failed_stage.as_deref(), Some("cca"));
        assert!(failure.report.partial);
        assert_eq!(failure.intermediates.len(), 2);
    }

    #[test]
    fn overrides_address_nested_fields() {
        let cfg: PipelineConfig = load_config(
            None,
            &[
                ("gradient.window_reps".into(), "31".into()),
                ("cca.rho_threshold".into(), "0.5".into()),
                ("cca.refs".into(), "EMG".into()),
                ("gradient.detection_channel".into(), "C3".into()),
                ("stages.cca".into(), "false".into()),
                ("gradient.expected_period_s".into(), "0.0202".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.gradient.window_reps, 31);
        assert_eq!(cfg.cca.params.rho_threshold, 0.5);
        assert_eq!(cfg.cca.refs, ChannelSelector::Modality(Modality::Emg));
        assert_eq!(cfg.gradient.detection_channel, "C3");
        assert!(!cfg.stages.cca);
        assert_eq!(cfg.gradient.expected_period_s, Some(0.0202));
        let bad: Result<PipelineConfig> = load_config(None, &[("gradient.nope".into(), "1".into())]);
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn report_parameters_reload_as_config() {
        let rec = small_session();
        let mut cfg = PipelineConfig::default();
        cfg.gradient.window_reps = 15;
        let run = run_pipeline(&rec, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_json(&path, &run.report).unwrap();
        let back: PipelineConfig = load_config(Some(&path), &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(run_pipeline(&rec, &back).unwrap().output, run.output);
    }

    #[test]
    fn duplicate_paths_are_rejected() {
        let cfg = PipelineConfig {
            input: Some("a".into()),
            output: Some("a".into()),
            ..PipelineConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
