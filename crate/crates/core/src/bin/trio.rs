use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use ndarray::Array2;
use serde::Serialize;

use trio::evaluate::{
    average_erp, drift_report, epoch, erp_channel_correlation, magnitude_spectrum, peak_amplitudes, roi_snr,
    write_correlation_csv, write_erp_csv, write_spectra_csv,
};
use trio::gradient::detect_gradient_onsets;
use trio::pipeline::{self, cca_stage, gradient_stage, load_config, pulse_stage, PipelineConfig};
use trio::pulse::detect_r_peaks;
use trio::signal::io::{write_json, write_table};
use trio::signal::{load_recording, read_markers_csv, save_recording, write_markers_csv};
use trio::synth::{generate_session, SessionConfig};
use trio::cca::CcaCleaning;
use trio::{ChannelSelector, Error, Recording, Result};

#[derive(Parser)]
#[command(name = "trio", version, about = "Artifact suppression for EEG recorded during real-time MRI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config, or a run report whose parameters are reused.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed (used by `simulate`).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a session with ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Detect gradient artifact onsets.
    GaDetect {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Subtract the gradient artifact.
    GaCorrect {
        #[arg(long = "in")]
        input: PathBuf,
        /// Onset markers to use instead of detection.
        #[arg(long)]
        onsets: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Detect R peaks on the ECG lead.
    Rpeaks {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write flagged beats as `peak_index,sample,reason`.
        #[arg(long)]
        suspects: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Subtract the pulse artifact.
    BcgCorrect {
        #[arg(long = "in")]
        input: PathBuf,
        /// Reviewed R-peak markers to use instead of detection.
        #[arg(long)]
        peaks: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Remove canonical components correlated with EMG/EOG references.
    CcaClean {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        rho: Option<f64>,
        /// Component indices to reject instead of thresholding, e.g. `0,2`.
        #[arg(long, value_delimiter = ',')]
        reject: Option<Vec<usize>>,
        /// Per-component table `index,rho,rejected`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Canonical variate time courses, one column per component.
        #[arg(long)]
        components: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Epoch around markers and average.
    EpochErp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        pre: Option<f64>,
        #[arg(long)]
        post: Option<f64>,
        /// Baseline interval relative to the marker, e.g. `-0.2,0`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        baseline: Option<Vec<f64>>,
        /// Clean reference container; writes `channel,r` to `--correlation`.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        correlation: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Hann-windowed magnitude spectra.
    Spectra {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n_fft: Option<usize>,
        #[arg(long, default_value = "all")]
        channels: String,
        #[command(flatten)]
        common: Common,
    },
    /// Clock drift between MRI frames and EEG triggers.
    Drift {
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        frame_period: f64,
        #[arg(long)]
        span: f64,
        #[command(flatten)]
        common: Common,
    },
    /// ROI signal-to-noise ratio of an image.
    Snr {
        /// Numeric CSV matrix without header.
        #[arg(long)]
        image: PathBuf,
        /// 0/1 CSV mask.
        #[arg(long)]
        roi: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// GA, BCG and CCA in sequence with a JSON report.
    RunAll {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        keep_intermediate: bool,
        #[command(flatten)]
        common: Common,
    },
}

/// Splits `--key=value` arguments that the chosen subcommand does not
/// declare; these become config overrides.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let cmd = Cli::command();
    let sub = args
        .iter()
        .skip(1)
        .find(|a| !a.starts_with('-'))
        .and_then(|name| cmd.find_subcommand(name).cloned());
    let Some(sub) = sub else {
        return (args, Vec::new());
    };
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .chain(["help".to_string()])
        .collect();
    let mut kept = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        if let Some((key, value)) = a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            if !known.iter().any(|k| k == key) {
                overrides.push((key.to_string(), value.to_string()));
                continue;
            }
        }
        kept.push(a);
    }
    (kept, overrides)
}

fn require_out(common: &Common) -> Result<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required".into()))
}

fn no_overrides(overrides: &[(String, String)]) -> Result<()> {
    match overrides.first() {
        Some((k, _)) => Err(Error::Config(format!("unknown option --{k}"))),
        None => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::Format(format!("{}: bad number {v:?}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Format(format!("{}: ragged rows", path.display())));
    }
    let height = rows.len();
    Array2::from_shape_vec((height, width), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Format(e.to_string()))
}

fn read_mask(path: &Path) -> Result<Array2<bool>> {
    Ok(read_matrix(path)?.mapv(|v| v != 0.0))
}

/// Rows `sample,c0,c1,...`; in windowed mode each window uses its own
/// decomposition.
fn write_components(path: &Path, eeg: &Recording, passes: &[CcaCleaning]) -> Result<()> {
    let k = passes.iter().map(|p| p.result.n_components()).max().unwrap_or(0);
    let mut header = vec!["sample".to_string()];
    header.extend((0..k).map(|i| format!("c{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for pass in passes {
        let (lo, hi) = pass.span;
        let part = Recording::new(
            eeg.rate_hz(),
            eeg.channels().to_vec(),
            eeg.data().slice(ndarray::s![.., lo..hi]).to_owned(),
            Default::default(),
        )?;
        let u = pass.result.eeg_components(&part)?;
        for j in 0..u.ncols() {
            let mut row = vec![(lo + j).to_string()];
            row.extend((0..u.nrows()).map(|i| format!("{:.6}", u[(i, j)])));
            rows.push(row);
        }
    }
    write_table(path, &header, &rows)
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg: SessionConfig = load_config(common.config.as_deref(), &overrides)?;
            let out = require_out(&common)?;
            let session = generate_session(&cfg, common.seed)?;
            session.write(out)?;
            write_json(out.join("config.json"), &cfg)?;
            eprintln!(
                "wrote {} ({} channels, {} samples)",
                out.display(),
                session.contaminated.n_channels(),
                session.contaminated.n_samples()
            );
        }
        Command::GaDetect { input, common } => {
            let cfg: PipelineConfig = load_config(common.config.as_deref(), &overrides)?;
            let rec = load_recording(&input)?;
            let onsets = detect_gradient_onsets(&rec, &cfg.gradient)?;
            write_markers_csv(&onsets, require_out(&common)?)?;
            eprintln!("{} onsets", onsets.len());
        }
        Command::GaCorrect { input, onsets, common } => {
            let cfg: PipelineConfig = load_config(common.config.as_deref(), &overrides)?;
            let rec = load_recording(&input)?;
            let onsets = onsets.map(read_markers_csv).transpose()?;
            let (out, report) = gradient_stage(&rec, &cfg.gradient, onsets.as_ref())?;
            save_recording(&out, require_out(&common)?)?;
            print_json(&report);
        }
        Command::Rpeaks { input, suspects, common } => {
            no_overrides(&overrides)?;
            let rec = load_recording(&input)?;
            let report = detect_r_peaks(&rec)?;
            write_markers_csv(&report.peaks, require_out(&common)?)?;
            if let Some(path) = suspects {
                write_table(path, &["peak_index", "sample", "reason"], &report.suspect_rows())?;
            }
            eprintln!(
                "{} peaks, median RR {:.3} s, {} suspect flags",
                report.peaks.len(),
                report.rr_median_s,
                report.suspects.len()
            );
        }
        Command::BcgCorrect { input, peaks, common } => {
            let cfg: PipelineConfig = load_config(common.config.as_deref(), &overrides)?;
            let rec = load_recording(&input)?;
            let peaks = peaks.map(read_markers_csv).transpose()?;
            let (out, report, _) = pulse_stage(&rec, &cfg.pulse, peaks.as_ref())?;
            save_recording(&out, require_out(&common)?)?;
            print_json(&report);
        }
        Command::CcaClean {
            input,
            rho,
            reject,
            report,
            components,
            common,
        } => {
            let mut cfg: PipelineConfig = load_config(common.config.as_deref(), &overrides)?;
            if let Some(rho) = rho {
                cfg.cca.params.rho_threshold = rho;
            }
            if reject.is_some() {
                cfg.cca.reject = reject;
            }
            cfg.cca.params.validate()?;
            let rec = load_recording(&input)?;
            let (out, stage, passes) = cca_stage(&rec, &cfg.cca)?;
            save_recording(&out, require_out(&common)?)?;
            if let Some(path) = report {
                let rows: Vec<Vec<String>> = passes
                    .iter()
                    .enumerate()
                    .flat_map(|(w, pass)| {
                        pass.report().into_iter().map(move |c| {
                            vec![w.to_string(), c.index.to_string(), format!("{:.6}", c.rho), c.rejected.to_string()]
                        })
                    })
                    .collect();
                write_table(path, &["window", "index", "rho", "rejected"], &rows)?;
            }
            if let Some(path) = components {
                write_components(&path, &rec.select_channels(&cfg.cca.eeg)?, &passes)?;
            }
            print_json(&stage);
        }
        Command::EpochErp {
            input,
            label,
            pre,
            post,
            baseline,
            truth,
            correlation,
            common,
        } => {
            let cfg: PipelineConfig = load_config(common.config.as_deref(), &overrides)?;
            let ev = cfg.evaluation;
            let label = label.unwrap_or(ev.epoch_label);
            let (pre, post) = (pre.unwrap_or(ev.pre_s), post.unwrap_or(ev.post_s));
            let baseline = match baseline.as_deref() {
                Some(&[a, b]) => Some((a, b)),
                Some(_) => return Err(Error::InvalidParam("--baseline takes two values, e.g. -0.2,0".into())),
                None => ev.baseline_s,
            };
            let rec = load_recording(&input)?;
            let eps = epoch(&rec, &label, pre, post)?;
            let erp = average_erp(&eps, baseline)?;
            write_erp_csv(require_out(&common)?, &erp, &eps)?;
            let names: Vec<String> = eps.channel_names.clone();
            let peaks = peak_amplitudes(&erp);
            #[derive(Serialize)]
            struct Summary {
                trials: usize,
                dropped: usize,
                peak_uv: Vec<(String, f64)>,
                correlation: Option<trio::evaluate::ErpCorrelation>,
            }
            let mut summary = Summary {
                trials: eps.n_trials(),
                dropped: eps.dropped,
                peak_uv: names.iter().cloned().zip(peaks).collect(),
                correlation: None,
            };
            if let Some(truth) = truth {
                let clean = load_recording(truth)?;
                let selector = ChannelSelector::names(&names);
                let clean = clean.select_channels(&selector)?;
                let teps = epoch(&clean, &label, pre, post)?;
                let terp = average_erp(&teps, baseline)?;
                let corr = erp_channel_correlation(&erp, &terp)?;
                if let Some(path) = correlation {
                    write_correlation_csv(path, &names, &corr)?;
                }
                summary.correlation = Some(corr);
            }
            print_json(&summary);
        }
        Command::Spectra {
            input,
            n_fft,
            channels,
            common,
        } => {
            let cfg: PipelineConfig = load_config(common.config.as_deref(), &overrides)?;
            let n_fft = n_fft.unwrap_or(cfg.evaluation.n_fft);
            let rec = load_recording(&input)?.select_channels(&channels.parse()?)?;
            let spectra = rec
                .channels()
                .iter()
                .enumerate()
                .map(|(i, c)| Ok((c.name.clone(), magnitude_spectrum(&rec.channel(i).to_vec(), rec.rate_hz(), n_fft)?)))
                .collect::<Result<Vec<_>>>()?;
            write_spectra_csv(require_out(&common)?, &spectra)?;
        }
        Command::Drift {
            frames,
            frame_period,
            span,
            common,
        } => {
            no_overrides(&overrides)?;
            let report = drift_report(frames, frame_period, span)?;
            if let Some(out) = &common.out {
                write_json(out, &report)?;
            }
            print_json(&report);
        }
        Command::Snr {
            image,
            roi,
            noise,
            common,
        } => {
            no_overrides(&overrides)?;
            let snr = roi_snr(&read_matrix(&image)?, &read_mask(&roi)?, &read_mask(&noise)?)?;
            let value = serde_json::json!({ "snr": snr });
            if let Some(out) = &common.out {
                write_json(out, &value)?;
            }
            print_json(&value);
        }
        Command::RunAll {
            input,
            report,
            keep_intermediate,
            common,
        } => {
            let mut cfg: PipelineConfig = load_config(common.config.as_deref(), &overrides)?;
            if input.is_some() {
                cfg.input = input;
            }
            if common.out.is_some() {
                cfg.output = common.out;
            }
            if report.is_some() {
                cfg.report = report;
            }
            cfg.keep_intermediate |= keep_intermediate;
            let report = pipeline::run_files(&cfg)?;
            eprintln!("status {}, rejected components {:?}", report.status, report.rejected_components);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("TRIO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second initialisation only happens in tests; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
