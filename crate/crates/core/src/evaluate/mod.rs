//! Evaluation: epochs and ERPs, spectra, attenuation, drift and ROI SNR,
//! plus CSV writers for each table.

mod epoch;
mod metrics;
mod spectrum;

use std::path::Path;

use ndarray::Array2;

pub use epoch::{average_erp, epoch, erp_channel_correlation, peak_amplitudes, EpochSet, ErpCorrelation};
pub use metrics::{
    artifact_attenuation, drift_report, estimate_drift, locked_average, roi_snr, AttenuationSpec, DriftReport,
    ATTENUATION_CAP_DB,
};
pub use spectrum::{harmonic_power, magnitude_spectrum, max_harmonics, Spectrum, Window};

use crate::error::Result;
use crate::signal::io::write_table;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per sample: `time_s` followed by one column per channel.
pub fn write_erp_csv(path: impl AsRef<Path>, erp: &Array2<f64>, epochs: &EpochSet) -> Result<()> {
    let mut header = vec!["time_s"];
    header.extend(epochs.channel_names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = (0..erp.ncols())
        .map(|j| {
            let mut row = vec![epochs.time_s(j).to_string()];
            row.extend(erp.column(j).iter().map(|v| v.to_string()));
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

/// `freq_hz` then one magnitude column per named spectrum (same n_fft).
pub fn write_spectra_csv(path: impl AsRef<Path>, spectra: &[(String, Spectrum)]) -> Result<()> {
    let mut header = vec!["freq_hz"];
    header.extend(spectra.iter().map(|(n, _)| n.as_str()));
    let freqs = spectra.first().map(|(_, s)| s.freqs_hz.clone()).unwrap_or_default();
    let rows: Vec<Vec<String>> = freqs
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let mut row = vec![f.to_string()];
            row.extend(spectra.iter().map(|(_, s)| s.magnitude[k].to_string()));
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

/// `channel,r` rows plus trailing `mean` and `sd` rows.
pub fn write_correlation_csv(path: impl AsRef<Path>, channels: &[String], corr: &ErpCorrelation) -> Result<()> {
    let mut rows: Vec<Vec<String>> = channels
        .iter()
        .zip(&corr.per_channel)
        .map(|(c, r)| vec![c.clone(), opt(*r)])
        .collect();
    rows.push(vec!["mean".into(), opt(corr.mean)]);
    rows.push(vec!["sd".into(), opt(corr.sd)]);
    write_table(path, &["channel", "r"], &rows)
}

pub fn write_attenuation_csv(path: impl AsRef<Path>, channels: &[String], db: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = channels
        .iter()
        .zip(db)
        .map(|(c, d)| vec![c.clone(), d.to_string()])
        .collect();
    write_table(path, &["channel", "attenuation_db"], &rows)
}
