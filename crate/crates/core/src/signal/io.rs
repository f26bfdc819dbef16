//! TRIO container I/O.
//!
//! A container is a directory holding
//!
//! * `header.json`: `{"rate_hz": .., "channels": [{"name", "modality", "unit"}], "n_samples": ..}`
//! * `data.f32`: little-endian `f32`, sample-major (frame `t` holds channels `0..C`)
//! * `markers.csv`: header `sample,label`, one row per marker
//!
//! Small fixtures can also be imported from plain CSV (optional leading time
//! column, one column per channel).

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::recording::{ChannelInfo, Marker, MarkerList, Modality, Recording};
use crate::error::{Error, Result};

pub const HEADER_FILE: &str = "header.json";
pub const DATA_FILE: &str = "data.f32";
pub const MARKERS_FILE: &str = "markers.csv";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    rate_hz: f64,
    channels: Vec<ChannelInfo>,
    n_samples: usize,
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let dir = path.as_ref();
    let header_path = dir.join(HEADER_FILE);
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let header: Header = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", header_path.display())))?;

    let data_path = dir.join(DATA_FILE);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let n_ch = header.channels.len();
    let expected = n_ch * header.n_samples;
    if bytes.len() % 4 != 0 || bytes.len() / 4 != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: bytes.len() / 4,
        });
    }

    let mut data = Array2::<f64>::zeros((n_ch, header.n_samples));
    for (k, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let (t, c) = (k / n_ch, k % n_ch);
        if !v.is_finite() {
            return Err(Error::NonFinite { channel: c, sample: t });
        }
        data[[c, t]] = v as f64;
    }

    let markers_path = dir.join(MARKERS_FILE);
    let markers = if markers_path.exists() {
        read_markers_csv(&markers_path)?
    } else {
        MarkerList::new()
    };
    Recording::new(header.rate_hz, header.channels, data, markers)
}

pub fn save_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    if let Some((channel, sample)) = rec.find_non_finite() {
        return Err(Error::NonFinite { channel, sample });
    }
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let header = Header {
        rate_hz: rec.rate_hz(),
        channels: rec.channels().to_vec(),
        n_samples: rec.n_samples(),
    };
    let header_path = dir.join(HEADER_FILE);
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&header_path, text).map_err(|e| Error::io(&header_path, e))?;

    let data = rec.data();
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for t in 0..rec.n_samples() {
        for c in 0..rec.n_channels() {
            bytes.extend_from_slice(&(data[[c, t]] as f32).to_le_bytes());
        }
    }
    let data_path = dir.join(DATA_FILE);
    fs::write(&data_path, bytes).map_err(|e| Error::io(&data_path, e))?;

    write_markers_csv(rec.markers(), dir.join(MARKERS_FILE))
}

pub fn read_markers_csv(path: impl AsRef<Path>) -> Result<MarkerList> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || &headers[0] != "sample" || &headers[1] != "label" {
        return Err(Error::Format(format!(
            "{}: expected header `sample,label`",
            path.display()
        )));
    }
    let mut markers = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let sample: usize = row[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad sample {:?}", path.display(), &row[0])))?;
        markers.push(Marker::new(sample, row[1].to_string()));
    }
    MarkerList::from_sorted(markers)
}

pub fn write_markers_csv(markers: &MarkerList, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["sample", "label"]).map_err(|e| csv_error(path, e))?;
    for m in markers {
        w.write_record([m.sample.to_string(), m.label.clone()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Imports a small CSV fixture. The header names the channels; a first column
/// named `time`/`t`/`time_s` is taken as timestamps and dropped. Channel
/// modalities are guessed from the name prefix (`EOG`, `EMG`, `ECG`), else EEG.
pub fn import_csv(path: impl AsRef<Path>, rate_hz: Option<f64>) -> Result<Recording> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let has_time = headers
        .first()
        .map(|h| matches!(h.to_ascii_lowercase().as_str(), "time" | "t" | "time_s"))
        .unwrap_or(false);
    let names = if has_time { &headers[1..] } else { &headers[..] };
    if names.is_empty() {
        return Err(Error::Format(format!("{}: no channel columns", path.display())));
    }

    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let mut fields = row.iter();
        if has_time {
            let t: f64 = parse_field(path, fields.next())?;
            times.push(t);
        }
        for col in columns.iter_mut() {
            col.push(parse_field(path, fields.next())?);
        }
    }

    let rate_hz = match (rate_hz, times.len()) {
        (Some(r), _) => r,
        (None, n) if n >= 2 => (n - 1) as f64 / (times[n - 1] - times[0]),
        _ => {
            return Err(Error::Format(format!(
                "{}: sampling rate not given and no time column",
                path.display()
            )))
        }
    };

    let n = columns[0].len();
    let mut data = Array2::zeros((names.len(), n));
    for (c, col) in columns.iter().enumerate() {
        for (t, &v) in col.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { channel: c, sample: t });
            }
            data[[c, t]] = v;
        }
    }
    let channels = names
        .iter()
        .map(|n| ChannelInfo::new(n.clone(), guess_modality(n)))
        .collect();
    Recording::new(rate_hz, channels, data, MarkerList::new())
}

fn guess_modality(name: &str) -> Modality {
    let upper = name.to_ascii_uppercase();
    if upper.starts_with("EOG") {
        Modality::Eog
    } else if upper.starts_with("EMG") {
        Modality::Emg
    } else if upper.starts_with("ECG") || upper.starts_with("EKG") {
        Modality::Ecg
    } else {
        Modality::Eeg
    }
}

fn parse_field(path: &Path, field: Option<&str>) -> Result<f64> {
    let field = field.ok_or_else(|| Error::Format(format!("{}: short row", path.display())))?;
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("{}: bad number {field:?}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Writes a header row and numeric rows.
pub fn write_table<P: AsRef<Path>>(path: P, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize, P: AsRef<Path>>(path: P, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
