use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recording modality of a single lead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    Eeg,
    Eog,
    Emg,
    Ecg,
    Other,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Modality::Eeg => "EEG",
            Modality::Eog => "EOG",
            Modality::Emg => "EMG",
            Modality::Ecg => "ECG",
            Modality::Other => "OTHER",
        };
        f.write_str(s)
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EEG" => Ok(Modality::Eeg),
            "EOG" => Ok(Modality::Eog),
            "EMG" => Ok(Modality::Emg),
            "ECG" => Ok(Modality::Ecg),
            "OTHER" => Ok(Modality::Other),
            other => Err(Error::InvalidParam(format!("unknown modality {other:?}"))),
        }
    }
}

fn default_unit() -> String {
    "uV".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub name: String,
    pub modality: Modality,
    #[serde(default = "default_unit")]
    pub unit: String,
}

impl ChannelInfo {
    pub fn new(name: impl Into<String>, modality: Modality) -> Self {
        ChannelInfo {
            name: name.into(),
            modality,
            unit: default_unit(),
        }
    }
}

/// The 15-lead montage: 9 EEG, 2 EOG, 3 EMG, 1 ECG.
pub fn standard_montage() -> Vec<ChannelInfo> {
    let mut out: Vec<ChannelInfo> = EEG_LABELS
        .iter()
        .map(|n| ChannelInfo::new(*n, Modality::Eeg))
        .collect();
    out.push(ChannelInfo::new("EOG1", Modality::Eog));
    out.push(ChannelInfo::new("EOG2", Modality::Eog));
    out.push(ChannelInfo::new("EMG1", Modality::Emg));
    out.push(ChannelInfo::new("EMG2", Modality::Emg));
    out.push(ChannelInfo::new("EMG3", Modality::Emg));
    out.push(ChannelInfo::new("ECG", Modality::Ecg));
    out
}

pub const EEG_LABELS: [&str; 9] = ["C3", "C4", "F3", "F4", "FPz", "O1", "O2", "M1", "M2"];

/// Electrophysiology sampling rate of the acquisition system.
pub const ACQUISITION_RATE_HZ: f64 = 5000.0;

/// MRI repetition time of the real-time sequence.
pub const MRI_TR_S: f64 = 0.00505;

/// Video frame period (99 frames per second, two repetitions per frame).
pub const MRI_FRAME_PERIOD_S: f64 = 0.0101;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub sample: usize,
    pub label: String,
}

impl Marker {
    pub fn new(sample: usize, label: impl Into<String>) -> Self {
        Marker {
            sample,
            label: label.into(),
        }
    }
}

/// Event list kept sorted non-decreasing by sample index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarkerList(Vec<Marker>);

impl MarkerList {
    pub fn new() -> Self {
        MarkerList(Vec::new())
    }

    /// Builds a list from markers that must already be sorted.
    pub fn from_sorted(markers: Vec<Marker>) -> Result<Self> {
        if let Some(i) = markers.windows(2).position(|w| w[1].sample < w[0].sample) {
            return Err(Error::UnsortedMarkers(i + 1));
        }
        Ok(MarkerList(markers))
    }

    /// Builds a list, sorting stably by sample.
    pub fn from_unsorted(mut markers: Vec<Marker>) -> Self {
        markers.sort_by_key(|m| m.sample);
        MarkerList(markers)
    }

    pub fn from_samples(samples: &[usize], label: &str) -> Self {
        Self::from_unsorted(samples.iter().map(|&s| Marker::new(s, label)).collect())
    }

    /// Inserts keeping sort order; equal samples keep insertion order.
    pub fn insert(&mut self, marker: Marker) {
        let pos = self.0.partition_point(|m| m.sample <= marker.sample);
        self.0.insert(pos, marker);
    }

    pub fn merge(&mut self, other: &MarkerList) {
        for m in other.iter() {
            self.insert(m.clone());
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Marker> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Marker] {
        &self.0
    }

    pub fn samples(&self) -> Vec<usize> {
        self.0.iter().map(|m| m.sample).collect()
    }

    /// Markers whose label matches `pattern`. A trailing `*` matches by prefix.
    pub fn with_label(&self, pattern: &str) -> MarkerList {
        MarkerList(
            self.0
                .iter()
                .filter(|m| label_matches(&m.label, pattern))
                .cloned()
                .collect(),
        )
    }

    pub fn without_label(&self, pattern: &str) -> MarkerList {
        MarkerList(
            self.0
                .iter()
                .filter(|m| !label_matches(&m.label, pattern))
                .cloned()
                .collect(),
        )
    }

    /// Adds `offset` samples to every marker.
    pub fn shifted(&self, offset: isize) -> Result<MarkerList> {
        let moved = self
            .0
            .iter()
            .map(|m| {
                let s = m.sample as isize + offset;
                if s < 0 {
                    Err(Error::InvalidParam(format!(
                        "shift {offset} moves marker at {} below zero",
                        m.sample
                    )))
                } else {
                    Ok(Marker::new(s as usize, m.label.clone()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MarkerList(moved))
    }

    pub fn into_vec(self) -> Vec<Marker> {
        self.0
    }
}

impl<'a> IntoIterator for &'a MarkerList {
    type Item = &'a Marker;
    type IntoIter = std::slice::Iter<'a, Marker>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub(crate) fn label_matches(label: &str, pattern: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => label.starts_with(prefix),
        None => label == pattern,
    }
}

/// Which channels an operation should act on. Serialized in its string form
/// (`all`, `EEG`, `EMG+EOG`, `C3,F3`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ChannelSelector {
    All,
    Modality(Modality),
    Modalities(Vec<Modality>),
    Names(Vec<String>),
}

impl ChannelSelector {
    pub fn names<S: AsRef<str>>(names: &[S]) -> Self {
        ChannelSelector::Names(names.iter().map(|s| s.as_ref().to_string()).collect())
    }

    /// Indices of matching channels, in recording order.
    pub fn resolve(&self, channels: &[ChannelInfo]) -> Result<Vec<usize>> {
        let idx: Vec<usize> = match self {
            ChannelSelector::All => (0..channels.len()).collect(),
            ChannelSelector::Modality(m) => channels
                .iter()
                .enumerate()
                .filter(|(_, c)| c.modality == *m)
                .map(|(i, _)| i)
                .collect(),
            ChannelSelector::Modalities(ms) => channels
                .iter()
                .enumerate()
                .filter(|(_, c)| ms.contains(&c.modality))
                .map(|(i, _)| i)
                .collect(),
            ChannelSelector::Names(names) => {
                let mut found = Vec::with_capacity(names.len());
                for n in names {
                    match channels.iter().position(|c| &c.name == n) {
                        Some(i) => found.push(i),
                        None => return Err(Error::EmptySelection(format!("no channel named {n:?}"))),
                    }
                }
                found.sort_unstable();
                found.dedup();
                found
            }
        };
        if idx.is_empty() {
            return Err(Error::EmptySelection(format!("{self:?}")));
        }
        Ok(idx)
    }
}

impl fmt::Display for ChannelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSelector::All => f.write_str("all"),
            ChannelSelector::Modality(m) => write!(f, "{m}"),
            ChannelSelector::Modalities(ms) => {
                let parts: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
                f.write_str(&parts.join("+"))
            }
            ChannelSelector::Names(names) => f.write_str(&names.join(",")),
        }
    }
}

impl From<ChannelSelector> for String {
    fn from(s: ChannelSelector) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for ChannelSelector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for ChannelSelector {
    type Err = Error;

    /// `all`, a modality name (`EEG`), `EMG+EOG`, or a comma-separated name list.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(ChannelSelector::All);
        }
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        let modalities: Option<Vec<Modality>> =
            parts.iter().map(|p| p.parse::<Modality>().ok()).collect();
        match modalities {
            Some(ms) if ms.len() == 1 => Ok(ChannelSelector::Modality(ms[0])),
            Some(ms) => Ok(ChannelSelector::Modalities(ms)),
            None => Ok(ChannelSelector::Names(
                s.split(',').map(|n| n.trim().to_string()).collect(),
            )),
        }
    }
}

/// Multichannel, uniformly sampled recording in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    rate_hz: f64,
    channels: Vec<ChannelInfo>,
    data: Array2<f64>,
    markers: MarkerList,
}

impl Recording {
    /// `data` is channels × samples.
    pub fn new(
        rate_hz: f64,
        channels: Vec<ChannelInfo>,
        data: Array2<f64>,
        markers: MarkerList,
    ) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::InvalidParam(format!("rate_hz must be positive, got {rate_hz}")));
        }
        if channels.len() != data.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} channel descriptors for {} data rows",
                channels.len(),
                data.nrows()
            )));
        }
        for (i, c) in channels.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::InvalidParam(format!("channel {i} has an empty name")));
            }
            if channels[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidParam(format!("duplicate channel name {:?}", c.name)));
            }
        }
        let n = data.ncols();
        for m in markers.iter() {
            if m.sample >= n {
                return Err(Error::MarkerOutOfRange {
                    sample: m.sample,
                    n_samples: n,
                });
            }
        }
        Ok(Recording {
            rate_hz,
            channels,
            data,
            markers,
        })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        &self.channels
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn markers(&self) -> &MarkerList {
        &self.markers
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.rate_hz
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn channel(&self, index: usize) -> ArrayView1<'_, f64> {
        self.data.row(index)
    }

    pub fn channel_by_name(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        self.channel_index(name)
            .map(|i| self.data.row(i))
            .ok_or_else(|| Error::EmptySelection(format!("no channel named {name:?}")))
    }

    /// Same metadata, new sample matrix of identical shape.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Recording> {
        if data.dim() != self.data.dim() {
            return Err(Error::ShapeMismatch(format!(
                "replacement data {:?} vs {:?}",
                data.dim(),
                self.data.dim()
            )));
        }
        Ok(Recording {
            rate_hz: self.rate_hz,
            channels: self.channels.clone(),
            data,
            markers: self.markers.clone(),
        })
    }

    pub fn with_markers(&self, markers: MarkerList) -> Result<Recording> {
        Recording::new(self.rate_hz, self.channels.clone(), self.data.clone(), markers)
    }

    pub fn into_parts(self) -> (f64, Vec<ChannelInfo>, Array2<f64>, MarkerList) {
        (self.rate_hz, self.channels, self.data, self.markers)
    }

    /// Sub-recording preserving channel order, rate, and markers.
    pub fn select_channels(&self, selector: &ChannelSelector) -> Result<Recording> {
        let idx = selector.resolve(&self.channels)?;
        let channels = idx.iter().map(|&i| self.channels[i].clone()).collect();
        let data = self.data.select(Axis(0), &idx);
        Ok(Recording {
            rate_hz: self.rate_hz,
            channels,
            data,
            markers: self.markers.clone(),
        })
    }

    /// Overwrites the rows of `part` channels by name.
    pub fn replace_channels(&self, part: &Recording) -> Result<Recording> {
        if part.n_samples() != self.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples vs {}",
                part.n_samples(),
                self.n_samples()
            )));
        }
        let mut data = self.data.clone();
        for (j, c) in part.channels.iter().enumerate() {
            let i = self
                .channel_index(&c.name)
                .ok_or_else(|| Error::EmptySelection(format!("no channel named {:?}", c.name)))?;
            data.row_mut(i).assign(&part.data.row(j));
        }
        self.with_data(data)
    }

    /// First non-finite sample, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        for (c, row) in self.data.outer_iter().enumerate() {
            if let Some(s) = row.iter().position(|v| !v.is_finite()) {
                return Some((c, s));
            }
        }
        None
    }

    /// Rounds every sample to the nearest 32-bit float, the container precision.
    pub fn quantized_f32(&self) -> Recording {
        let mut out = self.clone();
        out.data.mapv_inplace(|v| v as f32 as f64);
        out
    }
}
