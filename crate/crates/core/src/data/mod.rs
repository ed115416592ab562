//! Vibration data handling: IMS ingestion, fixed-length segmentation,
//! condition labels, normalization, shuffled splits, AWGN injection and a
//! synthetic run-to-failure generator.

mod ims;
mod noise;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

pub use ims::{list_data_files, load_ims_dir, load_ims_file, parse_ims_file, LoadedFile};
pub use noise::{add_awgn, awgn_noise_variance, signal_power};

/// Default sampling rate of the IMS recordings, Hz.
pub const SAMPLE_RATE_HZ: f64 = 20_000.0;

/// Health condition, ordered from best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Normal,
    Degraded,
    Severe,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Normal, Condition::Degraded, Condition::Severe];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::Degraded => "degraded",
            Condition::Severe => "severe",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Condition::Normal),
            "degraded" => Ok(Condition::Degraded),
            "severe" => Ok(Condition::Severe),
            other => Err(Error::Data(format!("unknown condition '{other}'"))),
        }
    }
}

/// Label text used in CSV files, `unlabeled` for `None`.
pub fn label_str(label: Option<Condition>) -> &'static str {
    label.map_or("unlabeled", Condition::as_str)
}

pub fn parse_label(s: &str) -> Result<Option<Condition>> {
    match s {
        "unlabeled" | "" => Ok(None),
        other => other.parse().map(Some),
    }
}

/// One recording: row-major `n_rows x n_channels` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    samples: Vec<f64>,
    n_rows: usize,
    n_channels: usize,
    pub file_index: usize,
    pub sample_rate: f64,
}

impl RawRecording {
    pub fn new(samples: Vec<f64>, n_channels: usize, file_index: usize) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::Data("recording needs at least one channel".into()));
        }
        if !samples.len().is_multiple_of(n_channels) {
            return Err(Error::Data(format!(
                "{} samples do not divide into {n_channels} channels",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("recording samples"));
        }
        Ok(Self {
            n_rows: samples.len() / n_channels,
            samples,
            n_channels,
            file_index,
            sample_rate: SAMPLE_RATE_HZ,
        })
    }

    /// Single-channel recording.
    pub fn from_channel(values: Vec<f64>, file_index: usize) -> Result<Self> {
        Self::new(values, 1, file_index)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.samples[r * self.n_channels..(r + 1) * self.n_channels]
    }

    pub fn channel(&self, channel: usize) -> Result<Vec<f64>> {
        if channel >= self.n_channels {
            return Err(Error::Data(format!(
                "channel {channel} out of range for {} channels",
                self.n_channels
            )));
        }
        Ok(self
            .samples
            .iter()
            .skip(channel)
            .step_by(self.n_channels)
            .copied()
            .collect())
    }

    /// Whitespace-separated ASCII, one row per line.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 12);
        for r in 0..self.n_rows {
            let row = self.row(r);
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push('\t');
                }
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSource {
    pub file_index: usize,
    pub channel: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalWindow {
    pub values: Vec<f64>,
    pub label: Option<Condition>,
    pub source: WindowSource,
}

impl SignalWindow {
    pub fn new(values: Vec<f64>, label: Option<Condition>, source: WindowSource) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("window values"));
        }
        Ok(Self {
            values,
            label,
            source,
        })
    }
}

/// Non-overlapping consecutive windows of one channel. Trailing rows that do
/// not fill a window are dropped.
pub fn segment(recording: &RawRecording, channel: usize, window: usize) -> Result<Vec<SignalWindow>> {
    if window == 0 {
        return Err(Error::InvalidConfig("window length must be >= 1".into()));
    }
    let signal = recording.channel(channel)?;
    Ok(signal
        .chunks_exact(window)
        .enumerate()
        .map(|(i, chunk)| SignalWindow {
            values: chunk.to_vec(),
            label: None,
            source: WindowSource {
                file_index: recording.file_index,
                channel,
                offset: i * window,
            },
        })
        .collect())
}

/// Inclusive range of file indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct FileRange {
    pub start: usize,
    pub end: usize,
}

impl From<[usize; 2]> for FileRange {
    fn from(v: [usize; 2]) -> Self {
        FileRange { start: v[0], end: v[1] }
    }
}

impl From<FileRange> for [usize; 2] {
    fn from(r: FileRange) -> Self {
        [r.start, r.end]
    }
}

impl FileRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..=self.end).contains(&i)
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start) + 1
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    fn overlaps(&self, other: &FileRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// `count` indices spread evenly over the range, both ends included.
    pub fn evenly_spaced(&self, count: usize) -> Vec<usize> {
        let n = self.len();
        if count == 0 || self.is_empty() {
            return Vec::new();
        }
        if count >= n {
            return (self.start..=self.end).collect();
        }
        if count == 1 {
            return vec![self.start + (n - 1) / 2];
        }
        (0..count)
            .map(|i| self.start + ((i * (n - 1)) as f64 / (count - 1) as f64).round() as usize)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelPlan {
    pub normal: FileRange,
    pub degraded: FileRange,
    pub severe: FileRange,
    pub channel: usize,
}

impl Default for LabelPlan {
    /// IMS set 2, bearing 1.
    fn default() -> Self {
        Self {
            normal: FileRange::new(100, 149),
            degraded: FileRange::new(711, 900),
            severe: FileRange::new(972, 981),
            channel: 0,
        }
    }
}

impl LabelPlan {
    pub fn validate(&self) -> Result<()> {
        let ranges = [self.normal, self.degraded, self.severe];
        if ranges.iter().any(FileRange::is_empty) {
            return Err(Error::InvalidConfig("label ranges must be non-empty".into()));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if ranges[i].overlaps(&ranges[j]) {
                    return Err(Error::InvalidConfig(format!(
                        "label ranges {:?} and {:?} overlap",
                        ranges[i], ranges[j]
                    )));
                }
            }
        }
        if self.degraded.start <= self.normal.end {
            return Err(Error::InvalidConfig(
                "degraded range must start after the normal range".into(),
            ));
        }
        Ok(())
    }

    pub fn label_for(&self, file_index: usize) -> Option<Condition> {
        if self.normal.contains(file_index) {
            Some(Condition::Normal)
        } else if self.degraded.contains(file_index) {
            Some(Condition::Degraded)
        } else if self.severe.contains(file_index) {
            Some(Condition::Severe)
        } else {
            None
        }
    }

    pub fn range(&self, condition: Condition) -> FileRange {
        match condition {
            Condition::Normal => self.normal,
            Condition::Degraded => self.degraded,
            Condition::Severe => self.severe,
        }
    }
}

/// Sets each window's label from the plan; files outside every range stay
/// unlabeled.
pub fn label_windows(windows: &mut [SignalWindow], plan: &LabelPlan) -> Result<()> {
    plan.validate()?;
    for w in windows {
        w.label = plan.label_for(w.source.file_index);
    }
    Ok(())
}

/// Training may only see normal and degraded windows of the expected length.
pub(crate) fn check_training_windows(windows: &[SignalWindow], input_dim: usize) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let contaminated = windows
        .iter()
        .filter(|w| !matches!(w.label, Some(Condition::Normal | Condition::Degraded)))
        .count();
    if contaminated > 0 {
        return Err(Error::Contamination(contaminated));
    }
    if let Some(w) = windows.iter().find(|w| w.values.len() != input_dim) {
        return Err(Error::shape("training window", input_dim, w.values.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid normalization ({mean}, {std})")));
        }
        Ok(Self { mean, std })
    }

    /// Population mean and standard deviation over every sample.
    pub fn fit(windows: &[SignalWindow]) -> Result<Self> {
        let n: usize = windows.iter().map(|w| w.values.len()).sum();
        if n == 0 {
            return Err(Error::Data("cannot fit normalization on no samples".into()));
        }
        let mean = windows.iter().flat_map(|w| &w.values).sum::<f64>() / n as f64;
        let var = windows
            .iter()
            .flat_map(|w| &w.values)
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n as f64;
        Self::new(mean, var.sqrt())
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.std + self.mean).collect()
    }
}

pub fn normalize(windows: &[SignalWindow], stats: &NormStats) -> Vec<SignalWindow> {
    windows
        .iter()
        .map(|w| SignalWindow {
            values: stats.apply(&w.values),
            ..w.clone()
        })
        .collect()
}

pub fn denormalize(windows: &[SignalWindow], stats: &NormStats) -> Vec<SignalWindow> {
    windows
        .iter()
        .map(|w| SignalWindow {
            values: stats.invert(&w.values),
            ..w.clone()
        })
        .collect()
}

/// Seeded shuffle followed by a split with `round(train_fraction * N)` items
/// in the first part.
pub fn shuffle_split<T>(mut items: Vec<T>, train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::Data("cannot split an empty set".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    items.shuffle(&mut stream_rng(seed, streams::SPLIT, 0));
    let n_train = (train_fraction * items.len() as f64).round() as usize;
    let test = items.split_off(n_train);
    Ok((items, test))
}

/// Content hash of an ordered window list (sources, labels and value bits).
pub fn fingerprint(parts: &[&[SignalWindow]]) -> String {
    let mut h = Sha256::new();
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        for w in *part {
            h.update((w.source.file_index as u64).to_le_bytes());
            h.update((w.source.channel as u64).to_le_bytes());
            h.update((w.source.offset as u64).to_le_bytes());
            h.update([w.label.map_or(255, |c| c as u8)]);
            for v in &w.values {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

/// CSV with header `file_index,channel,offset,label,v0..v{n-1}`.
pub fn windows_to_csv(windows: &[SignalWindow]) -> String {
    let width = windows.first().map_or(0, |w| w.values.len());
    let mut out = String::from("file_index,channel,offset,label");
    for i in 0..width {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    for w in windows {
        out.push_str(&format!(
            "{},{},{},{}",
            w.source.file_index,
            w.source.channel,
            w.source.offset,
            label_str(w.label)
        ));
        for v in &w.values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn windows_from_csv(text: &str) -> Result<Vec<SignalWindow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |message: String| Error::Parse {
            line: line + 2,
            message,
        };
        if record.len() < 4 {
            return Err(bad("expected at least 4 columns".into()));
        }
        let num = |i: usize| -> Result<usize> {
            record[i].parse().map_err(|e| bad(format!("column {i}: {e}")))
        };
        let source = WindowSource {
            file_index: num(0)?,
            channel: num(1)?,
            offset: num(2)?,
        };
        let label = parse_label(&record[3])?;
        let values = (4..record.len())
            .map(|i| record[i].parse::<f64>().map_err(|e| bad(format!("column {i}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(SignalWindow::new(values, label, source)?);
    }
    Ok(out)
}
