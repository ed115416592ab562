//! Latent-distance health index.
//!
//! A window's health index is the distance between its latent point and the
//! mean latent point of the training normal windows. Two thresholds, the
//! largest index seen on training normal and on training degraded windows,
//! split the index axis into normal / degraded / severe. Anything beyond the
//! degraded maximum is reported as severe even though no severe window was
//! ever seen in training.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{label_str, parse_label, segment, Condition, LabelPlan, LoadedFile, NormStats, SignalWindow};
use crate::error::{Error, Result};
use crate::vae::{LatentCode, VaeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Minkowski3,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::Minkowski3];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Minkowski3 => "minkowski3",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "minkowski3" => Ok(Metric::Minkowski3),
            other => Err(Error::InvalidConfig(format!("unknown metric '{other}'"))),
        }
    }
}

pub fn distance(p: &[f64], q: &[f64], metric: Metric) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape("distance operands", p.len(), q.len()));
    }
    let diffs = p.iter().zip(q).map(|(a, b)| (b - a).abs());
    Ok(match metric {
        Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        Metric::Manhattan => diffs.sum(),
        Metric::Minkowski3 => diffs.map(|d| d * d * d).sum::<f64>().cbrt(),
    })
}

/// Anything that maps a window to a point in a latent space.
pub trait LatentEmbedding {
    fn embed(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl LatentEmbedding for VaeParams {
    /// The posterior mean; no sampling.
    fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode(x)?.mu)
    }
}

/// Mean latent point of the normal reference windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferenceMean(pub Vec<f64>);

impl ReferenceMean {
    /// Coordinate-wise mean. Each coordinate is summed in sorted order so the
    /// result does not depend on input order.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Data("reference mean needs at least one point".into()))?;
        let dim = first.len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::shape("reference point", dim, p.len()));
        }
        let mut column = Vec::with_capacity(points.len());
        let mean = (0..dim)
            .map(|j| {
                column.clear();
                column.extend(points.iter().map(|p| p[j]));
                column.sort_by(f64::total_cmp);
                column.iter().sum::<f64>() / points.len() as f64
            })
            .collect::<Vec<_>>();
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference mean"));
        }
        Ok(Self(mean))
    }

    pub fn from_codes(codes: &[LatentCode]) -> Result<Self> {
        let mus: Vec<Vec<f64>> = codes.iter().map(|c| c.mu.clone()).collect();
        Self::from_points(&mus)
    }

    pub fn fit<E: LatentEmbedding + ?Sized>(model: &E, normal_windows: &[SignalWindow]) -> Result<Self> {
        let points = normal_windows
            .iter()
            .map(|w| model.embed(&w.values))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(&points)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn health_index<E: LatentEmbedding + ?Sized>(
    model: &E,
    values: &[f64],
    reference: &ReferenceMean,
    metric: Metric,
) -> Result<f64> {
    distance(&model.embed(values)?, &reference.0, metric)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub t_normal: f64,
    pub t_degraded: f64,
    pub metric: Metric,
}

impl ThresholdSet {
    pub fn new(t_normal: f64, t_degraded: f64, metric: Metric) -> Result<Self> {
        if !(t_normal >= 0.0 && t_degraded.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid thresholds ({t_normal}, {t_degraded})")));
        }
        if t_normal > t_degraded {
            return Err(Error::DegenerateThresholds {
                t_normal,
                t_degraded,
            });
        }
        Ok(Self {
            t_normal,
            t_degraded,
            metric,
        })
    }

    /// Maxima of the training health indices of each seen class.
    pub fn from_indices(normal: &[f64], degraded: &[f64], metric: Metric) -> Result<Self> {
        if normal.is_empty() || degraded.is_empty() {
            return Err(Error::Data("threshold fitting needs normal and degraded samples".into()));
        }
        let max = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(max(normal), max(degraded), metric)
    }
}

pub fn fit_thresholds<E: LatentEmbedding + ?Sized>(
    model: &E,
    reference: &ReferenceMean,
    train_normal: &[SignalWindow],
    train_degraded: &[SignalWindow],
    metric: Metric,
) -> Result<ThresholdSet> {
    let his = |ws: &[SignalWindow]| {
        ws.iter()
            .map(|w| health_index(model, &w.values, reference, metric))
            .collect::<Result<Vec<_>>>()
    };
    ThresholdSet::from_indices(&his(train_normal)?, &his(train_degraded)?, metric)
}

/// Lower class wins at exact threshold equality.
pub fn classify(hi: f64, thresholds: &ThresholdSet) -> Condition {
    if hi <= thresholds.t_normal {
        Condition::Normal
    } else if hi <= thresholds.t_degraded {
        Condition::Degraded
    } else {
        Condition::Severe
    }
}

/// Reference point plus fitted thresholds, persisted next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthModel {
    pub reference: ReferenceMean,
    pub thresholds: ThresholdSet,
}

impl HealthModel {
    pub fn fit<E: LatentEmbedding + ?Sized>(
        model: &E,
        train: &[SignalWindow],
        metric: Metric,
    ) -> Result<Self> {
        let (normal, degraded) = split_by_label(train);
        let reference = ReferenceMean::fit(model, &normal)?;
        let thresholds = fit_thresholds(model, &reference, &normal, &degraded, metric)?;
        Ok(Self {
            reference,
            thresholds,
        })
    }

    pub fn health_index<E: LatentEmbedding + ?Sized>(&self, model: &E, values: &[f64]) -> Result<f64> {
        health_index(model, values, &self.reference, self.thresholds.metric)
    }

    pub fn metric(&self) -> Metric {
        self.thresholds.metric
    }
}

/// Normal and degraded windows of a training set, in input order.
pub fn split_by_label(windows: &[SignalWindow]) -> (Vec<SignalWindow>, Vec<SignalWindow>) {
    let pick = |c| windows.iter().filter(|w| w.label == Some(c)).cloned().collect();
    (pick(Condition::Normal), pick(Condition::Degraded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthRecord {
    pub file_index: usize,
    /// Window offset for per-window records, `None` for per-file aggregates.
    pub offset: Option<usize>,
    pub health_index: f64,
    pub metric: Metric,
    pub predicted: Condition,
    pub truth: Option<Condition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            other => Err(Error::InvalidConfig(format!("unknown aggregation '{other}'"))),
        }
    }
}

impl Aggregation {
    fn apply(self, values: &mut [f64]) -> f64 {
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                values.sort_by(f64::total_cmp);
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    0.5 * (values[n / 2 - 1] + values[n / 2])
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    pub channel: usize,
    pub window: usize,
    pub aggregation: Aggregation,
    pub per_window: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            channel: 0,
            window: crate::vae::WINDOW_LEN,
            aggregation: Aggregation::Mean,
            per_window: false,
        }
    }
}

#[derive(Debug, Default)]
pub struct RunScore {
    pub records: Vec<HealthRecord>,
    /// Files that could not be read or scored, with the reason.
    pub gaps: Vec<(usize, String)>,
}

/// Scores every file of a run in file order: segment, normalize, compute
/// per-window health indices and (unless `per_window`) aggregate per file.
pub fn score_run_to_failure<E: LatentEmbedding + ?Sized>(
    model: &E,
    health: &HealthModel,
    files: &[LoadedFile],
    norm: &NormStats,
    plan: Option<&LabelPlan>,
    options: &ScoreOptions,
) -> RunScore {
    let mut out = RunScore::default();
    let mut order: Vec<&LoadedFile> = files.iter().collect();
    order.sort_by_key(|f| f.file_index);
    for file in order {
        let truth = plan.and_then(|p| p.label_for(file.file_index));
        let scored = file.recording.as_ref().map_err(|e| e.to_string()).and_then(|rec| {
            let windows = segment(rec, options.channel, options.window).map_err(|e| e.to_string())?;
            if windows.is_empty() {
                return Err("recording shorter than one window".to_string());
            }
            windows
                .iter()
                .map(|w| {
                    health
                        .health_index(model, &norm.apply(&w.values))
                        .map(|hi| (w.source.offset, hi))
                        .map_err(|e| e.to_string())
                })
                .collect::<std::result::Result<Vec<_>, _>>()
        });
        match scored {
            Err(reason) => out.gaps.push((file.file_index, reason)),
            Ok(his) if options.per_window => {
                out.records.extend(his.into_iter().map(|(offset, hi)| HealthRecord {
                    file_index: file.file_index,
                    offset: Some(offset),
                    health_index: hi,
                    metric: health.metric(),
                    predicted: classify(hi, &health.thresholds),
                    truth,
                }));
            }
            Ok(his) => {
                let mut values: Vec<f64> = his.into_iter().map(|(_, hi)| hi).collect();
                let hi = options.aggregation.apply(&mut values);
                out.records.push(HealthRecord {
                    file_index: file.file_index,
                    offset: None,
                    health_index: hi,
                    metric: health.metric(),
                    predicted: classify(hi, &health.thresholds),
                    truth,
                });
            }
        }
    }
    out
}

const FILE_HEADER: &str = "file_index,health_index,metric,predicted,truth";
const WINDOW_HEADER: &str = "file_index,offset,health_index,metric,predicted,truth";

/// Health series CSV. Per-window records carry an extra `offset` column.
pub fn health_csv(records: &[HealthRecord]) -> String {
    let per_window = records.first().is_some_and(|r| r.offset.is_some());
    let mut out = String::from(if per_window { WINDOW_HEADER } else { FILE_HEADER });
    out.push('\n');
    for r in records {
        out.push_str(&r.file_index.to_string());
        out.push(',');
        if per_window {
            out.push_str(&r.offset.unwrap_or(0).to_string());
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.health_index,
            r.metric,
            r.predicted,
            label_str(r.truth)
        ));
    }
    out
}

pub fn parse_health_csv(text: &str) -> Result<Vec<HealthRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let per_window = match headers.iter().collect::<Vec<_>>().join(",").as_str() {
        FILE_HEADER => false,
        WINDOW_HEADER => true,
        other => return Err(Error::Parse { line: 1, message: format!("unexpected header '{other}'") }),
    };
    let shift = usize::from(per_window);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| Error::Parse { line: i + 2, message: m };
        let file_index = rec[0].parse().map_err(|e| bad(format!("file_index: {e}")))?;
        let offset = if per_window {
            Some(rec[1].parse().map_err(|e| bad(format!("offset: {e}")))?)
        } else {
            None
        };
        out.push(HealthRecord {
            file_index,
            offset,
            health_index: rec[1 + shift].parse().map_err(|e| bad(format!("health_index: {e}")))?,
            metric: rec[2 + shift].parse()?,
            predicted: rec[3 + shift].parse()?,
            truth: parse_label(&rec[4 + shift])?,
        });
    }
    Ok(out)
}

/// Trailing moving average with the given window length.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}
