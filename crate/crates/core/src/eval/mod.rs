//! Classification metrics, noise sweeps and method comparison.

mod report;

pub use report::{
    emit_report, health_chart_svg, line_chart_svg, metric_rows, metrics_chart_svg, metrics_csv, parse_metrics_csv, parse_sweep_csv,
    sweep_chart_svg, sweep_csv, MetricRow, ReportData, ReportFormat, Series, SweepRow,
};

use serde::{Deserialize, Serialize};

use crate::baselines::{
    ae_train_with_arch, kmeans_fit, kmeans_score, knn_fit, knn_score, labeled_points, KmeansModel, KnnModel,
};
use crate::data::{add_awgn, fingerprint, Condition, NormStats, SignalWindow};
use crate::error::{Error, Result};
use crate::health::{classify, HealthModel, HealthRecord, LatentEmbedding, Metric};
use crate::rng::{derive_seed, streams};
use crate::vae::{train_with_arch, TrainConfig, VaeArch};

/// Counts indexed `[truth][predicted]` in `Condition::ALL` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: Condition, predicted: Condition) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, truth: Condition, predicted: Condition) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }
}

pub fn confusion(records: &[HealthRecord]) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::default();
    for r in records {
        let truth = r.truth.ok_or_else(|| {
            Error::Data(format!("record for file {} has no truth label", r.file_index))
        })?;
        cm.record(truth, r.predicted);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro-averaged headline metrics plus per-class and micro figures.
/// Undefined ratios (zero denominator) count as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Recall of the severe class, which never appears in training.
    pub unseen_class_accuracy: f64,
    pub per_class: [ClassMetrics; 3],
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("empty confusion matrix".into()));
    }
    let c = &cm.counts;
    let mut per_class = [ClassMetrics::default(); 3];
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for k in 0..3 {
        let tp = c[k][k];
        let predicted: u64 = (0..3).map(|t| c[t][k]).sum();
        let actual: u64 = c[k].iter().sum();
        tp_all += tp;
        fp_all += predicted - tp;
        fn_all += actual - tp;
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        per_class[k] = ClassMetrics {
            precision,
            recall,
            f1: f1_of(precision, recall),
        };
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
    let micro_precision = ratio(tp_all, tp_all + fp_all);
    let micro_recall = ratio(tp_all, tp_all + fn_all);
    Ok(MetricReport {
        accuracy: ratio(tp_all, total),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        unseen_class_accuracy: per_class[Condition::Severe.index()].recall,
        per_class,
        micro_precision,
        micro_recall,
        micro_f1: f1_of(micro_precision, micro_recall),
    })
}

impl MetricReport {
    /// Named values in a fixed order, as written to metric tables.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("accuracy".to_string(), self.accuracy),
            ("precision".to_string(), self.precision),
            ("recall".to_string(), self.recall),
            ("f1".to_string(), self.f1),
            ("unseen_class_accuracy".to_string(), self.unseen_class_accuracy),
            ("micro_precision".to_string(), self.micro_precision),
            ("micro_recall".to_string(), self.micro_recall),
            ("micro_f1".to_string(), self.micro_f1),
        ];
        for (c, m) in Condition::ALL.iter().zip(&self.per_class) {
            out.push((format!("precision_{c}"), m.precision));
            out.push((format!("recall_{c}"), m.recall));
            out.push((format!("f1_{c}"), m.f1));
        }
        out
    }
}

/// Anything that maps a normalized window to a score and a class.
pub trait Scorer {
    /// Health index (or the detector's distance statistic) and predicted
    /// class of a normalized window.
    fn score(&self, x: &[f64]) -> Result<(f64, Condition)>;

    /// Distance used for the score column of exported records.
    fn metric(&self) -> Metric;
}

/// Health-index classifier over any latent embedding.
pub struct LatentScorer<'a, E: LatentEmbedding + ?Sized> {
    pub model: &'a E,
    pub health: &'a HealthModel,
}

impl<E: LatentEmbedding + ?Sized> Scorer for LatentScorer<'_, E> {
    fn score(&self, x: &[f64]) -> Result<(f64, Condition)> {
        let hi = self.health.health_index(self.model, x)?;
        Ok((hi, classify(hi, &self.health.thresholds)))
    }

    fn metric(&self) -> Metric {
        self.health.metric()
    }
}

impl Scorer for KnnModel {
    fn score(&self, x: &[f64]) -> Result<(f64, Condition)> {
        knn_score(self, x)
    }

    fn metric(&self) -> Metric {
        Metric::Euclidean
    }
}

impl Scorer for KmeansModel {
    fn score(&self, x: &[f64]) -> Result<(f64, Condition)> {
        kmeans_score(self, x)
    }

    fn metric(&self) -> Metric {
        Metric::Euclidean
    }
}

/// Normalizes and scores raw windows, one record per window.
pub fn score_windows<S: Scorer + ?Sized>(
    scorer: &S,
    windows: &[SignalWindow],
    norm: &NormStats,
) -> Result<Vec<HealthRecord>> {
    windows
        .iter()
        .map(|w| {
            let (hi, predicted) = scorer.score(&norm.apply(&w.values))?;
            Ok(HealthRecord {
                file_index: w.source.file_index,
                offset: Some(w.source.offset),
                health_index: hi,
                metric: scorer.metric(),
                predicted,
                truth: w.label,
            })
        })
        .collect()
}

pub fn evaluate<S: Scorer + ?Sized>(scorer: &S, windows: &[SignalWindow], norm: &NormStats) -> Result<MetricReport> {
    metrics(&confusion(&score_windows(scorer, windows, norm)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// `f64::INFINITY` for the clean pass.
    pub snr_db: f64,
    pub report: MetricReport,
}

/// Clean pass followed by one pass per SNR level. Noise is added to the raw
/// window before normalization, with an independent seed per level and
/// window.
pub fn noise_sweep<S: Scorer + ?Sized>(
    scorer: &S,
    windows: &[SignalWindow],
    norm: &NormStats,
    snr_db: &[f64],
    seed: u64,
) -> Result<Vec<SweepEntry>> {
    if snr_db.is_empty() {
        return Err(Error::InvalidConfig("no SNR levels given".into()));
    }
    if let Some(bad) = snr_db.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig(format!("SNR {bad} dB is not finite")));
    }
    let mut out = vec![SweepEntry {
        snr_db: f64::INFINITY,
        report: evaluate(scorer, windows, norm)?,
    }];
    for (level, &snr) in snr_db.iter().enumerate() {
        let level_seed = derive_seed(seed, streams::SWEEP, level as u64);
        let noisy = windows
            .iter()
            .enumerate()
            .map(|(i, w)| add_awgn(w, snr, derive_seed(level_seed, streams::SWEEP, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        out.push(SweepEntry {
            snr_db: snr,
            report: evaluate(scorer, &noisy, norm)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vae,
    Knn,
    Kmeans,
    VanillaAe,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vae, Method::Knn, Method::Kmeans, Method::VanillaAe];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vae => "vae",
            Method::Knn => "knn",
            Method::Kmeans => "kmeans",
            Method::VanillaAe => "vanilla_ae",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub train: TrainConfig,
    pub arch: VaeArch,
    pub metric: Metric,
    pub knn_k: usize,
    pub kmeans_k: usize,
    pub kmeans_max_iters: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            arch: VaeArch::default(),
            metric: Metric::Euclidean,
            knn_k: 5,
            kmeans_k: 2,
            kmeans_max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    /// Fingerprint of the normalized train and test windows the method saw.
    pub split_fingerprint: String,
    pub report: MetricReport,
    pub records: Vec<HealthRecord>,
}

/// Errors unless every row was produced on the same split.
pub fn verify_same_split(rows: &[ComparisonRow]) -> Result<()> {
    let Some(first) = rows.first() else {
        return Ok(());
    };
    for r in &rows[1..] {
        if r.split_fingerprint != first.split_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: first.split_fingerprint.clone(),
                actual: r.split_fingerprint.clone(),
            });
        }
    }
    Ok(())
}

/// Fits all four methods on `train` and evaluates them on `test`. Both are
/// raw windows; normalization is fitted once on `train` and shared.
pub fn compare_methods(
    train: &[SignalWindow],
    test: &[SignalWindow],
    config: &CompareConfig,
) -> Result<Vec<ComparisonRow>> {
    let norm = NormStats::fit(train)?;
    let ntrain = crate::data::normalize(train, &norm);
    let ntest = crate::data::normalize(test, &norm);
    let mut rows = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let split_fingerprint = fingerprint(&[&ntrain, &ntest]);
        let records = match method {
            Method::Vae => {
                let (params, _) = train_with_arch(&ntrain, config.arch.clone(), &config.train)?;
                let health = HealthModel::fit(&params, &ntrain, config.metric)?;
                let scorer = LatentScorer {
                    model: &params,
                    health: &health,
                };
                score_windows(&scorer, test, &norm)?
            }
            Method::Knn => score_windows(&knn_fit(&ntrain, config.knn_k)?, test, &norm)?,
            Method::Kmeans => {
                let (points, labels) = labeled_points(&ntrain)?;
                let model = kmeans_fit(
                    &points,
                    &labels,
                    config.kmeans_k,
                    config.train.seed,
                    config.kmeans_max_iters,
                )?;
                score_windows(&model, test, &norm)?
            }
            Method::VanillaAe => {
                let (ae, _) = ae_train_with_arch(&ntrain, config.arch.clone(), &config.train)?;
                let health = HealthModel::fit(&ae, &ntrain, config.metric)?;
                let scorer = LatentScorer {
                    model: &ae,
                    health: &health,
                };
                score_windows(&scorer, test, &norm)?
            }
        };
        rows.push(ComparisonRow {
            method,
            split_fingerprint,
            report: metrics(&confusion(&records)?)?,
            records,
        });
    }
    verify_same_split(&rows)?;
    Ok(rows)
}
