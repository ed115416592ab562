use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::health::{health_csv, HealthRecord, ThresholdSet};

use super::{MetricReport, SweepEntry};

const METRICS_HEADER: &str = "method,metric_name,value";
const SWEEP_HEADER: &str = "snr_db,accuracy,precision,recall,f1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub metric_name: String,
    pub value: f64,
}

/// All named values of a report under one method label.
pub fn metric_rows(method: &str, report: &MetricReport) -> Vec<MetricRow> {
    report
        .named_values()
        .into_iter()
        .map(|(metric_name, value)| MetricRow {
            method: method.to_string(),
            metric_name,
            value,
        })
        .collect()
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.method, r.metric_name, r.value).unwrap();
    }
    out
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &str) -> Result<()> {
    let got = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{expected}', found '{got}'"),
        });
    }
    Ok(())
}

fn parse_f64(field: &str, line: usize, name: &str) -> Result<f64> {
    field.parse().map_err(|e| Error::Parse {
        line,
        message: format!("{name}: {e}"),
    })
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, METRICS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        out.push(MetricRow {
            method: rec[0].to_string(),
            metric_name: rec[1].to_string(),
            value: parse_f64(&rec[2], i + 2, "value")?,
        });
    }
    Ok(out)
}

/// One sweep level, as stored on disk. The clean pass is `snr_db = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<&SweepEntry> for SweepRow {
    fn from(e: &SweepEntry) -> Self {
        Self {
            snr_db: e.snr_db,
            accuracy: e.report.accuracy,
            precision: e.report.precision,
            recall: e.report.recall,
            f1: e.report.f1,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.snr_db, r.accuracy, r.precision, r.recall, r.f1).unwrap();
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, SWEEP_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        out.push(SweepRow {
            snr_db: parse_f64(&rec[0], line, "snr_db")?,
            accuracy: parse_f64(&rec[1], line, "accuracy")?,
            precision: parse_f64(&rec[2], line, "precision")?,
            recall: parse_f64(&rec[3], line, "recall")?,
            f1: parse_f64(&rec[4], line, "f1")?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Static line chart. Non-finite points are skipped.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::Data("nothing to plot".into()));
    }
    let (x0, x1) = span(
        finite.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        finite.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = span(
        finite.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        finite.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{MARGIN_TOP}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 16.0,
            tick(xv)
        )
        .unwrap();
        writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT + pw,
            MARGIN_LEFT - 6.0,
            py + 4.0,
            tick(yv)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(y_label)
    )
    .unwrap();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{}" y="{:.2}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            ly,
            escape(&s.name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Health index against file index, with the thresholds as flat lines.
pub fn health_chart_svg(records: &[HealthRecord], thresholds: Option<&ThresholdSet>) -> Result<String> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.file_index as f64 + r.offset.unwrap_or(0) as f64 * 1e-6, r.health_index))
        .collect();
    let mut series = vec![Series {
        name: "health index".into(),
        points,
    }];
    if let (Some(t), Some(first), Some(last)) = (thresholds, records.first(), records.last()) {
        let (a, b) = (first.file_index as f64, last.file_index as f64);
        series.push(Series {
            name: "normal limit".into(),
            points: vec![(a, t.t_normal), (b, t.t_normal)],
        });
        series.push(Series {
            name: "degraded limit".into(),
            points: vec![(a, t.t_degraded), (b, t.t_degraded)],
        });
    }
    line_chart_svg("Health index", "file index", "health index", &series)
}

/// Accuracy and macro F1 against SNR. The clean pass is left out.
pub fn sweep_chart_svg(rows: &[SweepRow]) -> Result<String> {
    let pick = |f: fn(&SweepRow) -> f64| rows.iter().map(|r| (r.snr_db, f(r))).collect();
    line_chart_svg(
        "Noise robustness",
        "SNR (dB)",
        "score",
        &[
            Series {
                name: "accuracy".into(),
                points: pick(|r| r.accuracy),
            },
            Series {
                name: "macro F1".into(),
                points: pick(|r| r.f1),
            },
        ],
    )
}

/// Headline metrics per method, one line per method.
pub fn metrics_chart_svg(title: &str, rows: &[MetricRow]) -> Result<String> {
    const HEADLINE: [&str; 5] = ["accuracy", "precision", "recall", "f1", "unseen_class_accuracy"];
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let series: Vec<Series> = methods
        .iter()
        .map(|m| Series {
            name: m.to_string(),
            points: HEADLINE
                .iter()
                .enumerate()
                .filter_map(|(i, name)| {
                    rows.iter()
                        .find(|r| r.method == *m && r.metric_name == *name)
                        .map(|r| (i as f64, r.value))
                })
                .collect(),
        })
        .collect();
    line_chart_svg(
        title,
        "accuracy | precision | recall | f1 | unseen",
        "score",
        &series,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy)]
pub enum ReportData<'a> {
    Health {
        records: &'a [HealthRecord],
        thresholds: Option<&'a ThresholdSet>,
    },
    Sweep(&'a [SweepRow]),
    Metrics(&'a [MetricRow]),
}

pub fn emit_report(data: ReportData<'_>, format: ReportFormat, path: &Path) -> Result<()> {
    let empty = match data {
        ReportData::Health { records, .. } => records.is_empty(),
        ReportData::Sweep(rows) => rows.is_empty(),
        ReportData::Metrics(rows) => rows.is_empty(),
    };
    if empty {
        return Err(Error::Data(format!("no results to write to {}", path.display())));
    }
    let text = match (data, format) {
        (ReportData::Health { records, .. }, ReportFormat::Csv) => health_csv(records),
        (ReportData::Health { records, thresholds }, ReportFormat::Svg) => health_chart_svg(records, thresholds)?,
        (ReportData::Sweep(rows), ReportFormat::Csv) => sweep_csv(rows),
        (ReportData::Sweep(rows), ReportFormat::Svg) => sweep_chart_svg(rows)?,
        (ReportData::Metrics(rows), ReportFormat::Csv) => metrics_csv(rows),
        (ReportData::Metrics(rows), ReportFormat::Svg) => metrics_chart_svg("Method comparison", rows)?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
