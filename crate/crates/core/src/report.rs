//! Report artifacts built from score files: summary JSON, Lorenz CSV/SVG,
//! cross-metric correlation and multi-run summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::accessibility::paired_scores;
use crate::error::{Error, Result};
use crate::metrics::{AccessReport, CorrelationReport};
use crate::scores::ScoreFile;

/// Correlate two score vectors on their shared doc_ids.
pub fn correlate_scores(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<CorrelationReport> {
    let (x, y) = paired_scores(a, b);
    if x.is_empty() {
        return Err(Error::NoOverlap);
    }
    CorrelationReport::compute(&x, &y)
}

pub fn lorenz_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("pop_share,score_share\n");
    for (x, y) in points {
        writeln!(out, "{x},{y}").expect("string write");
    }
    out
}

/// Self-contained SVG of a Lorenz curve with the line of equality.
pub fn lorenz_svg(points: &[(f64, f64)], title: &str) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let plot = SIZE - 2.0 * PAD;
    let sx = |x: f64| PAD + x * plot;
    let sy = |y: f64| SIZE - PAD - y * plot;

    let mut path = String::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(path, "{cmd}{:.2},{:.2} ", sx(x), sy(y)).expect("string write");
    }
    let title = title
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;");

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 4"/>"##,
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    )
    .unwrap();
    writeln!(
        svg,
        r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        path.trim_end()
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">cumulative share of documents</text>"#,
        SIZE / 2.0,
        SIZE - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">cumulative share of score</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{title}</text>"#,
        SIZE / 2.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub source: String,
    pub metric: Option<String>,
    pub model: Option<String>,
    pub gini: f64,
    pub mean: f64,
    pub n_docs: usize,
    pub scores_fingerprint: String,
}

/// One row per score file (model, G, mean), with an optional correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationReport>,
}

impl ExperimentSummary {
    pub fn from_files(files: &[ScoreFile]) -> Result<Self> {
        let rows = files
            .iter()
            .map(|file| {
                let values: Vec<f64> = file.scores.values().copied().collect();
                let report = AccessReport::from_scores(&values, serde_json::Value::Null)?;
                Ok(SummaryRow {
                    source: file.path.display().to_string(),
                    metric: file.metadata.as_ref().map(|m| m.metric.to_string()),
                    model: file.metadata.as_ref().map(|m| m.model.to_string()),
                    gini: report.gini,
                    mean: report.mean_score,
                    n_docs: report.n_docs,
                    scores_fingerprint: file.fingerprint.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ExperimentSummary {
            rows,
            correlation: None,
        })
    }
}
