use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{EvalSummary, PairRecord, SceneRecord, SkippedScene, SweepRow};
use crate::error::{Error, Result};
use crate::features::SiftParams;
use crate::metrics::SsimParams;
use crate::neugen::NeuGenConfig;

pub const TOOL_NAME: &str = "neugen";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Eval,
    Sweep,
}

/// Settings that shaped the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub neugen: NeuGenConfig,
    pub ssim: SsimParams,
    pub sift: SiftParams,
    /// Sweep weights in ascending order; empty for evaluations.
    pub weights: Vec<f32>,
}

/// Output of `eval` or `sweep`. Field order here is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool: String,
    pub version: String,
    /// RFC 3339, UTC. The only field that differs between identical runs.
    pub timestamp: String,
    pub kind: ReportKind,
    pub config: ConfigSnapshot,
    pub scenes: Vec<SceneRecord>,
    pub pairs: Vec<PairRecord>,
    pub sweep: Vec<SweepRow>,
    pub skipped: Vec<SkippedScene>,
    pub summary: Option<EvalSummary>,
}

impl EvalReport {
    pub fn new(kind: ReportKind, config: ConfigSnapshot) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            kind,
            config,
            scenes: Vec::new(),
            pairs: Vec::new(),
            sweep: Vec::new(),
            skipped: Vec::new(),
            summary: None,
        }
    }

    /// Scenes that produced numbers.
    pub fn evaluated_scenes(&self) -> usize {
        match self.kind {
            ReportKind::Eval => self.scenes.len(),
            ReportKind::Sweep => self.sweep.first().map_or(0, |r| r.scenes.len()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Flat rows for the CSV form, in report order.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for s in &self.scenes {
            let metrics = [
                ("class_ssim", s.original_class_ssim, s.neugen_class_ssim),
                ("mean_matches", s.original_mean_matches, s.neugen_mean_matches),
            ];
            for (metric, original, neugen) in metrics {
                for (variant, value) in [("original", original), ("neugen", neugen)] {
                    rows.push(CsvRow {
                        scene: s.scene.clone(),
                        metric,
                        variant,
                        weight: None,
                        value,
                    });
                }
            }
        }
        for row in &self.sweep {
            for s in &row.scenes {
                for (metric, value) in [("class_ssim", s.class_ssim), ("match_delta", s.match_delta)] {
                    rows.push(CsvRow {
                        scene: s.scene.clone(),
                        metric,
                        variant: "enhanced",
                        weight: Some(row.weight),
                        value,
                    });
                }
            }
        }
        rows
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        // header is written even when there are no rows
        w.write_record(CSV_COLUMNS)?;
        for row in self.csv_rows() {
            w.write_record([
                row.scene,
                row.metric.to_string(),
                row.variant.to_string(),
                row.weight.map(|v| v.to_string()).unwrap_or_default(),
                row.value.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `scene,metric,variant,weight,value`. `weight` is empty except on sweep
/// rows. Evaluations emit `class_ssim` and `mean_matches` for the
/// `original` and `neugen` variants; sweeps emit `class_ssim` and
/// `match_delta` for the `enhanced` variant at each weight.
pub const CSV_COLUMNS: [&str; 5] = ["scene", "metric", "variant", "weight", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scene: String,
    pub metric: &'static str,
    pub variant: &'static str,
    pub weight: Option<f32>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::Usage(format!("unknown report format {s:?}"))),
        }
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv()?,
    };
    fs::write(path, text)?;
    Ok(())
}
