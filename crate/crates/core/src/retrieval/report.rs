use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RetrievalError;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub gallery_size: usize,
    pub query_count: usize,
    pub dim: usize,
    /// Free-form run labels (stats mode, shift file, rewrite on/off...).
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsAtK {
    pub k: usize,
    pub recall: f64,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDetail {
    pub query_id: String,
    /// 1-based rank of the best-placed relevant image.
    pub best_rank: usize,
    pub relevant_count: usize,
    /// Aligned with `config.ks`.
    pub recall: Vec<f64>,
    pub hit: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub config: EvalConfig,
    pub metrics: Vec<MetricsAtK>,
    pub per_query: Vec<QueryDetail>,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<&MetricsAtK> {
        self.metrics.iter().find(|m| m.k == k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per K: `k,recall_at_k,hit_rate_at_k`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "recall_at_k", "hit_rate_at_k"])
            .expect("in-memory write");
        for m in &self.metrics {
            w.write_record([m.k.to_string(), m.recall.to_string(), m.hit_rate.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Long format for plotting: `metric,K,value`.
    pub fn to_plot_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "K", "value"]).expect("in-memory write");
        for (name, pick) in [
            ("recall", (|m: &MetricsAtK| m.recall) as fn(&MetricsAtK) -> f64),
            ("hit_rate", |m: &MetricsAtK| m.hit_rate),
        ] {
            for m in &self.metrics {
                w.write_record([name.to_string(), m.k.to_string(), pick(m).to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format `{other}` (json|csv)")),
        }
    }
}

/// `report.json` -> `report.plot.csv`.
pub fn plot_data_path(path: &Path) -> PathBuf {
    path.with_extension("plot.csv")
}

/// Writes the report and its plot-data companion next to it.
pub fn emit_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<PathBuf, RetrievalError> {
    let body = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    };
    write_text(path, &body)?;
    let plot = plot_data_path(path);
    write_text(&plot, &report.to_plot_csv())?;
    Ok(plot)
}

fn write_text(path: &Path, body: &str) -> Result<(), RetrievalError> {
    let io = |e: std::io::Error| RetrievalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(body.as_bytes()).map_err(io)?;
    out.flush().map_err(io)
}
