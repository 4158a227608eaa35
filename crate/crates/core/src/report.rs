//! Render benchmark reports as a text table, CSV or JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::bench::BenchReport;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,input_snr_db,snr_mean_db,snr_median_db,rmse_mean,time_mean_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "table" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::invalid(format!("unknown report format `{s}`"))),
        }
    }
}

impl ReportFormat {
    /// Guess from a file extension, falling back to text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::Csv,
            Some("json") => Self::Json,
            _ => Self::Text,
        }
    }
}

pub fn render_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for c in &report.cells {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    c.method, c.input_snr_db, c.snr_mean_db, c.snr_median_db, c.rmse_mean, c.time_mean_s
                );
            }
            s
        }
        ReportFormat::Text => render_table(report),
    }
}

fn render_table(report: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", report.snr_definition);
    let _ = writeln!(s, "# {}", report.environment);
    for d in &report.datasets {
        let _ = writeln!(
            s,
            "# {} ({} split, K={}, n={}, {} dB, noisy spectra {:.2} dB)",
            d.path,
            match d.split {
                crate::dataset::Split::Train => "train",
                crate::dataset::Split::Valid => "valid",
                crate::dataset::Split::Test => "test",
            },
            d.k,
            d.n,
            d.input_snr_db,
            d.noisy_snr_mean_db
        );
    }
    let _ = writeln!(
        s,
        "{:<10} {:>12} {:>12} {:>14} {:>12} {:>12}",
        "method", "input_snr_db", "snr_mean_db", "snr_median_db", "rmse_mean", "time_mean_s"
    );
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{:<10} {:>12.1} {:>12.3} {:>14.3} {:>12.4e} {:>12.4e}",
            c.method.as_str(),
            c.input_snr_db,
            c.snr_mean_db,
            c.snr_median_db,
            c.rmse_mean,
            c.time_mean_s
        );
    }
    s
}

/// Write the report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &BenchReport, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let text = render_report(report, format);
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
