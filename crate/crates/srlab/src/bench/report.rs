//! Report serialization: CSV with both display-rounded and full-precision
//! metric columns, plus a per-image Markdown table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::{MetricReport, MetricRow};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot access report {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

const CSV_HEADER: &str = "image,method,mse,psnr,ssim,mse_full,psnr_full,ssim_full";

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.2}")
    }
}

fn fmt_full(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Renders the CSV report: two-decimal display columns followed by
/// full-precision machine-readable columns.
pub fn render_csv(report: &MetricReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.image,
            row.method,
            fmt_metric(row.mse),
            fmt_metric(row.psnr),
            fmt_metric(row.ssim),
            fmt_full(row.mse),
            fmt_full(row.psnr),
            fmt_full(row.ssim),
        );
    }
    out
}

/// Parses a CSV report produced by [`render_csv`], reading the
/// full-precision columns.
pub fn parse_csv(text: &str) -> Result<MetricReport, ReportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        _ => {
            return Err(ReportError::Malformed {
                line: 1,
                reason: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }

    let mut rows = Vec::new();
    for (index, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(ReportError::Malformed {
                line: index + 1,
                reason: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let num = |field: &str| -> Result<f64, ReportError> {
            if field == "inf" {
                return Ok(f64::INFINITY);
            }
            field.parse().map_err(|_| ReportError::Malformed {
                line: index + 1,
                reason: format!("bad number {field:?}"),
            })
        };
        rows.push(MetricRow {
            image: fields[0].to_string(),
            method: fields[1].to_string(),
            mse: num(fields[5])?,
            psnr: num(fields[6])?,
            ssim: num(fields[7])?,
        });
    }
    Ok(MetricReport { rows })
}

/// Renders one Markdown table per image: method rows with two-decimal
/// MSE / PSNR / SSIM columns.
pub fn render_markdown(report: &MetricReport) -> String {
    let mut out = String::from("# Upscaling benchmark\n");
    let mut images: Vec<&str> = Vec::new();
    for row in &report.rows {
        if !images.contains(&row.image.as_str()) {
            images.push(&row.image);
        }
    }
    for image in images {
        let _ = write!(
            out,
            "\n## {image}\n\n| Method | MSE | PSNR | SSIM |\n|---|---:|---:|---:|\n"
        );
        for row in report.rows.iter().filter(|r| r.image == image) {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                row.method,
                fmt_metric(row.mse),
                fmt_metric(row.psnr),
                fmt_metric(row.ssim),
            );
        }
    }
    out
}

pub fn write_reports(report: &MetricReport, dir: &Path) -> Result<(), ReportError> {
    let csv_path = dir.join("report.csv");
    std::fs::write(&csv_path, render_csv(report)).map_err(|source| ReportError::Io {
        path: csv_path,
        source,
    })?;
    let md_path = dir.join("report.md");
    std::fs::write(&md_path, render_markdown(report)).map_err(|source| ReportError::Io {
        path: md_path,
        source,
    })?;
    Ok(())
}
