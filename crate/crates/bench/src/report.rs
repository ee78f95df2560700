//! Report output: CSV for machines, aligned Markdown for people, and
//! two-column TSV for plotting.

use std::io::Write;

use serde::Serialize;

use crate::{BenchReport, CaseStatus, HostInfo, SweepTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
    Tsv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "md" => Ok(Format::Markdown),
            "tsv" => Ok(Format::Tsv),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Serialize)]
struct MatrixRecord<'a> {
    case_id: String,
    strategy: &'a str,
    width: &'a str,
    block: usize,
    layout: &'a str,
    tail: &'a str,
    batch: usize,
    repetitions: usize,
    status: &'a str,
    mean_us: Option<f64>,
    std_us: Option<f64>,
    d_percent: Option<f64>,
    note: &'a str,
}

#[derive(Serialize)]
struct SweepRecord<'a> {
    batch: usize,
    mean_us: Option<f64>,
    std_us: Option<f64>,
    blocks: usize,
    scalar_tail: usize,
    status: &'a str,
}

fn us(seconds: Option<f64>) -> Option<f64> {
    seconds.map(|s| s * 1e6)
}

fn note(status: &CaseStatus) -> &str {
    match status {
        CaseStatus::Verified => "",
        CaseStatus::Skipped(r) | CaseStatus::Failed(r) => r,
    }
}

fn cell(v: Option<f64>, precision: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.precision$}"))
}

fn signed_percent(d: Option<f64>) -> String {
    d.map_or_else(|| "-".to_string(), |d| format!("{:+.1}%", d * 100.0))
}

/// Pipe table with every column padded to its widest cell.
fn markdown_table(out: &mut impl Write, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("| {} |", padded.join(" | "))
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    writeln!(out, "|-{}-|", rule.join("-|-"))?;
    for row in rows {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

fn host_header(out: &mut impl Write, host: &HostInfo, model: &str) -> std::io::Result<()> {
    writeln!(out, "- host: {} / {} ({})", host.arch, host.os, host.cpu)?;
    writeln!(out, "- cpu features: {}", host.features.join(" "))?;
    writeln!(out, "- widest vector width: {}", host.widest_width)?;
    let assertions = if host.debug_assertions { "on" } else { "off" };
    writeln!(
        out,
        "- build: odt-bench {}, debug assertions {assertions}",
        host.version
    )?;
    writeln!(out, "- model: {model}")?;
    writeln!(
        out,
        "- timing: process CPU time per batch, mean over repetitions after warmup"
    )
}

pub fn write_matrix(report: &BenchReport, format: Format, out: &mut impl Write) -> Result<(), ReportError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in &report.rows {
                let c = &r.case;
                w.serialize(MatrixRecord {
                    case_id: c.id(),
                    strategy: c.config.strategy.name(),
                    width: c.config.width.name(),
                    block: c.config.block_size,
                    layout: c.layout.name(),
                    tail: c.config.tail_policy.name(),
                    batch: c.batch_size,
                    repetitions: c.repetitions,
                    status: r.status.label(),
                    mean_us: us(r.mean_s),
                    std_us: us(r.std_s),
                    d_percent: r.d.map(|d| d * 100.0),
                    note: note(&r.status),
                })?;
            }
            w.flush()?;
        }
        Format::Markdown => {
            writeln!(out, "# Batch evaluation timings\n")?;
            host_header(out, &report.host, &report.model)?;
            writeln!(out, "- baseline: {}\n", report.baseline)?;
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    let c = &r.case;
                    vec![
                        c.config.strategy.name().to_string(),
                        c.config.width.name().to_string(),
                        c.config.block_size.to_string(),
                        c.layout.name().to_string(),
                        c.config.tail_policy.name().to_string(),
                        c.batch_size.to_string(),
                        cell(us(r.mean_s), 1),
                        cell(us(r.std_s), 1),
                        signed_percent(r.d),
                        r.status.label().to_string(),
                    ]
                })
                .collect();
            let header = [
                "strategy", "width", "block", "layout", "tail", "batch", "mean us", "std us", "d", "status",
            ];
            markdown_table(out, &header, &rows)?;
            for r in report.rows.iter().filter(|r| !note(&r.status).is_empty()) {
                writeln!(out, "\n- {} {}: {}", r.case.id(), r.status.label(), note(&r.status))?;
            }
        }
        Format::Tsv => {
            writeln!(out, "case_id\tmean_us")?;
            for r in &report.rows {
                writeln!(out, "{}\t{}", r.case.id(), cell(us(r.mean_s), 3))?;
            }
        }
    }
    Ok(())
}

pub fn write_sweep(table: &SweepTable, format: Format, out: &mut impl Write) -> Result<(), ReportError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in &table.rows {
                w.serialize(SweepRecord {
                    batch: r.batch_size,
                    mean_us: us(r.mean_s),
                    std_us: us(r.std_s),
                    blocks: r.blocks,
                    scalar_tail: r.scalar_tail,
                    status: r.status.label(),
                })?;
            }
            w.flush()?;
        }
        Format::Markdown => {
            writeln!(out, "# Batch size sweep\n")?;
            host_header(out, &table.host, &table.model)?;
            writeln!(out, "- configuration: {} {}\n", table.config, table.layout.name())?;
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.batch_size.to_string(),
                        cell(us(r.mean_s), 2),
                        cell(us(r.std_s), 2),
                        r.blocks.to_string(),
                        r.scalar_tail.to_string(),
                        r.status.label().to_string(),
                    ]
                })
                .collect();
            markdown_table(
                out,
                &["batch", "mean us", "std us", "blocks", "scalar tail", "status"],
                &rows,
            )?;
        }
        Format::Tsv => {
            writeln!(out, "batch\tmean_us")?;
            for r in &table.rows {
                writeln!(out, "{}\t{}", r.batch_size, cell(us(r.mean_s), 3))?;
            }
        }
    }
    Ok(())
}
