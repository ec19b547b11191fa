use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use forge_core::metrics::{MetricReport, SampleMetrics, SampleRecord};
use serde::Serialize;

use crate::error::{ForgeError, Result};

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn to_csv(report: &MetricReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| ForgeError::Internal(format!("csv: {e}"));
    w.write_record(["dataset", "count", "failures", "failure_rate", "delta1", "abs_rel", "l1", "l2"]).map_err(err)?;
    for d in &report.datasets {
        w.write_record([
            d.dataset.clone(),
            d.count.to_string(),
            d.failures.to_string(),
            format!("{:.6}", d.failure_rate),
            format!("{:.6}", d.delta1),
            d.abs_rel.map(|v| format!("{v:.6}")).unwrap_or_default(),
            d.l1.map(|v| format!("{v:.6}")).unwrap_or_default(),
            d.l2.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    let total: usize = report.datasets.iter().map(|d| d.count).sum();
    let failures: usize = report.datasets.iter().map(|d| d.failures).sum();
    w.write_record([
        "Average".to_string(),
        total.to_string(),
        failures.to_string(),
        format!("{:.6}", report.average_failure_rate),
        format!("{:.6}", report.average_delta1),
        report.average_abs_rel.map(|v| format!("{v:.6}")).unwrap_or_default(),
        String::new(),
        String::new(),
    ])
    .map_err(err)?;
    let bytes = w.into_inner().map_err(|e| ForgeError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ForgeError::Internal(e.to_string()))
}

/// Metrics as rows, datasets as columns, `Average` last.
pub fn to_table(report: &MetricReport) -> String {
    let mut header = vec!["metric".to_string()];
    header.extend(report.datasets.iter().map(|d| d.dataset.clone()));
    header.push("Average".into());
    let rows: Vec<Vec<String>> = vec![
        {
            let mut r = vec!["delta1".to_string()];
            r.extend(report.datasets.iter().map(|d| format!("{:.3}", d.delta1)));
            r.push(format!("{:.3}", report.average_delta1));
            r
        },
        {
            let mut r = vec!["abs_rel".to_string()];
            r.extend(report.datasets.iter().map(|d| opt(d.abs_rel)));
            r.push(opt(report.average_abs_rel));
            r
        },
        {
            let mut r = vec!["fail_rate".to_string()];
            r.extend(report.datasets.iter().map(|d| format!("{:.3}", d.failure_rate)));
            r.push(format!("{:.3}", report.average_failure_rate));
            r
        },
        {
            let mut r = vec!["samples".to_string()];
            r.extend(report.datasets.iter().map(|d| d.count.to_string()));
            r.push(report.datasets.iter().map(|d| d.count).sum::<usize>().to_string());
            r
        },
    ];
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

#[derive(Serialize)]
struct SampleLine<'a> {
    #[serde(flatten)]
    record: &'a SampleRecord,
    #[serde(flatten)]
    metrics: &'a SampleMetrics,
}

pub fn to_jsonl(report: &MetricReport) -> Result<String> {
    let mut out = String::new();
    for (record, metrics) in report.records.iter().zip(&report.metrics) {
        out.push_str(&serde_json::to_string(&SampleLine { record, metrics }).map_err(|e| ForgeError::Internal(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub table: PathBuf,
    pub samples: PathBuf,
}

/// Writes `metrics.csv`, `metrics.txt` and `samples.jsonl`. A `flag` line
/// (e.g. an abort reason) is prepended to the text table.
pub fn write_report(report: &MetricReport, out_dir: &Path, flag: Option<&str>) -> Result<ReportFiles> {
    fs::create_dir_all(out_dir).map_err(ForgeError::io(out_dir))?;
    let files = ReportFiles { csv: out_dir.join("metrics.csv"), table: out_dir.join("metrics.txt"), samples: out_dir.join("samples.jsonl") };
    let mut table = String::new();
    if let Some(f) = flag {
        let _ = writeln!(table, "PARTIAL: {f}");
    }
    table.push_str(&to_table(report));
    fs::write(&files.csv, to_csv(report)?).map_err(ForgeError::io(&files.csv))?;
    fs::write(&files.table, table).map_err(ForgeError::io(&files.table))?;
    fs::write(&files.samples, to_jsonl(report)?).map_err(ForgeError::io(&files.samples))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use forge_core::metrics::{aggregate, ParseStatus};
    use forge_core::tasks::TaskKind;

    fn rec(id: &str, ds: &str, pred: Option<f64>, gt: f64) -> SampleRecord {
        let status = if pred.is_some() { ParseStatus::Ok } else { ParseStatus::NoNumber };
        SampleRecord { sample_id: id.into(), task: TaskKind::Distance, dataset: ds.into(), pred, gt, status }
    }

    #[test]
    fn table_has_datasets_as_columns_and_average_last() {
        let r = aggregate(vec![rec("1", "nyu", Some(2.0), 2.0), rec("2", "kitti", None, 10.0)]).unwrap();
        let t = to_table(&r);
        let header: Vec<&str> = t.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, vec!["metric", "kitti", "nyu", "Average"]);
        assert!(t.lines().nth(1).unwrap().ends_with("0.500"));
        let csv = to_csv(&r).unwrap();
        assert!(csv.lines().last().unwrap().starts_with("Average,2,1,"));
        let jl = to_jsonl(&r).unwrap();
        assert_eq!(jl.lines().count(), 2);
        assert!(jl.contains("\"delta1\":1.0"));
    }
}
