use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::PrequentialMetrics;
use super::prequential::LogRecord;
use super::ScenarioId;
use crate::features::DataKind;
use crate::Result;

/// Metrics of one session under one scenario and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub data: DataKind,
    pub scenario: ScenarioId,
    pub model: String,
    pub metrics: PrequentialMetrics,
}

/// Mean and standard deviation across the sessions of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub data: DataKind,
    pub scenario: ScenarioId,
    pub model: String,
    pub sessions: usize,
    /// Values in [`metric_columns`] order.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub preq_time_s: Option<f64>,
}

pub fn metric_columns(n_classes: usize) -> Vec<String> {
    let mut cols = vec!["accuracy".to_string(), "precision_macro".to_string()];
    cols.extend((0..n_classes).map(|c| format!("precision_c{c}")));
    cols.push("recall_macro".into());
    cols.extend((0..n_classes).map(|c| format!("recall_c{c}")));
    cols.extend(["crloss", "rmse", "mae"].map(String::from));
    cols
}

fn metric_values(m: &PrequentialMetrics) -> Vec<f64> {
    let mut v = vec![m.accuracy, m.precision_macro];
    v.extend(&m.precision);
    v.push(m.recall_macro);
    v.extend(&m.recall);
    v.extend([m.crloss, m.rmse, m.mae]);
    v
}

/// Sample standard deviation; zero for a single session.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (data, scenario, model), keeping first-appearance order.
pub fn aggregate(rows: &[ReportRow]) -> Vec<AggregateRow> {
    let mut groups: Vec<(&ReportRow, Vec<&ReportRow>)> = Vec::new();
    for row in rows {
        match groups
            .iter_mut()
            .find(|(k, _)| k.data == row.data && k.scenario == row.scenario && k.model == row.model)
        {
            Some((_, members)) => members.push(row),
            None => groups.push((row, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(key, members)| {
            let values: Vec<Vec<f64>> = members.iter().map(|r| metric_values(&r.metrics)).collect();
            let width = values.iter().map(Vec::len).max().unwrap_or(0);
            let (mean, std) = (0..width)
                .map(|i| {
                    mean_std(
                        &values
                            .iter()
                            .map(|v| v.get(i).copied().unwrap_or(0.0))
                            .collect::<Vec<_>>(),
                    )
                })
                .unzip();
            let times: Option<Vec<f64>> = members.iter().map(|r| r.metrics.preq_time_s).collect();
            AggregateRow {
                data: key.data,
                scenario: key.scenario,
                model: key.model.clone(),
                sessions: members.len(),
                mean,
                std,
                preq_time_s: times.map(|t| mean_std(&t).0),
            }
        })
        .collect()
}

/// Comma-separated report with a header line. Without timing the
/// `preq_time_s` cells are empty so reports stay byte-identical across runs.
pub fn write_csv<W: Write>(writer: W, rows: &[AggregateRow], n_classes: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["data".to_string(), "scenario".into(), "model".into()];
    header.extend(metric_columns(n_classes));
    header.push("preq_time_s".into());
    w.write_record(&header).map_err(csv_error)?;
    for row in rows {
        let mut rec = vec![
            row.data.as_str().to_string(),
            row.scenario.to_string(),
            row.model.clone(),
        ];
        rec.extend(row.mean.iter().map(|v| format!("{v:.6}")));
        rec.push(
            row.preq_time_s
                .map(|t| format!("{t:.3}"))
                .unwrap_or_default(),
        );
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// Fixed-width table of `mean ± std` cells.
pub fn render_table(rows: &[AggregateRow], n_classes: usize) -> String {
    let cols = metric_columns(n_classes);
    let mut header = vec!["data".to_string(), "scenario".into(), "model".into()];
    header.extend(cols.iter().cloned());
    header.push("preq_time_s".into());
    let mut cells: Vec<Vec<String>> = vec![header];
    for row in rows {
        let mut line = vec![
            row.data.as_str().to_string(),
            row.scenario.to_string(),
            row.model.clone(),
        ];
        for (m, s) in row.mean.iter().zip(&row.std) {
            line.push(format!("{m:.4}±{s:.4}"));
        }
        line.push(
            row.preq_time_s
                .map(|t| format!("{t:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
        cells.push(line);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|i| {
            cells
                .iter()
                .map(|r| r[i].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (r, line) in cells.iter().enumerate() {
        let padded: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).unwrap();
        if r == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            writeln!(out, "{}", rule.join("  ")).unwrap();
        }
    }
    out
}

/// `n,truth,pred,p(c0),...` lines after `#` comment lines. A missing truth is `-`.
pub fn write_prediction_log<W: Write>(
    mut w: W,
    comments: &[String],
    n_classes: usize,
    log: &[LogRecord],
) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let probs: Vec<String> = (0..n_classes).map(|c| format!("p(c{c})")).collect();
    writeln!(w, "n,truth,pred,{}", probs.join(","))?;
    for r in log {
        let truth = r.truth.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        write!(w, "{},{truth},{}", r.n, r.pred)?;
        for p in &r.proba.0 {
            write!(w, ",{p:.6}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::MetricsAccumulator;
    use crate::models::Proba;
    use crate::stream::ClassLabel;

    fn metrics(acc: f64) -> PrequentialMetrics {
        let mut m = MetricsAccumulator::new(3).summary();
        m.accuracy = acc;
        m
    }

    fn row(acc: f64) -> ReportRow {
        ReportRow {
            data: DataKind::Engineered,
            scenario: ScenarioId::A,
            model: "gnb".into(),
            metrics: metrics(acc),
        }
    }

    #[test]
    fn single_row_csv() {
        let agg = aggregate(&[row(0.5)]);
        let mut out = Vec::new();
        write_csv(&mut out, &agg, 3).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "data,scenario,model,accuracy,precision_macro,precision_c0,precision_c1,precision_c2,recall_macro,recall_c0,recall_c1,recall_c2,crloss,rmse,mae,preq_time_s"
        );
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("engineered,A,gnb,0.500000,"));
        assert!(lines[1].ends_with(','));
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut out = Vec::new();
        write_csv(&mut out, &[], 2).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1);
        assert_eq!(render_table(&[], 2).lines().count(), 2);
    }

    #[test]
    fn sessions_aggregate_to_mean_and_std() {
        let agg = aggregate(&[row(0.4), row(0.6)]);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].sessions, 2);
        assert!((agg[0].mean[0] - 0.5).abs() < 1e-12);
        assert!((agg[0].std[0] - 0.02f64.sqrt()).abs() < 1e-12);
        assert!(render_table(&agg, 3).contains("0.5000±0.1414"));
    }

    #[test]
    fn prediction_log_format() {
        let log = vec![LogRecord {
            n: 7,
            truth: Some(ClassLabel(1)),
            pred: ClassLabel(0),
            proba: Proba(vec![0.75, 0.25]),
            bootstrap: false,
        }];
        let mut out = Vec::new();
        write_prediction_log(&mut out, &["seed 1".into()], 2, &log).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "# seed 1\nn,truth,pred,p(c0),p(c1)\n7,c1,c0,0.750000,0.250000\n"
        );
    }
}
