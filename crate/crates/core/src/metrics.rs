//! Classification metrics over integer confusion counts, per-window
//! report rows, and the metrics CSV contract.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("empty confusion counts")]
pub struct EmptyCounts;

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// tp / (tp + fp); `None` when undefined (no positive predictions).
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// tp / (tp + fn); `None` when undefined (no positive labels).
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// 2PR / (P + R); `None` when P or R is undefined or both are zero.
    pub fn f1(&self) -> Option<f64> {
        let p = self.precision()?;
        let r = self.recall()?;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// Cohen's kappa: (p_o - p_e) / (1 - p_e); defined as 0 when p_e = 1.
    pub fn kappa(&self) -> Result<f64, EmptyCounts> {
        let n = self.total();
        if n == 0 {
            return Err(EmptyCounts);
        }
        let n = n as f64;
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let p_o = (tp + tn) / n;
        let p_e = ((tp + fp) * (tp + fn_) + (tn + fn_) * (tn + fp)) / (n * n);
        if (1.0 - p_e).abs() < f64::EPSILON {
            return Ok(0.0);
        }
        Ok((p_o - p_e) / (1.0 - p_e))
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// One report row per slide boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    pub window_index: u64,
    pub start_ts_ms: u64,
    pub n_samples: u64,
    pub n_pos: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub kappa: Option<f64>,
    pub train_ms: u64,
    pub stop_reason: String,
}

/// Arithmetic means over rows where the metric is defined; undefined rows
/// are excluded and counted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregate {
    pub rows: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub kappa: Option<f64>,
    pub undefined_precision: usize,
    pub undefined_recall: usize,
    pub undefined_f1: usize,
    pub undefined_kappa: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<WindowRow>,
    /// True when the requested window range extended past the stream.
    pub truncated_range: bool,
}

impl MetricsReport {
    pub fn aggregate(&self) -> Aggregate {
        fn mean(values: &[f64]) -> Option<f64> {
            if values.is_empty() {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
        }
        let collect = |f: fn(&WindowRow) -> Option<f64>| -> (Vec<f64>, usize) {
            let defined: Vec<f64> = self.rows.iter().filter_map(f).collect();
            let undefined = self.rows.len() - defined.len();
            (defined, undefined)
        };
        let (precision, undefined_precision) = collect(|r| r.precision);
        let (recall, undefined_recall) = collect(|r| r.recall);
        let (f1, undefined_f1) = collect(|r| r.f1);
        let (kappa, undefined_kappa) = collect(|r| r.kappa);
        Aggregate {
            rows: self.rows.len(),
            precision: mean(&precision),
            recall: mean(&recall),
            f1: mean(&f1),
            kappa: mean(&kappa),
            undefined_precision,
            undefined_recall,
            undefined_f1,
            undefined_kappa,
        }
    }
}

pub const CSV_HEADER: &str =
    "window_index,start_ts_ms,n_samples,n_pos,precision,recall,f1,kappa,train_ms,stop_reason";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}

/// Write the metrics CSV with the exact column contract.
pub fn write_metrics_csv<W: Write>(mut w: W, report: &MetricsReport) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.window_index,
            r.start_ts_ms,
            r.n_samples,
            r.n_pos,
            fmt_opt(r.precision),
            fmt_opt(r.recall),
            fmt_opt(r.f1),
            fmt_opt(r.kappa),
            r.train_ms,
            r.stop_reason
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case_precision_recall_f1() {
        let c = ConfusionCounts { tp: 3, fp: 1, tn: 0, fn_: 2 };
        assert_eq!(c.precision(), Some(0.75));
        assert_eq!(c.recall(), Some(0.6));
        let f1 = c.f1().unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn undefined_is_na() {
        let c = ConfusionCounts { tp: 0, fp: 0, tn: 5, fn_: 0 };
        assert_eq!(c.precision(), None);
        assert_eq!(c.recall(), None);
        assert_eq!(c.f1(), None);
    }

    #[test]
    fn perfect_classifier() {
        let c = ConfusionCounts { tp: 10, fp: 0, tn: 10, fn_: 0 };
        assert_eq!(c.precision(), Some(1.0));
        assert_eq!(c.recall(), Some(1.0));
        assert_eq!(c.f1(), Some(1.0));
        assert_eq!(c.kappa(), Ok(1.0));
    }

    #[test]
    fn hand_case_kappa() {
        let c = ConfusionCounts { tp: 40, fp: 10, tn: 40, fn_: 10 };
        let k = c.kappa().unwrap();
        assert!((k - 0.6).abs() < 1e-15, "{k}");
    }

    #[test]
    fn always_positive_on_balanced_data_has_zero_kappa() {
        let c = ConfusionCounts { tp: 50, fp: 50, tn: 0, fn_: 0 };
        assert_eq!(c.kappa(), Ok(0.0));
    }

    #[test]
    fn empty_counts_error() {
        assert_eq!(ConfusionCounts::default().kappa(), Err(EmptyCounts));
    }

    #[test]
    fn constant_predictor_kappa_nonpositive() {
        for (tp, fp, tn, fn_) in [(30, 70, 0, 0), (0, 0, 70, 30), (5, 95, 0, 0)] {
            let c = ConfusionCounts { tp, fp, tn, fn_ };
            assert!(c.kappa().unwrap() <= 0.0 + 1e-12, "{c:?}");
        }
    }

    #[test]
    fn aggregate_means_skip_undefined() {
        let report = MetricsReport {
            rows: vec![
                WindowRow {
                    window_index: 1,
                    start_ts_ms: 0,
                    n_samples: 10,
                    n_pos: 5,
                    precision: Some(0.5),
                    recall: Some(1.0),
                    f1: Some(2.0 / 3.0),
                    kappa: Some(0.0),
                    train_ms: 1,
                    stop_reason: "early_stop".into(),
                },
                WindowRow {
                    window_index: 2,
                    start_ts_ms: 10,
                    n_samples: 10,
                    n_pos: 0,
                    precision: None,
                    recall: None,
                    f1: None,
                    kappa: None,
                    train_ms: 1,
                    stop_reason: "degenerate".into(),
                },
                WindowRow {
                    window_index: 3,
                    start_ts_ms: 20,
                    n_samples: 10,
                    n_pos: 5,
                    precision: Some(1.0),
                    recall: Some(0.5),
                    f1: Some(2.0 / 3.0),
                    kappa: Some(0.5),
                    train_ms: 1,
                    stop_reason: "max_epochs".into(),
                },
            ],
            truncated_range: false,
        };
        let agg = report.aggregate();
        assert_eq!(agg.rows, 3);
        assert_eq!(agg.precision, Some(0.75));
        assert_eq!(agg.undefined_precision, 1);
        assert_eq!(agg.kappa, Some(0.25));
    }

    #[test]
    fn csv_contract() {
        let report = MetricsReport {
            rows: vec![WindowRow {
                window_index: 20,
                start_ts_ms: 200000,
                n_samples: 100,
                n_pos: 2,
                precision: Some(0.5),
                recall: None,
                f1: Some(0.25),
                kappa: Some(-0.125),
                train_ms: 42,
                stop_reason: "time_budget".into(),
            }],
            truncated_range: false,
        };
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("20,200000,100,2,0.500000,NA,0.250000,-0.125000,42,time_budget")
        );
    }
}
