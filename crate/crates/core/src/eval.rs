//! Confusion matrices, per-relation precision/recall/F1/accuracy, macro
//! averages, and report rendering (text table, CSV, JSON).
//!
//! Any 0/0 metric is undefined, rendered as an em dash in text and null
//! in JSON, and excluded from macro averages; silent zeros would skew
//! the averages on relations with no positive examples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::RelationType;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions and labels differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot evaluate zero predictions")]
    Empty,
    #[error("no relation has any defined metric")]
    AllUndefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Exact confusion counts for binary predictions against labels.
pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => cm.true_pos += 1,
            (true, false) => cm.false_pos += 1,
            (false, false) => cm.true_neg += 1,
            (false, true) => cm.false_neg += 1,
        }
    }
    Ok(cm)
}

/// Metric bundle; `None` marks an undefined (0/0) value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

/// recall = tp/(tp+fn), precision = tp/(tp+fp), f1 = 2PR/(P+R),
/// accuracy = (tp+tn)/total.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let recall = ratio(cm.true_pos, cm.true_pos + cm.false_neg);
    let precision = ratio(cm.true_pos, cm.true_pos + cm.false_pos);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let accuracy = ratio(cm.true_pos + cm.true_neg, cm.total());
    Metrics {
        recall,
        precision,
        f1,
        accuracy,
    }
}

/// Unweighted means over relations; per metric, undefined entries are
/// skipped rather than counted as zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

/// Reproducibility context carried inside every report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub workers: usize,
    pub decision_threshold: f64,
    pub n_estimators: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Hex SHA-256 of the dataset file the evaluation read.
    pub dataset_fingerprint: String,
    /// Hex SHA-256 of the effective pipeline configuration.
    pub config_fingerprint: String,
    /// Macro metrics of the degenerate classifier that predicts every
    /// relation present, the floor any trained model must beat.
    pub baseline_always_positive: MacroMetrics,
}

/// Per-relation metrics in canonical label order plus macro averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metadata: ReportMetadata,
    pub per_relation: Vec<(RelationType, Metrics)>,
    #[serde(rename = "macro")]
    pub macro_: MacroMetrics,
}

impl MetricsReport {
    /// Assembles a report from per-relation confusion matrices, in the
    /// order given (canonically `RelationType::LABELS`).
    pub fn from_confusions(
        matrices: &[(RelationType, ConfusionMatrix)],
        metadata: ReportMetadata,
    ) -> Result<Self, EvalError> {
        let per_relation: Vec<(RelationType, Metrics)> = matrices
            .iter()
            .map(|(rel, cm)| (rel.clone(), metrics(cm)))
            .collect();
        let macro_ = macro_average(&per_relation)?;
        Ok(MetricsReport {
            metadata,
            per_relation,
            macro_,
        })
    }
}

/// Unweighted arithmetic mean per metric over relations where that
/// metric is defined. Errors only when nothing at all is defined.
pub fn macro_average(
    per_relation: &[(RelationType, Metrics)],
) -> Result<MacroMetrics, EvalError> {
    let mean_of = |pick: fn(&Metrics) -> Option<f64>| -> Option<f64> {
        let defined: Vec<f64> = per_relation.iter().filter_map(|(_, m)| pick(m)).collect();
        if defined.is_empty() {
            return None;
        }
        // The mean of identical values is that value; return it directly
        // so the identity holds exactly, without summation rounding.
        if defined.iter().all(|v| *v == defined[0]) {
            return Some(defined[0]);
        }
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    let result = MacroMetrics {
        recall: mean_of(|m| m.recall),
        precision: mean_of(|m| m.precision),
        f1: mean_of(|m| m.f1),
    };
    if result.recall.is_none() && result.precision.is_none() && result.f1.is_none() {
        return Err(EvalError::AllUndefined);
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// Human-readable table, metrics rounded to 2 decimals.
    Table,
    /// Full-precision CSV, one metric per row, one relation per column.
    Csv,
    /// Full-precision JSON with the metadata block.
    Json,
}

type MetricPick = fn(&Metrics) -> Option<f64>;

/// Renders the report. Relations are columns and metrics are rows; the
/// text table rounds to 2 decimals and prints an em dash for undefined
/// values, CSV leaves undefined cells empty, JSON uses null.
pub fn render_report(report: &MetricsReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
            bytes.push(b'\n');
            bytes
        }
        ReportFormat::Csv => {
            let mut out = String::from("metric");
            for (rel, _) in &report.per_relation {
                out.push_str(&format!(",{rel}"));
            }
            out.push_str(",macro\n");
            let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let rows: [(&str, MetricPick, Option<f64>); 4] = [
                ("recall", |m| m.recall, report.macro_.recall),
                ("precision", |m| m.precision, report.macro_.precision),
                ("f1", |m| m.f1, report.macro_.f1),
                ("accuracy", |m| m.accuracy, None),
            ];
            for (name, pick, macro_value) in rows {
                out.push_str(name);
                for (_, m) in &report.per_relation {
                    out.push(',');
                    out.push_str(&cell(pick(m)));
                }
                out.push(',');
                out.push_str(&cell(macro_value));
                out.push('\n');
            }
            out.into_bytes()
        }
        ReportFormat::Table => {
            let mut out = String::new();
            let width = 11usize;
            out.push_str(&format!("{:<10}", ""));
            for (rel, _) in &report.per_relation {
                out.push_str(&format!("{:>width$}", rel.to_string()));
            }
            out.push('\n');
            let cell =
                |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "—".to_string());
            let rows: [(&str, MetricPick); 4] = [
                ("recall", |m| m.recall),
                ("precision", |m| m.precision),
                ("f1", |m| m.f1),
                ("accuracy", |m| m.accuracy),
            ];
            for (name, pick) in rows {
                out.push_str(&format!("{name:<10}"));
                for (_, m) in &report.per_relation {
                    out.push_str(&format!("{:>width$}", cell(pick(m))));
                }
                out.push('\n');
            }
            let m = &report.macro_;
            out.push_str(&format!(
                "macro      recall {}  precision {}  f1 {}\n",
                cell(m.recall),
                cell(m.precision),
                cell(m.f1)
            ));
            out.into_bytes()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cm(tp: usize, fp: usize, tn: usize, fn_: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fn_,
        }
    }

    #[test]
    fn confusion_basic_fixture() {
        let m = confusion(&[true, true, false], &[true, true, false]).unwrap();
        assert_eq!(m, cm(2, 0, 1, 0));
    }

    #[test]
    fn confusion_all_positive_predictions() {
        let preds = vec![true; 10];
        let mut labels = vec![true; 8];
        labels.extend([false, false]);
        let m = confusion(&preds, &labels).unwrap();
        assert_eq!(m, cm(8, 2, 0, 0));
    }

    #[test]
    fn confusion_all_negative() {
        let m = confusion(&[false; 4], &[false; 4]).unwrap();
        assert_eq!(m, cm(0, 0, 4, 0));
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(
            confusion(&[true], &[true, false]),
            Err(EvalError::LengthMismatch(1, 2))
        ));
        assert!(matches!(confusion(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn metrics_hand_fixtures() {
        // five hand-computed cases
        let m = metrics(&cm(8, 2, 88, 2));
        assert_relative_eq!(m.precision.unwrap(), 0.8);
        assert_relative_eq!(m.recall.unwrap(), 0.8);
        assert_relative_eq!(m.f1.unwrap(), 0.8);
        assert_relative_eq!(m.accuracy.unwrap(), 0.96);

        let m = metrics(&cm(8, 2, 0, 0));
        assert_relative_eq!(m.precision.unwrap(), 0.8);
        assert_relative_eq!(m.recall.unwrap(), 1.0);
        assert_relative_eq!(m.f1.unwrap(), 8.0 / 9.0);
        assert_relative_eq!(m.accuracy.unwrap(), 0.8);

        let m = metrics(&cm(1, 1, 1, 1));
        assert_relative_eq!(m.precision.unwrap(), 0.5);
        assert_relative_eq!(m.recall.unwrap(), 0.5);
        assert_relative_eq!(m.f1.unwrap(), 0.5);
        assert_relative_eq!(m.accuracy.unwrap(), 0.5);

        let m = metrics(&cm(1, 0, 1, 1));
        assert_relative_eq!(m.precision.unwrap(), 1.0);
        assert_relative_eq!(m.recall.unwrap(), 0.5);
        assert_relative_eq!(m.f1.unwrap(), 2.0 / 3.0);
        assert_relative_eq!(m.accuracy.unwrap(), 2.0 / 3.0);

        let m = metrics(&cm(2, 0, 1, 0));
        assert_relative_eq!(m.precision.unwrap(), 1.0);
        assert_relative_eq!(m.recall.unwrap(), 1.0);
        assert_relative_eq!(m.f1.unwrap(), 1.0);
        assert_relative_eq!(m.accuracy.unwrap(), 1.0);
    }

    #[test]
    fn zero_over_zero_is_undefined_not_zero() {
        let m = metrics(&cm(0, 0, 4, 0));
        assert_eq!(m.recall, None);
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.accuracy, Some(1.0));
    }

    #[test]
    fn f1_undefined_when_p_plus_r_zero() {
        let m = metrics(&cm(0, 3, 0, 2));
        assert_eq!(m.precision, Some(0.0));
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
    }

    fn report_rows(values: &[(RelationType, Metrics)]) -> Vec<(RelationType, Metrics)> {
        values.to_vec()
    }

    #[test]
    fn macro_average_of_reference_recalls() {
        // published per-relation recalls; their mean is 0.5583...
        let recalls = [0.79, 0.54, 0.37, 0.84, 0.61, 0.20];
        let rows: Vec<(RelationType, Metrics)> = RelationType::LABELS
            .iter()
            .zip(recalls)
            .map(|(rel, r)| {
                (
                    rel.clone(),
                    Metrics {
                        recall: Some(r),
                        ..Metrics::default()
                    },
                )
            })
            .collect();
        let macro_ = macro_average(&rows).unwrap();
        assert!((macro_.recall.unwrap() - 0.5583).abs() < 1e-4);
        assert_eq!(macro_.precision, None);
    }

    #[test]
    fn macro_of_single_relation_is_identity() {
        let rows = report_rows(&[(
            RelationType::Syn,
            Metrics {
                recall: Some(0.7),
                precision: Some(0.9),
                f1: Some(0.7875),
                accuracy: Some(0.8),
            },
        )]);
        let macro_ = macro_average(&rows).unwrap();
        assert_eq!(macro_.recall, Some(0.7));
        assert_eq!(macro_.precision, Some(0.9));
        assert_eq!(macro_.f1, Some(0.7875));
    }

    #[test]
    fn macro_is_symmetric_mean() {
        let mk = |f1: f64| Metrics {
            f1: Some(f1),
            ..Metrics::default()
        };
        let rows = report_rows(&[(RelationType::Syn, mk(0.4)), (RelationType::Isa, mk(0.6))]);
        assert_relative_eq!(macro_average(&rows).unwrap().f1.unwrap(), 0.5);
    }

    #[test]
    fn macro_of_identical_values_is_that_value() {
        for value in [0.5, 0.75, 0.84, 0.2, 1.0] {
            let rows: Vec<(RelationType, Metrics)> = RelationType::LABELS
                .iter()
                .map(|rel| {
                    (
                        rel.clone(),
                        Metrics {
                            recall: Some(value),
                            precision: Some(value),
                            f1: Some(value),
                            accuracy: Some(value),
                        },
                    )
                })
                .collect();
            let macro_ = macro_average(&rows).unwrap();
            assert_eq!(macro_.recall, Some(value));
            assert_eq!(macro_.precision, Some(value));
            assert_eq!(macro_.f1, Some(value));
        }
    }

    #[test]
    fn macro_skips_undefined_entries() {
        let rows = report_rows(&[
            (
                RelationType::Syn,
                Metrics {
                    recall: Some(0.5),
                    ..Metrics::default()
                },
            ),
            (RelationType::Isa, Metrics::default()),
        ]);
        let macro_ = macro_average(&rows).unwrap();
        assert_eq!(macro_.recall, Some(0.5));
    }

    #[test]
    fn macro_all_undefined_is_an_error() {
        let rows = report_rows(&[(RelationType::Syn, Metrics::default())]);
        assert!(matches!(macro_average(&rows), Err(EvalError::AllUndefined)));
    }

    fn sample_report() -> MetricsReport {
        let matrices: Vec<(RelationType, ConfusionMatrix)> = RelationType::LABELS
            .iter()
            .map(|rel| (rel.clone(), cm(84, 16, 880, 20)))
            .collect();
        MetricsReport::from_confusions(&matrices, ReportMetadata::default()).unwrap()
    }

    #[test]
    fn table_rendering_rounds_to_two_decimals() {
        let text = String::from_utf8(render_report(&sample_report(), ReportFormat::Table)).unwrap();
        assert!(text.contains("0.84"), "{text}");
        assert!(text.contains("r_agent-1"));
    }

    #[test]
    fn table_renders_dash_for_undefined() {
        let rows = [(RelationType::Syn, cm(0, 0, 5, 0))];
        let report = MetricsReport {
            metadata: ReportMetadata::default(),
            per_relation: rows.iter().map(|(r, c)| (r.clone(), metrics(c))).collect(),
            macro_: MacroMetrics::default(),
        };
        let text = String::from_utf8(render_report(&report, ReportFormat::Table)).unwrap();
        assert!(text.contains('—'), "{text}");
    }

    #[test]
    fn json_uses_null_for_undefined() {
        let rows = [(RelationType::Syn, cm(0, 0, 5, 0))];
        let report = MetricsReport {
            metadata: ReportMetadata::default(),
            per_relation: rows.iter().map(|(r, c)| (r.clone(), metrics(c))).collect(),
            macro_: MacroMetrics::default(),
        };
        let json = String::from_utf8(render_report(&report, ReportFormat::Json)).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value["per_relation"][0][1]["recall"].is_null());
        assert_eq!(value["per_relation"][0][1]["accuracy"], 1.0);
    }

    #[test]
    fn csv_round_trips_full_precision() {
        let report = sample_report();
        let csv_bytes = render_report(&report, ReportFormat::Csv);
        let text = String::from_utf8(csv_bytes).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header,
            "metric,r_syn,r_isa,r_hypo,r_lieu,r_agent-1,r_agent,macro"
        );
        let recall_line = lines.next().unwrap();
        let first_recall: f64 = recall_line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(
            first_recall,
            report.per_relation[0].1.recall.unwrap(),
            "parse-back must be exact"
        );
    }

    #[test]
    fn metrics_invariant_under_permutation() {
        let preds = [true, false, true, true, false, false];
        let labels = [true, true, false, true, false, true];
        let base = metrics(&confusion(&preds, &labels).unwrap());
        // rotate both in lockstep
        let mut p = preds.to_vec();
        let mut l = labels.to_vec();
        p.rotate_left(3);
        l.rotate_left(3);
        let rotated = metrics(&confusion(&p, &l).unwrap());
        assert_eq!(base, rotated);
    }

    #[test]
    fn f1_lies_between_precision_and_recall() {
        for (tp, fp, fn_) in [(5, 2, 3), (1, 9, 0), (7, 1, 6), (3, 3, 3)] {
            let m = metrics(&cm(tp, fp, 10, fn_));
            let (p, r, f1) = (
                m.precision.unwrap(),
                m.recall.unwrap(),
                m.f1.unwrap(),
            );
            assert!(f1 <= p.max(r) + 1e-12);
            assert!(f1 >= p.min(r) - 1e-12);
        }
    }
}
