//! Task metrics: micro-F1 for classification, MASE for regression and mean
//! ROUGE-L F1 for generation.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::PredictionRecord;
use crate::rouge::rouge_l_f1;
use crate::task::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MicroF1,
    Mase,
    RougeL,
}

impl Metric {
    pub fn for_kind(kind: TaskKind) -> Metric {
        match kind {
            TaskKind::Classification => Metric::MicroF1,
            TaskKind::Regression => Metric::Mase,
            TaskKind::Generation => Metric::RougeL,
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Mase)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Metric::MicroF1 => "F1",
            Metric::Mase => "MASE",
            Metric::RougeL => "R-L",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("{predictions} predictions but {gold} gold values")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("MASE needs at least two gold values")]
    TooFewValues,
    #[error("all gold values are equal, so the mean baseline has zero error")]
    DegenerateGold,
}

fn check_len(predictions: usize, gold: usize) -> Result<(), MetricError> {
    if predictions != gold {
        return Err(MetricError::LengthMismatch { predictions, gold });
    }
    Ok(())
}

/// Micro-averaged F1 over pooled per-label counts.
///
/// A failed decode counts as a prediction of a label outside the gold set,
/// i.e. one false positive and one false negative, so the result equals
/// accuracy for single-label data. `gold` holds canonical labels.
pub fn micro_f1(records: &[PredictionRecord], gold: &[String]) -> Result<f64, MetricError> {
    check_len(records.len(), gold.len())?;
    if records.is_empty() {
        return Ok(0.0);
    }
    #[derive(Default)]
    struct Counts {
        tp: u64,
        fp: u64,
        fn_: u64,
    }
    const FAILED: &str = "\u{0}decode-failed";
    let mut per_label: BTreeMap<&str, Counts> = BTreeMap::new();
    for (rec, g) in records.iter().zip(gold) {
        let predicted = if rec.decode_failed {
            FAILED
        } else {
            rec.decoded.as_ref().and_then(|d| d.as_label()).unwrap_or(FAILED)
        };
        if predicted == g.as_str() {
            per_label.entry(predicted).or_default().tp += 1;
        } else {
            per_label.entry(predicted).or_default().fp += 1;
            per_label.entry(g.as_str()).or_default().fn_ += 1;
        }
    }
    let (tp, fp, fn_) = per_label
        .values()
        .fold((0, 0, 0), |(a, b, c), k| (a + k.tp, b + k.fp, c + k.fn_));
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean absolute scaled error against the constant predictor that always
/// outputs the mean of `gold`.
pub fn mase(predictions: &[f64], gold: &[f64]) -> Result<f64, MetricError> {
    check_len(predictions.len(), gold.len())?;
    if gold.len() < 2 {
        return Err(MetricError::TooFewValues);
    }
    let baseline = mean(gold);
    let baseline_mae = gold.iter().map(|g| (g - baseline).abs()).sum::<f64>() / gold.len() as f64;
    if baseline_mae == 0.0 {
        return Err(MetricError::DegenerateGold);
    }
    let mae = predictions
        .iter()
        .zip(gold)
        .map(|(p, g)| (p - g).abs())
        .sum::<f64>()
        / gold.len() as f64;
    Ok(mae / baseline_mae)
}

/// Mean ROUGE-L F1 of raw outputs against gold texts; 0 for no instances.
pub fn rouge_l_metric(records: &[PredictionRecord], gold: &[String]) -> Result<f64, MetricError> {
    check_len(records.len(), gold.len())?;
    if records.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = records
        .iter()
        .zip(gold)
        .map(|(r, g)| rouge_l_f1(&r.raw_output, g).value())
        .sum();
    Ok(total / records.len() as f64)
}
