//! Bag-level scoring: instance probabilities are combined with linearly
//! decaying rank weights, thresholded into a label, and summarized as
//! accuracy / F1 / confusion counts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mildata::Label;
use crate::scalar::Scalar;

/// Combines ranked instance probabilities into one bag score:
/// with k instances, rank j (1-based) carries weight (k−j+1), normalized by
/// k(k+1)/2. The result is a convex combination, so it stays inside
/// [min, max] of the inputs, favors earlier ranks, and reduces to the
/// identity for k = 1.
///
/// Probabilities must lie in [0, 1]; the slice must be non-empty.
pub fn weighted_evaluate<S: Scalar>(probs: &[S]) -> Result<S> {
    if probs.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty instance list"));
    }
    let k = probs.len();
    let mut num = S::zero();
    for (j, &p) in probs.iter().enumerate() {
        if !(S::zero()..=S::one()).contains(&p) {
            return Err(Error::invalid(format!(
                "instance probability {} at rank {} outside [0, 1]",
                p,
                j + 1
            )));
        }
        num += S::from_usize(k - j) * p;
    }
    Ok(num / S::from_usize(k * (k + 1) / 2))
}

/// Positive iff the aggregate score reaches the threshold.
pub fn classify_bag<S: Scalar>(aggregate: S, threshold: S) -> Label {
    if aggregate >= threshold {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// One bag's scored outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagPrediction {
    pub bag_id: String,
    /// Instance probabilities in rank order.
    pub instance_probs: Vec<f64>,
    pub aggregate_p: f64,
    pub predicted_label: Label,
    pub true_label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Accuracy, F1 (zero when undefined), and confusion counts over a
/// non-empty prediction list.
pub fn metrics(per_bag: &[BagPrediction]) -> Result<(f64, f64, Confusion)> {
    if per_bag.is_empty() {
        return Err(Error::invalid("metrics require at least one prediction"));
    }
    let mut c = Confusion::default();
    for p in per_bag {
        match (p.predicted_label, p.true_label) {
            (Label::Positive, Label::Positive) => c.true_positives += 1,
            (Label::Positive, Label::Negative) => c.false_positives += 1,
            (Label::Negative, Label::Positive) => c.false_negatives += 1,
            (Label::Negative, Label::Negative) => c.true_negatives += 1,
        }
    }
    let accuracy = (c.true_positives + c.true_negatives) as f64 / c.total() as f64;
    let f1_denom = 2 * c.true_positives + c.false_positives + c.false_negatives;
    let f1 = if f1_denom == 0 {
        0.0
    } else {
        2.0 * c.true_positives as f64 / f1_denom as f64
    };
    Ok((accuracy, f1, c))
}

/// Full evaluation artifact for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub per_bag: Vec<BagPrediction>,
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl MetricsReport {
    /// Computes the summary fields from the per-bag list.
    pub fn compute(threshold: f64, per_bag: Vec<BagPrediction>) -> Result<MetricsReport> {
        let (accuracy, f1, confusion) = metrics(&per_bag)?;
        Ok(MetricsReport { threshold, per_bag, accuracy, f1, confusion })
    }
}

pub fn save_metrics_json(report: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::format(path, format!("serializing metrics: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_metrics_json(path: impl AsRef<Path>) -> Result<MetricsReport> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// One `metric,value` row per summary quantity.
pub fn write_metrics_summary_csv(report: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let c = &report.confusion;
    let out = format!(
        "metric,value\nthreshold,{}\naccuracy,{}\nf1,{}\ntrue_positives,{}\nfalse_positives,{}\nfalse_negatives,{}\ntrue_negatives,{}\n",
        report.threshold,
        report.accuracy,
        report.f1,
        c.true_positives,
        c.false_positives,
        c.false_negatives,
        c.true_negatives
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
