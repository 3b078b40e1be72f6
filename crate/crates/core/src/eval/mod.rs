//! Classification and regression metrics, curve emitters, and probability calibration.

mod calibrate;
mod metrics;

use serde::{Deserialize, Serialize};

pub use calibrate::{
    isotonic_fit, platt_fit, reliability_curve, CalibratorModel, ReliabilityPoint,
};
pub use metrics::{
    best_threshold, brier, classify_metrics, pr_auc, pr_curve, regress_metrics, roc_auc, roc_curve,
    ClassifyMetrics, CurvePoint, RegressMetrics,
};

use crate::error::Result;

/// Prediction target kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Regress,
}

/// Everything reported for a held-out evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum MetricsReport {
    Classify {
        balanced_accuracy: f64,
        roc_auc: f64,
        pr_auc: f64,
        f1: f64,
        brier: f64,
        best_threshold: f64,
        roc_curve: Vec<CurvePoint>,
        pr_curve: Vec<CurvePoint>,
        reliability_curve: Vec<ReliabilityPoint>,
    },
    Regress(RegressMetrics),
}

/// Classifier report at the Youden-optimal threshold; `probs` must lie in [0, 1].
pub fn classify_report(probs: &[f64], labels: &[f64], n_bins: usize) -> Result<MetricsReport> {
    let t = best_threshold(probs, labels)?;
    let cm = classify_metrics(probs, labels, t)?;
    Ok(MetricsReport::Classify {
        balanced_accuracy: cm.balanced_accuracy,
        roc_auc: roc_auc(probs, labels)?,
        pr_auc: pr_auc(probs, labels)?,
        f1: cm.f1,
        brier: brier(probs, labels)?,
        best_threshold: t,
        roc_curve: roc_curve(probs, labels)?,
        pr_curve: pr_curve(probs, labels)?,
        reliability_curve: reliability_curve(probs, labels, n_bins)?,
    })
}
