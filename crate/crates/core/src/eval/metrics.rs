use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub threshold: f64,
}

fn check_binary(scores: &[f64], labels: &[f64]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(TriageError::schema("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(TriageError::domain("scores contain NaN"));
    }
    let mut pos = 0;
    for &l in labels {
        match l {
            1.0 => pos += 1,
            0.0 => {}
            v => {
                return Err(TriageError::domain(format!(
                    "labels must be 0 or 1, got {v}"
                )))
            }
        }
    }
    let neg = labels.len() - pos;
    Ok((pos, neg))
}

fn require_both(pos: usize, neg: usize) -> Result<()> {
    if pos == 0 || neg == 0 {
        return Err(TriageError::domain("metric needs both classes present"));
    }
    Ok(())
}

/// Indices sorted by descending score; equal scores form one threshold group.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Cumulative (true positives, false positives) after each distinct
/// descending threshold, with that threshold.
fn threshold_sweep(scores: &[f64], labels: &[f64]) -> Vec<(usize, usize, f64)> {
    let idx = descending(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] == 1.0 {
                tp += 1
            } else {
                fp += 1
            }
            i += 1;
        }
        out.push((tp, fp, s));
    }
    out
}

/// Area under the ROC curve via the midrank Mann-Whitney statistic.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    require_both(pos, neg)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the average rank
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1.0 {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points (x = FPR, y = TPR) from (0, 0) through every distinct threshold.
pub fn roc_curve(scores: &[f64], labels: &[f64]) -> Result<Vec<CurvePoint>> {
    let (pos, neg) = check_binary(scores, labels)?;
    require_both(pos, neg)?;
    let mut pts = vec![CurvePoint {
        x: 0.0,
        y: 0.0,
        threshold: f64::INFINITY,
    }];
    pts.extend(
        threshold_sweep(scores, labels)
            .into_iter()
            .map(|(tp, fp, t)| CurvePoint {
                x: fp as f64 / neg as f64,
                y: tp as f64 / pos as f64,
                threshold: t,
            }),
    );
    Ok(pts)
}

/// Precision-recall points (x = recall, y = precision), one per distinct threshold.
pub fn pr_curve(scores: &[f64], labels: &[f64]) -> Result<Vec<CurvePoint>> {
    let (pos, neg) = check_binary(scores, labels)?;
    require_both(pos, neg)?;
    Ok(threshold_sweep(scores, labels)
        .into_iter()
        .map(|(tp, fp, t)| CurvePoint {
            x: tp as f64 / pos as f64,
            y: tp as f64 / (tp + fp) as f64,
            threshold: t,
        })
        .collect())
}

/// Average precision: sum over thresholds of (R_i - R_{i-1}) * P_i.
pub fn pr_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for p in pr_curve(scores, labels)? {
        ap += (p.x - prev_recall) * p.y;
        prev_recall = p.x;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Counts with `score >= threshold` predicted positive. Rates over an absent
/// class are taken as 0.
pub fn classify_metrics(scores: &[f64], labels: &[f64], threshold: f64) -> Result<ClassifyMetrics> {
    check_binary(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let recall = ratio(tp, tp + fn_);
    let tnr = ratio(tn, tn + fp);
    let precision = ratio(tp, tp + fp);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(ClassifyMetrics {
        tp,
        fp,
        tn,
        fn_,
        balanced_accuracy: (recall + tnr) / 2.0,
        precision,
        recall,
        f1,
    })
}

/// Cutoff maximising Youden's J = TPR - FPR. Candidates are the midpoints
/// between consecutive distinct scores plus the extremes; ties keep the lowest.
pub fn best_threshold(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    require_both(pos, neg)?;
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut candidates = vec![distinct[0]];
    candidates.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for t in candidates {
        let m = classify_metrics(scores, labels, t)?;
        let j = m.recall - m.fp as f64 / neg as f64;
        if j > best.0 {
            best = (j, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the truth has zero variance.
    pub r2: Option<f64>,
    pub baseline_rmse: f64,
    pub baseline_mae: f64,
    pub baseline_r2: Option<f64>,
    /// `(baseline - model) / baseline * 100`; `None` for a zero baseline.
    pub rmse_improvement_pct: Option<f64>,
    pub mae_improvement_pct: Option<f64>,
}

fn rmse_mae_r2(pred: &[f64], truth: &[f64]) -> (f64, f64, Option<f64>) {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let (mut sse, mut sae, mut sst) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        sse += (p - t) * (p - t);
        sae += (p - t).abs();
        sst += (t - mean) * (t - mean);
    }
    let r2 = (sst > 0.0).then(|| 1.0 - sse / sst);
    ((sse / n).sqrt(), sae / n, r2)
}

pub fn regress_metrics(
    pred: &[f64],
    truth: &[f64],
    baseline_pred: &[f64],
) -> Result<RegressMetrics> {
    if pred.len() != truth.len() || baseline_pred.len() != truth.len() {
        return Err(TriageError::schema(
            "prediction, truth and baseline lengths differ",
        ));
    }
    if truth.is_empty() {
        return Err(TriageError::domain(
            "regression metrics need at least one row",
        ));
    }
    let (rmse, mae, r2) = rmse_mae_r2(pred, truth);
    let (brmse, bmae, br2) = rmse_mae_r2(baseline_pred, truth);
    let pct = |b: f64, m: f64| (b > 0.0).then(|| (b - m) / b * 100.0);
    Ok(RegressMetrics {
        rmse,
        mae,
        r2,
        baseline_rmse: brmse,
        baseline_mae: bmae,
        baseline_r2: br2,
        rmse_improvement_pct: pct(brmse, rmse),
        mae_improvement_pct: pct(bmae, mae),
    })
}

pub fn brier(probs: &[f64], labels: &[f64]) -> Result<f64> {
    check_binary(probs, labels)?;
    if probs.is_empty() {
        return Err(TriageError::domain("brier score needs at least one row"));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(TriageError::domain(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum::<f64>()
        / probs.len() as f64)
}
