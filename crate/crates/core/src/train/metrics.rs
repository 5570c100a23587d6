//! Binary classification and regression metrics.
//!
//! Conventions for degenerate denominators: when nothing is predicted
//! positive, precision is 1.0 if the labels contain no positives and 0.0
//! (with `precision_undefined` set) otherwise. Recall with no positive labels
//! is 1.0. ROC-AUC is `None` unless both classes are present.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

impl PrPoint {
    pub fn f1(&self) -> f64 {
        f1(self.precision, self.recall)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: Option<f64>,
    pub rmse: Option<f64>,
    pub precision_undefined: bool,
    pub pr_curve: Vec<PrPoint>,
}

impl MetricsReport {
    /// Highest F1 over the PR curve, or the thresholded F1 if the curve is empty.
    pub fn best_f1(&self) -> f64 {
        best_f1(&self.pr_curve).unwrap_or(self.f1)
    }

    /// `(name, value)` rows in a fixed order.
    pub fn named_values(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("best_f1", self.best_f1()),
        ];
        if let Some(auc) = self.roc_auc {
            v.push(("roc_auc", auc));
        }
        if let Some(rmse) = self.rmse {
            v.push(("rmse", rmse));
        }
        v
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "metrics",
            format!("{} scores vs {} labels", scores.len(), labels.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
    tn: usize,
}

impl Counts {
    fn precision(&self) -> (f64, bool) {
        if self.tp + self.fp == 0 {
            if self.tp + self.fn_ == 0 {
                (1.0, false)
            } else {
                (0.0, true)
            }
        } else {
            (self.tp as f64 / (self.tp + self.fp) as f64, false)
        }
    }

    fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }
}

/// Area under the ROC curve via the rank-sum statistic with mid-ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(Some(u / (pos * neg) as f64))
}

/// Precision/recall at every distinct finite score used as the threshold
/// (`score ≥ threshold` is positive), ordered by decreasing threshold.
/// Scores of `−∞` are never predicted positive but their positives still
/// count toward recall.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    check_inputs(scores, labels)?;
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(Error::InvalidArgument(
            "PR curve needs at least one positive label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i].is_finite() || scores[i] == f64::INFINITY)
        .collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / total_pos as f64,
        });
    }
    Ok(points)
}

pub fn best_f1(curve: &[PrPoint]) -> Option<f64> {
    curve.iter().map(PrPoint::f1).reduce(f64::max)
}

/// Thresholded metrics (`score ≥ threshold` is positive) plus ROC-AUC and, if
/// the labels contain a positive, the PR curve.
pub fn classification_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricsReport> {
    check_inputs(scores, labels)?;
    let mut c = Counts::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let (precision, precision_undefined) = c.precision();
    let recall = c.recall();
    let accuracy = if labels.is_empty() {
        0.0
    } else {
        (c.tp + c.tn) as f64 / labels.len() as f64
    };
    let pr = if labels.iter().any(|&l| l) {
        pr_curve(scores, labels)?
    } else {
        Vec::new()
    };
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1: f1(precision, recall),
        roc_auc: roc_auc(scores, labels)?,
        rmse: None,
        precision_undefined,
        pr_curve: pr,
    })
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape(
            "rmse",
            format!("{} predictions vs {} targets", pred.len(), target.len()),
        ));
    }
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Fraction of argmax predictions equal to the class label.
pub fn multiclass_accuracy(logits: &crate::autodiff::Matrix, classes: &[usize]) -> f64 {
    if classes.is_empty() {
        return 0.0;
    }
    let hits = classes
        .iter()
        .enumerate()
        .filter(|&(r, &c)| {
            let row = logits.row(r);
            let best = (0..row.len())
                .reduce(|a, b| if row[b] > row[a] { b } else { a })
                .unwrap_or(0);
            best == c
        })
        .count();
    hits as f64 / classes.len() as f64
}

/// `threshold,precision,recall`.
pub fn pr_curve_csv(curve: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in curve {
        writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall).expect("string write");
    }
    out
}
