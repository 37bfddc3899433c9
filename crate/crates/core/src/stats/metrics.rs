//! Rank-based AUC and thresholded classification metrics.

use serde::{Deserialize, Serialize};

use super::logistic::LogisticFit;
use crate::error::{Error, Result};

/// Mann–Whitney AUC: probability that a random positive outscores a random
/// negative, ties counted one half. `labels[i]` is true for positives.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("roc_auc: length mismatch".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("roc_auc: NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&b| b).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("roc_auc: both classes must be present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of doubled mid-ranks keeps the arithmetic in integers.
    let mut rank2_sum_pos: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled mid-rank = i + j + 2
        let r2 = (i + j + 2) as u128;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank2_sum_pos += r2 * pos_in_tie;
        i = j + 1;
    }
    let (np, nn) = (n_pos as u128, n_neg as u128);
    // 2U = 2R - np(np+1); AUC = U / (np nn)
    let u2 = rank2_sum_pos - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub roc_auc: f64,
    pub f1_a_as_success: f64,
    pub f1_b_as_success: f64,
    pub f1_avg: f64,
    /// Precision with class A as the success class.
    pub precision: f64,
    /// Recall with class A as the success class.
    pub recall: f64,
    pub precision_b: f64,
    pub recall_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Precision, recall and F1 from confusion counts; 0 where undefined.
fn prf(tp: usize, fp: usize, fneg: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fneg);
    let f1 = ratio(2 * tp, 2 * tp + fp + fneg);
    (p, r, f1)
}

/// Training-set metrics of `fit`. `labels[i]` is true for class B, which is
/// the class the model's probability refers to; predictions threshold the
/// probability at 0.5. Counts are unweighted.
pub fn classification_metrics(
    fit: &LogisticFit,
    positions: &[f64],
    labels: &[bool],
) -> Result<BinaryMetrics> {
    let scores: Vec<f64> = positions.iter().map(|&x| fit.decision(x)).collect();
    let roc_auc = roc_auc(&scores, labels)?;
    let (mut tp_b, mut fp_b, mut fn_b, mut tn_b) = (0, 0, 0, 0);
    for (s, &y) in scores.iter().zip(labels) {
        match (*s > 0.0, y) {
            (true, true) => tp_b += 1,
            (true, false) => fp_b += 1,
            (false, true) => fn_b += 1,
            (false, false) => tn_b += 1,
        }
    }
    let (precision_b, recall_b, f1_b) = prf(tp_b, fp_b, fn_b);
    // with A as success the roles of the confusion cells swap
    let (precision, recall, f1_a) = prf(tn_b, fn_b, fp_b);
    let n_b = labels.iter().filter(|&&b| b).count();
    Ok(BinaryMetrics {
        roc_auc,
        f1_a_as_success: f1_a,
        f1_b_as_success: f1_b,
        f1_avg: (f1_a + f1_b) / 2.0,
        precision,
        recall,
        precision_b,
        recall_b,
        n_a: labels.len() - n_b,
        n_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::balanced_logistic_fit;

    fn pair_oracle(s: &[f64], y: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] && !y[j] {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn ties_and_order() {
        let y = [true, false, true, false];
        assert_eq!(roc_auc(&[1.0; 4], &y).unwrap(), 0.5);
        assert_eq!(roc_auc(&[3.0, 0.0, 2.0, 1.0], &y).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.0, 3.0, 1.0, 2.0], &y).unwrap(), 0.0);
        assert!(roc_auc(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn matches_pair_counting_with_ties() {
        let s = [
            1.0, 2.0, 2.0, 3.0, 1.0, 4.0, 2.0, 5.0, 3.0, 3.0, 0.0, 1.0, 4.0, 2.0, 5.0, 5.0, 0.0,
            3.0, 2.0, 1.0,
        ];
        let y: Vec<bool> = (0..20).map(|i| (i * 7 + 3) % 5 < 2).collect();
        let auc = roc_auc(&s, &y).unwrap();
        assert_eq!(auc, pair_oracle(&s, &y));
        let flipped: Vec<bool> = y.iter().map(|b| !b).collect();
        assert_eq!(auc + roc_auc(&s, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn perfect_separation_scores_one() {
        let x = [0.0, 1.0, 9.0, 10.0];
        let y = [false, false, true, true];
        let fit = balanced_logistic_fit(&x, &y).unwrap();
        let m = classification_metrics(&fit, &x, &y).unwrap();
        assert_eq!(m.roc_auc, 1.0);
        assert_eq!(m.f1_avg, 1.0);
        assert_eq!((m.precision, m.recall, m.precision_b, m.recall_b), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((m.n_a, m.n_b), (2, 2));
    }

    #[test]
    fn hand_counted_confusion() {
        // decision = x - 0.5: predicts B for x = 1
        let fit = LogisticFit {
            weight: 1.0,
            intercept: -0.5,
            cutoff: 0.5,
            converged: true,
            iterations: 1,
        };
        let x = [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let y = [true, true, true, true, false, false, false];
        let m = classification_metrics(&fit, &x, &y).unwrap();
        // B: tp 3, fp 1, fn 1. A: tp 2, fp 1, fn 1.
        assert!((m.precision_b - 0.75).abs() < 1e-15);
        assert!((m.recall_b - 0.75).abs() < 1e-15);
        assert!((m.f1_b_as_success - 0.75).abs() < 1e-15);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1_avg - (0.75 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }
}
