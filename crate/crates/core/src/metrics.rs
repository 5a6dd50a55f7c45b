//! Task metrics. All three are oriented so that lower is better: binary
//! tasks score 1 - AUROC, multiclass tasks score log-loss, regression
//! tasks score RMSE.

use crate::error::{Error, Result};
use crate::store::{Labels, Predictions, TaskType};

/// Probabilities are clipped into [LOG_LOSS_CLIP, 1 - LOG_LOSS_CLIP]
/// before taking logs.
pub const LOG_LOSS_CLIP: f64 = 1e-15;

/// Area under the ROC curve for binary labels and real-valued scores.
///
/// Computed with the rank-sum formula using midranks for tied scores,
/// which equals the tie-aware pair-counting definition exactly.
pub fn roc_auc(y: &[u32], scores: &[f64]) -> Result<f64> {
    if y.len() != scores.len() {
        return Err(Error::Input(format!(
            "roc_auc: {} labels vs {} scores",
            y.len(),
            scores.len()
        )));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "roc_auc needs both classes, got {pos} positives and {neg} negatives"
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::Input(format!("roc_auc: label {bad} is not binary")));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Midranks: tied scores share the average of their 1-based positions.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if y[idx] == 1 {
                pos_rank_sum += midrank;
            }
        }
        i = j;
    }

    let (p, n) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Multiclass cross-entropy: mean of -ln p(true class), with each
/// probability clipped away from 0 and 1.
pub fn log_loss(y: &[u32], probs: &[Vec<f64>], n_classes: u32) -> Result<f64> {
    if y.len() != probs.len() {
        return Err(Error::Input(format!(
            "log_loss: {} labels vs {} probability rows",
            y.len(),
            probs.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::UndefinedMetric(
            "log_loss of empty sample".to_string(),
        ));
    }
    let mut total = 0.0;
    for (&label, row) in y.iter().zip(probs) {
        if row.len() != n_classes as usize {
            return Err(Error::Input(format!(
                "log_loss: row has {} entries, expected {n_classes}",
                row.len()
            )));
        }
        if label >= n_classes {
            return Err(Error::Input(format!(
                "log_loss: label {label} out of range for {n_classes} classes"
            )));
        }
        let p = row[label as usize].clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
        total -= p.ln();
    }
    Ok(total / y.len() as f64)
}

/// Root mean squared error.
pub fn rmse(y: &[f64], preds: &[f64]) -> Result<f64> {
    if y.len() != preds.len() {
        return Err(Error::Input(format!(
            "rmse: {} targets vs {} predictions",
            y.len(),
            preds.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::UndefinedMetric("rmse of empty sample".to_string()));
    }
    let mse = y
        .iter()
        .zip(preds)
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / y.len() as f64;
    Ok(mse.sqrt())
}

/// Error of one split under the task's metric (lower is better).
pub fn split_error(
    task_type: TaskType,
    n_classes: u32,
    y: &Labels,
    pred: &Predictions,
) -> Result<f64> {
    match (task_type, y, pred) {
        (TaskType::Binary, Labels::Class(y), Predictions::Proba(rows)) => {
            let scores: Vec<f64> = rows
                .iter()
                .map(|r| {
                    r.get(1).copied().ok_or_else(|| {
                        Error::Input(
                            "binary probability row lacks a positive-class column".to_string(),
                        )
                    })
                })
                .collect::<Result<_>>()?;
            Ok(1.0 - roc_auc(y, &scores)?)
        }
        (TaskType::Multiclass, Labels::Class(y), Predictions::Proba(rows)) => {
            log_loss(y, rows, n_classes)
        }
        (TaskType::Regression, Labels::Value(y), Predictions::Scalar(p)) => rmse(y, p),
        _ => Err(Error::Input(format!(
            "split_error: payload shape does not match task type {task_type}"
        ))),
    }
}

/// Dataset-level error: arithmetic mean of per-split errors.
pub fn dataset_error(split_errors: &[f64]) -> Result<f64> {
    if split_errors.is_empty() {
        return Err(Error::UndefinedMetric(
            "dataset_error of zero splits".to_string(),
        ));
    }
    Ok(split_errors.iter().sum::<f64>() / split_errors.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Tie-aware pair counting: concordant pairs count 1, ties 1/2.
    fn auc_by_pair_counting(y: &[u32], scores: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            if yi != 1 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                if yj != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
        num / pairs
    }

    #[test]
    fn auc_perfect_reversed_and_constant() {
        let y = [0, 0, 1, 1];
        assert_eq!(roc_auc(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&y, &[0.9, 0.8, 0.2, 0.1]).unwrap(), 0.0);
        assert_eq!(roc_auc(&y, &[0.5, 0.5, 0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn auc_handles_ties_with_midranks() {
        let y = [0, 1, 0, 1, 1];
        let s = [0.2, 0.2, 0.4, 0.4, 0.9];
        assert_eq!(roc_auc(&y, &s).unwrap(), auc_by_pair_counting(&y, &s),);
    }

    #[test]
    fn auc_matches_pair_counting_on_random_inputs() {
        // Both formulas divide a half-integer numerator by the same product,
        // so agreement is exact, not approximate.
        let mut rng = Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = 2 + (rng.gen_range(40) as usize);
            let mut y: Vec<u32> = (0..n).map(|_| rng.gen_range(2) as u32).collect();
            // Force both classes to appear.
            y[0] = 0;
            y[n - 1] = 1;
            // Coarse grid so ties are common.
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(8) as f64 / 8.0).collect();
            let fast = roc_auc(&y, &scores).unwrap();
            let slow = auc_by_pair_counting(&y, &scores);
            assert_eq!(fast, slow, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn auc_single_class_is_undefined() {
        let err = roc_auc(&[1, 1, 1], &[0.1, 0.2, 0.3]).unwrap_err();
        assert!(matches!(err, Error::UndefinedMetric(_)));
    }

    #[test]
    fn log_loss_matches_direct_formula() {
        let y = [0, 2, 1];
        let probs = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.3, 0.6],
            vec![0.25, 0.5, 0.25],
        ];
        let expected = -(0.7f64.ln() + 0.6f64.ln() + 0.5f64.ln()) / 3.0;
        assert!((log_loss(&y, &probs, 3).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn log_loss_clips_zero_probability() {
        let y = [0];
        let probs = vec![vec![0.0, 1.0]];
        let expected = -LOG_LOSS_CLIP.ln();
        assert_eq!(log_loss(&y, &probs, 2).unwrap(), expected);
        // And a certain correct answer is clipped away from ln(1) = 0 too.
        let sure = log_loss(&[1], &[vec![0.0, 1.0]], 2).unwrap();
        assert_eq!(sure, -(1.0 - LOG_LOSS_CLIP).ln());
    }

    #[test]
    fn rmse_matches_hand_computation() {
        let y = [1.0, 2.0, 3.0];
        let p = [2.0, 2.0, 1.0];
        // Squared errors 1, 0, 4 -> mean 5/3.
        assert_eq!(rmse(&y, &p).unwrap(), (5.0f64 / 3.0).sqrt());
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn split_error_dispatches_by_task_type() {
        let y_bin = Labels::Class(vec![0, 1]);
        let p_bin = Predictions::Proba(vec![vec![0.8, 0.2], vec![0.3, 0.7]]);
        assert_eq!(
            split_error(TaskType::Binary, 2, &y_bin, &p_bin).unwrap(),
            0.0
        );

        let y_mc = Labels::Class(vec![2]);
        let p_mc = Predictions::Proba(vec![vec![0.2, 0.3, 0.5]]);
        assert!(
            (split_error(TaskType::Multiclass, 3, &y_mc, &p_mc).unwrap() - (-0.5f64.ln())).abs()
                < 1e-15
        );

        let y_reg = Labels::Value(vec![1.0, 3.0]);
        let p_reg = Predictions::Scalar(vec![1.0, 1.0]);
        assert_eq!(
            split_error(TaskType::Regression, 0, &y_reg, &p_reg).unwrap(),
            2.0f64.sqrt()
        );

        let err = split_error(TaskType::Regression, 0, &y_bin, &p_bin).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn dataset_error_is_split_mean() {
        assert_eq!(dataset_error(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!((dataset_error(&[0.1, 0.2, 0.3]).unwrap() - 0.2).abs() < 1e-15);
        assert!(dataset_error(&[]).is_err());
    }
}
