//! Greedy ensemble selection (with replacement) over the candidate
//! predictions of one outer split, plus the helpers around it: fold
//! bagging, best-config selection, and weighted prediction mixing.
//!
//! GES: at step n (1-based) every candidate is trialled as the n-th
//! member of the ensemble; the trial mixture is `(running_sum +
//! candidate) / n` elementwise — the uniform average of the selections so
//! far plus the candidate — scored on the validation partition, and the
//! argmin is committed. Ties go to the smallest candidate key. Weights are
//! selection counts divided by the number of steps.
//!
//! The running sum is the left-fold of the committed candidates in
//! selection order; reproducing that order reproduces every float exactly.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt::Display;

use crate::error::{Error, Result};
use crate::metrics::{split_error, LOG_LOSS_CLIP};
use crate::store::{Labels, Predictions, TaskType};

pub const DEFAULT_GES_STEPS: usize = 40;

/// Elementwise mean of per-fold prediction arrays, as used when bagging
/// inner-CV fold models into one test prediction. Probability rows are
/// renormalized to guard against float drift.
pub fn bag_fold_predictions(fold_preds: &[Predictions]) -> Result<Predictions> {
    let first = fold_preds
        .first()
        .ok_or_else(|| Error::Input("bag_fold_predictions: no arrays".to_string()))?;
    let shape = first.shape();
    let mut sum = vec![0.0f64; shape.0 * shape.1];
    for preds in fold_preds {
        if preds.shape() != shape {
            return Err(Error::Input(format!(
                "bag_fold_predictions: shape {:?} differs from {:?}",
                preds.shape(),
                shape
            )));
        }
        for (acc, v) in sum.iter_mut().zip(preds.to_flat()) {
            *acc += v;
        }
    }
    let n = fold_preds.len() as f64;
    for v in &mut sum {
        *v /= n;
    }
    let mut bagged = first.from_flat_like(&sum);
    if let Predictions::Proba(rows) = &mut bagged {
        for row in rows {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                for p in row {
                    *p /= total;
                }
            }
        }
    }
    Ok(bagged)
}

/// Config with the minimum validation error; ties break to the
/// lexicographically smallest config id.
pub fn select_best_config(val_errors: &BTreeMap<String, f64>) -> Result<String> {
    if val_errors.is_empty() {
        return Err(Error::Input("select_best_config: empty map".to_string()));
    }
    let mut best: Option<(&String, f64)> = None;
    for (config, &err) in val_errors {
        if !err.is_finite() {
            return Err(Error::Input(format!(
                "select_best_config: non-finite error for {config}"
            )));
        }
        if best.is_none_or(|(_, b)| err < b) {
            best = Some((config, err));
        }
    }
    Ok(best.expect("non-empty").0.clone())
}

/// One committed greedy step: which candidate was added and the
/// validation error of the mixture after adding it.
#[derive(Clone, Debug, PartialEq)]
pub struct GesStep<K> {
    pub key: K,
    pub val_error: f64,
}

/// Outcome of a greedy ensemble fit on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct GesFit<K: Ord> {
    /// Candidate chosen at each step, in order.
    pub selections: Vec<K>,
    /// Selection counts / number of selections; zero-count keys omitted.
    pub weights: BTreeMap<K, f64>,
    /// Validation error after each committed step (full n_steps rounds,
    /// even when the best-iteration variant truncates the selections).
    pub trace: Vec<GesStep<K>>,
}

impl<K: Ord> GesFit<K> {
    /// Validation error of the returned mixture.
    pub fn final_val_error(&self) -> f64 {
        self.trace[self.selections.len() - 1].val_error
    }
}

/// Score a flat row-major prediction buffer against labels. Matches
/// [`split_error`] on the materialized predictions bit for bit: values are
/// visited in the same order with the same operations.
fn score_flat(
    task_type: TaskType,
    y: &Labels,
    flat: &[f64],
    cols: usize,
    scratch: &mut Vec<f64>,
) -> Result<f64> {
    match (task_type, y) {
        (TaskType::Binary, Labels::Class(labels)) => {
            scratch.clear();
            scratch.extend(flat.chunks(cols).map(|row| row[1]));
            Ok(1.0 - crate::metrics::roc_auc(labels, scratch)?)
        }
        (TaskType::Multiclass, Labels::Class(labels)) => {
            let mut total = 0.0;
            for (i, &label) in labels.iter().enumerate() {
                let p = flat[i * cols + label as usize].clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
                total -= p.ln();
            }
            Ok(total / labels.len() as f64)
        }
        (TaskType::Regression, Labels::Value(targets)) => crate::metrics::rmse(targets, flat),
        _ => Err(Error::Input(
            "score_flat: labels do not match task type".to_string(),
        )),
    }
}

fn weights_of<K: Ord + Clone>(selections: &[K]) -> BTreeMap<K, f64> {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for key in selections {
        *counts.entry(key.clone()).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / selections.len() as f64))
        .collect()
}

/// Greedy ensemble selection over `candidates` (validation predictions
/// keyed by candidate id), scored against `y_val`, for exactly `n_steps`
/// rounds.
pub fn ges_fit<K, P>(
    task_type: TaskType,
    y_val: &Labels,
    candidates: &BTreeMap<K, P>,
    n_steps: usize,
) -> Result<GesFit<K>>
where
    K: Ord + Clone + Display,
    P: Borrow<Predictions>,
{
    ges_fit_with_options(task_type, y_val, candidates, n_steps, false)
}

/// [`ges_fit`] with the classic best-intermediate-iteration variant:
/// when `best_iteration` is set, the returned selections (and weights)
/// are truncated to the prefix with the lowest validation error in the
/// trace (earliest such prefix on ties). Off by default.
pub fn ges_fit_with_options<K, P>(
    task_type: TaskType,
    y_val: &Labels,
    candidates: &BTreeMap<K, P>,
    n_steps: usize,
    best_iteration: bool,
) -> Result<GesFit<K>>
where
    K: Ord + Clone + Display,
    P: Borrow<Predictions>,
{
    if candidates.is_empty() {
        return Err(Error::Input("ges_fit: no candidates".to_string()));
    }
    if n_steps == 0 {
        return Err(Error::Input(
            "ges_fit: n_steps must be positive".to_string(),
        ));
    }

    let shape = candidates
        .values()
        .next()
        .expect("non-empty")
        .borrow()
        .shape();
    let mut flats: Vec<(&K, Vec<f64>)> = Vec::with_capacity(candidates.len());
    for (key, preds) in candidates {
        let preds = preds.borrow();
        if preds.shape() != shape {
            return Err(Error::Input(format!(
                "ges_fit: candidate {key} has shape {:?}, expected {:?}",
                preds.shape(),
                shape
            )));
        }
        let flat = preds.to_flat();
        if let Some(bad) = flat.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "ges_fit: candidate {key} has non-finite prediction {bad}"
            )));
        }
        flats.push((key, flat));
    }
    let (rows, cols) = shape;
    if rows != y_val.len() {
        return Err(Error::Input(format!(
            "ges_fit: {} prediction rows vs {} labels",
            rows,
            y_val.len()
        )));
    }

    let len = rows * cols;
    let mut running_sum = vec![0.0f64; len];
    let mut trial = vec![0.0f64; len];
    let mut scratch = Vec::new();
    let mut selections: Vec<K> = Vec::with_capacity(n_steps);
    let mut trace: Vec<GesStep<K>> = Vec::with_capacity(n_steps);

    for step in 1..=n_steps {
        let denom = step as f64;
        let mut best: Option<(usize, f64)> = None;
        for (ci, (_, flat)) in flats.iter().enumerate() {
            for i in 0..len {
                trial[i] = (running_sum[i] + flat[i]) / denom;
            }
            let err = score_flat(task_type, y_val, &trial, cols, &mut scratch)?;
            // Strict improvement only: candidates iterate in ascending key
            // order, so ties resolve to the smallest key.
            if best.is_none_or(|(_, b)| err < b) {
                best = Some((ci, err));
            }
        }
        let (ci, err) = best.expect("at least one candidate");
        let (key, flat) = &flats[ci];
        for i in 0..len {
            running_sum[i] += flat[i];
        }
        selections.push((*key).clone());
        trace.push(GesStep {
            key: (*key).clone(),
            val_error: err,
        });
    }

    if best_iteration {
        let best_len = trace
            .iter()
            .enumerate()
            .min_by(|(ia, a), (ib, b)| a.val_error.total_cmp(&b.val_error).then(ia.cmp(ib)))
            .expect("trace is non-empty")
            .0
            + 1;
        selections.truncate(best_len);
    }

    let weights = weights_of(&selections);
    Ok(GesFit {
        selections,
        weights,
        trace,
    })
}

/// Weighted average Σ wᵢ·fᵢ of predictions, iterating weights in
/// ascending key order.
pub fn ges_predict<K, P>(weights: &BTreeMap<K, f64>, preds: &BTreeMap<K, P>) -> Result<Predictions>
where
    K: Ord + Display,
    P: Borrow<Predictions>,
{
    let mut iter = weights.iter().filter(|(_, &w)| w != 0.0);
    let (first_key, _) = iter
        .next()
        .ok_or_else(|| Error::Input("ges_predict: all weights are zero".to_string()))?;
    let template = preds
        .get(first_key)
        .ok_or_else(|| Error::Input(format!("ges_predict: no predictions for {first_key}")))?
        .borrow();
    let shape = template.shape();
    let mut sum = vec![0.0f64; shape.0 * shape.1];
    for (key, &w) in weights.iter().filter(|(_, &w)| w != 0.0) {
        let p = preds
            .get(key)
            .ok_or_else(|| Error::Input(format!("ges_predict: no predictions for {key}")))?
            .borrow();
        if p.shape() != shape {
            return Err(Error::Input(format!(
                "ges_predict: {key} has shape {:?}, expected {:?}",
                p.shape(),
                shape
            )));
        }
        for (acc, v) in sum.iter_mut().zip(p.to_flat()) {
            *acc += w * v;
        }
    }
    Ok(template.from_flat_like(&sum))
}

/// Average predictions over `selections` by left-folding the sum in
/// selection order and dividing by the number of selections. Applying this
/// to the validation predictions of a [`GesFit`] reproduces its final
/// mixture exactly; applying it to test predictions yields the ensemble's
/// test predictions.
pub fn mix_in_order<K, P>(selections: &[K], preds: &BTreeMap<K, P>) -> Result<Predictions>
where
    K: Ord + Display,
    P: Borrow<Predictions>,
{
    let first = selections
        .first()
        .ok_or_else(|| Error::Input("mix_in_order: no selections".to_string()))?;
    let template = preds
        .get(first)
        .ok_or_else(|| Error::Missing(format!("mix_in_order: no predictions for {first}")))?
        .borrow();
    let shape = template.shape();
    let mut sum = vec![0.0f64; shape.0 * shape.1];
    for key in selections {
        let p = preds
            .get(key)
            .ok_or_else(|| Error::Missing(format!("mix_in_order: no predictions for {key}")))?
            .borrow();
        if p.shape() != shape {
            return Err(Error::Input(format!(
                "mix_in_order: {key} has shape {:?}, expected {:?}",
                p.shape(),
                shape
            )));
        }
        for (acc, v) in sum.iter_mut().zip(p.to_flat()) {
            *acc += v;
        }
    }
    let n = selections.len() as f64;
    for v in &mut sum {
        *v /= n;
    }
    Ok(template.from_flat_like(&sum))
}

/// Ensembled evaluation of one outer split: validation error, test error,
/// and the fitted weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitEnsemble<K: Ord> {
    pub test_error: f64,
    pub val_error: f64,
    pub weights: BTreeMap<K, f64>,
    pub selections: Vec<K>,
}

/// Fit GES on the validation side of one split and score the resulting
/// mixture on both partitions. A single candidate is passed through
/// unmixed, so its errors are bit-identical to scoring it directly.
///
/// This is the one code path behind the tuned+ensembled regime, tuning
/// trajectories, and cross-model ensembles; identical candidate maps
/// therefore produce identical floats everywhere.
pub fn ensemble_split<K, P>(
    task_type: TaskType,
    n_classes: u32,
    y_val: &Labels,
    val_preds: &BTreeMap<K, P>,
    y_test: &Labels,
    test_preds: &BTreeMap<K, P>,
    n_steps: usize,
) -> Result<SplitEnsemble<K>>
where
    K: Ord + Clone + Display,
    P: Borrow<Predictions>,
{
    if val_preds.len() == 1 {
        let key = val_preds.keys().next().expect("one candidate").clone();
        let val = val_preds.get(&key).expect("present").borrow();
        let test = test_preds
            .get(&key)
            .ok_or_else(|| {
                Error::Missing(format!("ensemble_split: no test predictions for {key}"))
            })?
            .borrow();
        return Ok(SplitEnsemble {
            test_error: split_error(task_type, n_classes, y_test, test)?,
            val_error: split_error(task_type, n_classes, y_val, val)?,
            weights: BTreeMap::from([(key.clone(), 1.0)]),
            selections: vec![key],
        });
    }
    let fit = ges_fit(task_type, y_val, val_preds, n_steps)?;
    let test_mixture = mix_in_order(&fit.selections, test_preds)?;
    Ok(SplitEnsemble {
        test_error: split_error(task_type, n_classes, y_test, &test_mixture)?,
        val_error: fit.final_val_error(),
        weights: fit.weights,
        selections: fit.selections,
    })
}
