//! Higher-order analyses on top of regime evaluation: tuning trajectories
//! (error vs. number of sampled configs), validation-vs-test Elo and the
//! overfitting gap, cross-model GES ensembles, ensemble-weight reports,
//! and zeroshot portfolio learning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ensemble::ensemble_split;
use crate::error::{Error, Result};
use crate::evals::EvalTable;
use crate::metrics::{dataset_error, split_error};
use crate::rating::{calibrate, fit_bradley_terry, pairwise_outcomes, BtOptions, EloRating};
use crate::rng::{derive_seed, hash_str, Rng};
use crate::store::{Labels, MethodKey, Predictions, ResultStore};

/// Number of random config draws per trajectory point.
pub const DEFAULT_TRAJECTORY_SAMPLES: usize = 20;

/// Config-count grid for tuning trajectories (callers clamp to the
/// available config count).
pub const DEFAULT_TRAJECTORY_GRID: [usize; 9] = [1, 2, 5, 10, 25, 50, 100, 150, 201];

/// Greedy portfolio size cap.
pub const DEFAULT_PORTFOLIO_SIZE: usize = 200;

/// Seed-derivation tag for trajectory config draws.
const TRAJECTORY_TAG: u64 = 1;

/// One point of a tuning trajectory: ensemble errors achievable with
/// `n_configs` randomly drawn configs, averaged over draws.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub method: String,
    pub n_configs: usize,
    /// Mean test error per dataset across draws.
    pub test_errors: BTreeMap<String, f64>,
    /// Mean validation error per dataset across draws.
    pub val_errors: BTreeMap<String, f64>,
    /// Cumulative tuning time; the artifact format does not carry
    /// timings, so this stays `None` unless a caller fills it in.
    pub tuning_time: Option<f64>,
}

/// Simulate tuning with a budget of `n` random configs for each `n` in
/// `grid`: draw `n_samples` config subsets without replacement, run GES
/// over each subset on every dataset/split, and average the resulting
/// errors over draws.
///
/// The config pool is the intersection of the method's configs across
/// all datasets it covers, so every draw is valid everywhere. When `n`
/// equals the pool size there is nothing to sample: the single
/// exhaustive draw is used and the point is bit-identical to the
/// tuned+ensembled regime (same `ensemble_split` path, same candidate
/// order).
pub fn tuning_trajectory(
    store: &ResultStore,
    method: &str,
    grid: &[usize],
    n_samples: usize,
    seed: u64,
    ges_steps: usize,
) -> Result<Vec<TrajectoryPoint>> {
    if n_samples == 0 {
        return Err(Error::Input(
            "tuning_trajectory: n_samples must be ≥ 1".to_string(),
        ));
    }
    let datasets: Vec<String> = store
        .dataset_ids()
        .into_iter()
        .filter(|d| !store.configs(d, method).is_empty())
        .collect();
    if datasets.is_empty() {
        return Err(Error::Missing(format!(
            "tuning_trajectory: method {method} has no records"
        )));
    }
    let mut pool: Option<BTreeSet<String>> = None;
    for dataset in &datasets {
        let here: BTreeSet<String> = store.configs(dataset, method).into_iter().collect();
        pool = Some(match pool {
            None => here,
            Some(prev) => prev.intersection(&here).cloned().collect(),
        });
    }
    let pool: Vec<String> = pool.expect("≥1 dataset").into_iter().collect();
    if pool.is_empty() {
        return Err(Error::Missing(format!(
            "tuning_trajectory: no config of {method} covers all its datasets"
        )));
    }
    let total = pool.len();

    let mut points = Vec::with_capacity(grid.len());
    for &n in grid {
        if n == 0 || n > total {
            return Err(Error::Input(format!(
                "tuning_trajectory: grid point {n} outside 1..={total} available configs of {method}"
            )));
        }
        let draws: Vec<Vec<usize>> = if n == total {
            vec![(0..total).collect()]
        } else {
            (0..n_samples)
                .map(|draw| {
                    let mut rng = Rng::seed_from_u64(derive_seed(
                        seed,
                        &[TRAJECTORY_TAG, hash_str(method), n as u64, draw as u64],
                    ));
                    rng.sample_indices(total, n)
                })
                .collect()
        };

        let mut test_totals: BTreeMap<String, f64> =
            datasets.iter().map(|d| (d.clone(), 0.0)).collect();
        let mut val_totals = test_totals.clone();
        for draw in &draws {
            let subset: Vec<&String> = draw.iter().map(|&i| &pool[i]).collect();
            for dataset in &datasets {
                let task = store.task(dataset).expect("dataset listed");
                let mut split_test = Vec::new();
                let mut split_val = Vec::new();
                for (repeat, fold) in task.expected_split_grid() {
                    let mut val_preds: BTreeMap<String, &Predictions> = BTreeMap::new();
                    let mut test_preds: BTreeMap<String, &Predictions> = BTreeMap::new();
                    let mut labels = None;
                    for config in &subset {
                        let rec = store
                            .record(dataset, method, config, repeat, fold)
                            .ok_or_else(|| {
                                Error::Missing(format!(
                                    "tuning_trajectory: {dataset}/{method}/{config} has no record at (r{repeat}, f{fold})"
                                ))
                            })?;
                        val_preds.insert((*config).clone(), &rec.pred_val);
                        test_preds.insert((*config).clone(), &rec.pred_test);
                        labels = Some((&rec.y_val, &rec.y_test));
                    }
                    let (y_val, y_test) = labels.expect("subset non-empty");
                    let split = ensemble_split(
                        task.task_type,
                        task.n_classes,
                        y_val,
                        &val_preds,
                        y_test,
                        &test_preds,
                        ges_steps,
                    )?;
                    split_test.push(split.test_error);
                    split_val.push(split.val_error);
                }
                *test_totals.get_mut(dataset).expect("present") += dataset_error(&split_test)?;
                *val_totals.get_mut(dataset).expect("present") += dataset_error(&split_val)?;
            }
        }
        let n_draws = draws.len() as f64;
        points.push(TrajectoryPoint {
            method: method.to_string(),
            n_configs: n,
            test_errors: test_totals
                .into_iter()
                .map(|(d, t)| (d, t / n_draws))
                .collect(),
            val_errors: val_totals
                .into_iter()
                .map(|(d, t)| (d, t / n_draws))
                .collect(),
            tuning_time: None,
        });
    }
    Ok(points)
}

/// Test-side and validation-side Elo at one trajectory grid point.
#[derive(Clone, Debug)]
pub struct TrajectoryElo {
    pub n_configs: usize,
    pub test: EloRating<String>,
    pub val: EloRating<String>,
}

/// Per grid point, rate each method's trajectory errors (row per method)
/// against the reference method's default config (row `"{ref}/default"`),
/// once on test errors and once on validation errors. Both sides are
/// calibrated so the reference row sits at 1000 Elo; the validation side
/// drifting above the test side for a method is validation overfitting.
pub fn trajectory_elo(
    store: &ResultStore,
    methods: &[String],
    grid: &[usize],
    n_samples: usize,
    seed: u64,
    reference_method: &str,
    ges_steps: usize,
) -> Result<Vec<TrajectoryElo>> {
    if methods.is_empty() {
        return Err(Error::Input("trajectory_elo: no methods given".to_string()));
    }
    let mut trajectories: BTreeMap<&String, Vec<TrajectoryPoint>> = BTreeMap::new();
    for method in methods {
        trajectories.insert(
            method,
            tuning_trajectory(store, method, grid, n_samples, seed, ges_steps)?,
        );
    }

    // Reference row: the default-regime errors of the reference method.
    let reference_key = format!("{reference_method}/default");
    let mut ref_test: BTreeMap<String, f64> = BTreeMap::new();
    let mut ref_val: BTreeMap<String, f64> = BTreeMap::new();
    for dataset in store.dataset_ids() {
        let task = store.task(&dataset).expect("listed");
        let mut test_errs = Vec::new();
        let mut val_errs = Vec::new();
        let mut covered = true;
        for (repeat, fold) in task.expected_split_grid() {
            match store.record(&dataset, reference_method, "default", repeat, fold) {
                Some(rec) => {
                    test_errs.push(split_error(
                        task.task_type,
                        task.n_classes,
                        &rec.y_test,
                        &rec.pred_test,
                    )?);
                    val_errs.push(split_error(
                        task.task_type,
                        task.n_classes,
                        &rec.y_val,
                        &rec.pred_val,
                    )?);
                }
                None => {
                    covered = false;
                    break;
                }
            }
        }
        if covered && !test_errs.is_empty() {
            ref_test.insert(dataset.clone(), dataset_error(&test_errs)?);
            ref_val.insert(dataset.clone(), dataset_error(&val_errs)?);
        }
    }

    // Rate on the datasets every row covers.
    let mut common: BTreeSet<String> = ref_test.keys().cloned().collect();
    for points in trajectories.values() {
        let covered: BTreeSet<String> = points[0].test_errors.keys().cloned().collect();
        common = common.intersection(&covered).cloned().collect();
    }
    if common.is_empty() {
        return Err(Error::Input(format!(
            "trajectory_elo: no dataset is covered by every method and {reference_key}"
        )));
    }
    let common: Vec<String> = common.into_iter().collect();

    let opts = BtOptions::default();
    let mut out = Vec::with_capacity(grid.len());
    for (gi, &n) in grid.iter().enumerate() {
        let mut test_table: EvalTable<String> = EvalTable::new(common.clone());
        let mut val_table: EvalTable<String> = EvalTable::new(common.clone());
        for (method, points) in &trajectories {
            let point = &points[gi];
            debug_assert_eq!(point.n_configs, n);
            for dataset in &common {
                test_table.insert((*method).clone(), dataset, point.test_errors[dataset])?;
                val_table.insert((*method).clone(), dataset, point.val_errors[dataset])?;
            }
        }
        for dataset in &common {
            test_table.insert(reference_key.clone(), dataset, ref_test[dataset])?;
            val_table.insert(reference_key.clone(), dataset, ref_val[dataset])?;
        }
        let test = calibrate(
            &fit_bradley_terry(&pairwise_outcomes(&test_table)?, &opts)?,
            &reference_key,
        )?;
        let val = calibrate(
            &fit_bradley_terry(&pairwise_outcomes(&val_table)?, &opts)?,
            &reference_key,
        )?;
        out.push(TrajectoryElo {
            n_configs: n,
            test,
            val,
        });
    }
    Ok(out)
}

/// Elementwise validation − test rating difference over identical key
/// sets. Positive values mean the method looks better on validation than
/// it is on test.
pub fn overfitting_gap<K>(
    val: &BTreeMap<K, f64>,
    test: &BTreeMap<K, f64>,
) -> Result<BTreeMap<K, f64>>
where
    K: Ord + Clone + fmt::Display,
{
    for key in val.keys() {
        if !test.contains_key(key) {
            return Err(Error::KeyMismatch(format!(
                "overfitting_gap: {key} rated on validation but not on test"
            )));
        }
    }
    for key in test.keys() {
        if !val.contains_key(key) {
            return Err(Error::KeyMismatch(format!(
                "overfitting_gap: {key} rated on test but not on validation"
            )));
        }
    }
    Ok(val.iter().map(|(k, v)| (k.clone(), v - test[k])).collect())
}

/// GES ensemble fitted across every (method, config) on one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossEnsembleEval {
    pub dataset_id: String,
    pub splits: Vec<(u32, u32)>,
    pub test_errors: Vec<f64>,
    pub val_errors: Vec<f64>,
    /// Fitted weights per split, keyed by (method, config).
    pub split_weights: Vec<BTreeMap<MethodKey, f64>>,
}

impl CrossEnsembleEval {
    pub fn mean_test_error(&self) -> Result<f64> {
        dataset_error(&self.test_errors)
    }

    pub fn mean_val_error(&self) -> Result<f64> {
        dataset_error(&self.val_errors)
    }
}

/// Run GES per split over the union of all (method, config) candidates
/// on `dataset_id`, optionally restricted to `filter`.
pub fn cross_model_ensemble(
    store: &ResultStore,
    dataset_id: &str,
    filter: Option<&BTreeSet<MethodKey>>,
    n_steps: usize,
) -> Result<CrossEnsembleEval> {
    let task = store
        .task(dataset_id)
        .ok_or_else(|| Error::Missing(format!("unknown dataset {dataset_id}")))?;
    let mut candidates: Vec<MethodKey> = Vec::new();
    for method in store.methods_on(dataset_id) {
        for config_id in store.configs(dataset_id, &method) {
            let key = MethodKey {
                method: method.clone(),
                config_id,
            };
            if filter.is_none_or(|f| f.contains(&key)) {
                candidates.push(key);
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Missing(format!(
            "cross_model_ensemble: no candidates on {dataset_id} after filtering"
        )));
    }

    let grid = task.expected_split_grid();
    let mut test_errors = Vec::with_capacity(grid.len());
    let mut val_errors = Vec::with_capacity(grid.len());
    let mut split_weights = Vec::with_capacity(grid.len());
    for &(repeat, fold) in &grid {
        let mut val_preds: BTreeMap<MethodKey, &Predictions> = BTreeMap::new();
        let mut test_preds: BTreeMap<MethodKey, &Predictions> = BTreeMap::new();
        let mut labels: Option<(&Labels, &Labels)> = None;
        for key in &candidates {
            let rec = store
                .record(dataset_id, &key.method, &key.config_id, repeat, fold)
                .ok_or_else(|| {
                    Error::Missing(format!(
                        "cross_model_ensemble: {dataset_id}/{key} has no record at (r{repeat}, f{fold})"
                    ))
                })?;
            if let Some((y_val, y_test)) = labels {
                if *y_val != rec.y_val || *y_test != rec.y_test {
                    return Err(Error::Validation {
                        key: rec.describe(),
                        rule: "labels disagree with other candidates on the same split".to_string(),
                    });
                }
            } else {
                labels = Some((&rec.y_val, &rec.y_test));
            }
            val_preds.insert(key.clone(), &rec.pred_val);
            test_preds.insert(key.clone(), &rec.pred_test);
        }
        let (y_val, y_test) = labels.expect("candidates non-empty");
        let split = ensemble_split(
            task.task_type,
            task.n_classes,
            y_val,
            &val_preds,
            y_test,
            &test_preds,
            n_steps,
        )?;
        test_errors.push(split.test_error);
        val_errors.push(split.val_error);
        split_weights.push(split.weights);
    }
    Ok(CrossEnsembleEval {
        dataset_id: dataset_id.to_string(),
        splits: grid,
        test_errors,
        val_errors,
        split_weights,
    })
}

/// Average ensemble weight per method family: per (dataset, split), sum
/// the weights of each family's configs; average over splits, then over
/// datasets. The output sums to 1 (± accumulated rounding).
pub fn ensemble_weight_report(evals: &[CrossEnsembleEval]) -> Result<BTreeMap<String, f64>> {
    if evals.is_empty() || evals.iter().any(|e| e.split_weights.is_empty()) {
        return Err(Error::Input(
            "ensemble_weight_report: need ≥1 datasets with ≥1 fitted splits".to_string(),
        ));
    }
    let methods: BTreeSet<String> = evals
        .iter()
        .flat_map(|e| e.split_weights.iter())
        .flat_map(|w| w.keys().map(|k| k.method.clone()))
        .collect();
    let mut totals: BTreeMap<String, f64> = methods.iter().map(|m| (m.clone(), 0.0)).collect();
    for eval in evals {
        let n_splits = eval.split_weights.len() as f64;
        for method in &methods {
            let split_sum: f64 = eval
                .split_weights
                .iter()
                .map(|w| {
                    w.iter()
                        .filter(|(k, _)| &k.method == method)
                        .map(|(_, v)| v)
                        .sum::<f64>()
                })
                .sum();
            *totals.get_mut(method).expect("present") += split_sum / n_splits;
        }
    }
    let n_datasets = evals.len() as f64;
    Ok(totals
        .into_iter()
        .map(|(m, t)| (m, t / n_datasets))
        .collect())
}

/// A zeroshot portfolio: configs picked greedily so that on each training
/// dataset at least one member is strong.
#[derive(Clone, Debug, PartialEq)]
pub struct Portfolio {
    pub entries: Vec<MethodKey>,
    /// Greedy objective (mean over training datasets of the best
    /// member's normalized error) after each accepted entry.
    pub objective_trace: Vec<f64>,
    pub training_datasets: Vec<String>,
}

/// Greedy zeroshot portfolio learning with `held_out` excluded from
/// training.
///
/// Candidates are all (method, config) pairs covering every training
/// dataset. A candidate's error on a dataset is its mean test error over
/// splits, min-max normalized per dataset across the candidate pool
/// (a constant column normalizes to 0). Each greedy step adds the
/// candidate minimizing the mean over training datasets of the best
/// portfolio member's normalized error, ties broken by smallest key,
/// until `max_size` or the pool is exhausted.
pub fn portfolio_learn(store: &ResultStore, max_size: usize, held_out: &str) -> Result<Portfolio> {
    if max_size == 0 {
        return Err(Error::Input(
            "portfolio_learn: max_size must be ≥ 1".to_string(),
        ));
    }
    if store.task(held_out).is_none() {
        return Err(Error::Missing(format!(
            "unknown held-out dataset {held_out}"
        )));
    }
    let training: Vec<String> = store
        .dataset_ids()
        .into_iter()
        .filter(|d| d != held_out)
        .collect();
    if training.is_empty() {
        return Err(Error::Input(
            "portfolio_learn: need ≥2 datasets (held-out is excluded from training)".to_string(),
        ));
    }

    // Candidate pool: configs present on every training dataset, with
    // their raw per-dataset mean test errors.
    let mut pool: Vec<(MethodKey, Vec<f64>)> = Vec::new();
    for method in store.methods() {
        'configs: for config_id in store.configs(&training[0], &method) {
            let key = MethodKey {
                method: method.clone(),
                config_id,
            };
            let mut errors = Vec::with_capacity(training.len());
            for dataset in &training {
                let task = store.task(dataset).expect("listed");
                let mut split_errs = Vec::new();
                for (repeat, fold) in task.expected_split_grid() {
                    match store.record(dataset, &key.method, &key.config_id, repeat, fold) {
                        Some(rec) => split_errs.push(split_error(
                            task.task_type,
                            task.n_classes,
                            &rec.y_test,
                            &rec.pred_test,
                        )?),
                        None => continue 'configs,
                    }
                }
                errors.push(dataset_error(&split_errs)?);
            }
            pool.push((key, errors));
        }
    }
    if pool.is_empty() {
        return Err(Error::Missing(
            "portfolio_learn: no (method, config) candidate covers every training dataset"
                .to_string(),
        ));
    }

    // Min-max normalize each dataset column over the pool.
    let mut normalized: Vec<Vec<f64>> = vec![vec![0.0; training.len()]; pool.len()];
    for d in 0..training.len() {
        let lo = pool.iter().map(|(_, e)| e[d]).fold(f64::INFINITY, f64::min);
        let hi = pool
            .iter()
            .map(|(_, e)| e[d])
            .fold(f64::NEG_INFINITY, f64::max);
        for (c, (_, errors)) in pool.iter().enumerate() {
            normalized[c][d] = if hi > lo {
                (errors[d] - lo) / (hi - lo)
            } else {
                0.0
            };
        }
    }

    let mut entries: Vec<MethodKey> = Vec::new();
    let mut objective_trace = Vec::new();
    let mut best_so_far = vec![f64::INFINITY; training.len()];
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    while entries.len() < max_size && !remaining.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        // `remaining` preserves pool order, which is ascending by key, so
        // strict improvement keeps the smallest key on ties.
        for (slot, &c) in remaining.iter().enumerate() {
            let objective = (0..training.len())
                .map(|d| best_so_far[d].min(normalized[c][d]))
                .sum::<f64>()
                / training.len() as f64;
            if best.is_none_or(|(obj, _)| objective < obj) {
                best = Some((objective, slot));
            }
        }
        let (objective, slot) = best.expect("remaining non-empty");
        let c = remaining.remove(slot);
        for d in 0..training.len() {
            best_so_far[d] = best_so_far[d].min(normalized[c][d]);
        }
        entries.push(pool[c].0.clone());
        objective_trace.push(objective);
    }

    Ok(Portfolio {
        entries,
        objective_trace,
        training_datasets: training,
    })
}

/// Score a learned portfolio on its held-out dataset: a cross-model GES
/// ensemble restricted to the portfolio's configs.
pub fn evaluate_portfolio(
    store: &ResultStore,
    portfolio: &Portfolio,
    held_out: &str,
    n_steps: usize,
) -> Result<CrossEnsembleEval> {
    let filter: BTreeSet<MethodKey> = portfolio.entries.iter().cloned().collect();
    cross_model_ensemble(store, held_out, Some(&filter), n_steps)
}
