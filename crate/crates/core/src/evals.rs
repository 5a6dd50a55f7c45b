//! Regime evaluation and the per-dataset error tables that feed ratings
//! and aggregations.
//!
//! Every method is judged in three regimes per dataset: the default
//! config as-is, the tuned config (per-split argmin of validation error),
//! and the tuned+ensembled mixture from greedy ensemble selection.

use std::collections::BTreeMap;
use std::fmt;

use crate::ensemble::{ensemble_split, select_best_config};
use crate::error::{Error, Result};
use crate::metrics::{dataset_error, split_error};
use crate::store::{Predictions, ResultStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    Default,
    Tuned,
    TunedEnsembled,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Default, Regime::Tuned, Regime::TunedEnsembled];

    /// Machine-readable tag used in ids and file output.
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Default => "default",
            Regime::Tuned => "tuned",
            Regime::TunedEnsembled => "tuned_ensembled",
        }
    }

    /// Display abbreviation: D, T, T+E.
    pub fn short(&self) -> &'static str {
        match self {
            Regime::Default => "D",
            Regime::Tuned => "T",
            Regime::TunedEnsembled => "T+E",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Row identity on regime leaderboards: one method in one regime.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegimeKey {
    pub method: String,
    pub regime: Regime,
}

impl RegimeKey {
    pub fn new(method: &str, regime: Regime) -> Self {
        RegimeKey {
            method: method.to_string(),
            regime,
        }
    }

    /// Human-facing label, e.g. `GBM (T+E)`.
    pub fn label(&self) -> String {
        format!("{} ({})", self.method, self.regime.short())
    }
}

impl fmt::Display for RegimeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.method, self.regime.tag())
    }
}

/// Per-split errors of one (dataset, method, regime) triple.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeEval {
    pub dataset_id: String,
    pub method: String,
    pub regime: Regime,
    /// Splits in (repeat, fold) order, aligned with the error arrays.
    pub splits: Vec<(u32, u32)>,
    pub test_errors: Vec<f64>,
    pub val_errors: Vec<f64>,
}

impl RegimeEval {
    pub fn mean_test_error(&self) -> Result<f64> {
        dataset_error(&self.test_errors)
    }

    pub fn mean_val_error(&self) -> Result<f64> {
        dataset_error(&self.val_errors)
    }
}

/// All three regime evaluations of one (dataset, method).
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeSet {
    pub default: RegimeEval,
    pub tuned: RegimeEval,
    pub tuned_ensembled: RegimeEval,
}

impl RegimeSet {
    pub fn get(&self, regime: Regime) -> &RegimeEval {
        match regime {
            Regime::Default => &self.default,
            Regime::Tuned => &self.tuned,
            Regime::TunedEnsembled => &self.tuned_ensembled,
        }
    }
}

/// Evaluate all three regimes of `method` on `dataset_id`.
///
/// Requires complete split coverage; a missing expected split is an error
/// naming it (run split validation first to see all holes at once).
pub fn evaluate_regimes(
    store: &ResultStore,
    dataset_id: &str,
    method: &str,
    ges_steps: usize,
) -> Result<RegimeSet> {
    let task = store
        .task(dataset_id)
        .ok_or_else(|| Error::Missing(format!("dataset {dataset_id} not in the manifest")))?;
    let configs = store.configs(dataset_id, method);
    if configs.is_empty() {
        return Err(Error::Missing(format!(
            "method {method} has no records on {dataset_id}"
        )));
    }

    let splits = task.expected_split_grid();
    let mut evals = BTreeMap::new();
    for regime in Regime::ALL {
        evals.insert(
            regime,
            RegimeEval {
                dataset_id: dataset_id.to_string(),
                method: method.to_string(),
                regime,
                splits: splits.clone(),
                test_errors: Vec::with_capacity(splits.len()),
                val_errors: Vec::with_capacity(splits.len()),
            },
        );
    }

    for &(repeat, fold) in &splits {
        // Ragged HPO is rejected at load, so checking "default" covers
        // every config.
        let default_rec = store
            .record(dataset_id, method, "default", repeat, fold)
            .ok_or_else(|| {
                Error::Missing(format!(
                    "({dataset_id}, {method}) has no record for split (r{repeat}, f{fold})"
                ))
            })?;

        let d = evals.get_mut(&Regime::Default).expect("present");
        d.test_errors.push(split_error(
            task.task_type,
            task.n_classes,
            &default_rec.y_test,
            &default_rec.pred_test,
        )?);
        d.val_errors.push(split_error(
            task.task_type,
            task.n_classes,
            &default_rec.y_val,
            &default_rec.pred_val,
        )?);

        let mut val_errors: BTreeMap<String, f64> = BTreeMap::new();
        let mut val_preds: BTreeMap<String, &Predictions> = BTreeMap::new();
        let mut test_preds: BTreeMap<String, &Predictions> = BTreeMap::new();
        for config in &configs {
            let rec = store
                .record(dataset_id, method, config, repeat, fold)
                .expect("coverage is aligned across configs");
            val_errors.insert(
                config.clone(),
                split_error(task.task_type, task.n_classes, &rec.y_val, &rec.pred_val)?,
            );
            val_preds.insert(config.clone(), &rec.pred_val);
            test_preds.insert(config.clone(), &rec.pred_test);
        }

        let best = select_best_config(&val_errors)?;
        let best_rec = store
            .record(dataset_id, method, &best, repeat, fold)
            .expect("selected config has a record");
        let t = evals.get_mut(&Regime::Tuned).expect("present");
        t.test_errors.push(split_error(
            task.task_type,
            task.n_classes,
            &best_rec.y_test,
            &best_rec.pred_test,
        )?);
        t.val_errors.push(val_errors[&best]);

        let ensembled = ensemble_split(
            task.task_type,
            task.n_classes,
            &default_rec.y_val,
            &val_preds,
            &default_rec.y_test,
            &test_preds,
            ges_steps,
        )?;
        let e = evals.get_mut(&Regime::TunedEnsembled).expect("present");
        e.test_errors.push(ensembled.test_error);
        e.val_errors.push(ensembled.val_error);
    }

    Ok(RegimeSet {
        default: evals.remove(&Regime::Default).expect("present"),
        tuned: evals.remove(&Regime::Tuned).expect("present"),
        tuned_ensembled: evals.remove(&Regime::TunedEnsembled).expect("present"),
    })
}

/// One cell of an eval table: a dataset-level error, possibly imputed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalCell {
    pub error: f64,
    pub imputed: bool,
}

/// Errors per (row key, dataset). Generic over the row key so the same
/// table drives regime leaderboards (RegimeKey) and trajectory analyses
/// (string keys).
#[derive(Clone, Debug, PartialEq)]
pub struct EvalTable<K: Ord> {
    datasets: Vec<String>,
    rows: BTreeMap<K, BTreeMap<String, EvalCell>>,
}

impl<K: Ord + Clone + fmt::Display> EvalTable<K> {
    pub fn new(mut datasets: Vec<String>) -> Self {
        datasets.sort();
        datasets.dedup();
        EvalTable {
            datasets,
            rows: BTreeMap::new(),
        }
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.rows.keys()
    }

    pub fn n_keys(&self) -> usize {
        self.rows.len()
    }

    pub fn insert(&mut self, key: K, dataset: &str, error: f64) -> Result<()> {
        self.insert_cell(
            key,
            dataset,
            EvalCell {
                error,
                imputed: false,
            },
        )
    }

    fn insert_cell(&mut self, key: K, dataset: &str, cell: EvalCell) -> Result<()> {
        if !self.datasets.iter().any(|d| d == dataset) {
            return Err(Error::Input(format!("eval table has no dataset {dataset}")));
        }
        if !cell.error.is_finite() {
            return Err(Error::Input(format!(
                "non-finite error for ({key}, {dataset})"
            )));
        }
        let prior = self
            .rows
            .entry(key.clone())
            .or_default()
            .insert(dataset.to_string(), cell);
        if prior.is_some() {
            return Err(Error::Input(format!(
                "duplicate eval for ({key}, {dataset})"
            )));
        }
        Ok(())
    }

    pub fn cell(&self, key: &K, dataset: &str) -> Option<&EvalCell> {
        self.rows.get(key)?.get(dataset)
    }

    pub fn error(&self, key: &K, dataset: &str) -> Option<f64> {
        self.cell(key, dataset).map(|c| c.error)
    }

    pub fn row(&self, key: &K) -> Option<&BTreeMap<String, EvalCell>> {
        self.rows.get(key)
    }

    /// (key, dataset) pairs without a value.
    pub fn missing(&self) -> Vec<(K, String)> {
        let mut out = Vec::new();
        for (key, row) in &self.rows {
            for dataset in &self.datasets {
                if !row.contains_key(dataset) {
                    out.push((key.clone(), dataset.clone()));
                }
            }
        }
        out
    }

    pub fn is_complete(&self) -> bool {
        self.rows
            .values()
            .all(|row| row.len() == self.datasets.len())
    }

    pub fn imputed_count(&self, key: &K) -> usize {
        self.rows
            .get(key)
            .map_or(0, |row| row.values().filter(|c| c.imputed).count())
    }
}

/// Fill every absent (key, dataset) cell with the reference row's error
/// for that dataset, flagging filled cells as imputed. Idempotent.
pub fn impute_missing<K>(table: &EvalTable<K>, reference: &K) -> Result<EvalTable<K>>
where
    K: Ord + Clone + fmt::Display,
{
    let reference_row = table
        .row(reference)
        .ok_or_else(|| Error::Missing(format!("imputation reference {reference} has no row")))?;
    for dataset in table.datasets() {
        if !reference_row.contains_key(dataset) {
            return Err(Error::Missing(format!(
                "imputation reference {reference} has no eval on dataset {dataset}"
            )));
        }
    }
    let mut out = table.clone();
    for (key, dataset) in table.missing() {
        let cell = EvalCell {
            error: reference_row[&dataset].error,
            imputed: true,
        };
        out.insert_cell(key, &dataset, cell)?;
    }
    Ok(out)
}

/// Evaluate every (dataset, method) pair in the store under all three
/// regimes. Returns the test-error table and the validation-error table,
/// both keyed by (method, regime). Methods absent from a dataset simply
/// leave those cells empty (impute afterwards if full coverage is needed).
pub fn evaluate_store(
    store: &ResultStore,
    ges_steps: usize,
) -> Result<(EvalTable<RegimeKey>, EvalTable<RegimeKey>)> {
    let mut test_table = EvalTable::new(store.dataset_ids());
    let mut val_table = EvalTable::new(store.dataset_ids());
    for dataset_id in store.dataset_ids() {
        for method in store.methods_on(&dataset_id) {
            let set = evaluate_regimes(store, &dataset_id, &method, ges_steps)?;
            for regime in Regime::ALL {
                let eval = set.get(regime);
                let key = RegimeKey::new(&method, regime);
                test_table.insert(key.clone(), &dataset_id, eval.mean_test_error()?)?;
                val_table.insert(key, &dataset_id, eval.mean_val_error()?)?;
            }
        }
    }
    Ok((test_table, val_table))
}

/// View of a table as a plain error map, as consumed by the rating module.
pub fn error_map<K>(table: &EvalTable<K>) -> BTreeMap<(K, String), f64>
where
    K: Ord + Clone + fmt::Display,
{
    let mut out = BTreeMap::new();
    for key in table.keys() {
        for dataset in table.datasets() {
            if let Some(cell) = table.cell(key, dataset) {
                out.insert((key.clone(), dataset.clone()), cell.error);
            }
        }
    }
    out
}
