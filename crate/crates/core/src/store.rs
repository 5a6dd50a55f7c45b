//! On-disk artifact format and the validated in-memory result store.
//!
//! An artifact directory holds a `tasks.json` manifest plus one or more
//! `*.jsonl` record files. Each record carries the out-of-fold validation
//! predictions and the bagged test predictions of one
//! (dataset, method, config, outer split) unit. Everything downstream
//! (regime evaluation, ratings, simulations) reads from the immutable
//! [`ResultStore`] built here.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1";

/// Probability row sums may drift from 1 by at most this much.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Datasets with fewer samples than this get the deeper 10x3 split plan.
pub const SMALL_DATASET_THRESHOLD: u64 = 2500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Binary,
    Multiclass,
    Regression,
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskType::Binary => write!(f, "binary"),
            TaskType::Multiclass => write!(f, "multiclass"),
            TaskType::Regression => write!(f, "regression"),
        }
    }
}

/// One dataset's metadata: task type, class count, and split plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub dataset_id: String,
    pub task_type: TaskType,
    pub n_classes: u32,
    pub n_samples: u64,
}

impl TaskSpec {
    /// Outer-split count: 30 (10 repeats x 3 folds) for small datasets,
    /// 9 (3 repeats x 3 folds) otherwise.
    pub fn expected_outer_splits(&self) -> u32 {
        if self.n_samples < SMALL_DATASET_THRESHOLD {
            30
        } else {
            9
        }
    }

    pub fn n_repeats(&self) -> u32 {
        self.expected_outer_splits() / 3
    }

    /// The full (repeat_idx, fold_idx) grid this dataset must cover.
    pub fn expected_split_grid(&self) -> Vec<(u32, u32)> {
        let mut grid = Vec::with_capacity(self.expected_outer_splits() as usize);
        for repeat in 0..self.n_repeats() {
            for fold in 0..3 {
                grid.push((repeat, fold));
            }
        }
        grid
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.task_type, TaskType::Binary | TaskType::Multiclass)
    }

    fn validate(&self) -> Result<()> {
        let fail = |rule: &str| {
            Err(Error::Validation {
                key: format!("task {}", self.dataset_id),
                rule: rule.to_string(),
            })
        };
        if self.dataset_id.is_empty() {
            return fail("dataset_id must be non-empty");
        }
        if self.n_samples == 0 {
            return fail("n_samples must be positive");
        }
        match self.task_type {
            TaskType::Binary if self.n_classes != 2 => fail("binary task requires n_classes = 2"),
            TaskType::Multiclass if self.n_classes < 2 => {
                fail("multiclass task requires n_classes >= 2")
            }
            TaskType::Regression if self.n_classes != 0 => {
                fail("regression task requires n_classes = 0")
            }
            _ => Ok(()),
        }
    }
}

/// Identifies one hyperparameter configuration of a model family.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodKey {
    pub method: String,
    pub config_id: String,
}

impl fmt::Display for MethodKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.method, self.config_id)
    }
}

/// Ground-truth labels for one partition of one split.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    /// 0-based class indices.
    Class(Vec<u32>),
    /// Regression targets.
    Value(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Class(v) => v.len(),
            Labels::Value(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Model predictions for one partition of one split: per-class probability
/// rows for classification, scalars for regression.
#[derive(Clone, Debug, PartialEq)]
pub enum Predictions {
    Proba(Vec<Vec<f64>>),
    Scalar(Vec<f64>),
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Proba(rows) => rows.len(),
            Predictions::Scalar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (rows, columns); scalar predictions have one column.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Predictions::Proba(rows) => (rows.len(), rows.first().map_or(0, |r| r.len())),
            Predictions::Scalar(v) => (v.len(), 1),
        }
    }

    /// Row-major copy of the values.
    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Predictions::Proba(rows) => rows.iter().flatten().copied().collect(),
            Predictions::Scalar(v) => v.clone(),
        }
    }

    /// Rebuild from a row-major buffer with the same variant as `self`.
    pub fn from_flat_like(&self, data: &[f64]) -> Predictions {
        match self {
            Predictions::Proba(rows) => {
                let cols = rows.first().map_or(0, |r| r.len());
                Predictions::Proba(data.chunks(cols).map(|c| c.to_vec()).collect())
            }
            Predictions::Scalar(_) => Predictions::Scalar(data.to_vec()),
        }
    }
}

/// One (dataset, method, config, outer split) unit of predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub dataset_id: String,
    pub repeat_idx: u32,
    pub fold_idx: u32,
    pub method: String,
    pub config_id: String,
    pub y_val: Labels,
    pub pred_val: Predictions,
    pub y_test: Labels,
    pub pred_test: Predictions,
}

impl PredictionRecord {
    pub fn method_key(&self) -> MethodKey {
        MethodKey {
            method: self.method.clone(),
            config_id: self.config_id.clone(),
        }
    }

    /// Human-readable identity used in error messages.
    pub fn describe(&self) -> String {
        format!(
            "record ({}, r{}, f{}, {}, {})",
            self.dataset_id, self.repeat_idx, self.fold_idx, self.method, self.config_id
        )
    }

    fn sort_key(&self) -> (&str, &str, &str, u32, u32) {
        (
            &self.dataset_id,
            &self.method,
            &self.config_id,
            self.repeat_idx,
            self.fold_idx,
        )
    }

    fn validate(&self, task: &TaskSpec) -> Result<()> {
        let fail = |rule: String| {
            Err(Error::Validation {
                key: self.describe(),
                rule,
            })
        };
        if self.pred_val.len() != self.y_val.len() {
            return fail(format!(
                "pred_val length {} != y_val length {}",
                self.pred_val.len(),
                self.y_val.len()
            ));
        }
        if self.pred_test.len() != self.y_test.len() {
            return fail(format!(
                "pred_test length {} != y_test length {}",
                self.pred_test.len(),
                self.y_test.len()
            ));
        }
        if self.y_val.is_empty() || self.y_test.is_empty() {
            return fail("validation and test partitions must be non-empty".to_string());
        }
        for (part, labels, preds) in [
            ("val", &self.y_val, &self.pred_val),
            ("test", &self.y_test, &self.pred_test),
        ] {
            match (task.is_classification(), labels, preds) {
                (true, Labels::Class(ys), Predictions::Proba(rows)) => {
                    for &y in ys {
                        if y >= task.n_classes {
                            return fail(format!(
                                "y_{part} label {y} out of range for {} classes",
                                task.n_classes
                            ));
                        }
                    }
                    for (i, row) in rows.iter().enumerate() {
                        if row.len() != task.n_classes as usize {
                            return fail(format!(
                                "pred_{part} row {i} has {} entries, expected {}",
                                row.len(),
                                task.n_classes
                            ));
                        }
                        let mut sum = 0.0;
                        for &p in row {
                            if !(0.0..=1.0).contains(&p) {
                                return fail(format!(
                                    "pred_{part} row {i} has probability {p} outside [0, 1]"
                                ));
                            }
                            sum += p;
                        }
                        if (sum - 1.0).abs() > PROB_SUM_TOL {
                            return fail(format!("pred_{part} row {i} sums to {sum}, not 1"));
                        }
                    }
                }
                (false, Labels::Value(ys), Predictions::Scalar(ps)) => {
                    if let Some(bad) = ys.iter().chain(ps.iter()).find(|v| !v.is_finite()) {
                        return fail(format!("y_{part}/pred_{part} contains non-finite {bad}"));
                    }
                }
                _ => {
                    return fail(format!(
                        "{part} payload does not match task type {}",
                        task.task_type
                    ));
                }
            }
        }
        if self.fold_idx >= 3 || self.repeat_idx >= task.n_repeats() {
            return fail(format!(
                "split (r{}, f{}) outside the {}-split plan",
                self.repeat_idx,
                self.fold_idx,
                task.expected_outer_splits()
            ));
        }
        Ok(())
    }
}

/// Load provenance; not part of store equality.
#[derive(Clone, Debug, Default)]
pub struct Provenance {
    pub source: String,
    pub format_version: String,
}

type SplitIndex = BTreeMap<(u32, u32), usize>;
type ConfigIndex = BTreeMap<String, SplitIndex>;
type MethodIndex = BTreeMap<String, ConfigIndex>;

/// Validated, indexed, immutable collection of prediction records.
#[derive(Clone, Debug)]
pub struct ResultStore {
    tasks: BTreeMap<String, TaskSpec>,
    records: Vec<PredictionRecord>,
    index: BTreeMap<String, MethodIndex>,
    pub provenance: Provenance,
}

impl PartialEq for ResultStore {
    fn eq(&self, other: &Self) -> bool {
        self.tasks == other.tasks && self.records == other.records
    }
}

impl ResultStore {
    /// Validate, sort, and index a set of tasks and records.
    pub fn new(
        tasks: Vec<TaskSpec>,
        mut records: Vec<PredictionRecord>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut task_map = BTreeMap::new();
        for task in tasks {
            task.validate()?;
            if task_map
                .insert(task.dataset_id.clone(), task.clone())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "duplicate dataset_id {} in manifest",
                    task.dataset_id
                )));
            }
        }

        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

        let mut index: BTreeMap<String, MethodIndex> = BTreeMap::new();
        for (i, record) in records.iter().enumerate() {
            let task = task_map
                .get(&record.dataset_id)
                .ok_or_else(|| Error::Validation {
                    key: record.describe(),
                    rule: "dataset_id has no entry in the task manifest".to_string(),
                })?;
            record.validate(task)?;
            let prior = index
                .entry(record.dataset_id.clone())
                .or_default()
                .entry(record.method.clone())
                .or_default()
                .entry(record.config_id.clone())
                .or_default()
                .insert((record.repeat_idx, record.fold_idx), i);
            if prior.is_some() {
                return Err(Error::Validation {
                    key: record.describe(),
                    rule: "duplicate (dataset, repeat, fold, method, config) key".to_string(),
                });
            }
        }

        // Configs of one method must cover identical splits, and "default"
        // must exist wherever the method has any record.
        for (dataset_id, methods) in &index {
            for (method, configs) in methods {
                if !configs.contains_key("default") {
                    return Err(Error::Validation {
                        key: format!("({dataset_id}, {method})"),
                        rule: "no \"default\" config present".to_string(),
                    });
                }
                let reference: Vec<(u32, u32)> = configs["default"].keys().copied().collect();
                for (config_id, splits) in configs {
                    let got: Vec<(u32, u32)> = splits.keys().copied().collect();
                    if got != reference {
                        return Err(Error::Validation {
                            key: format!("({dataset_id}, {method}, {config_id})"),
                            rule: format!(
                                "split coverage differs from config \"default\" ({} vs {} splits); ragged HPO is rejected",
                                got.len(),
                                reference.len()
                            ),
                        });
                    }
                }
            }
        }

        Ok(ResultStore {
            tasks: task_map,
            records,
            index,
            provenance,
        })
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.values()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn task(&self, dataset_id: &str) -> Option<&TaskSpec> {
        self.tasks.get(dataset_id)
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    /// Sorted dataset ids present in the manifest.
    pub fn dataset_ids(&self) -> Vec<String> {
        self.tasks.keys().cloned().collect()
    }

    /// Sorted distinct method names with at least one record anywhere.
    pub fn methods(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .index
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Sorted method names with at least one record on `dataset_id`.
    pub fn methods_on(&self, dataset_id: &str) -> Vec<String> {
        self.index
            .get(dataset_id)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Sorted config ids of `method` on `dataset_id`.
    pub fn configs(&self, dataset_id: &str, method: &str) -> Vec<String> {
        self.index
            .get(dataset_id)
            .and_then(|m| m.get(method))
            .map(|c| c.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Sorted (repeat, fold) splits covered by `method` on `dataset_id`.
    pub fn splits(&self, dataset_id: &str, method: &str) -> Vec<(u32, u32)> {
        self.index
            .get(dataset_id)
            .and_then(|m| m.get(method))
            .and_then(|c| c.get("default"))
            .map(|s| s.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn record(
        &self,
        dataset_id: &str,
        method: &str,
        config_id: &str,
        repeat_idx: u32,
        fold_idx: u32,
    ) -> Option<&PredictionRecord> {
        self.index
            .get(dataset_id)?
            .get(method)?
            .get(config_id)?
            .get(&(repeat_idx, fold_idx))
            .map(|&i| &self.records[i])
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ManifestJson {
    format_version: String,
    tasks: Vec<TaskSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelsJson {
    Ints(Vec<u32>),
    Floats(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PredJson {
    Proba(Vec<Vec<f64>>),
    Scalar(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    dataset_id: String,
    repeat_idx: u32,
    fold_idx: u32,
    method: String,
    config_id: String,
    y_val: LabelsJson,
    pred_val: PredJson,
    y_test: LabelsJson,
    pred_test: PredJson,
}

fn labels_from_json(raw: LabelsJson, classification: bool, context: &str) -> Result<Labels> {
    match (classification, raw) {
        (true, LabelsJson::Ints(v)) => Ok(Labels::Class(v)),
        (true, LabelsJson::Floats(v)) => {
            // Tolerate writers that emit integral labels as floats.
            let mut out = Vec::with_capacity(v.len());
            for x in v {
                if x.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&x) {
                    return Err(Error::Validation {
                        key: context.to_string(),
                        rule: format!("classification label {x} is not a 0-based integer"),
                    });
                }
                out.push(x as u32);
            }
            Ok(Labels::Class(out))
        }
        (false, LabelsJson::Floats(v)) => Ok(Labels::Value(v)),
        (false, LabelsJson::Ints(v)) => Ok(Labels::Value(v.into_iter().map(f64::from).collect())),
    }
}

fn preds_from_json(raw: PredJson, classification: bool, context: &str) -> Result<Predictions> {
    match (classification, raw) {
        (true, PredJson::Proba(rows)) => Ok(Predictions::Proba(rows)),
        (false, PredJson::Scalar(v)) => Ok(Predictions::Scalar(v)),
        (true, PredJson::Scalar(_)) => Err(Error::Validation {
            key: context.to_string(),
            rule: "classification predictions must be per-class probability rows".to_string(),
        }),
        (false, PredJson::Proba(_)) => Err(Error::Validation {
            key: context.to_string(),
            rule: "regression predictions must be a flat float array".to_string(),
        }),
    }
}

fn labels_to_json(labels: &Labels) -> LabelsJson {
    match labels {
        Labels::Class(v) => LabelsJson::Ints(v.clone()),
        Labels::Value(v) => LabelsJson::Floats(v.clone()),
    }
}

fn preds_to_json(preds: &Predictions) -> PredJson {
    match preds {
        Predictions::Proba(rows) => PredJson::Proba(rows.clone()),
        Predictions::Scalar(v) => PredJson::Scalar(v.clone()),
    }
}

/// Load and validate an artifact directory.
pub fn load_store(path: impl AsRef<Path>) -> Result<ResultStore> {
    let dir = path.as_ref();
    let manifest_path = dir.join("tasks.json");
    if !manifest_path.is_file() {
        return Err(Error::Config(format!(
            "missing manifest {}",
            manifest_path.display()
        )));
    }
    let manifest_text = fs::read_to_string(&manifest_path)?;
    let manifest: ManifestJson =
        serde_json::from_str(&manifest_text).map_err(|e| Error::Parse {
            file: manifest_path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported format_version {:?} (expected {:?})",
            manifest.format_version, FORMAT_VERSION
        )));
    }

    let task_types: BTreeMap<String, bool> = manifest
        .tasks
        .iter()
        .map(|t| (t.dataset_id.clone(), t.task_type != TaskType::Regression))
        .collect();

    let mut record_files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    record_files.sort();

    let mut records = Vec::new();
    for file in &record_files {
        let reader = BufReader::new(fs::File::open(file)?);
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RecordJson = serde_json::from_str(&line).map_err(|e| Error::Parse {
                file: file.display().to_string(),
                line: line_no + 1,
                message: e.to_string(),
            })?;
            let classification =
                *task_types
                    .get(&raw.dataset_id)
                    .ok_or_else(|| Error::Validation {
                        key: format!("{}:{}", file.display(), line_no + 1),
                        rule: format!(
                            "dataset_id {} has no entry in the task manifest",
                            raw.dataset_id
                        ),
                    })?;
            let context = format!(
                "record ({}, r{}, f{}, {}, {})",
                raw.dataset_id, raw.repeat_idx, raw.fold_idx, raw.method, raw.config_id
            );
            records.push(PredictionRecord {
                dataset_id: raw.dataset_id,
                repeat_idx: raw.repeat_idx,
                fold_idx: raw.fold_idx,
                method: raw.method,
                config_id: raw.config_id,
                y_val: labels_from_json(raw.y_val, classification, &context)?,
                pred_val: preds_from_json(raw.pred_val, classification, &context)?,
                y_test: labels_from_json(raw.y_test, classification, &context)?,
                pred_test: preds_from_json(raw.pred_test, classification, &context)?,
            });
        }
    }

    ResultStore::new(
        manifest.tasks,
        records,
        Provenance {
            source: dir.display().to_string(),
            format_version: manifest.format_version,
        },
    )
}

/// Write a store as an artifact directory (`tasks.json` + `records.jsonl`).
///
/// Output is deterministic: tasks and records are emitted in sorted order
/// and floats as shortest round-trip decimals.
pub fn write_store(store: &ResultStore, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = ManifestJson {
        format_version: FORMAT_VERSION.to_string(),
        tasks: store.tasks().cloned().collect(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join("tasks.json"), manifest_json + "\n")?;

    let mut out = fs::File::create(dir.join("records.jsonl"))?;
    for record in store.records() {
        let raw = RecordJson {
            dataset_id: record.dataset_id.clone(),
            repeat_idx: record.repeat_idx,
            fold_idx: record.fold_idx,
            method: record.method.clone(),
            config_id: record.config_id.clone(),
            y_val: labels_to_json(&record.y_val),
            pred_val: preds_to_json(&record.pred_val),
            y_test: labels_to_json(&record.y_test),
            pred_test: preds_to_json(&record.pred_test),
        };
        let line = serde_json::to_string(&raw)
            .map_err(|e| Error::Config(format!("record serialization failed: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Split coverage report
// ---------------------------------------------------------------------------

/// One (dataset, method) pair with incomplete outer-split coverage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitHole {
    pub dataset_id: String,
    pub method: String,
    pub missing: Vec<(u32, u32)>,
}

/// Report of all incomplete (dataset, method) pairs; empty means complete.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SplitReport {
    pub holes: Vec<SplitHole>,
}

impl SplitReport {
    pub fn is_complete(&self) -> bool {
        self.holes.is_empty()
    }
}

/// List every (dataset, method) whose covered splits differ from the
/// dataset's expected split grid.
pub fn validate_splits(store: &ResultStore) -> SplitReport {
    let mut holes = Vec::new();
    for task in store.tasks() {
        let grid = task.expected_split_grid();
        for method in store.methods_on(&task.dataset_id) {
            let present = store.splits(&task.dataset_id, &method);
            let missing: Vec<(u32, u32)> = grid
                .iter()
                .filter(|s| !present.contains(s))
                .copied()
                .collect();
            if !missing.is_empty() {
                holes.push(SplitHole {
                    dataset_id: task.dataset_id.clone(),
                    method,
                    missing,
                });
            }
        }
    }
    SplitReport { holes }
}
