//! Seeded generator of synthetic result stores with planted method
//! orderings: each method's configs corrupt a latent per-dataset signal
//! with noise whose scale decreases in the method's quality. Useful for
//! end-to-end tests where the right answer is known by construction.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::store::{
    Labels, PredictionRecord, Predictions, Provenance, ResultStore, TaskSpec, TaskType,
    FORMAT_VERSION,
};

/// Seed-derivation tags, one per random coordinate family.
const TAG_LATENT: u64 = 0x6c61_746e;
const TAG_CONFIG: u64 = 0x636f_6e66;
const TAG_SHUFFLE: u64 = 0x7368_7566;
const TAG_NOISE: u64 = 0x6e6f_6973;

/// One simulated method family.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodPlan {
    pub name: String,
    /// Higher quality → less noise → lower error, in [0, 1].
    pub quality: f64,
    /// Config 0 is `default`; the rest are `r1`, `r2`, … with per-config
    /// noise multipliers.
    pub n_configs: usize,
}

/// Full description of a synthetic benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthPlan {
    pub seed: u64,
    pub n_datasets: usize,
    /// Relative proportions of binary/multiclass/regression datasets.
    pub task_mix: (f64, f64, f64),
    pub methods: Vec<MethodPlan>,
    /// Samples per dataset; below 2500 each record key gets the 30-split
    /// plan, at or above it the 9-split plan.
    pub n_samples: u64,
    /// Base noise standard deviation before quality/config scaling.
    pub noise_scale: f64,
}

impl Default for SynthPlan {
    fn default() -> Self {
        SynthPlan {
            seed: 0,
            n_datasets: 10,
            task_mix: (0.5, 0.25, 0.25),
            methods: vec![
                MethodPlan {
                    name: "GBM".to_string(),
                    quality: 0.85,
                    n_configs: 5,
                },
                MethodPlan {
                    name: "RandomForest".to_string(),
                    quality: 0.6,
                    n_configs: 3,
                },
                MethodPlan {
                    name: "KNN".to_string(),
                    quality: 0.25,
                    n_configs: 2,
                },
            ],
            n_samples: 200,
            noise_scale: 1.0,
        }
    }
}

impl SynthPlan {
    fn validate(&self) -> Result<()> {
        let (b, m, r) = self.task_mix;
        if !(b >= 0.0 && m >= 0.0 && r >= 0.0) || !(b + m + r).is_finite() || b + m + r <= 0.0 {
            return Err(Error::Config(format!(
                "task mix ({b}, {m}, {r}) must be non-negative with a positive sum"
            )));
        }
        if self.n_datasets == 0 {
            return Err(Error::Config("n_datasets must be ≥ 1".to_string()));
        }
        if self.n_samples < 9 {
            return Err(Error::Config(
                "n_samples must be ≥ 9 so every fold is non-empty".to_string(),
            ));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::Config(format!(
                "noise_scale {} must be finite and positive",
                self.noise_scale
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("plan has no methods".to_string()));
        }
        let mut names = BTreeSet::new();
        for method in &self.methods {
            if method.name.is_empty() || !names.insert(&method.name) {
                return Err(Error::Config(format!(
                    "method names must be unique and non-empty (offender: {:?})",
                    method.name
                )));
            }
            if !(0.0..=1.0).contains(&method.quality) {
                return Err(Error::Config(format!(
                    "quality {} of {} outside [0, 1]",
                    method.quality, method.name
                )));
            }
            if method.n_configs == 0 {
                return Err(Error::Config(format!(
                    "{} needs at least one config",
                    method.name
                )));
            }
        }
        Ok(())
    }

    /// Task type per dataset: largest-remainder apportionment of the mix,
    /// laid out as a binary block, then multiclass, then regression.
    fn task_assignment(&self) -> Vec<TaskType> {
        let (b, m, r) = self.task_mix;
        let total = b + m + r;
        let shares = [b / total, m / total, r / total];
        let n = self.n_datasets;
        let mut counts = [0usize; 3];
        let mut remainders = [0.0f64; 3];
        for (i, share) in shares.iter().enumerate() {
            let exact = share * n as f64;
            counts[i] = exact.floor() as usize;
            remainders[i] = exact - exact.floor();
        }
        let mut left = n - counts.iter().sum::<usize>();
        // Ties go to the earlier task kind (binary, multiclass, regression).
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]).then(a.cmp(&b)));
        for &i in &order {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        let kinds = [TaskType::Binary, TaskType::Multiclass, TaskType::Regression];
        kinds
            .iter()
            .zip(counts)
            .flat_map(|(&kind, count)| std::iter::repeat_n(kind, count))
            .collect()
    }
}

/// Latent per-dataset ground truth from which all predictions derive.
enum Latent {
    /// (signal, label): label ~ Bernoulli(sigmoid(2.5·signal)).
    Binary(Vec<f64>, Vec<u32>),
    /// Uniform labels; predictions are softmaxed noisy logits.
    Multiclass(Vec<u32>),
    /// Targets; predictions are targets plus noise.
    Regression(Vec<f64>),
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logit sharpness of the latent binary signal.
const SIGNAL_GAIN: f64 = 2.5;
/// Logit bump on the true class for multiclass tasks.
const CLASS_MARGIN: f64 = 2.0;
const N_MULTICLASS: u32 = 3;

fn draw_latent(kind: TaskType, n: usize, rng: &mut Rng) -> Latent {
    match kind {
        TaskType::Binary => {
            let mut signal = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let s = rng.normal();
                let y = u32::from(rng.next_f64() < sigmoid(SIGNAL_GAIN * s));
                signal.push(s);
                labels.push(y);
            }
            Latent::Binary(signal, labels)
        }
        TaskType::Multiclass => Latent::Multiclass(
            (0..n)
                .map(|_| rng.gen_range(N_MULTICLASS as u64) as u32)
                .collect(),
        ),
        TaskType::Regression => Latent::Regression((0..n).map(|_| rng.normal()).collect()),
    }
}

/// Predict the given sample indices with noise of scale `sigma`.
fn predict(latent: &Latent, indices: &[usize], sigma: f64, rng: &mut Rng) -> (Labels, Predictions) {
    match latent {
        Latent::Binary(signal, labels) => {
            let mut rows = Vec::with_capacity(indices.len());
            let mut y = Vec::with_capacity(indices.len());
            for &i in indices {
                let p = sigmoid(SIGNAL_GAIN * (signal[i] + sigma * rng.normal()));
                rows.push(vec![1.0 - p, p]);
                y.push(labels[i]);
            }
            (Labels::Class(y), Predictions::Proba(rows))
        }
        Latent::Multiclass(labels) => {
            let mut rows = Vec::with_capacity(indices.len());
            let mut y = Vec::with_capacity(indices.len());
            for &i in indices {
                let logits: Vec<f64> = (0..N_MULTICLASS)
                    .map(|k| {
                        let mu = if k == labels[i] { CLASS_MARGIN } else { 0.0 };
                        mu + sigma * rng.normal()
                    })
                    .collect();
                let peak = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - peak).exp()).collect();
                let total: f64 = exps.iter().sum();
                rows.push(exps.into_iter().map(|e| e / total).collect());
                y.push(labels[i]);
            }
            (Labels::Class(y), Predictions::Proba(rows))
        }
        Latent::Regression(targets) => {
            let mut preds = Vec::with_capacity(indices.len());
            let mut y = Vec::with_capacity(indices.len());
            for &i in indices {
                preds.push(targets[i] + sigma * rng.normal());
                y.push(targets[i]);
            }
            (Labels::Value(y), Predictions::Scalar(preds))
        }
    }
}

/// Shuffled 3-fold partition for one repeat: returns per-fold index
/// lists; fold f's validation set is the other two folds in order.
fn fold_partition(n: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let (q, r) = (n / 3, n % 3);
    let mut folds = Vec::with_capacity(3);
    let mut at = 0;
    for f in 0..3 {
        let size = q + usize::from(f < r);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    folds
}

/// Generate a complete, validated store from the plan. Deterministic:
/// the same plan yields an identical store, record for record.
pub fn generate(plan: &SynthPlan) -> Result<ResultStore> {
    plan.validate()?;
    let kinds = plan.task_assignment();
    let n = plan.n_samples as usize;

    // Per-config noise multipliers, drawn once per method.
    let mut multipliers: Vec<Vec<f64>> = Vec::with_capacity(plan.methods.len());
    for (m_idx, method) in plan.methods.iter().enumerate() {
        let mut rng = Rng::seed_from_u64(derive_seed(plan.seed, &[TAG_CONFIG, m_idx as u64]));
        let mut per_config = vec![1.0]; // the default config
        for _ in 1..method.n_configs {
            per_config.push(0.7 + 0.6 * rng.next_f64());
        }
        multipliers.push(per_config);
    }

    let mut tasks = Vec::with_capacity(plan.n_datasets);
    let mut records = Vec::new();
    for (d_idx, &kind) in kinds.iter().enumerate() {
        let dataset_id = format!("d{d_idx:03}");
        let task = TaskSpec {
            dataset_id: dataset_id.clone(),
            task_type: kind,
            n_classes: match kind {
                TaskType::Binary => 2,
                TaskType::Multiclass => N_MULTICLASS,
                TaskType::Regression => 0,
            },
            n_samples: plan.n_samples,
        };
        let mut latent_rng =
            Rng::seed_from_u64(derive_seed(plan.seed, &[TAG_LATENT, d_idx as u64]));
        let latent = draw_latent(kind, n, &mut latent_rng);

        for repeat in 0..task.n_repeats() {
            let mut shuffle_rng = Rng::seed_from_u64(derive_seed(
                plan.seed,
                &[TAG_SHUFFLE, d_idx as u64, repeat as u64],
            ));
            let folds = fold_partition(n, &mut shuffle_rng);
            for fold in 0..3u32 {
                let test_idx = &folds[fold as usize];
                let val_idx: Vec<usize> = (0..3)
                    .filter(|&f| f != fold as usize)
                    .flat_map(|f| folds[f].iter().copied())
                    .collect();
                for (m_idx, method) in plan.methods.iter().enumerate() {
                    for (c_idx, multiplier) in multipliers[m_idx].iter().enumerate() {
                        let sigma = plan.noise_scale * (1.10 - method.quality) * multiplier;
                        let mut noise_rng = Rng::seed_from_u64(derive_seed(
                            plan.seed,
                            &[
                                TAG_NOISE,
                                d_idx as u64,
                                m_idx as u64,
                                c_idx as u64,
                                repeat as u64,
                                fold as u64,
                            ],
                        ));
                        let (y_val, pred_val) = predict(&latent, &val_idx, sigma, &mut noise_rng);
                        let (y_test, pred_test) = predict(&latent, test_idx, sigma, &mut noise_rng);
                        records.push(PredictionRecord {
                            dataset_id: dataset_id.clone(),
                            repeat_idx: repeat,
                            fold_idx: fold,
                            method: method.name.clone(),
                            config_id: if c_idx == 0 {
                                "default".to_string()
                            } else {
                                format!("r{c_idx}")
                            },
                            y_val,
                            pred_val,
                            y_test,
                            pred_test,
                        });
                    }
                }
            }
        }
        tasks.push(task);
    }

    ResultStore::new(
        tasks,
        records,
        Provenance {
            source: format!("synth(seed={})", plan.seed),
            format_version: FORMAT_VERSION.to_string(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{dataset_error, split_error};
    use crate::store::{load_store, write_store};

    fn small_plan() -> SynthPlan {
        SynthPlan {
            seed: 5,
            n_datasets: 3,
            task_mix: (1.0, 1.0, 1.0),
            methods: vec![
                MethodPlan {
                    name: "A".to_string(),
                    quality: 0.8,
                    n_configs: 2,
                },
                MethodPlan {
                    name: "B".to_string(),
                    quality: 0.3,
                    n_configs: 1,
                },
            ],
            n_samples: 60,
            noise_scale: 1.0,
        }
    }

    #[test]
    fn same_seed_is_identical_different_seed_is_not() {
        let plan = small_plan();
        let one = generate(&plan).unwrap();
        let two = generate(&plan).unwrap();
        assert_eq!(one, two);

        let other = generate(&SynthPlan { seed: 6, ..plan }).unwrap();
        assert_ne!(one, other);
    }

    #[test]
    fn roundtrips_through_the_artifact_format() {
        let store = generate(&small_plan()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_store(&store, dir.path()).unwrap();
        let loaded = load_store(dir.path()).unwrap();
        assert_eq!(loaded, store);
    }

    #[test]
    fn record_count_and_split_plan_follow_sample_size() {
        // 3 datasets × (2 + 1) configs × 9 splits at n_samples ≥ 2500.
        let plan = SynthPlan {
            n_samples: 2500,
            ..small_plan()
        };
        let store = generate(&plan).unwrap();
        assert_eq!(store.records().len(), 3 * 3 * 9);
        assert_eq!(store.splits("d000", "A").len(), 9);

        let small = generate(&small_plan()).unwrap();
        assert_eq!(small.splits("d000", "A").len(), 30);
        assert_eq!(small.records().len(), 3 * 3 * 30);
    }

    #[test]
    fn task_mix_uses_largest_remainder_with_ordered_blocks() {
        let plan = SynthPlan {
            n_datasets: 10,
            task_mix: (0.5, 0.3, 0.2),
            ..small_plan()
        };
        let kinds = plan.task_assignment();
        assert_eq!(kinds.iter().filter(|k| **k == TaskType::Binary).count(), 5);
        assert_eq!(
            kinds.iter().filter(|k| **k == TaskType::Multiclass).count(),
            3
        );
        assert_eq!(
            kinds.iter().filter(|k| **k == TaskType::Regression).count(),
            2
        );
        // Binary block first.
        assert!(kinds[..5].iter().all(|k| *k == TaskType::Binary));

        // Equal remainders break ties toward the earlier kind.
        let even = SynthPlan {
            n_datasets: 10,
            task_mix: (1.0, 1.0, 1.0),
            ..small_plan()
        };
        let kinds = even.task_assignment();
        assert_eq!(kinds.iter().filter(|k| **k == TaskType::Binary).count(), 4);
    }

    #[test]
    fn quality_gap_separates_methods_on_binary_benchmarks() {
        let plan = SynthPlan {
            seed: 42,
            n_datasets: 30,
            task_mix: (1.0, 0.0, 0.0),
            methods: vec![
                MethodPlan {
                    name: "strong".to_string(),
                    quality: 0.9,
                    n_configs: 1,
                },
                MethodPlan {
                    name: "weak".to_string(),
                    quality: 0.1,
                    n_configs: 1,
                },
            ],
            n_samples: 120,
            noise_scale: 1.0,
        };
        let store = generate(&plan).unwrap();
        let mut strong_wins = 0;
        for dataset in store.dataset_ids() {
            let task = store.task(&dataset).unwrap();
            let mean_err = |method: &str| {
                let errs: Vec<f64> = task
                    .expected_split_grid()
                    .into_iter()
                    .map(|(r, f)| {
                        let rec = store.record(&dataset, method, "default", r, f).unwrap();
                        split_error(task.task_type, task.n_classes, &rec.y_test, &rec.pred_test)
                            .unwrap()
                    })
                    .collect();
                dataset_error(&errs).unwrap()
            };
            if mean_err("strong") < mean_err("weak") {
                strong_wins += 1;
            }
        }
        assert!(
            strong_wins >= 28,
            "quality 0.9 beat 0.1 on only {strong_wins}/30 binary datasets"
        );
    }

    #[test]
    fn all_task_kinds_yield_scorable_records() {
        for mix in [(0.0, 1.0, 0.0), (0.0, 0.0, 1.0)] {
            let plan = SynthPlan {
                n_datasets: 1,
                task_mix: mix,
                ..small_plan()
            };
            let store = generate(&plan).unwrap();
            let task = store.task("d000").unwrap();
            let rec = store.record("d000", "A", "default", 0, 0).unwrap();
            let err =
                split_error(task.task_type, task.n_classes, &rec.y_test, &rec.pred_test).unwrap();
            assert!(err.is_finite());
        }
    }

    #[test]
    fn default_config_is_cleanest_of_its_method() {
        // Multipliers of non-default configs lie in [0.7, 1.3]; the
        // default's is pinned at 1.0, so the planted sigma ordering is
        // only statistical — but every config of a high-quality method
        // must beat every config of a much weaker one.
        let plan = SynthPlan {
            seed: 9,
            n_datasets: 8,
            task_mix: (0.0, 0.0, 1.0),
            methods: vec![
                MethodPlan {
                    name: "good".to_string(),
                    quality: 0.95,
                    n_configs: 3,
                },
                MethodPlan {
                    name: "bad".to_string(),
                    quality: 0.05,
                    n_configs: 3,
                },
            ],
            n_samples: 90,
            noise_scale: 1.0,
        };
        let store = generate(&plan).unwrap();
        let mean_err = |method: &str, config: &str| {
            let mut all = Vec::new();
            for dataset in store.dataset_ids() {
                let task = store.task(&dataset).unwrap();
                for (r, f) in task.expected_split_grid() {
                    let rec = store.record(&dataset, method, config, r, f).unwrap();
                    all.push(
                        split_error(task.task_type, task.n_classes, &rec.y_test, &rec.pred_test)
                            .unwrap(),
                    );
                }
            }
            dataset_error(&all).unwrap()
        };
        for good_config in ["default", "r1", "r2"] {
            for bad_config in ["default", "r1", "r2"] {
                assert!(mean_err("good", good_config) < mean_err("bad", bad_config));
            }
        }
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let base = small_plan();
        let bad_mix = SynthPlan {
            task_mix: (-0.1, 0.5, 0.5),
            ..base.clone()
        };
        assert!(generate(&bad_mix).is_err());
        let zero_mix = SynthPlan {
            task_mix: (0.0, 0.0, 0.0),
            ..base.clone()
        };
        assert!(generate(&zero_mix).is_err());
        let no_methods = SynthPlan {
            methods: vec![],
            ..base.clone()
        };
        assert!(generate(&no_methods).is_err());
        let bad_quality = SynthPlan {
            methods: vec![MethodPlan {
                name: "A".to_string(),
                quality: 1.5,
                n_configs: 1,
            }],
            ..base.clone()
        };
        assert!(generate(&bad_quality).is_err());
        let dup_names = SynthPlan {
            methods: vec![
                MethodPlan {
                    name: "A".to_string(),
                    quality: 0.5,
                    n_configs: 1,
                },
                MethodPlan {
                    name: "A".to_string(),
                    quality: 0.6,
                    n_configs: 1,
                },
            ],
            ..base.clone()
        };
        assert!(generate(&dup_names).is_err());
        let tiny = SynthPlan {
            n_samples: 5,
            ..base
        };
        assert!(generate(&tiny).is_err());
    }
}
