//! The assembled leaderboard: regime evaluation, optional imputation,
//! Elo with bootstrap confidence intervals, and the auxiliary columns,
//! one row per (method, regime).

use crate::aggregate::{
    average_ranks, champion_counts, harmonic_mean_ranks, improvability, normalized_scores,
};
use crate::ensemble::DEFAULT_GES_STEPS;
use crate::error::{Error, Result};
use crate::evals::{evaluate_store, impute_missing, EvalTable, Regime, RegimeKey};
use crate::metrics::dataset_error;
use crate::rating::{bootstrap_elo, BtOptions, DEFAULT_BOOTSTRAP_ROUNDS};
use crate::store::{MethodKey, ResultStore};

/// One leaderboard row; lower-is-better error statistics folded into
/// higher-is-better display columns.
#[derive(Clone, Debug, PartialEq)]
pub struct LeaderboardRow {
    pub key: RegimeKey,
    pub elo: f64,
    /// 95% bootstrap interval around `elo`.
    pub ci: (f64, f64),
    /// Mean error across datasets (the quantity everything else ranks).
    pub mean_error: f64,
    pub normalized_score: f64,
    pub avg_rank: f64,
    pub harmonic_mean_rank: f64,
    /// Dataset wins; ties share fractionally, so this is a float.
    pub n_wins: f64,
    pub improvability_pct: f64,
    /// How many of this row's dataset cells were imputed.
    pub imputed_count: usize,
}

#[derive(Clone, Debug)]
pub struct LeaderboardOptions {
    /// Reference row for calibration and imputation; config must be
    /// `default` (the leaderboard's reference regime).
    pub reference: MethodKey,
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Fill missing (method, dataset) cells from the reference row.
    pub impute: bool,
    pub ges_steps: usize,
}

impl Default for LeaderboardOptions {
    fn default() -> Self {
        LeaderboardOptions {
            reference: MethodKey {
                method: "RandomForest".to_string(),
                config_id: "default".to_string(),
            },
            n_bootstrap: DEFAULT_BOOTSTRAP_ROUNDS,
            seed: 0,
            impute: false,
            ges_steps: DEFAULT_GES_STEPS,
        }
    }
}

/// Rows sorted by Elo descending, plus the run parameters that produced
/// them.
#[derive(Clone, Debug, PartialEq)]
pub struct Leaderboard {
    pub rows: Vec<LeaderboardRow>,
    pub n_datasets: usize,
    pub reference: RegimeKey,
    pub n_bootstrap: usize,
    pub seed: u64,
}

impl Leaderboard {
    pub fn row(&self, key: &RegimeKey) -> Option<&LeaderboardRow> {
        self.rows.iter().find(|r| &r.key == key)
    }
}

/// Evaluate every (method, regime) on test data and aggregate into the
/// final leaderboard. With `impute` off, any coverage hole is an error;
/// with it on, holes are filled from the reference row first.
pub fn build_leaderboard(store: &ResultStore, opts: &LeaderboardOptions) -> Result<Leaderboard> {
    if opts.reference.config_id != "default" {
        return Err(Error::Config(format!(
            "reference must be a default config, got {}",
            opts.reference
        )));
    }
    let (test_table, _val_table) = evaluate_store(store, opts.ges_steps)?;
    let reference = RegimeKey::new(&opts.reference.method, Regime::Default);
    if test_table.row(&reference).is_none() {
        return Err(Error::Missing(format!(
            "reference {} has no evaluations in this store",
            opts.reference
        )));
    }
    let table: EvalTable<RegimeKey> = if opts.impute {
        impute_missing(&test_table, &reference)?
    } else {
        test_table
    };

    let (elo, ci) = bootstrap_elo(
        &table,
        &reference,
        opts.n_bootstrap,
        opts.seed,
        &BtOptions::default(),
    )?;
    let scores = normalized_scores(&table)?;
    let ranks = average_ranks(&table)?;
    let harmonic = harmonic_mean_ranks(&table)?;
    let improv = improvability(&table)?;
    let wins = champion_counts(&table)?;

    let mut rows = Vec::with_capacity(table.n_keys());
    for key in table.keys() {
        let errors: Vec<f64> = table
            .row(key)
            .expect("rated rows exist")
            .values()
            .map(|cell| cell.error)
            .collect();
        rows.push(LeaderboardRow {
            key: key.clone(),
            elo: elo.get(key).expect("rated"),
            ci: ci.intervals[key],
            mean_error: dataset_error(&errors)?,
            normalized_score: scores[key],
            avg_rank: ranks[key],
            harmonic_mean_rank: harmonic[key],
            n_wins: wins[key],
            improvability_pct: improv[key],
            imputed_count: table.imputed_count(key),
        });
    }
    rows.sort_by(|a, b| b.elo.total_cmp(&a.elo).then_with(|| a.key.cmp(&b.key)));

    Ok(Leaderboard {
        rows,
        n_datasets: table.datasets().len(),
        reference,
        n_bootstrap: opts.n_bootstrap,
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{Labels, PredictionRecord, Predictions, Provenance, TaskSpec, TaskType};

    fn reg_task(id: &str) -> TaskSpec {
        TaskSpec {
            dataset_id: id.to_string(),
            task_type: TaskType::Regression,
            n_classes: 0,
            n_samples: 3000,
        }
    }

    fn offset_record(
        dataset: &str,
        method: &str,
        config: &str,
        repeat: u32,
        fold: u32,
        offset: f64,
    ) -> PredictionRecord {
        let y = vec![0.0, 1.0, 2.0];
        PredictionRecord {
            dataset_id: dataset.to_string(),
            repeat_idx: repeat,
            fold_idx: fold,
            method: method.to_string(),
            config_id: config.to_string(),
            y_val: Labels::Value(y.clone()),
            pred_val: Predictions::Scalar(y.iter().map(|v| v + offset).collect()),
            y_test: Labels::Value(y.clone()),
            pred_test: Predictions::Scalar(y.iter().map(|v| v + offset).collect()),
        }
    }

    /// Two single-config methods over two datasets; "sharp" beats
    /// "blunt" everywhere except d2, where they swap.
    fn fixture(skip_blunt_d2: bool) -> ResultStore {
        let mut records = Vec::new();
        for d in ["d1", "d2"] {
            for (r, f) in reg_task("x").expected_split_grid() {
                let (sharp, blunt) = if d == "d1" { (0.1, 0.6) } else { (0.5, 0.2) };
                records.push(offset_record(d, "sharp", "default", r, f, sharp));
                if !(skip_blunt_d2 && d == "d2") {
                    records.push(offset_record(d, "blunt", "default", r, f, blunt));
                }
            }
        }
        ResultStore::new(
            vec![reg_task("d1"), reg_task("d2")],
            records,
            Provenance::default(),
        )
        .unwrap()
    }

    fn opts(reference: &str) -> LeaderboardOptions {
        LeaderboardOptions {
            reference: MethodKey {
                method: reference.to_string(),
                config_id: "default".to_string(),
            },
            n_bootstrap: 20,
            seed: 7,
            impute: false,
            ges_steps: 40,
        }
    }

    #[test]
    fn two_methods_three_regimes_each_sorted_by_elo() {
        let store = fixture(false);
        let board = build_leaderboard(&store, &opts("sharp")).unwrap();
        assert_eq!(board.rows.len(), 6);
        for pair in board.rows.windows(2) {
            assert!(pair[0].elo >= pair[1].elo);
        }
        for row in &board.rows {
            assert!(row.elo.is_finite());
            assert!(row.mean_error.is_finite() && row.mean_error >= 0.0);
            assert!((0.0..=1.0).contains(&row.normalized_score));
            assert!((0.0..=100.0).contains(&row.improvability_pct));
            assert!(row.ci.0 <= row.elo && row.elo <= row.ci.1);
            assert_eq!(row.imputed_count, 0);
        }
        // The mean errors are the fixture offsets averaged over datasets.
        let sharp_d = board
            .row(&RegimeKey::new("sharp", Regime::Default))
            .unwrap();
        assert!((sharp_d.mean_error - 0.3).abs() < 1e-12);
        // Single-config methods tie across their three regimes, so each
        // dataset's win splits into thirds; conservation holds to rounding.
        let total_wins: f64 = board.rows.iter().map(|r| r.n_wins).sum();
        assert!((total_wins - board.n_datasets as f64).abs() < 1e-12);
    }

    #[test]
    fn holes_error_without_imputation_and_fill_with_it() {
        let store = fixture(true);
        assert!(build_leaderboard(&store, &opts("sharp")).is_err());

        let board = build_leaderboard(
            &store,
            &LeaderboardOptions {
                impute: true,
                ..opts("sharp")
            },
        )
        .unwrap();
        assert_eq!(board.rows.len(), 6);
        for regime in Regime::ALL {
            let key = RegimeKey::new("blunt", regime);
            assert_eq!(board.row(&key).unwrap().imputed_count, 1);
        }
        // Imputed cells equal the reference's, so blunt cannot beat
        // sharp anywhere and ranks below it in every regime.
        let sharp = board
            .row(&RegimeKey::new("sharp", Regime::Default))
            .unwrap();
        let blunt = board
            .row(&RegimeKey::new("blunt", Regime::Default))
            .unwrap();
        assert!(sharp.elo > blunt.elo);
    }

    #[test]
    fn non_default_reference_config_is_rejected() {
        let store = fixture(false);
        let mut bad = opts("sharp");
        bad.reference.config_id = "r1".to_string();
        assert!(matches!(
            build_leaderboard(&store, &bad).unwrap_err(),
            Error::Config(_)
        ));
        assert!(build_leaderboard(&store, &opts("ghost")).is_err());
    }

    #[test]
    fn leaderboard_is_deterministic() {
        let store = fixture(false);
        let a = build_leaderboard(&store, &opts("sharp")).unwrap();
        let b = build_leaderboard(&store, &opts("sharp")).unwrap();
        assert_eq!(a, b);
    }
}
