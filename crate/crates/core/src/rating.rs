//! Bradley-Terry Elo ratings over per-dataset errors: pairwise outcomes,
//! maximum-likelihood fit, reference calibration, and dataset-bootstrap
//! confidence intervals.
//!
//! The model: expected score of A against B is σ((R_A − R_B)·ln10/400),
//! so a 400-point gap means 10:1 (~91%) expected win rate. Ties count as
//! half a win for each side. The fit is Hunter's minorize-maximize
//! iteration on the strength scale π = 10^(R/400).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::evals::EvalTable;
use crate::rng::{derive_seed, Rng};

pub const DEFAULT_BOOTSTRAP_ROUNDS: usize = 200;

/// One pairwise comparison on one dataset. `score_a` is 1 if `a` had the
/// strictly lower error, 0.5 on an exact tie, 0 otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseOutcome<K> {
    pub a: K,
    pub b: K,
    pub dataset_id: String,
    pub score_a: f64,
}

/// Every unordered pair of row keys compared on every dataset.
/// Requires full coverage; impute first if the table has holes.
pub fn pairwise_outcomes<K>(table: &EvalTable<K>) -> Result<Vec<PairwiseOutcome<K>>>
where
    K: Ord + Clone + fmt::Display,
{
    if let Some((key, dataset)) = table.missing().into_iter().next() {
        return Err(Error::Missing(format!(
            "no eval for ({key}, {dataset}); impute before rating"
        )));
    }
    let keys: Vec<&K> = table.keys().collect();
    let mut outcomes = Vec::new();
    for dataset in table.datasets() {
        for (i, &a) in keys.iter().enumerate() {
            for &b in &keys[i + 1..] {
                let err_a = table.error(a, dataset).expect("complete");
                let err_b = table.error(b, dataset).expect("complete");
                let score_a = if err_a < err_b {
                    1.0
                } else if err_a == err_b {
                    0.5
                } else {
                    0.0
                };
                outcomes.push(PairwiseOutcome {
                    a: a.clone(),
                    b: b.clone(),
                    dataset_id: dataset.clone(),
                    score_a,
                });
            }
        }
    }
    Ok(outcomes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    MeanZero,
    Reference1000,
}

/// Fitted ratings plus how they are anchored.
#[derive(Clone, Debug, PartialEq)]
pub struct EloRating<K: Ord> {
    pub ratings: BTreeMap<K, f64>,
    pub anchor: Anchor,
    pub reference: Option<K>,
    /// Δ added on top of the mean-zero fit (0 for mean-zero).
    pub shift: f64,
}

impl<K: Ord> EloRating<K> {
    pub fn get(&self, key: &K) -> Option<f64> {
        self.ratings.get(key).copied()
    }
}

/// Per-key 95% confidence intervals from dataset bootstrap.
#[derive(Clone, Debug, PartialEq)]
pub struct EloCI<K: Ord> {
    pub intervals: BTreeMap<K, (f64, f64)>,
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Resamples redrawn because their comparison graph was disconnected.
    pub redraws: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BtOptions {
    /// Convergence threshold on the max absolute Elo change per iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Add one virtual tie per method pair so that methods winning or
    /// losing everything still get a finite rating.
    pub regularize: bool,
}

impl Default for BtOptions {
    fn default() -> Self {
        BtOptions {
            tol: 1e-10,
            max_iter: 10_000,
            regularize: true,
        }
    }
}

/// Expected score of the higher-rated side at the given Elo gap:
/// 1/(1 + 10^(−gap/400)).
pub fn expected_winrate(gap: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-gap / 400.0))
}

/// Fractional win totals and pair comparison counts for one dataset slice
/// of the outcome list, in method-index space.
struct CountMatrix {
    /// s[i] = fractional wins of method i.
    wins: Vec<f64>,
    /// n[i][j] = comparisons between i and j (symmetric, zero diagonal).
    pairs: Vec<Vec<f64>>,
}

impl CountMatrix {
    fn zero(k: usize) -> Self {
        CountMatrix {
            wins: vec![0.0; k],
            pairs: vec![vec![0.0; k]; k],
        }
    }

    fn add(&mut self, other: &CountMatrix) {
        for i in 0..self.wins.len() {
            self.wins[i] += other.wins[i];
            for j in 0..self.wins.len() {
                self.pairs[i][j] += other.pairs[i][j];
            }
        }
    }

    fn record(&mut self, i: usize, j: usize, score_i: f64) {
        self.wins[i] += score_i;
        self.wins[j] += 1.0 - score_i;
        self.pairs[i][j] += 1.0;
        self.pairs[j][i] += 1.0;
    }
}

/// Connected components of the comparison graph (edges where pairs > 0).
fn components(pairs: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let k = pairs.len();
    let mut component = vec![usize::MAX; k];
    let mut n_components = 0;
    for start in 0..k {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = n_components;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if pairs[i][j] > 0.0 && component[j] == usize::MAX {
                    component[j] = n_components;
                    stack.push(j);
                }
            }
        }
        n_components += 1;
    }
    let mut out = vec![Vec::new(); n_components];
    for (i, &c) in component.iter().enumerate() {
        out[c].push(i);
    }
    out
}

/// Hunter MM iteration on aggregated counts. Returns mean-centered Elo
/// ratings aligned with the method indices.
fn fit_from_counts(
    counts: &CountMatrix,
    opts: &BtOptions,
    method_names: &[String],
) -> Result<Vec<f64>> {
    let k = counts.wins.len();
    let comps = components(&counts.pairs);
    if comps.len() > 1 {
        let described: Vec<String> = comps
            .iter()
            .map(|c| {
                let names: Vec<&str> = c.iter().map(|&i| method_names[i].as_str()).collect();
                format!("[{}]", names.join(", "))
            })
            .collect();
        return Err(Error::DisconnectedGraph(described.join(" | ")));
    }

    let mut counts_reg;
    let counts = if opts.regularize {
        counts_reg = CountMatrix::zero(k);
        counts_reg.add(counts);
        for i in 0..k {
            for j in (i + 1)..k {
                counts_reg.record(i, j, 0.5);
            }
        }
        &counts_reg
    } else {
        // Without the regularizer the MLE diverges when a method never
        // loses (or never wins) any fraction of a comparison.
        for i in 0..k {
            let total: f64 = counts.pairs[i].iter().sum();
            if counts.wins[i] == 0.0 || counts.wins[i] == total {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
        }
        counts
    };

    let mut pi = vec![1.0f64; k];
    let mut log_pi = vec![0.0f64; k];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let mut next = vec![0.0f64; k];
        for i in 0..k {
            let mut denom = 0.0;
            for j in 0..k {
                if counts.pairs[i][j] > 0.0 {
                    denom += counts.pairs[i][j] / (pi[i] + pi[j]);
                }
            }
            next[i] = counts.wins[i] / denom;
        }
        // Normalize by the geometric mean: ratings are shift-invariant and
        // this keeps the strengths bounded.
        let mean_log = next.iter().map(|p| p.ln()).sum::<f64>() / k as f64;
        let scale = mean_log.exp();
        for p in &mut next {
            *p /= scale;
        }
        residual = 0.0;
        for i in 0..k {
            let new_log = next[i].log10();
            residual = residual.max((400.0 * (new_log - log_pi[i])).abs());
            log_pi[i] = new_log;
        }
        pi = next;
        if residual < opts.tol {
            let mut ratings: Vec<f64> = log_pi.iter().map(|l| 400.0 * l).collect();
            let mean = ratings.iter().sum::<f64>() / k as f64;
            for r in &mut ratings {
                *r -= mean;
            }
            return Ok(ratings);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn index_methods<K>(outcomes: &[PairwiseOutcome<K>]) -> Result<(Vec<K>, BTreeMap<K, usize>)>
where
    K: Ord + Clone + fmt::Display,
{
    let mut keys: Vec<K> = outcomes
        .iter()
        .flat_map(|o| [o.a.clone(), o.b.clone()])
        .collect();
    keys.sort();
    keys.dedup();
    if keys.len() < 2 {
        return Err(Error::Input(
            "fit_bradley_terry: need at least two methods with outcomes".to_string(),
        ));
    }
    let index: BTreeMap<K, usize> = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), i))
        .collect();
    Ok((keys, index))
}

/// Maximum-likelihood Bradley-Terry fit over the outcomes, mean-zero
/// anchored.
pub fn fit_bradley_terry<K>(
    outcomes: &[PairwiseOutcome<K>],
    opts: &BtOptions,
) -> Result<EloRating<K>>
where
    K: Ord + Clone + fmt::Display,
{
    let (keys, index) = index_methods(outcomes)?;
    let mut counts = CountMatrix::zero(keys.len());
    for o in outcomes {
        if !(o.score_a == 0.0 || o.score_a == 0.5 || o.score_a == 1.0) {
            return Err(Error::Input(format!(
                "fit_bradley_terry: score {} is not in {{0, 0.5, 1}}",
                o.score_a
            )));
        }
        counts.record(index[&o.a], index[&o.b], o.score_a);
    }
    let names: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let ratings = fit_from_counts(&counts, opts, &names)?;
    Ok(EloRating {
        ratings: keys.into_iter().zip(ratings).collect(),
        anchor: Anchor::MeanZero,
        reference: None,
        shift: 0.0,
    })
}

/// Shift all ratings so that `reference` sits at exactly 1000 Elo.
/// Pairwise gaps are unchanged.
pub fn calibrate<K>(rating: &EloRating<K>, reference: &K) -> Result<EloRating<K>>
where
    K: Ord + Clone + fmt::Display,
{
    let at = rating
        .get(reference)
        .ok_or_else(|| Error::Missing(format!("calibration reference {reference} is unrated")))?;
    let delta = 1000.0 - at;
    Ok(EloRating {
        ratings: rating
            .ratings
            .iter()
            .map(|(k, r)| (k.clone(), r + delta))
            .collect(),
        anchor: Anchor::Reference1000,
        reference: Some(reference.clone()),
        shift: rating.shift + delta,
    })
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Point ratings calibrated to `reference` = 1000, plus per-key 95%
/// bootstrap confidence intervals.
///
/// Each bootstrap round resamples the dataset list with replacement
/// (derived seeds, so rounds are order-independent), refits mean-zero
/// ratings, and the 2.5%/97.5% per-key quantiles are then shifted by the
/// full-benchmark Δ — the same shift applied to the point estimate.
/// Rounds whose comparison graph is disconnected are redrawn; more than
/// 50% redraws is an error.
pub fn bootstrap_elo<K>(
    table: &EvalTable<K>,
    reference: &K,
    n_bootstrap: usize,
    seed: u64,
    opts: &BtOptions,
) -> Result<(EloRating<K>, EloCI<K>)>
where
    K: Ord + Clone + fmt::Display,
{
    let outcomes = pairwise_outcomes(table)?;
    let (keys, index) = index_methods(&outcomes)?;
    let names: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let k = keys.len();

    // Aggregate counts per dataset once; a resample is then just a sum of
    // per-dataset matrices.
    let datasets = table.datasets();
    let dataset_index: BTreeMap<&str, usize> = datasets
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_str(), i))
        .collect();
    let mut per_dataset: Vec<CountMatrix> =
        (0..datasets.len()).map(|_| CountMatrix::zero(k)).collect();
    let mut full = CountMatrix::zero(k);
    for o in &outcomes {
        let d = dataset_index[o.dataset_id.as_str()];
        per_dataset[d].record(index[&o.a], index[&o.b], o.score_a);
        full.record(index[&o.a], index[&o.b], o.score_a);
    }

    let mean_zero = fit_from_counts(&full, opts, &names)?;
    let point = EloRating {
        ratings: keys
            .iter()
            .cloned()
            .zip(mean_zero.iter().copied())
            .collect(),
        anchor: Anchor::MeanZero,
        reference: None,
        shift: 0.0,
    };
    let calibrated = calibrate(&point, reference)?;
    let delta = calibrated.shift;

    if n_bootstrap == 0 {
        let intervals = calibrated
            .ratings
            .iter()
            .map(|(key, &r)| (key.clone(), (r, r)))
            .collect();
        return Ok((
            calibrated,
            EloCI {
                intervals,
                n_bootstrap,
                seed,
                redraws: 0,
            },
        ));
    }

    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(n_bootstrap); k];
    let mut redraws = 0usize;
    for round in 0..n_bootstrap {
        let fitted = loop {
            let mut rng = Rng::seed_from_u64(derive_seed(
                seed,
                &[0x626f_6f74, round as u64, redraws as u64],
            ));
            let mut resample = CountMatrix::zero(k);
            for _ in 0..datasets.len() {
                let d = rng.gen_range(datasets.len() as u64) as usize;
                resample.add(&per_dataset[d]);
            }
            match fit_from_counts(&resample, opts, &names) {
                Ok(ratings) => break ratings,
                Err(Error::DisconnectedGraph(_)) => {
                    redraws += 1;
                    if redraws * 2 > n_bootstrap {
                        return Err(Error::Input(format!(
                            "bootstrap_elo: {redraws} of {n_bootstrap} resamples had disconnected graphs"
                        )));
                    }
                }
                Err(e) => return Err(e),
            }
        };
        for (i, r) in fitted.into_iter().enumerate() {
            samples[i].push(r);
        }
    }

    let mut intervals = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        samples[i].sort_by(f64::total_cmp);
        let lower = quantile(&samples[i], 0.025) + delta;
        let upper = quantile(&samples[i], 0.975) + delta;
        intervals.insert(key.clone(), (lower, upper));
    }
    Ok((
        calibrated,
        EloCI {
            intervals,
            n_bootstrap,
            seed,
            redraws,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_method_table(a_wins: usize, b_wins: usize) -> EvalTable<String> {
        let n = a_wins + b_wins;
        let datasets: Vec<String> = (0..n).map(|i| format!("d{i:02}")).collect();
        let mut table = EvalTable::new(datasets.clone());
        for (i, d) in datasets.iter().enumerate() {
            let (ea, eb) = if i < a_wins { (0.1, 0.2) } else { (0.2, 0.1) };
            table.insert("A".to_string(), d, ea).unwrap();
            table.insert("B".to_string(), d, eb).unwrap();
        }
        table
    }

    fn no_reg() -> BtOptions {
        BtOptions {
            regularize: false,
            ..BtOptions::default()
        }
    }

    /// Plain Bradley-Terry log-likelihood at the given ratings.
    fn log_likelihood(
        outcomes: &[PairwiseOutcome<String>],
        ratings: &BTreeMap<String, f64>,
    ) -> f64 {
        let c = std::f64::consts::LN_10 / 400.0;
        outcomes
            .iter()
            .map(|o| {
                let gap = ratings[&o.a] - ratings[&o.b];
                let p = 1.0 / (1.0 + (-c * gap).exp());
                o.score_a * p.ln() + (1.0 - o.score_a) * (1.0 - p).ln()
            })
            .sum()
    }

    #[test]
    fn pairwise_outcome_counts_and_ties() {
        let table = two_method_table(2, 1);
        let outcomes = pairwise_outcomes(&table).unwrap();
        assert_eq!(outcomes.len(), 3);
        assert_eq!(outcomes.iter().map(|o| o.score_a).sum::<f64>(), 2.0);

        let mut tie_table = EvalTable::new(vec!["d".to_string()]);
        tie_table.insert("A".to_string(), "d", 0.5).unwrap();
        tie_table.insert("B".to_string(), "d", 0.5).unwrap();
        let outcomes = pairwise_outcomes(&tie_table).unwrap();
        assert_eq!(outcomes[0].score_a, 0.5);

        // 4 methods x 5 datasets -> C(4,2) * 5 = 30 outcomes.
        let datasets: Vec<String> = (0..5).map(|i| format!("d{i}")).collect();
        let mut table = EvalTable::new(datasets.clone());
        for (mi, m) in ["A", "B", "C", "D"].iter().enumerate() {
            for d in &datasets {
                table.insert(m.to_string(), d, mi as f64 * 0.1).unwrap();
            }
        }
        assert_eq!(pairwise_outcomes(&table).unwrap().len(), 30);
    }

    #[test]
    fn pairwise_outcomes_reject_holes() {
        let mut table: EvalTable<String> = EvalTable::new(vec!["d1".to_string(), "d2".to_string()]);
        table.insert("A".to_string(), "d1", 0.1).unwrap();
        table.insert("A".to_string(), "d2", 0.1).unwrap();
        table.insert("B".to_string(), "d1", 0.2).unwrap();
        let err = pairwise_outcomes(&table).unwrap_err();
        assert!(err.to_string().contains("(B, d2)"), "{err}");
    }

    #[test]
    fn two_player_gap_matches_log_odds_closed_form() {
        // 10 wins to 1: MLE gap is 400*log10(10) = 400 exactly.
        let table = two_method_table(10, 1);
        let outcomes = pairwise_outcomes(&table).unwrap();
        let rating = fit_bradley_terry(&outcomes, &no_reg()).unwrap();
        let gap = rating.ratings["A"] - rating.ratings["B"];
        assert!((gap - 400.0).abs() < 1e-6, "gap {gap}");

        // General closed form at other win fractions.
        for (w, l) in [(3usize, 2usize), (7, 5), (9, 4)] {
            let t = two_method_table(w, l);
            let o = pairwise_outcomes(&t).unwrap();
            let r = fit_bradley_terry(&o, &no_reg()).unwrap();
            let gap = r.ratings["A"] - r.ratings["B"];
            let expected = 400.0 * (w as f64 / l as f64).log10();
            assert!((gap - expected).abs() < 1e-6, "gap {gap} vs {expected}");
        }
    }

    #[test]
    fn mean_zero_anchor_holds() {
        let table = two_method_table(10, 1);
        let rating =
            fit_bradley_terry(&pairwise_outcomes(&table).unwrap(), &BtOptions::default()).unwrap();
        let mean: f64 = rating.ratings.values().sum::<f64>() / rating.ratings.len() as f64;
        assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn perfect_separation_diverges_without_regularizer() {
        let table = two_method_table(10, 0);
        let outcomes = pairwise_outcomes(&table).unwrap();
        let err = fit_bradley_terry(&outcomes, &no_reg()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));

        // With one virtual tie per pair the gap is finite and > 400.
        let rating = fit_bradley_terry(&outcomes, &BtOptions::default()).unwrap();
        let gap = rating.ratings["A"] - rating.ratings["B"];
        assert!(gap.is_finite() && gap > 400.0, "gap {gap}");
    }

    #[test]
    fn gradient_vanishes_at_the_fit() {
        let mut rng = Rng::seed_from_u64(99);
        for trial in 0..10 {
            let datasets: Vec<String> = (0..8).map(|i| format!("d{i}")).collect();
            let mut table = EvalTable::new(datasets.clone());
            for m in 0..5 {
                for d in &datasets {
                    table
                        .insert(
                            format!("m{m}"),
                            d,
                            (rng.gen_range(1000) + 1) as f64 / 1000.0,
                        )
                        .unwrap();
                }
            }
            let outcomes = pairwise_outcomes(&table).unwrap();
            let rating = match fit_bradley_terry(&outcomes, &no_reg()) {
                Ok(r) => r,
                // Random tables can produce perfect separation; skip those.
                Err(Error::NonConvergence { .. }) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            let h = 1e-4;
            for key in rating.ratings.keys() {
                let mut plus = rating.ratings.clone();
                let mut minus = rating.ratings.clone();
                *plus.get_mut(key).unwrap() += h;
                *minus.get_mut(key).unwrap() -= h;
                let grad = (log_likelihood(&outcomes, &plus) - log_likelihood(&outcomes, &minus))
                    / (2.0 * h);
                assert!(grad.abs() < 1e-6, "trial {trial}, {key}: gradient {grad}");
            }
        }
    }

    #[test]
    fn ratings_depend_only_on_error_ordering() {
        let mut rng = Rng::seed_from_u64(17);
        let datasets: Vec<String> = (0..6).map(|i| format!("d{i}")).collect();
        let mut table = EvalTable::new(datasets.clone());
        let mut transformed = EvalTable::new(datasets.clone());
        for m in 0..4 {
            for (di, d) in datasets.iter().enumerate() {
                let e = (rng.gen_range(100) + 1) as f64 / 100.0;
                table.insert(format!("m{m}"), d, e).unwrap();
                // Strictly increasing per-dataset transform.
                let t = if di % 2 == 0 { e * e + 1.0 } else { e.exp() };
                transformed.insert(format!("m{m}"), d, t).unwrap();
            }
        }
        let r1 =
            fit_bradley_terry(&pairwise_outcomes(&table).unwrap(), &BtOptions::default()).unwrap();
        let r2 = fit_bradley_terry(
            &pairwise_outcomes(&transformed).unwrap(),
            &BtOptions::default(),
        )
        .unwrap();
        assert_eq!(r1.ratings, r2.ratings);
    }

    #[test]
    fn disconnected_graph_lists_components() {
        let outcomes = vec![
            PairwiseOutcome {
                a: "A".to_string(),
                b: "B".to_string(),
                dataset_id: "d1".to_string(),
                score_a: 1.0,
            },
            PairwiseOutcome {
                a: "C".to_string(),
                b: "D".to_string(),
                dataset_id: "d1".to_string(),
                score_a: 0.0,
            },
        ];
        let err = fit_bradley_terry(&outcomes, &no_reg()).unwrap_err();
        match err {
            Error::DisconnectedGraph(msg) => {
                assert!(msg.contains("[A, B]") && msg.contains("[C, D]"), "{msg}");
            }
            other => panic!("expected disconnected-graph error, got {other}"),
        }
    }

    #[test]
    fn calibrate_sets_reference_to_1000_and_preserves_gaps() {
        let table = two_method_table(7, 4);
        let rating =
            fit_bradley_terry(&pairwise_outcomes(&table).unwrap(), &BtOptions::default()).unwrap();
        let reference = "B".to_string();
        let calibrated = calibrate(&rating, &reference).unwrap();
        assert!((calibrated.ratings["B"] - 1000.0).abs() < 1e-9);
        let gap_before = rating.ratings["A"] - rating.ratings["B"];
        let gap_after = calibrated.ratings["A"] - calibrated.ratings["B"];
        assert!((gap_before - gap_after).abs() < 1e-12);
        assert_eq!(calibrated.anchor, Anchor::Reference1000);
        assert!(calibrate(&rating, &"nope".to_string()).is_err());
    }

    #[test]
    fn expected_winrate_closed_form_values() {
        assert_eq!(expected_winrate(0.0), 0.5);
        assert!((expected_winrate(400.0) - 10.0 / 11.0).abs() < 1e-12);
        assert!((expected_winrate(-400.0) - 1.0 / 11.0).abs() < 1e-12);
        for i in 0..=1000 {
            let gap = -800.0 + 1.6 * i as f64;
            let sum = expected_winrate(gap) + expected_winrate(-gap);
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_is_deterministic_and_brackets_the_point() {
        let mut rng = Rng::seed_from_u64(5);
        let datasets: Vec<String> = (0..12).map(|i| format!("d{i:02}")).collect();
        let mut table = EvalTable::new(datasets.clone());
        for (mi, m) in ["A", "B", "C"].iter().enumerate() {
            for d in &datasets {
                let e = 0.1 * (mi as f64 + 1.0) + rng.next_f64() * 0.15;
                table.insert(m.to_string(), d, e).unwrap();
            }
        }
        let reference = "B".to_string();
        let opts = BtOptions::default();
        let (point1, ci1) = bootstrap_elo(&table, &reference, 50, 777, &opts).unwrap();
        let (point2, ci2) = bootstrap_elo(&table, &reference, 50, 777, &opts).unwrap();
        assert_eq!(point1, point2);
        assert_eq!(ci1, ci2);
        assert!((point1.ratings[&reference] - 1000.0).abs() < 1e-9);
        for (key, &(lo, hi)) in &ci1.intervals {
            let r = point1.ratings[key];
            assert!(lo <= r && r <= hi, "{key}: {lo} !<= {r} !<= {hi}");
            assert!(hi > lo, "{key}: interval has zero width");
        }
        // The reference's own interval is nonzero-width too (mean-zero
        // bootstrap, then shift).
        let (lo, hi) = ci1.intervals[&reference];
        assert!(hi - lo > 0.0);

        let (_, ci_different_seed) = bootstrap_elo(&table, &reference, 50, 778, &opts).unwrap();
        assert_ne!(ci1.intervals, ci_different_seed.intervals);
    }

    #[test]
    fn zero_bootstrap_degenerates_to_point() {
        let table = two_method_table(7, 4);
        let reference = "A".to_string();
        let (point, ci) = bootstrap_elo(&table, &reference, 0, 1, &BtOptions::default()).unwrap();
        for (key, &(lo, hi)) in &ci.intervals {
            assert_eq!(lo, point.ratings[key]);
            assert_eq!(hi, point.ratings[key]);
        }
    }

    #[test]
    fn quantile_interpolates_linearly() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert!((quantile(&xs, 0.025) - 1.075).abs() < 1e-12);
        assert!((quantile(&xs, 0.975) - 3.925).abs() < 1e-12);
    }
}
