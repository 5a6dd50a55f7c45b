//! Auxiliary leaderboard metrics over a complete error table: normalized
//! score, ranks, harmonic-mean rank, improvability, champion counts,
//! pairwise win rates, and the Friedman + Nemenyi significance analysis.

use std::collections::BTreeMap;
use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::evals::EvalTable;

/// Two-tailed Nemenyi q constants at α = 0.05 for k = 2..=50 methods
/// (studentized range divided by √2, rounded to three decimals — the
/// table shipped with common critical-difference tooling).
const NEMENYI_Q_005: [f64; 49] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, // k = 2..10
    3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544, // k = 11..20
    3.569, 3.593, 3.616, 3.637, 3.658, 3.678, 3.696, 3.714, 3.732, 3.749, // k = 21..30
    3.765, 3.780, 3.795, 3.810, 3.824, 3.837, 3.850, 3.863, 3.876, 3.888, // k = 31..40
    3.899, 3.911, 3.922, 3.933, 3.943, 3.954, 3.964, 3.973, 3.983, 3.992, // k = 41..50
];

pub const NEMENYI_ALPHA: f64 = 0.05;

fn require_complete<K>(table: &EvalTable<K>) -> Result<()>
where
    K: Ord + Clone + fmt::Display,
{
    if let Some((key, dataset)) = table.missing().into_iter().next() {
        return Err(Error::Missing(format!(
            "no eval for ({key}, {dataset}); impute before aggregating"
        )));
    }
    if table.datasets().is_empty() || table.n_keys() == 0 {
        return Err(Error::Input("empty eval table".to_string()));
    }
    Ok(())
}

fn dataset_errors<'a, K>(table: &'a EvalTable<K>, dataset: &str) -> Vec<(&'a K, f64)>
where
    K: Ord + Clone + fmt::Display,
{
    table
        .keys()
        .map(|k| (k, table.error(k, dataset).expect("complete")))
        .collect()
}

/// Median with linear interpolation for even counts.
fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Per-dataset linear rescale of errors sending best → 1 and median → 0,
/// clipped to [0, 1], averaged across datasets. A degenerate dataset
/// (best = median) scores 1 for methods at the best error and 0 otherwise.
pub fn normalized_scores<K>(table: &EvalTable<K>) -> Result<BTreeMap<K, f64>>
where
    K: Ord + Clone + fmt::Display,
{
    require_complete(table)?;
    if table.n_keys() < 2 {
        return Err(Error::Input(
            "normalized_scores: need at least two methods".to_string(),
        ));
    }
    let mut totals: BTreeMap<K, f64> = table.keys().map(|k| (k.clone(), 0.0)).collect();
    for dataset in table.datasets() {
        let errors = dataset_errors(table, dataset);
        let mut sorted: Vec<f64> = errors.iter().map(|&(_, e)| e).collect();
        sorted.sort_by(f64::total_cmp);
        let best = sorted[0];
        let med = median(&sorted);
        for (key, err) in errors {
            let score = if best == med {
                if err == best {
                    1.0
                } else {
                    0.0
                }
            } else {
                ((med - err) / (med - best)).clamp(0.0, 1.0)
            };
            *totals.get_mut(key).expect("present") += score;
        }
    }
    let n = table.datasets().len() as f64;
    Ok(totals.into_iter().map(|(k, v)| (k, v / n)).collect())
}

/// 1-based ranks on one dataset, ties sharing the average of their
/// covered positions.
pub fn dataset_ranks<K>(table: &EvalTable<K>, dataset: &str) -> Result<BTreeMap<K, f64>>
where
    K: Ord + Clone + fmt::Display,
{
    let mut errors = dataset_errors(table, dataset);
    if errors.iter().any(|&(_, e)| e.is_nan()) || errors.is_empty() {
        return Err(Error::Input(format!("bad errors on dataset {dataset}")));
    }
    errors.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut ranks = BTreeMap::new();
    let mut i = 0;
    while i < errors.len() {
        let mut j = i;
        while j < errors.len() && errors[j].1 == errors[i].1 {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &(key, _) in &errors[i..j] {
            ranks.insert(key.clone(), avg);
        }
        i = j;
    }
    Ok(ranks)
}

/// Mean rank per method across datasets.
pub fn average_ranks<K>(table: &EvalTable<K>) -> Result<BTreeMap<K, f64>>
where
    K: Ord + Clone + fmt::Display,
{
    require_complete(table)?;
    let mut totals: BTreeMap<K, f64> = table.keys().map(|k| (k.clone(), 0.0)).collect();
    for dataset in table.datasets() {
        for (key, rank) in dataset_ranks(table, dataset)? {
            *totals.get_mut(&key).expect("present") += rank;
        }
    }
    let n = table.datasets().len() as f64;
    Ok(totals.into_iter().map(|(k, v)| (k, v / n)).collect())
}

/// Harmonic mean N/Σ(1/rank) of per-dataset ranks, per method. Rewards
/// being first somewhere more than the arithmetic mean does.
pub fn harmonic_mean_ranks<K>(table: &EvalTable<K>) -> Result<BTreeMap<K, f64>>
where
    K: Ord + Clone + fmt::Display,
{
    require_complete(table)?;
    let mut inverse_sums: BTreeMap<K, f64> = table.keys().map(|k| (k.clone(), 0.0)).collect();
    for dataset in table.datasets() {
        for (key, rank) in dataset_ranks(table, dataset)? {
            *inverse_sums.get_mut(&key).expect("present") += 1.0 / rank;
        }
    }
    let n = table.datasets().len() as f64;
    Ok(inverse_sums.into_iter().map(|(k, s)| (k, n / s)).collect())
}

/// Mean over datasets of (err − best)/err·100; a zero error contributes 0
/// (the per-dataset best is then necessarily 0 as well).
pub fn improvability<K>(table: &EvalTable<K>) -> Result<BTreeMap<K, f64>>
where
    K: Ord + Clone + fmt::Display,
{
    require_complete(table)?;
    let mut totals: BTreeMap<K, f64> = table.keys().map(|k| (k.clone(), 0.0)).collect();
    for dataset in table.datasets() {
        let errors = dataset_errors(table, dataset);
        let best = errors.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
        for (key, err) in errors {
            let pct = if err == 0.0 {
                0.0
            } else {
                (err - best) / err * 100.0
            };
            *totals.get_mut(key).expect("present") += pct;
        }
    }
    let n = table.datasets().len() as f64;
    Ok(totals.into_iter().map(|(k, v)| (k, v / n)).collect())
}

/// Per dataset, one win split equally among all methods tied at the
/// minimum error; summed over datasets.
pub fn champion_counts<K>(table: &EvalTable<K>) -> Result<BTreeMap<K, f64>>
where
    K: Ord + Clone + fmt::Display,
{
    require_complete(table)?;
    let mut totals: BTreeMap<K, f64> = table.keys().map(|k| (k.clone(), 0.0)).collect();
    for dataset in table.datasets() {
        let errors = dataset_errors(table, dataset);
        let best = errors.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
        let winners: Vec<&K> = errors
            .iter()
            .filter(|&&(_, e)| e == best)
            .map(|&(k, _)| k)
            .collect();
        let share = 1.0 / winners.len() as f64;
        for key in winners {
            *totals.get_mut(key).expect("present") += share;
        }
    }
    Ok(totals)
}

/// Pairwise win rates: W[a][b] = mean over datasets of the outcome score
/// of a against b; diagonal 0.5. Rows/columns follow `keys`.
#[derive(Clone, Debug, PartialEq)]
pub struct WinrateMatrix<K> {
    pub keys: Vec<K>,
    pub values: Vec<Vec<f64>>,
}

pub fn winrate_matrix<K>(table: &EvalTable<K>) -> Result<WinrateMatrix<K>>
where
    K: Ord + Clone + fmt::Display,
{
    require_complete(table)?;
    let keys: Vec<K> = table.keys().cloned().collect();
    let k = keys.len();
    let n = table.datasets().len() as f64;
    let mut values = vec![vec![0.5; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let mut score = 0.0;
            for dataset in table.datasets() {
                let a = table.error(&keys[i], dataset).expect("complete");
                let b = table.error(&keys[j], dataset).expect("complete");
                score += if a < b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
            let rate = score / n;
            values[i][j] = rate;
            // Complement fill keeps W + Wᵀ = ones exact in floats.
            values[j][i] = 1.0 - rate;
        }
    }
    Ok(WinrateMatrix { keys, values })
}

/// Friedman test plus Nemenyi post-hoc grouping.
#[derive(Clone, Debug, PartialEq)]
pub struct CddReport<K> {
    pub n_methods: usize,
    pub n_datasets: usize,
    pub chi2: f64,
    pub p_value: f64,
    pub critical_distance: f64,
    /// (key, average rank), ascending by rank.
    pub avg_ranks: Vec<(K, f64)>,
    /// Transitive closure of "average-rank difference < CD"; each group
    /// ascending by rank, groups ordered by their best rank.
    pub groups: Vec<Vec<K>>,
}

pub fn friedman_nemenyi<K>(table: &EvalTable<K>, alpha: f64) -> Result<CddReport<K>>
where
    K: Ord + Clone + fmt::Display,
{
    require_complete(table)?;
    let k = table.n_keys();
    let n = table.datasets().len();
    if k < 3 {
        return Err(Error::Unsupported(format!(
            "friedman_nemenyi needs at least 3 methods, got {k}"
        )));
    }
    if k > NEMENYI_Q_005.len() + 1 {
        return Err(Error::Unsupported(format!(
            "no Nemenyi constant for k = {k} (table covers k ≤ 50)"
        )));
    }
    if n < 2 {
        return Err(Error::Input(format!(
            "friedman_nemenyi needs at least 2 datasets, got {n}"
        )));
    }
    if alpha != NEMENYI_ALPHA {
        return Err(Error::Unsupported(format!(
            "only α = 0.05 is supported (got {alpha}); that is the embedded q table"
        )));
    }

    let ranks = average_ranks(table)?;
    let kf = k as f64;
    let nf = n as f64;
    let rank_sq_sum: f64 = ranks.values().map(|r| r * r).sum();
    let chi2 = 12.0 * nf / (kf * (kf + 1.0)) * (rank_sq_sum - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    // Rank rounding can leave a tiny negative residue when all ranks tie.
    let chi2 = chi2.max(0.0);
    let dist = ChiSquared::new(kf - 1.0)
        .map_err(|e| Error::Config(format!("chi-squared distribution: {e}")))?;
    let p_value = 1.0 - dist.cdf(chi2);

    let q = NEMENYI_Q_005[k - 2];
    let critical_distance = q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();

    let mut avg_ranks: Vec<(K, f64)> = ranks.into_iter().collect();
    avg_ranks.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    // Union-find over "not significantly different" pairs.
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if (avg_ranks[i].1 - avg_ranks[j].1).abs() < critical_distance {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..k {
        let root = find(&mut parent, i);
        by_root.entry(root).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
    // avg_ranks is rank-ascending, so ordering groups by their first
    // member orders them by best rank.
    groups.sort_by_key(|g| g[0]);
    let groups = groups
        .into_iter()
        .map(|g| g.into_iter().map(|i| avg_ranks[i].0.clone()).collect())
        .collect();

    Ok(CddReport {
        n_methods: k,
        n_datasets: n,
        chi2,
        p_value,
        critical_distance,
        avg_ranks,
        groups,
    })
}
