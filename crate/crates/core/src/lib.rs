//! Evaluation engine for tabular-ML benchmark artifacts.
//!
//! The pipeline: [`store`] loads per-fold prediction records; [`metrics`]
//! turns predictions into errors (1−AUROC, log-loss, RMSE); [`ensemble`]
//! implements greedy ensemble selection; [`evals`] produces the three
//! evaluation regimes (default, tuned, tuned+ensembled) per method and
//! dataset; [`rating`] fits Bradley-Terry Elo with bootstrap confidence
//! intervals; [`aggregate`] adds normalized scores, ranks, win rates and
//! the Friedman/Nemenyi analysis; [`leaderboard`] assembles the final
//! table. [`simulate`] builds tuning trajectories, cross-model ensembles
//! and zeroshot portfolios on top, and [`synth`] generates seeded
//! synthetic stores with planted orderings for end-to-end testing.
//!
//! All randomness flows through the portable generator in [`rng`], so
//! every result is reproducible from (artifact bytes, seed, parameters).

pub mod aggregate;
pub mod ensemble;
pub mod error;
pub mod evals;
pub mod leaderboard;
pub mod metrics;
pub mod rating;
pub mod rng;
pub mod simulate;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use evals::{Regime, RegimeKey};
pub use leaderboard::{build_leaderboard, Leaderboard, LeaderboardOptions, LeaderboardRow};
pub use store::{load_store, write_store, MethodKey, ResultStore, TaskType};
