//! Relative depth estimation cast as learning to rank.
//!
//! Items (pixels) of a sample (image) are ranked by predicted closeness.
//! The crate provides the pairwise, ListNet, ListMLE and weighted ListMLE
//! losses with analytic gradients, ordinal metrics (WHDR, AP/MAP, NDCG),
//! synthetic ordinal-depth data, and linear / MLP scorers trained with
//! momentum SGD.

pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod numeric;
pub mod ranking;
pub mod report;
pub mod trainer;

pub use error::{Error, Result};
pub use losses::{LossKind, LossResult, WeightConfig};
pub use metrics::{EvalConfig, MetricReport};
pub use ranking::{OrdinalLabel, OrdinalPair, Permutation, RankedSample, ScoreVector};
pub use trainer::{ScorerFamily, ScorerParams, TrainConfig, TrainTrace};
