//! Offline evaluation of recommender algorithms on adoption logs.
//!
//! The crate models a log of (user, item, day) adoption events and scores
//! recommenders with leave-one-out sampling from day snapshots. Because
//! deployed recommenders feed back into the log, the item marginal drifts
//! between epochs and scores taken on different days are not comparable.
//! The [`reweight`] module corrects for this: it fits per-item sampling
//! weights that pull a later day's item marginal back toward a reference
//! day by minimizing the KL divergence between the two, and the evaluator
//! accepts those weights when scoring.
//!
//! The [`simulate`] module generates synthetic logs with organic adoption
//! plus scheduled recommendation campaigns, which is how the pipeline is
//! exercised end to end under a known feedback loop.

pub mod dist;
pub mod error;
pub mod evaluate;
pub mod ids;
pub mod log;
pub mod recommend;
pub mod reweight;
pub mod simulate;
pub mod snapshot;

pub use dist::EvalDistribution;
pub use error::{Error, Result};
pub use evaluate::{evaluate_exact, evaluate_sampled, EvalMode, EvalResult};
pub use ids::{ItemId, UserId};
pub use log::InteractionLog;
pub use recommend::{
    AlgorithmSpec, ConstantRecommender, CosineCf, CosineNorm, NaiveCf, ProfileView,
    Recommendation, Recommender, ScoreVector,
};
pub use reweight::{
    gradient_of_divergence, kl_divergence, optimize_weights, restrict_reference,
    select_top_p, OptimizerOptions, ReferenceMarginal, WeightSolution,
};
pub use simulate::{generate, CampaignSpec, ScenarioConfig};
pub use snapshot::Snapshot;
