//! Leave-one-out scoring of recommenders, exact or sampled.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dist::EvalDistribution;
use crate::error::{Error, Result};
use crate::ids::ItemId;
use crate::recommend::{profile_without, Recommendation, Recommender};
use crate::snapshot::Snapshot;

pub const EVAL_CSV_HEADER: &str = "day,algorithm,mode,score,n_pairs,std_error,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Exact,
    Sampled,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalMode::Exact => f.write_str("exact"),
            EvalMode::Sampled => f.write_str("sampled"),
        }
    }
}

/// Outcome of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Expected hit rate in [0, 1].
    pub score: f64,
    /// Pairs enumerated (exact) or drawn (sampled).
    pub n_pairs: usize,
    pub mode: EvalMode,
    /// Seed of the sampled run, if any.
    pub seed: Option<u64>,
    /// Binomial standard error of a sampled run.
    pub std_error: Option<f64>,
}

impl EvalResult {
    /// One CSV row under [`EVAL_CSV_HEADER`]. Optional fields are left
    /// empty in exact mode.
    pub fn csv_row(&self, day: u32, algorithm: &str) -> String {
        let std_error = self.std_error.map_or(String::new(), |e| e.to_string());
        let seed = self.seed.map_or(String::new(), |s| s.to_string());
        format!(
            "{day},{algorithm},{},{},{},{std_error},{seed}",
            self.mode, self.score, self.n_pairs
        )
    }
}

/// Hit indicator: 1.0 iff `item` appears in the recommendation.
pub fn quality(rec: &Recommendation, item: ItemId) -> f64 {
    if rec.contains(item) {
        1.0
    } else {
        0.0
    }
}

/// Full expectation of the hit indicator over every (user, deleted item)
/// pair: sum over users of P(u) times the weighted share of the user's
/// hit items. Users are processed independently; the summation order is
/// fixed, so the result does not depend on the parallel split.
pub fn evaluate_exact(
    recommender: &dyn Recommender,
    snapshot: &Snapshot,
    dist: &EvalDistribution,
    k: usize,
) -> Result<EvalResult> {
    if snapshot.is_empty() {
        return Err(Error::EmptySnapshot(snapshot.day()));
    }
    let users: Vec<_> = snapshot.users().collect();
    let per_user: Vec<Result<(f64, usize)>> = users
        .par_iter()
        .map(|&u| {
            let items = snapshot.items_of(u).ok_or(Error::UnknownUser(u))?;
            let mut weight_sum = 0.0;
            for &j in items {
                let w = dist.weight(j);
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::NonPositiveWeight { item: j, weight: w });
                }
                weight_sum += w;
            }
            let mut hit_weight = 0.0;
            for &i in items {
                let profile = profile_without(snapshot, u, i)?;
                let rec = recommender.recommend(snapshot, Some(u), profile, k);
                hit_weight += dist.weight(i) * quality(&rec, i);
            }
            Ok((hit_weight / weight_sum, items.len()))
        })
        .collect();

    let mut score = 0.0;
    let mut n_pairs = 0;
    for (u, outcome) in users.into_iter().zip(per_user) {
        let (user_share, n) = outcome?;
        let pu = dist.user_prob(u).ok_or(Error::UnknownUser(u))?;
        score += pu * user_share;
        n_pairs += n;
    }
    Ok(EvalResult {
        score,
        n_pairs,
        mode: EvalMode::Exact,
        seed: None,
        std_error: None,
    })
}

/// Monte Carlo estimate of the same expectation from `n` seeded draws.
/// The draw stream is sequential, so a fixed seed reproduces the result
/// bit for bit.
pub fn evaluate_sampled(
    recommender: &dyn Recommender,
    snapshot: &Snapshot,
    dist: &EvalDistribution,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<EvalResult> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".to_string(),
        ));
    }
    if snapshot.is_empty() {
        return Err(Error::EmptySnapshot(snapshot.day()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n {
        let (u, i) = dist.sample_pair(snapshot, &mut rng)?;
        let profile = profile_without(snapshot, u, i)?;
        let rec = recommender.recommend(snapshot, Some(u), profile, k);
        if rec.contains(i) {
            hits += 1;
        }
    }
    let score = hits as f64 / n as f64;
    let std_error = (score * (1.0 - score) / n as f64).sqrt();
    Ok(EvalResult {
        score,
        n_pairs: n,
        mode: EvalMode::Sampled,
        seed: Some(seed),
        std_error: Some(std_error),
    })
}
