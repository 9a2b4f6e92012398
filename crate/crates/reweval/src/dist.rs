//! Sampling distribution over (user, deleted item) evaluation pairs.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::snapshot::Snapshot;

/// Tolerance when checking that user probabilities sum to one.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Distribution used to draw evaluation pairs from a snapshot.
///
/// A pair is drawn as user ~ P(u), then item ~ P(i | u, w) where the base
/// conditional is uniform over the user's profile and per-item weights tilt
/// it: P(i | u, w) = w_i / sum over the profile of w_j. Items without an
/// explicit weight have weight one, so the default distribution is the
/// plain uniform leave-one-out sampler.
#[derive(Debug, Clone)]
pub struct EvalDistribution {
    user_prob: BTreeMap<UserId, f64>,
    weights: BTreeMap<ItemId, f64>,
}

impl EvalDistribution {
    /// Uniform user distribution over the snapshot's users, unit weights.
    pub fn uniform(snapshot: &Snapshot) -> EvalDistribution {
        let n = snapshot.n_users();
        let p = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        EvalDistribution {
            user_prob: snapshot.users().map(|u| (u, p)).collect(),
            weights: BTreeMap::new(),
        }
    }

    /// Explicit user distribution. The keys must be exactly the snapshot's
    /// users, every probability positive, and the total within
    /// [`PROB_SUM_TOL`] of one.
    pub fn with_user_probs(
        snapshot: &Snapshot,
        user_prob: BTreeMap<UserId, f64>,
    ) -> Result<EvalDistribution> {
        if user_prob.len() != snapshot.n_users() {
            return Err(Error::InvalidUserProbs(format!(
                "got {} entries for {} snapshot users",
                user_prob.len(),
                snapshot.n_users()
            )));
        }
        let mut total = 0.0;
        for (&u, &p) in &user_prob {
            if !snapshot.contains_user(u) {
                return Err(Error::InvalidUserProbs(format!(
                    "user {u} is not in the snapshot"
                )));
            }
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidUserProbs(format!(
                    "probability {p} for user {u} is not positive"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidUserProbs(format!("sum is {total}, not 1")));
        }
        Ok(EvalDistribution {
            user_prob,
            weights: BTreeMap::new(),
        })
    }

    /// Weight of `item`; one unless set explicitly.
    pub fn weight(&self, item: ItemId) -> f64 {
        self.weights.get(&item).copied().unwrap_or(1.0)
    }

    /// Sets one item weight. Weights must be positive and finite.
    pub fn set_weight(&mut self, item: ItemId, weight: f64) -> Result<()> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::NonPositiveWeight { item, weight });
        }
        self.weights.insert(item, weight);
        Ok(())
    }

    /// Sets many item weights, failing on the first non-positive one.
    pub fn set_weights(&mut self, weights: impl IntoIterator<Item = (ItemId, f64)>) -> Result<()> {
        for (item, weight) in weights {
            self.set_weight(item, weight)?;
        }
        Ok(())
    }

    /// Drops all explicit weights, returning to the unweighted sampler.
    pub fn clear_weights(&mut self) {
        self.weights.clear();
    }

    pub fn user_prob(&self, user: UserId) -> Option<f64> {
        self.user_prob.get(&user).copied()
    }

    pub fn user_probs(&self) -> &BTreeMap<UserId, f64> {
        &self.user_prob
    }

    pub fn weights(&self) -> &BTreeMap<ItemId, f64> {
        &self.weights
    }

    /// Sum of weights over a user's profile, checking each weight.
    fn profile_weight_sum(&self, snapshot: &Snapshot, user: UserId) -> Result<f64> {
        let items = snapshot
            .items_of(user)
            .ok_or(Error::UnknownUser(user))?;
        let mut total = 0.0;
        for &j in items {
            let w = self.weight(j);
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight { item: j, weight: w });
            }
            total += w;
        }
        Ok(total)
    }

    /// P(item | user, w): the weighted share of `item` in the user's
    /// profile, zero when the profile does not contain the item.
    pub fn weighted_conditional(
        &self,
        snapshot: &Snapshot,
        user: UserId,
        item: ItemId,
    ) -> Result<f64> {
        let total = self.profile_weight_sum(snapshot, user)?;
        let items = snapshot.items_of(user).expect("checked above");
        if !items.contains(&item) {
            return Ok(0.0);
        }
        Ok(self.weight(item) / total)
    }

    /// P(item | w): the item marginal of the pair distribution,
    /// sum over users of P(u) P(item | u, w). Absent items have
    /// probability zero; present entries sum to one.
    pub fn item_marginal(&self, snapshot: &Snapshot) -> Result<BTreeMap<ItemId, f64>> {
        self.check_matches(snapshot)?;
        let mut marginal: BTreeMap<ItemId, f64> = BTreeMap::new();
        for (&u, &pu) in &self.user_prob {
            let total = self.profile_weight_sum(snapshot, u)?;
            for &i in snapshot.items_of(u).expect("validated user") {
                *marginal.entry(i).or_insert(0.0) += pu * self.weight(i) / total;
            }
        }
        Ok(marginal)
    }

    /// Draws one (user, deleted item) pair.
    pub fn sample_pair<R: Rng + ?Sized>(
        &self,
        snapshot: &Snapshot,
        rng: &mut R,
    ) -> Result<(UserId, ItemId)> {
        if snapshot.is_empty() {
            return Err(Error::EmptySnapshot(snapshot.day()));
        }
        self.check_matches(snapshot)?;

        let r = rng.random::<f64>();
        let mut acc = 0.0;
        let mut chosen = *self.user_prob.keys().next_back().expect("non-empty");
        for (&u, &p) in &self.user_prob {
            acc += p;
            if r < acc {
                chosen = u;
                break;
            }
        }

        let items = snapshot.items_of(chosen).ok_or(Error::UnknownUser(chosen))?;
        let total = self.profile_weight_sum(snapshot, chosen)?;
        let r = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut item = *items.iter().next_back().expect("profiles are non-empty");
        for &i in items {
            acc += self.weight(i);
            if r < acc {
                item = i;
                break;
            }
        }
        Ok((chosen, item))
    }

    fn check_matches(&self, snapshot: &Snapshot) -> Result<()> {
        if self.user_prob.len() != snapshot.n_users() {
            return Err(Error::InvalidDistribution(format!(
                "distribution has {} users, snapshot has {}",
                self.user_prob.len(),
                snapshot.n_users()
            )));
        }
        Ok(())
    }
}
