//! Recommendation algorithms and the leave-one-out query profile.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::log::InteractionLog;
use crate::snapshot::Snapshot;

/// A user profile with at most one item masked out.
///
/// Borrows the profile set from a snapshot; the snapshot itself is never
/// modified, so building a view per evaluation pair is free.
#[derive(Clone, Copy, Debug)]
pub struct ProfileView<'a> {
    items: &'a BTreeSet<ItemId>,
    removed: Option<ItemId>,
}

impl<'a> ProfileView<'a> {
    /// View of a full profile with nothing removed.
    pub fn full(items: &'a BTreeSet<ItemId>) -> ProfileView<'a> {
        ProfileView {
            items,
            removed: None,
        }
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.removed != Some(item) && self.items.contains(&item)
    }

    pub fn iter(&self) -> impl Iterator<Item = ItemId> + 'a {
        let removed = self.removed;
        self.items
            .iter()
            .copied()
            .filter(move |&i| Some(i) != removed)
    }

    pub fn len(&self) -> usize {
        let hidden = match self.removed {
            Some(r) if self.items.contains(&r) => 1,
            _ => 0,
        };
        self.items.len() - hidden
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Profile of `user` at the snapshot with `item` deleted. Fails if the user
/// is absent or the item is not in their profile.
pub fn profile_without(snapshot: &Snapshot, user: UserId, item: ItemId) -> Result<ProfileView<'_>> {
    let items = snapshot.items_of(user).ok_or(Error::UnknownUser(user))?;
    if !items.contains(&item) {
        return Err(Error::ItemNotInProfile { user, item });
    }
    Ok(ProfileView {
        items,
        removed: Some(item),
    })
}

/// Sparse item scores; items without an entry score zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreVector {
    scores: BTreeMap<ItemId, f64>,
}

impl ScoreVector {
    pub fn new() -> ScoreVector {
        ScoreVector::default()
    }

    pub fn get(&self, item: ItemId) -> f64 {
        self.scores.get(&item).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, item: ItemId, score: f64) {
        self.scores.insert(item, score);
    }

    pub fn add(&mut self, item: ItemId, delta: f64) {
        *self.scores.entry(item).or_insert(0.0) += delta;
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.scores.iter().map(|(&i, &s)| (i, s))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl FromIterator<(ItemId, f64)> for ScoreVector {
    fn from_iter<T: IntoIterator<Item = (ItemId, f64)>>(iter: T) -> ScoreVector {
        ScoreVector {
            scores: iter.into_iter().collect(),
        }
    }
}

/// Ranked recommendation list: items by descending score, score ties broken
/// by ascending item id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recommendation {
    items: Vec<ItemId>,
    scores: Vec<f64>,
}

impl Recommendation {
    pub fn empty() -> Recommendation {
        Recommendation::default()
    }

    fn from_ranked(ranked: Vec<(ItemId, f64)>) -> Recommendation {
        let mut items = Vec::with_capacity(ranked.len());
        let mut scores = Vec::with_capacity(ranked.len());
        for (i, s) in ranked {
            items.push(i);
            scores.push(s);
        }
        Recommendation { items, scores }
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains(&item)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// The `k` best-scoring snapshot items outside `exclude`. Ties and the
/// zero-score fill are ordered by ascending item id; fewer than `k` items
/// are returned only when the candidate pool is smaller than `k`.
pub fn top_k(
    scores: &ScoreVector,
    snapshot: &Snapshot,
    exclude: ProfileView<'_>,
    k: usize,
) -> Recommendation {
    let mut ranked: Vec<(ItemId, f64)> = snapshot
        .items()
        .filter(|&i| !exclude.contains(i))
        .map(|i| (i, scores.get(i)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Recommendation::from_ranked(ranked)
}

/// A recommendation strategy over snapshots.
pub trait Recommender: Sync {
    /// Stable identifier used in reports and file names.
    fn name(&self) -> &str;

    /// Top-`k` items for the query profile. `query_user` is the snapshot
    /// user the profile came from, when there is one; neighborhood methods
    /// exclude that user from their own sums. Items in the query profile
    /// are never recommended.
    fn recommend(
        &self,
        snapshot: &Snapshot,
        query_user: Option<UserId>,
        profile: ProfileView<'_>,
        k: usize,
    ) -> Recommendation;
}

/// Recommends a fixed list, filtered against the query profile.
#[derive(Debug, Clone)]
pub struct ConstantRecommender {
    items: Vec<ItemId>,
}

impl ConstantRecommender {
    /// Builds the recommender from a ranked item list. Duplicates keep
    /// their first occurrence; the list must contain at least `k` distinct
    /// items so that rank depth `k` can always be served.
    pub fn new(items: Vec<ItemId>, k: usize) -> Result<ConstantRecommender> {
        let mut seen = BTreeSet::new();
        let items: Vec<ItemId> = items.into_iter().filter(|&i| seen.insert(i)).collect();
        if items.len() < k {
            return Err(Error::TooFewItems {
                needed: k,
                got: items.len(),
            });
        }
        Ok(ConstantRecommender { items })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }
}

impl Recommender for ConstantRecommender {
    fn name(&self) -> &str {
        "constant"
    }

    fn recommend(
        &self,
        _snapshot: &Snapshot,
        _query_user: Option<UserId>,
        profile: ProfileView<'_>,
        k: usize,
    ) -> Recommendation {
        let list_len = self.items.len();
        let ranked: Vec<(ItemId, f64)> = self
            .items
            .iter()
            .enumerate()
            .filter(|(_, &i)| !profile.contains(i))
            .take(k)
            .map(|(pos, &i)| (i, (list_len - pos) as f64))
            .collect();
        Recommendation::from_ranked(ranked)
    }
}

/// Denominator of the cosine neighbor similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CosineNorm {
    /// sqrt of the product of the two profile norms. Flattens the usual
    /// length normalization, so long profiles weigh more than under the
    /// standard cosine.
    SqrtOfNormProduct,
    /// Product of the two profile norms, the standard cosine similarity.
    NormProduct,
}

/// User-based collaborative filter over binary profiles.
///
/// Scores an item by summing, over the other users owning it, the
/// similarity between their profile and the query profile. Similarity is
/// the profile overlap divided by the selected [`CosineNorm`].
#[derive(Debug, Clone)]
pub struct CosineCf {
    norm: CosineNorm,
}

impl CosineCf {
    pub fn new(norm: CosineNorm) -> CosineCf {
        CosineCf { norm }
    }
}

impl Default for CosineCf {
    fn default() -> CosineCf {
        CosineCf::new(CosineNorm::SqrtOfNormProduct)
    }
}

impl Recommender for CosineCf {
    fn name(&self) -> &str {
        match self.norm {
            CosineNorm::SqrtOfNormProduct => "cosine_cf",
            CosineNorm::NormProduct => "cosine_cf:norm=standard",
        }
    }

    fn recommend(
        &self,
        snapshot: &Snapshot,
        query_user: Option<UserId>,
        profile: ProfileView<'_>,
        k: usize,
    ) -> Recommendation {
        let scores = cosine_cf_scores(snapshot, query_user, profile, self.norm);
        top_k(&scores, snapshot, profile, k)
    }
}

/// Cosine neighbor scores for every snapshot item. An empty query profile
/// scores everything zero.
pub fn cosine_cf_scores(
    snapshot: &Snapshot,
    query_user: Option<UserId>,
    profile: ProfileView<'_>,
    norm: CosineNorm,
) -> ScoreVector {
    if profile.is_empty() {
        return ScoreVector::new();
    }
    let mut overlap = vec![0u32; snapshot.user_index_bound()];
    for j in profile.iter() {
        if let Some(users) = snapshot.users_of(j) {
            for &v in users {
                overlap[v.index()] += 1;
            }
        }
    }
    let query_norm = (profile.len() as f64).sqrt();
    let mut scores = vec![0.0f64; snapshot.item_index_bound()];
    for (idx, &inner) in overlap.iter().enumerate() {
        if inner == 0 {
            continue;
        }
        let v = UserId(idx as u32);
        if query_user == Some(v) {
            continue;
        }
        let profile_v = snapshot.items_of(v).expect("overlap only counts snapshot users");
        let neighbor_norm = (profile_v.len() as f64).sqrt();
        let denom = match norm {
            CosineNorm::SqrtOfNormProduct => (query_norm * neighbor_norm).sqrt(),
            CosineNorm::NormProduct => query_norm * neighbor_norm,
        };
        let sim = inner as f64 / denom;
        for &i in profile_v {
            scores[i.index()] += sim;
        }
    }
    scores
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s != 0.0)
        .map(|(idx, s)| (ItemId(idx as u32), s))
        .collect()
}

/// Item-to-item filter scoring each candidate by its best co-adoption
/// ratio with any profile item.
#[derive(Debug, Clone, Default)]
pub struct NaiveCf;

impl Recommender for NaiveCf {
    fn name(&self) -> &str {
        "naive_cf"
    }

    fn recommend(
        &self,
        snapshot: &Snapshot,
        _query_user: Option<UserId>,
        profile: ProfileView<'_>,
        k: usize,
    ) -> Recommendation {
        let scores = naive_cf_scores(snapshot, profile);
        top_k(&scores, snapshot, profile, k)
    }
}

/// Naive co-adoption scores: for each candidate item the maximum, over the
/// profile items j, of |owners of both| / |owners of j|. All owner counts
/// come from the snapshot; the query user is not excluded from them.
pub fn naive_cf_scores(snapshot: &Snapshot, profile: ProfileView<'_>) -> ScoreVector {
    let mut best = vec![0.0f64; snapshot.item_index_bound()];
    let mut counts = vec![0u32; snapshot.item_index_bound()];
    let mut any = false;
    for j in profile.iter() {
        let users_j = match snapshot.users_of(j) {
            Some(users) => users,
            None => continue,
        };
        counts.fill(0);
        for &v in users_j {
            for &i in snapshot.items_of(v).expect("transpose invariant") {
                counts[i.index()] += 1;
            }
        }
        let denom = users_j.len() as f64;
        for (idx, &c) in counts.iter().enumerate() {
            if c > 0 {
                let ratio = c as f64 / denom;
                if ratio > best[idx] {
                    best[idx] = ratio;
                }
            }
        }
        any = true;
    }
    if !any {
        return ScoreVector::new();
    }
    best.into_iter()
        .enumerate()
        .filter(|&(_, s)| s > 0.0)
        .map(|(idx, s)| (ItemId(idx as u32), s))
        .collect()
}

/// Parsed algorithm selector, e.g. `constant`, `constant:items=4|2|9`,
/// `cosine_cf`, `cosine_cf:norm=standard`, `naive_cf`.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    /// Fixed list of external item ids; `None` recommends every log item
    /// in ascending external id order.
    Constant { items: Option<Vec<u64>> },
    CosineCf { norm: CosineNorm },
    NaiveCf,
}

impl AlgorithmSpec {
    pub fn parse(spec: &str) -> Result<AlgorithmSpec> {
        let bad = || Error::UnknownAlgorithm(spec.to_string());
        let (name, params) = match spec.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (spec, None),
        };
        match (name, params) {
            ("constant", None) => Ok(AlgorithmSpec::Constant { items: None }),
            ("constant", Some(p)) => {
                let list = p.strip_prefix("items=").ok_or_else(bad)?;
                let items = list
                    .split('|')
                    .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
                    .collect::<Result<Vec<u64>>>()?;
                if items.is_empty() {
                    return Err(bad());
                }
                Ok(AlgorithmSpec::Constant { items: Some(items) })
            }
            ("cosine_cf", None) => Ok(AlgorithmSpec::CosineCf {
                norm: CosineNorm::SqrtOfNormProduct,
            }),
            ("cosine_cf", Some("norm=standard")) => Ok(AlgorithmSpec::CosineCf {
                norm: CosineNorm::NormProduct,
            }),
            ("naive_cf", None) => Ok(AlgorithmSpec::NaiveCf),
            _ => Err(bad()),
        }
    }

    /// Canonical spec string, parseable back into the same value.
    pub fn name(&self) -> String {
        match self {
            AlgorithmSpec::Constant { items: None } => "constant".to_string(),
            AlgorithmSpec::Constant { items: Some(items) } => {
                let list: Vec<String> = items.iter().map(u64::to_string).collect();
                format!("constant:items={}", list.join("|"))
            }
            AlgorithmSpec::CosineCf {
                norm: CosineNorm::SqrtOfNormProduct,
            } => "cosine_cf".to_string(),
            AlgorithmSpec::CosineCf {
                norm: CosineNorm::NormProduct,
            } => "cosine_cf:norm=standard".to_string(),
            AlgorithmSpec::NaiveCf => "naive_cf".to_string(),
        }
    }

    /// Instantiates the recommender against a log. Constant lists are
    /// resolved from external ids here, so every listed item must occur in
    /// the log; the default constant list is all log items ascending.
    pub fn build(&self, log: &InteractionLog, k: usize) -> Result<Box<dyn Recommender>> {
        match self {
            AlgorithmSpec::Constant { items } => {
                let external: Vec<u64> = match items {
                    Some(list) => list.clone(),
                    None => log.external_items_sorted(),
                };
                let dense = external
                    .iter()
                    .map(|&e| log.item_id(e).ok_or(Error::UnknownItem(e)))
                    .collect::<Result<Vec<ItemId>>>()?;
                Ok(Box::new(ConstantRecommender::new(dense, k)?))
            }
            AlgorithmSpec::CosineCf { norm } => Ok(Box::new(CosineCf::new(*norm))),
            AlgorithmSpec::NaiveCf => Ok(Box::new(NaiveCf)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::InteractionLog;

    fn log_from(profiles: &[(u64, &[u64])]) -> InteractionLog {
        let mut log = InteractionLog::new();
        for &(u, items) in profiles {
            for &i in items {
                log.record(u, i, 0);
            }
        }
        log
    }

    fn item(log: &InteractionLog, external: u64) -> ItemId {
        log.item_id(external).unwrap()
    }

    fn user(log: &InteractionLog, external: u64) -> UserId {
        log.user_id(external).unwrap()
    }

    #[test]
    fn profile_without_removes_one_item() {
        let log = log_from(&[(1, &[10, 11])]);
        let snap = log.snapshot_at(0);
        let u = user(&log, 1);
        let view = profile_without(&snap, u, item(&log, 10)).unwrap();
        assert_eq!(view.len(), 1);
        assert!(!view.contains(item(&log, 10)));
        assert!(view.contains(item(&log, 11)));
        assert_eq!(snap.items_of(u).unwrap().len(), 2);
    }

    #[test]
    fn profile_without_last_item_is_empty_but_valid() {
        let log = log_from(&[(1, &[10])]);
        let snap = log.snapshot_at(0);
        let view = profile_without(&snap, user(&log, 1), item(&log, 10)).unwrap();
        assert!(view.is_empty());
        assert_eq!(view.iter().count(), 0);
    }

    #[test]
    fn profile_without_foreign_item_fails() {
        let log = log_from(&[(1, &[10]), (2, &[11])]);
        let snap = log.snapshot_at(0);
        let err = profile_without(&snap, user(&log, 1), item(&log, 11)).unwrap_err();
        assert!(matches!(err, Error::ItemNotInProfile { .. }));
        assert!(matches!(
            profile_without(&snap, UserId(9), ItemId(0)),
            Err(Error::UnknownUser(_))
        ));
    }

    #[test]
    fn constant_serves_list_order_minus_profile() {
        let log = log_from(&[(1, &[1, 3, 5]), (2, &[3])]);
        let snap = log.snapshot_at(0);
        let rec = ConstantRecommender::new(
            vec![item(&log, 3), item(&log, 1), item(&log, 5)],
            2,
        )
        .unwrap();

        let empty = BTreeSet::new();
        let got = rec.recommend(&snap, None, ProfileView::full(&empty), 2);
        assert_eq!(got.items(), &[item(&log, 3), item(&log, 1)]);
        assert!(got.scores()[0] > got.scores()[1]);

        let profile: BTreeSet<ItemId> = [item(&log, 3)].into_iter().collect();
        let got = rec.recommend(&snap, None, ProfileView::full(&profile), 2);
        assert_eq!(got.items(), &[item(&log, 1), item(&log, 5)]);
    }

    #[test]
    fn constant_output_is_user_independent() {
        let log = log_from(&[(1, &[1]), (2, &[2])]);
        let snap = log.snapshot_at(0);
        let rec = ConstantRecommender::new(vec![item(&log, 1), item(&log, 2)], 1).unwrap();
        let empty = BTreeSet::new();
        let a = rec.recommend(&snap, Some(user(&log, 1)), ProfileView::full(&empty), 1);
        let b = rec.recommend(&snap, Some(user(&log, 2)), ProfileView::full(&empty), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn constant_requires_k_distinct_items() {
        let err = ConstantRecommender::new(vec![ItemId(1), ItemId(1)], 2).unwrap_err();
        assert!(matches!(err, Error::TooFewItems { needed: 2, got: 1 }));
        let ok = ConstantRecommender::new(vec![ItemId(1), ItemId(1), ItemId(2)], 2).unwrap();
        assert_eq!(ok.items(), &[ItemId(1), ItemId(2)]);
    }

    #[test]
    fn cosine_matches_hand_computed_similarity() {
        // Query profile {i1}; the other user owns {i1, i2}. Overlap is 1,
        // norms are 1 and sqrt(2), so the flattened similarity is
        // 1 / sqrt(1 * sqrt(2)) = 2^(-1/4) and i2 scores exactly that.
        let log = log_from(&[(1, &[1]), (2, &[1, 2])]);
        let snap = log.snapshot_at(0);
        let u1 = user(&log, 1);
        let profile = snap.items_of(u1).unwrap();
        let scores = cosine_cf_scores(
            &snap,
            Some(u1),
            ProfileView::full(profile),
            CosineNorm::SqrtOfNormProduct,
        );
        let expect = 2f64.powf(-0.25);
        assert!((scores.get(item(&log, 2)) - expect).abs() < 1e-12);
        assert!((scores.get(item(&log, 1)) - expect).abs() < 1e-12);

        let standard = cosine_cf_scores(
            &snap,
            Some(u1),
            ProfileView::full(profile),
            CosineNorm::NormProduct,
        );
        let expect_std = 1.0 / 2f64.sqrt();
        assert!((standard.get(item(&log, 2)) - expect_std).abs() < 1e-12);
    }

    #[test]
    fn cosine_with_disjoint_profiles_scores_zero() {
        let log = log_from(&[(1, &[1]), (2, &[2])]);
        let snap = log.snapshot_at(0);
        let u1 = user(&log, 1);
        let scores = cosine_cf_scores(
            &snap,
            Some(u1),
            ProfileView::full(snap.items_of(u1).unwrap()),
            CosineNorm::SqrtOfNormProduct,
        );
        assert!(scores.is_empty());
    }

    #[test]
    fn cosine_empty_profile_scores_zero() {
        let log = log_from(&[(1, &[1]), (2, &[1, 2])]);
        let snap = log.snapshot_at(0);
        let u1 = user(&log, 1);
        let view = profile_without(&snap, u1, item(&log, 1)).unwrap();
        assert!(view.is_empty());
        let scores =
            cosine_cf_scores(&snap, Some(u1), view, CosineNorm::SqrtOfNormProduct);
        assert!(scores.is_empty());
    }

    #[test]
    fn cosine_excludes_the_query_user() {
        let log = log_from(&[(1, &[1, 2]), (2, &[1, 2])]);
        let snap = log.snapshot_at(0);
        let u1 = user(&log, 1);
        let profile = snap.items_of(u1).unwrap();
        let scores = cosine_cf_scores(
            &snap,
            Some(u1),
            ProfileView::full(profile),
            CosineNorm::SqrtOfNormProduct,
        );
        // Only user 2 contributes: overlap 2 over sqrt(sqrt(2) * sqrt(2)).
        let expect = 2.0 / 2f64.sqrt();
        assert!((scores.get(item(&log, 1)) - expect).abs() < 1e-12);

        let anonymous = cosine_cf_scores(
            &snap,
            None,
            ProfileView::full(profile),
            CosineNorm::SqrtOfNormProduct,
        );
        assert!(anonymous.get(item(&log, 1)) > scores.get(item(&log, 1)));
    }

    #[test]
    fn naive_matches_hand_computed_ratios() {
        // Owners: i1 {A, B}, i2 {A, C}, i3 {C}. Query profile {i1}:
        // score(i2) = #({A,C} and {A,B}) / #{A,B} = 1/2,
        // score(i3) = #({C} and {A,B}) / 2 = 0.
        let log = log_from(&[(1, &[1, 2]), (2, &[1]), (3, &[2, 3])]);
        let snap = log.snapshot_at(0);
        let u_b = user(&log, 2);
        let profile = snap.items_of(u_b).unwrap();
        let scores = naive_cf_scores(&snap, ProfileView::full(profile));
        assert_eq!(scores.get(item(&log, 2)), 0.5);
        assert_eq!(scores.get(item(&log, 3)), 0.0);
        assert_eq!(scores.get(item(&log, 1)), 1.0);
    }

    #[test]
    fn naive_ignores_items_absent_from_snapshot() {
        let log = log_from(&[(1, &[1]), (2, &[1, 2])]);
        let snap = log.snapshot_at(0);
        let mut ghost = BTreeSet::new();
        ghost.insert(ItemId(99));
        ghost.insert(item(&log, 1));
        let scores = naive_cf_scores(&snap, ProfileView::full(&ghost));
        assert!(scores.get(item(&log, 2)) > 0.0);
        assert_eq!(scores.get(ItemId(99)), 0.0);
    }

    #[test]
    fn naive_identical_users_score_one() {
        let log = log_from(&[(1, &[1, 2]), (2, &[1, 2])]);
        let snap = log.snapshot_at(0);
        let u1 = user(&log, 1);
        let view = profile_without(&snap, u1, item(&log, 2)).unwrap();
        let scores = naive_cf_scores(&snap, view);
        assert_eq!(scores.get(item(&log, 2)), 1.0);
    }

    #[test]
    fn top_k_breaks_ties_by_ascending_id() {
        let log = log_from(&[(1, &[1, 2, 3])]);
        let snap = log.snapshot_at(0);
        let mut scores = ScoreVector::new();
        scores.set(item(&log, 1), 0.3);
        scores.set(item(&log, 2), 0.9);
        scores.set(item(&log, 3), 0.9);
        let empty = BTreeSet::new();
        let rec = top_k(&scores, &snap, ProfileView::full(&empty), 2);
        assert_eq!(rec.items(), &[item(&log, 2), item(&log, 3)]);
    }

    #[test]
    fn top_k_fills_with_zero_scored_items() {
        let log = log_from(&[(1, &[1, 2, 3])]);
        let snap = log.snapshot_at(0);
        let mut scores = ScoreVector::new();
        scores.set(item(&log, 3), 0.5);
        let empty = BTreeSet::new();
        let rec = top_k(&scores, &snap, ProfileView::full(&empty), 3);
        assert_eq!(rec.items(), &[item(&log, 3), item(&log, 1), item(&log, 2)]);
    }

    #[test]
    fn top_k_excludes_profile_and_truncates() {
        let log = log_from(&[(1, &[1, 2])]);
        let snap = log.snapshot_at(0);
        let mut scores = ScoreVector::new();
        scores.set(item(&log, 1), 0.3);
        let profile: BTreeSet<ItemId> = [item(&log, 1)].into_iter().collect();
        let rec = top_k(&scores, &snap, ProfileView::full(&profile), 1);
        assert_eq!(rec.items(), &[item(&log, 2)]);

        let rec = top_k(&scores, &snap, ProfileView::full(&profile), 5);
        assert_eq!(rec.len(), 1);
    }

    #[test]
    fn scores_are_invariant_under_user_relabeling() {
        let profiles: &[(u64, &[u64])] = &[(1, &[1, 2]), (2, &[2, 3]), (3, &[1, 3])];
        let log_a = log_from(profiles);
        let mut log_b = InteractionLog::new();
        // Same profiles, users interned in reverse order. Items are
        // interned in the same order so dense item ids agree.
        for &i in &[1u64, 2, 3] {
            for &(u, items) in profiles.iter().rev() {
                if items.contains(&i) {
                    log_b.record(u, i, 0);
                }
            }
        }
        let snap_a = log_a.snapshot_at(0);
        let snap_b = log_b.snapshot_at(0);
        let profile: BTreeSet<ItemId> = [log_a.item_id(1).unwrap()].into_iter().collect();
        let view = ProfileView::full(&profile);
        assert_eq!(
            cosine_cf_scores(&snap_a, None, view, CosineNorm::SqrtOfNormProduct),
            cosine_cf_scores(&snap_b, None, view, CosineNorm::SqrtOfNormProduct)
        );
        assert_eq!(
            naive_cf_scores(&snap_a, view),
            naive_cf_scores(&snap_b, view)
        );
    }

    #[test]
    fn algorithm_specs_parse_and_round_trip() {
        let cases = [
            "constant",
            "constant:items=4|2|9",
            "cosine_cf",
            "cosine_cf:norm=standard",
            "naive_cf",
        ];
        for case in cases {
            let spec = AlgorithmSpec::parse(case).unwrap();
            assert_eq!(spec.name(), case);
        }
        assert!(AlgorithmSpec::parse("svd").is_err());
        assert!(AlgorithmSpec::parse("cosine_cf:norm=euclid").is_err());
        assert!(AlgorithmSpec::parse("constant:items=").is_err());
        assert!(AlgorithmSpec::parse("constant:items=1|x").is_err());
    }

    #[test]
    fn constant_spec_resolves_external_ids() {
        let log = log_from(&[(1, &[5, 7]), (2, &[9])]);
        let spec = AlgorithmSpec::parse("constant:items=9|5").unwrap();
        let rec = spec.build(&log, 2).unwrap();
        let snap = log.snapshot_at(0);
        let empty = BTreeSet::new();
        let got = rec.recommend(&snap, None, ProfileView::full(&empty), 2);
        assert_eq!(got.items(), &[item(&log, 9), item(&log, 5)]);

        let unknown = AlgorithmSpec::parse("constant:items=99").unwrap();
        assert!(matches!(unknown.build(&log, 1), Err(Error::UnknownItem(99))));

        let default = AlgorithmSpec::parse("constant").unwrap();
        let rec = default.build(&log, 3).unwrap();
        let got = rec.recommend(&snap, None, ProfileView::full(&empty), 3);
        assert_eq!(
            got.items(),
            &[item(&log, 5), item(&log, 7), item(&log, 9)]
        );
    }
}
