//! Recalibration weights that pull a day's item marginal toward a
//! reference day's marginal by minimizing their KL divergence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::dist::EvalDistribution;
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::log::InteractionLog;
use crate::snapshot::Snapshot;

pub const REFERENCE_CSV_HEADER: &str = "item_id,probability";
pub const WEIGHTS_CSV_HEADER: &str = "item_id,weight,free";

/// Item marginal recorded on the reference day.
#[derive(Debug, Clone)]
pub struct ReferenceMarginal {
    day: u32,
    probs: BTreeMap<ItemId, f64>,
}

impl ReferenceMarginal {
    /// Validates that entries are finite, non-negative and sum to one
    /// (within 1e-9).
    pub fn new(day: u32, probs: BTreeMap<ItemId, f64>) -> Result<ReferenceMarginal> {
        let mut total = 0.0;
        for (&i, &p) in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "reference probability {p} for item {i}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "reference probabilities sum to {total}, not 1"
            )));
        }
        Ok(ReferenceMarginal { day, probs })
    }

    /// Records the distribution's item marginal on `snapshot` as the
    /// reference.
    pub fn from_snapshot(snapshot: &Snapshot, dist: &EvalDistribution) -> Result<ReferenceMarginal> {
        if snapshot.is_empty() {
            return Err(Error::EmptySnapshot(snapshot.day()));
        }
        ReferenceMarginal::new(snapshot.day(), dist.item_marginal(snapshot)?)
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn probs(&self) -> &BTreeMap<ItemId, f64> {
        &self.probs
    }

    /// Probability of `item`, zero when absent.
    pub fn prob(&self, item: ItemId) -> f64 {
        self.probs.get(&item).copied().unwrap_or(0.0)
    }

    /// Serializes as `item_id,probability` rows under a `# day=` comment,
    /// sorted by external item id.
    pub fn to_csv_string(&self, log: &InteractionLog) -> String {
        let mut rows: Vec<(u64, f64)> = self
            .probs
            .iter()
            .map(|(&i, &p)| (log.external_item(i), p))
            .collect();
        rows.sort_by_key(|&(e, _)| e);
        let mut out = String::new();
        writeln!(out, "# day={}", self.day).expect("write to string");
        out.push_str(REFERENCE_CSV_HEADER);
        out.push('\n');
        for (external, p) in rows {
            writeln!(out, "{external},{p}").expect("write to string");
        }
        out
    }
}

/// Restriction of `reference` to the snapshot's items, renormalized to sum
/// to one. The second value lists the positive-probability reference items
/// that the snapshot no longer carries and that were therefore dropped
/// from the KL sum.
pub fn restrict_reference(
    reference: &ReferenceMarginal,
    snapshot: &Snapshot,
) -> Result<(ReferenceMarginal, Vec<ItemId>)> {
    let mut kept: BTreeMap<ItemId, f64> = BTreeMap::new();
    let mut dropped = Vec::new();
    for (&i, &p) in reference.probs() {
        if snapshot.contains_item(i) {
            kept.insert(i, p);
        } else if p > 0.0 {
            dropped.push(i);
        }
    }
    let mass: f64 = kept.values().sum();
    if !(mass > 0.0) {
        return Err(Error::DisjointReference);
    }
    for p in kept.values_mut() {
        *p /= mass;
    }
    Ok((
        ReferenceMarginal {
            day: reference.day(),
            probs: kept,
        },
        dropped,
    ))
}

/// The `p` items with the largest marginal deviation |ref − current|,
/// ties broken by ascending item id. Items absent from one side count as
/// probability zero there; `p` larger than the item universe is clamped.
pub fn select_top_p(
    reference: &ReferenceMarginal,
    current: &BTreeMap<ItemId, f64>,
    p: usize,
) -> BTreeSet<ItemId> {
    let universe: BTreeSet<ItemId> = reference
        .probs()
        .keys()
        .chain(current.keys())
        .copied()
        .collect();
    let mut ranked: Vec<(ItemId, f64)> = universe
        .into_iter()
        .map(|i| {
            let r = reference.prob(i);
            let c = current.get(&i).copied().unwrap_or(0.0);
            (i, (r - c).abs())
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(p).map(|(i, _)| i).collect()
}

/// KL divergence from `reference` to `current`, natural log, with
/// zero-probability reference terms dropped. Fails on a reference item
/// whose current probability is zero.
pub fn kl_divergence(
    reference: &ReferenceMarginal,
    current: &BTreeMap<ItemId, f64>,
) -> Result<f64> {
    let mut divergence = 0.0;
    for (&i, &r) in reference.probs() {
        if r <= 0.0 {
            continue;
        }
        let c = current.get(&i).copied().unwrap_or(0.0);
        if !(c > 0.0) {
            return Err(Error::SupportViolation(i));
        }
        divergence += r * (r / c).ln();
    }
    Ok(divergence)
}

/// Item marginal of `snapshot` under explicit weights, using only the
/// user probabilities of `dist` (any weights already set on it are
/// ignored).
fn marginal_under(
    snapshot: &Snapshot,
    dist: &EvalDistribution,
    weights: &BTreeMap<ItemId, f64>,
) -> Result<BTreeMap<ItemId, f64>> {
    let mut tilted = dist.clone();
    tilted.clear_weights();
    tilted.set_weights(weights.iter().map(|(&i, &w)| (i, w)))?;
    tilted.item_marginal(snapshot)
}

/// Analytic gradient of the KL divergence with respect to the weights of
/// `free_items`, at the point `weights` (items without an entry have
/// weight one). Uses only the user probabilities of `dist`.
///
/// With uniform base conditionals the weighted marginal is
/// M_i = sum over users owning i of P(u) w_i / W_u, W_u the profile
/// weight sum. Differentiating D = sum_i r_i ln(r_i / M_i) gives
/// dD/dw_a = -sum over users owning a of (P(u) / W_u) (q_a - T_u),
/// where q_i = r_i / M_i and T_u = sum over the profile of q_i w_i / W_u.
pub fn gradient_of_divergence(
    snapshot: &Snapshot,
    dist: &EvalDistribution,
    reference: &ReferenceMarginal,
    free_items: &BTreeSet<ItemId>,
    weights: &BTreeMap<ItemId, f64>,
) -> Result<BTreeMap<ItemId, f64>> {
    for (&i, &w) in weights {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { item: i, weight: w });
        }
    }
    let w = |i: ItemId| weights.get(&i).copied().unwrap_or(1.0);

    let mut profile_sums: BTreeMap<UserId, f64> = BTreeMap::new();
    let mut marginal: BTreeMap<ItemId, f64> = BTreeMap::new();
    for (&u, &pu) in dist.user_probs() {
        let items = snapshot.items_of(u).ok_or(Error::UnknownUser(u))?;
        let total: f64 = items.iter().map(|&j| w(j)).sum();
        profile_sums.insert(u, total);
        for &i in items {
            *marginal.entry(i).or_insert(0.0) += pu * w(i) / total;
        }
    }

    let mut ratios: BTreeMap<ItemId, f64> = BTreeMap::new();
    for (&i, &r) in reference.probs() {
        if r <= 0.0 {
            continue;
        }
        let m = marginal.get(&i).copied().unwrap_or(0.0);
        if !(m > 0.0) {
            return Err(Error::SupportViolation(i));
        }
        ratios.insert(i, r / m);
    }
    let ratio = |i: ItemId| ratios.get(&i).copied().unwrap_or(0.0);

    let mut tilts: BTreeMap<UserId, f64> = BTreeMap::new();
    for (&u, _) in dist.user_probs() {
        let items = snapshot.items_of(u).expect("validated above");
        let total = profile_sums[&u];
        let t: f64 = items.iter().map(|&i| ratio(i) * w(i) / total).sum();
        tilts.insert(u, t);
    }

    let mut gradient = BTreeMap::new();
    for &a in free_items {
        let mut g = 0.0;
        if let Some(users) = snapshot.users_of(a) {
            let qa = ratio(a);
            for &u in users {
                let pu = dist.user_prob(u).ok_or(Error::UnknownUser(u))?;
                g -= pu / profile_sums[&u] * (qa - tilts[&u]);
            }
        }
        gradient.insert(a, g);
    }
    Ok(gradient)
}

/// Knobs of the weight optimizer. The defaults match the crate's tested
/// configuration; loosen `max_iterations` or the tolerances only with a
/// reason.
#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Stop when the infinity norm of the log-space gradient is below this.
    pub grad_tol: f64,
    /// Stop when one accepted step improves the divergence by less than
    /// this fraction of its value.
    pub rel_improvement_tol: f64,
    /// Armijo sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    /// Reported weights are clamped to at least this value.
    pub weight_floor: f64,
}

impl Default for OptimizerOptions {
    fn default() -> OptimizerOptions {
        OptimizerOptions {
            max_iterations: 5000,
            grad_tol: 1e-8,
            rel_improvement_tol: 1e-10,
            armijo: 1e-4,
            weight_floor: 1e-9,
        }
    }
}

/// Result of a weight optimization run.
#[derive(Debug, Clone)]
pub struct WeightSolution {
    /// Weight for every item of the optimized snapshot; exactly one for
    /// items outside `free_items`.
    pub weights: BTreeMap<ItemId, f64>,
    /// Items whose weights were optimized.
    pub free_items: BTreeSet<ItemId>,
    /// Divergence at unit weights, after reference restriction.
    pub divergence_initial: f64,
    /// Divergence at the returned weights.
    pub divergence_final: f64,
    /// Accepted gradient steps.
    pub iterations: usize,
    /// False when the iteration or line-search budget ran out first.
    pub converged: bool,
    /// Positive-probability reference items missing from the snapshot,
    /// dropped before optimization.
    pub dropped_items: Vec<ItemId>,
}

impl WeightSolution {
    /// Serializes as `item_id,weight,free` rows sorted by external item
    /// id, under a `#` comment carrying the run diagnostics.
    pub fn to_csv_string(&self, log: &InteractionLog) -> String {
        let mut rows: Vec<(u64, f64, bool)> = self
            .weights
            .iter()
            .map(|(&i, &w)| (log.external_item(i), w, self.free_items.contains(&i)))
            .collect();
        rows.sort_by_key(|&(e, _, _)| e);
        let mut out = String::new();
        writeln!(
            out,
            "# p={},divergence_initial={},divergence_final={},iterations={},converged={}",
            self.free_items.len(),
            self.divergence_initial,
            self.divergence_final,
            self.iterations,
            self.converged
        )
        .expect("write to string");
        out.push_str(WEIGHTS_CSV_HEADER);
        out.push('\n');
        for (external, weight, free) in rows {
            writeln!(out, "{external},{weight},{free}").expect("write to string");
        }
        out
    }
}

/// Fits weights for the `p` most-deviating items so that the snapshot's
/// weighted marginal approaches `reference`, by gradient descent on the
/// log-weights with a backtracking (halving) Armijo line search from unit
/// weights. Deterministic: no randomness anywhere in the loop.
///
/// The reference is first restricted to the snapshot's items; `p` is
/// clamped to the item universe and `p = 0` returns the unit solution.
pub fn optimize_weights(
    snapshot: &Snapshot,
    dist: &EvalDistribution,
    reference: &ReferenceMarginal,
    p: usize,
    opts: &OptimizerOptions,
) -> Result<WeightSolution> {
    if snapshot.is_empty() {
        return Err(Error::EmptySnapshot(snapshot.day()));
    }
    let (reference, dropped_items) = restrict_reference(reference, snapshot)?;
    let unit_marginal = marginal_under(snapshot, dist, &BTreeMap::new())?;
    let divergence_initial = kl_divergence(&reference, &unit_marginal)?;
    let free_items = select_top_p(&reference, &unit_marginal, p);
    let free: Vec<ItemId> = free_items.iter().copied().collect();

    let weights_at = |log_weights: &[f64]| -> BTreeMap<ItemId, f64> {
        free.iter()
            .zip(log_weights)
            .map(|(&i, &x)| (i, x.exp()))
            .collect()
    };
    // Infinity marks an unusable point (weight under/overflow); the line
    // search backs off from it.
    let objective = |log_weights: &[f64]| -> f64 {
        let point = weights_at(log_weights);
        match marginal_under(snapshot, dist, &point)
            .and_then(|m| kl_divergence(&reference, &m))
        {
            Ok(d) if d.is_finite() => d,
            _ => f64::INFINITY,
        }
    };

    let mut log_weights = vec![0.0f64; free.len()];
    let mut divergence = divergence_initial;
    let mut iterations = 0usize;
    let mut converged = free.is_empty();
    // The accepted step is carried over and retried larger, because
    // boundary optima (weights heading to zero) need steps far beyond one.
    let mut trial_step = 1.0f64;
    while !converged && iterations < opts.max_iterations {
        let grad_w = gradient_of_divergence(
            snapshot,
            dist,
            &reference,
            &free_items,
            &weights_at(&log_weights),
        )?;
        let grad: Vec<f64> = free
            .iter()
            .zip(&log_weights)
            .map(|(&i, &x)| grad_w[&i] * x.exp())
            .collect();
        let grad_max = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_max < opts.grad_tol {
            converged = true;
            break;
        }
        let slope: f64 = -grad.iter().map(|g| g * g).sum::<f64>();
        let mut step = trial_step;
        let mut accepted = None;
        while step >= 1e-18 {
            let candidate: Vec<f64> = log_weights
                .iter()
                .zip(&grad)
                .map(|(&x, &g)| x - step * g)
                .collect();
            let value = objective(&candidate);
            if value <= divergence + opts.armijo * step * slope {
                accepted = Some((candidate, value, step));
                break;
            }
            step *= 0.5;
        }
        let Some((next, value, step)) = accepted else {
            break;
        };
        iterations += 1;
        let improvement = divergence - value;
        log_weights = next;
        let previous = divergence;
        divergence = value;
        trial_step = (step * 4.0).min(1e15);
        if improvement < opts.rel_improvement_tol * previous.max(f64::MIN_POSITIVE) {
            converged = true;
        }
    }

    let mut weights: BTreeMap<ItemId, f64> =
        snapshot.items().map(|i| (i, 1.0)).collect();
    for (i, w) in weights_at(&log_weights) {
        weights.insert(i, w.max(opts.weight_floor));
    }
    Ok(WeightSolution {
        weights,
        free_items,
        divergence_initial,
        divergence_final: divergence,
        iterations,
        converged,
        dropped_items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::InteractionLog;
    use proptest::prelude::*;

    fn log_from(profiles: &[(u64, &[u64])]) -> InteractionLog {
        let mut log = InteractionLog::new();
        for &(u, items) in profiles {
            for &i in items {
                log.record(u, i, 0);
            }
        }
        log
    }

    fn reference(entries: &[(ItemId, f64)]) -> ReferenceMarginal {
        ReferenceMarginal::new(0, entries.iter().copied().collect()).unwrap()
    }

    #[test]
    fn top_p_selects_largest_deviation_with_id_ties() {
        let r = reference(&[(ItemId(1), 0.5), (ItemId(2), 0.5)]);
        let current: BTreeMap<ItemId, f64> =
            [(ItemId(1), 0.1), (ItemId(2), 0.9)].into_iter().collect();
        let got = select_top_p(&r, &current, 1);
        assert_eq!(got, [ItemId(1)].into_iter().collect());

        let same: BTreeMap<ItemId, f64> = r.probs().clone();
        let got = select_top_p(&r, &same, 3);
        assert_eq!(got, [ItemId(1), ItemId(2)].into_iter().collect());

        let r = reference(&[(ItemId(1), 1.0)]);
        let current: BTreeMap<ItemId, f64> =
            [(ItemId(1), 0.2), (ItemId(2), 0.8)].into_iter().collect();
        let got = select_top_p(&r, &current, 1);
        assert_eq!(got, [ItemId(1)].into_iter().collect());
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let r = reference(&[(ItemId(0), 0.3), (ItemId(1), 0.7)]);
        assert_eq!(kl_divergence(&r, r.probs()).unwrap(), 0.0);
    }

    #[test]
    fn kl_matches_direct_evaluation() {
        let r = reference(&[(ItemId(0), 0.5), (ItemId(1), 0.5)]);
        let current: BTreeMap<ItemId, f64> =
            [(ItemId(0), 0.25), (ItemId(1), 0.75)].into_iter().collect();
        let got = kl_divergence(&r, &current).unwrap();
        let expect = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.14384103622589045).abs() < 1e-15);
    }

    #[test]
    fn kl_support_violation_names_the_item() {
        let r = reference(&[(ItemId(3), 0.5), (ItemId(4), 0.5)]);
        let current: BTreeMap<ItemId, f64> = [(ItemId(3), 1.0)].into_iter().collect();
        match kl_divergence(&r, &current) {
            Err(Error::SupportViolation(ItemId(4))) => {}
            other => panic!("expected support violation on item 4, got {other:?}"),
        }
    }

    #[test]
    fn reference_validation_rejects_bad_inputs() {
        let err = ReferenceMarginal::new(0, [(ItemId(0), 0.4)].into_iter().collect());
        assert!(err.is_err());
        let err = ReferenceMarginal::new(
            0,
            [(ItemId(0), -0.5), (ItemId(1), 1.5)].into_iter().collect(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn restriction_drops_missing_items_and_renormalizes() {
        let log = log_from(&[(1, &[1]), (2, &[2])]);
        let snap = log.snapshot_at(0);
        let i1 = log.item_id(1).unwrap();
        let i2 = log.item_id(2).unwrap();
        let r = reference(&[(i1, 0.25), (i2, 0.25), (ItemId(77), 0.5)]);
        let (restricted, dropped) = restrict_reference(&r, &snap).unwrap();
        assert_eq!(dropped, vec![ItemId(77)]);
        assert_eq!(restricted.prob(i1), 0.5);
        assert_eq!(restricted.prob(i2), 0.5);

        let all_foreign = reference(&[(ItemId(77), 1.0)]);
        assert!(matches!(
            restrict_reference(&all_foreign, &snap),
            Err(Error::DisjointReference)
        ));
    }

    /// Two users: {i1, i2} and {i2}. Unit-weight marginal (0.25, 0.75).
    fn skewed_instance() -> (InteractionLog, Snapshot) {
        let log = log_from(&[(1, &[1, 2]), (2, &[2])]);
        let snap = log.snapshot_at(0);
        (log, snap)
    }

    #[test]
    fn gradient_is_zero_for_single_user_single_item() {
        let log = log_from(&[(1, &[1])]);
        let snap = log.snapshot_at(0);
        let dist = EvalDistribution::uniform(&snap);
        let i1 = log.item_id(1).unwrap();
        let r = reference(&[(i1, 1.0)]);
        let free: BTreeSet<ItemId> = [i1].into_iter().collect();
        let weights: BTreeMap<ItemId, f64> = [(i1, 3.0)].into_iter().collect();
        let g = gradient_of_divergence(&snap, &dist, &r, &free, &weights).unwrap();
        assert_eq!(g[&i1], 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences_of_objective() {
        let log = log_from(&[(1, &[1, 2, 3]), (2, &[2]), (3, &[1, 3]), (4, &[3, 4])]);
        let snap = log.snapshot_at(0);
        let dist = EvalDistribution::uniform(&snap);
        let items: Vec<ItemId> = snap.items().collect();
        let r = reference(&[
            (items[0], 0.4),
            (items[1], 0.3),
            (items[2], 0.2),
            (items[3], 0.1),
        ]);
        let free: BTreeSet<ItemId> = items.iter().copied().collect();
        let weights: BTreeMap<ItemId, f64> = items
            .iter()
            .enumerate()
            .map(|(n, &i)| (i, 0.5 + 0.7 * n as f64))
            .collect();
        let grad = gradient_of_divergence(&snap, &dist, &r, &free, &weights).unwrap();

        let objective = |w: &BTreeMap<ItemId, f64>| -> f64 {
            kl_divergence(&r, &marginal_under(&snap, &dist, w).unwrap()).unwrap()
        };
        for &a in &items {
            let h = 1e-6 * weights[&a];
            let mut up = weights.clone();
            up.insert(a, weights[&a] + h);
            let mut down = weights.clone();
            down.insert(a, weights[&a] - h);
            let fd = (objective(&up) - objective(&down)) / (2.0 * h);
            let g = grad[&a];
            let scale = g.abs().max(fd.abs()).max(1e-12);
            assert!(
                (g - fd).abs() / scale < 1e-4,
                "item {a}: analytic {g} vs fd {fd}"
            );
        }
    }

    #[test]
    fn gradient_is_orthogonal_to_uniform_scaling() {
        let log = log_from(&[(1, &[1, 2]), (2, &[2, 3]), (3, &[3])]);
        let snap = log.snapshot_at(0);
        let dist = EvalDistribution::uniform(&snap);
        let items: Vec<ItemId> = snap.items().collect();
        let weights: BTreeMap<ItemId, f64> = items
            .iter()
            .enumerate()
            .map(|(n, &i)| (i, 1.0 + n as f64))
            .collect();
        let r = reference(&[(items[0], 0.2), (items[1], 0.5), (items[2], 0.3)]);
        let free: BTreeSet<ItemId> = items.iter().copied().collect();
        let grad = gradient_of_divergence(&snap, &dist, &r, &free, &weights).unwrap();
        let along_scaling: f64 = items.iter().map(|i| weights[i] * grad[i]).sum();
        assert!(
            along_scaling.abs() < 1e-12,
            "directional derivative {along_scaling}"
        );
    }

    #[test]
    fn optimum_at_initialization_returns_unit_weights() {
        let log = log_from(&[(1, &[1]), (2, &[2])]);
        let snap = log.snapshot_at(0);
        let dist = EvalDistribution::uniform(&snap);
        let r = ReferenceMarginal::from_snapshot(&snap, &dist).unwrap();
        let solution =
            optimize_weights(&snap, &dist, &r, 2, &OptimizerOptions::default()).unwrap();
        assert!(solution.converged);
        assert_eq!(solution.iterations, 0);
        assert_eq!(solution.divergence_final, 0.0);
        assert!(solution.weights.values().all(|&w| w == 1.0));
    }

    #[test]
    fn two_item_system_reaches_near_zero_divergence() {
        let (log, snap) = skewed_instance();
        let dist = EvalDistribution::uniform(&snap);
        let i1 = log.item_id(1).unwrap();
        let i2 = log.item_id(2).unwrap();
        let r = reference(&[(i1, 0.5), (i2, 0.5)]);

        // Establishes that a near-zero divergence is attainable at all, by
        // grid search over weight pairs, before trusting the optimizer.
        let mut grid_best = f64::INFINITY;
        for a in 1..=100 {
            for b in 1..=100 {
                let w: BTreeMap<ItemId, f64> = [
                    (i1, a as f64 * 0.1),
                    (i2, (b as f64 * 0.1) / 1000.0),
                ]
                .into_iter()
                .collect();
                let m = marginal_under(&snap, &dist, &w).unwrap();
                grid_best = grid_best.min(kl_divergence(&r, &m).unwrap());
            }
        }
        assert!(grid_best < 1e-6, "grid floor {grid_best}");

        let solution =
            optimize_weights(&snap, &dist, &r, 2, &OptimizerOptions::default()).unwrap();
        assert!(
            solution.divergence_final < 1e-6,
            "final divergence {}",
            solution.divergence_final
        );
        let m = marginal_under(&snap, &dist, &solution.weights).unwrap();
        assert!((m[&i1] - 0.5).abs() < 1e-3);
        assert!((m[&i2] - 0.5).abs() < 1e-3);
        assert!(solution.divergence_initial > solution.divergence_final);
        assert!((solution.divergence_initial - 0.14384103622589045).abs() < 1e-12);
    }

    #[test]
    fn larger_p_does_not_increase_final_divergence() {
        // User C owns only i3, which pins the i3 marginal at 1/3 or more,
        // so the reference is unreachable and both optima are interior and
        // strictly positive. More freedom still has to help.
        let log = log_from(&[(1, &[1, 2]), (2, &[2, 3]), (3, &[3])]);
        let snap = log.snapshot_at(0);
        let dist = EvalDistribution::uniform(&snap);
        let r = reference(&[
            (log.item_id(1).unwrap(), 0.3),
            (log.item_id(2).unwrap(), 0.4),
            (log.item_id(3).unwrap(), 0.3),
        ]);
        let opts = OptimizerOptions::default();
        let d1 = optimize_weights(&snap, &dist, &r, 1, &opts)
            .unwrap()
            .divergence_final;
        let d2 = optimize_weights(&snap, &dist, &r, 2, &opts)
            .unwrap()
            .divergence_final;
        assert!(d2 <= d1 + 1e-12, "p=1 {d1} vs p=2 {d2}");
        assert!(d1 > 1e-6, "p=1 optimum unexpectedly reached zero: {d1}");
    }

    #[test]
    fn p_zero_returns_the_unit_solution() {
        let (_, snap) = skewed_instance();
        let dist = EvalDistribution::uniform(&snap);
        let r = reference(&[
            (snap.items().next().unwrap(), 0.5),
            (snap.items().nth(1).unwrap(), 0.5),
        ]);
        let solution =
            optimize_weights(&snap, &dist, &r, 0, &OptimizerOptions::default()).unwrap();
        assert!(solution.free_items.is_empty());
        assert_eq!(solution.divergence_final, solution.divergence_initial);
        assert!(solution.weights.values().all(|&w| w == 1.0));
        assert_eq!(solution.iterations, 0);
        assert!(solution.converged);
    }

    #[test]
    fn weights_csv_lists_all_items_sorted_by_external_id() {
        let (log, snap) = skewed_instance();
        let dist = EvalDistribution::uniform(&snap);
        let i1 = log.item_id(1).unwrap();
        let i2 = log.item_id(2).unwrap();
        let r = reference(&[(i1, 0.5), (i2, 0.5)]);
        let solution =
            optimize_weights(&snap, &dist, &r, 1, &OptimizerOptions::default()).unwrap();
        let csv = solution.to_csv_string(&log);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# p=1,divergence_initial="));
        assert!(header.contains(",iterations="));
        assert!(header.contains(",converged="));
        assert_eq!(lines.next().unwrap(), WEIGHTS_CSV_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with("1,"));
        assert!(rows[1].starts_with("2,"));
        assert_eq!(rows.iter().filter(|r| r.ends_with(",true")).count(), 1);
    }

    #[test]
    fn reference_csv_round_trips_values() {
        let log = log_from(&[(1, &[5, 9])]);
        let snap = log.snapshot_at(0);
        let dist = EvalDistribution::uniform(&snap);
        let r = ReferenceMarginal::from_snapshot(&snap, &dist).unwrap();
        let csv = r.to_csv_string(&log);
        assert_eq!(csv, "# day=0\nitem_id,probability\n5,0.5\n9,0.5\n");
    }

    proptest! {
        /// KL of valid distribution pairs is non-negative up to float
        /// noise, and restriction plus optimization never increases it.
        #[test]
        fn kl_is_nonnegative(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..8);
            let mut r: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let mut c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let rs: f64 = r.iter().sum();
            let cs: f64 = c.iter().sum();
            r.iter_mut().for_each(|x| *x /= rs);
            c.iter_mut().for_each(|x| *x /= cs);
            let rmap: BTreeMap<ItemId, f64> =
                r.iter().enumerate().map(|(i, &x)| (ItemId(i as u32), x)).collect();
            let cmap: BTreeMap<ItemId, f64> =
                c.iter().enumerate().map(|(i, &x)| (ItemId(i as u32), x)).collect();
            let reference = ReferenceMarginal::new(0, rmap).unwrap();
            let d = kl_divergence(&reference, &cmap).unwrap();
            prop_assert!(d >= -1e-12, "divergence {d}");
        }

        /// The optimizer never worsens the divergence it starts from.
        #[test]
        fn optimizer_improves_monotonically(
            events in proptest::collection::btree_set((0u64..6, 0u64..5), 2..16),
            ref_seed in 0u64..200,
            p in 1usize..5,
        ) {
            use rand::{Rng, SeedableRng};
            let mut log = InteractionLog::new();
            for &(u, i) in &events {
                log.record(u, i, 0);
            }
            let snap = log.snapshot_at(0);
            let dist = EvalDistribution::uniform(&snap);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ref_seed);
            let items: Vec<ItemId> = snap.items().collect();
            let raw: Vec<f64> = items.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let probs: BTreeMap<ItemId, f64> = items
                .iter()
                .zip(&raw)
                .map(|(&i, &x)| (i, x / total))
                .collect();
            let reference = ReferenceMarginal::new(0, probs).unwrap();
            let solution =
                optimize_weights(&snap, &dist, &reference, p, &OptimizerOptions::default())
                    .unwrap();
            prop_assert!(
                solution.divergence_final <= solution.divergence_initial + 1e-12,
                "{} -> {}",
                solution.divergence_initial,
                solution.divergence_final
            );
            for (&i, &w) in &solution.weights {
                prop_assert!(w >= 1e-9);
                if !solution.free_items.contains(&i) {
                    prop_assert!(w == 1.0);
                }
            }
        }
    }
}
