//! Synthetic adoption histories with recommendation-campaign feedback.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::log::InteractionLog;
use crate::recommend::{AlgorithmSpec, CosineCf, NaiveCf, ProfileView, Recommender};

/// One scheduled recommendation push.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    /// Day the push runs; must be at least 1 and before the horizon.
    pub day: u32,
    pub algorithm: AlgorithmSpec,
    /// Recommendations served per user.
    pub k: usize,
    /// Probability that a user adopts one recommended unowned item.
    pub acceptance_prob: f64,
}

/// Generative model of an adoption log: users draw items from a fixed
/// Zipf popularity, punctuated by campaigns that push algorithmic
/// recommendations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_users: u32,
    pub n_items: u32,
    /// Number of simulated days; events carry days 0 to horizon_days - 1.
    pub horizon_days: u32,
    /// Per user-day probability of one organic adoption.
    pub organic_rate: f64,
    /// Zipf exponent of the item popularity; item 0 is the most popular.
    pub popularity_skew: f64,
    pub campaigns: Vec<CampaignSpec>,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The stock scenario exercised by the crate's tests: a desk-size
    /// system with two mid-horizon cosine campaigns.
    pub fn default_scenario() -> ScenarioConfig {
        let campaign = |day: u32| CampaignSpec {
            day,
            algorithm: AlgorithmSpec::parse("cosine_cf").expect("known algorithm"),
            k: 5,
            acceptance_prob: 0.3,
        };
        ScenarioConfig {
            n_users: 2000,
            n_items: 60,
            horizon_days: 200,
            organic_rate: 0.02,
            popularity_skew: 1.1,
            campaigns: vec![campaign(110), campaign(160)],
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidScenario(msg));
        if self.n_users == 0 {
            return fail("n_users must be at least 1".into());
        }
        if self.n_items == 0 {
            return fail("n_items must be at least 1".into());
        }
        if self.horizon_days == 0 {
            return fail("horizon_days must be at least 1".into());
        }
        if !self.organic_rate.is_finite() || !(0.0..=1.0).contains(&self.organic_rate) {
            return fail(format!("organic_rate {} outside [0, 1]", self.organic_rate));
        }
        if !self.popularity_skew.is_finite() || self.popularity_skew < 0.0 {
            return fail(format!("popularity_skew {} is negative", self.popularity_skew));
        }
        for c in &self.campaigns {
            if c.day == 0 || c.day >= self.horizon_days {
                return fail(format!(
                    "campaign day {} outside 1..{}",
                    c.day, self.horizon_days
                ));
            }
            if c.k == 0 {
                return fail(format!("campaign at day {} has k = 0", c.day));
            }
            if !c.acceptance_prob.is_finite() || !(0.0..=1.0).contains(&c.acceptance_prob) {
                return fail(format!(
                    "campaign at day {} has acceptance_prob {} outside [0, 1]",
                    c.day, c.acceptance_prob
                ));
            }
            if let AlgorithmSpec::Constant { items } = &c.algorithm {
                let distinct: BTreeSet<u64> = match items {
                    Some(list) => list.iter().copied().collect(),
                    None => (0..self.n_items as u64).collect(),
                };
                if let Some(&bad) = distinct.iter().find(|&&i| i >= self.n_items as u64) {
                    return fail(format!(
                        "campaign at day {} lists item {bad} outside 0..{}",
                        c.day, self.n_items
                    ));
                }
                if distinct.len() < c.k {
                    return fail(format!(
                        "campaign at day {} needs {} distinct items, has {}",
                        c.day,
                        c.k,
                        distinct.len()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parses the plain-text `key = value` format. Scalar keys are
    /// n_users, n_items, horizon_days, organic_rate, popularity_skew and
    /// the optional seed (default 0); each may appear once. `campaign`
    /// may repeat, its value being `DAY ALGORITHM K ACCEPTANCE_PROB`.
    /// Lines starting with `#` and blank lines are skipped.
    pub fn parse_str(text: &str, source_name: &str) -> Result<ScenarioConfig> {
        let mut n_users: Option<u32> = None;
        let mut n_items: Option<u32> = None;
        let mut horizon_days: Option<u32> = None;
        let mut organic_rate: Option<f64> = None;
        let mut popularity_skew: Option<f64> = None;
        let mut seed: Option<u64> = None;
        let mut campaigns = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(source_name, line_no, "expected 'key = value'")
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "n_users" => set_scalar(&mut n_users, key, value, source_name, line_no)?,
                "n_items" => set_scalar(&mut n_items, key, value, source_name, line_no)?,
                "horizon_days" => {
                    set_scalar(&mut horizon_days, key, value, source_name, line_no)?
                }
                "organic_rate" => {
                    set_scalar(&mut organic_rate, key, value, source_name, line_no)?
                }
                "popularity_skew" => {
                    set_scalar(&mut popularity_skew, key, value, source_name, line_no)?
                }
                "seed" => set_scalar(&mut seed, key, value, source_name, line_no)?,
                "campaign" => {
                    campaigns.push(parse_campaign(value, source_name, line_no)?);
                }
                _ => {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("unknown key '{key}'"),
                    ));
                }
            }
        }

        let config = ScenarioConfig {
            n_users: require(source_name, "n_users", n_users)?,
            n_items: require(source_name, "n_items", n_items)?,
            horizon_days: require(source_name, "horizon_days", horizon_days)?,
            organic_rate: require(source_name, "organic_rate", organic_rate)?,
            popularity_skew: require(source_name, "popularity_skew", popularity_skew)?,
            campaigns,
            seed: seed.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        ScenarioConfig::parse_str(&text, &path.display().to_string())
    }
}

fn require<T>(source_name: &str, name: &str, value: Option<T>) -> Result<T> {
    value.ok_or_else(|| Error::parse(source_name, 1, format!("missing key '{name}'")))
}

fn set_scalar<T: std::str::FromStr>(
    slot: &mut Option<T>,
    key: &str,
    value: &str,
    source_name: &str,
    line_no: usize,
) -> Result<()> {
    if slot.is_some() {
        return Err(Error::parse(
            source_name,
            line_no,
            format!("duplicate key '{key}'"),
        ));
    }
    let parsed = value.parse::<T>().map_err(|_| {
        Error::parse(source_name, line_no, format!("invalid value '{value}' for '{key}'"))
    })?;
    *slot = Some(parsed);
    Ok(())
}

fn parse_campaign(value: &str, source_name: &str, line_no: usize) -> Result<CampaignSpec> {
    let fields: Vec<&str> = value.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::parse(
            source_name,
            line_no,
            "campaign wants 'DAY ALGORITHM K ACCEPTANCE_PROB'",
        ));
    }
    let day = fields[0].parse::<u32>().map_err(|_| {
        Error::parse(source_name, line_no, format!("invalid campaign day '{}'", fields[0]))
    })?;
    let algorithm = AlgorithmSpec::parse(fields[1]).map_err(|e| {
        Error::parse(source_name, line_no, e.to_string())
    })?;
    let k = fields[2].parse::<usize>().map_err(|_| {
        Error::parse(source_name, line_no, format!("invalid campaign k '{}'", fields[2]))
    })?;
    let acceptance_prob = fields[3].parse::<f64>().map_err(|_| {
        Error::parse(
            source_name,
            line_no,
            format!("invalid acceptance probability '{}'", fields[3]),
        )
    })?;
    Ok(CampaignSpec {
        day,
        algorithm,
        k,
        acceptance_prob,
    })
}

fn zipf_weights(n_items: u32, skew: f64) -> Vec<f64> {
    (1..=n_items as u64)
        .map(|rank| (rank as f64).powf(-skew))
        .collect()
}

/// One Zipf draw over the items outside `owned`; `None` when every item
/// is owned.
fn sample_unowned<R: Rng + ?Sized>(
    zipf: &[f64],
    owned: &BTreeSet<u32>,
    rng: &mut R,
) -> Option<u32> {
    let mut total = 0.0;
    for (idx, w) in zipf.iter().enumerate() {
        if !owned.contains(&(idx as u32)) {
            total += w;
        }
    }
    if total <= 0.0 {
        return None;
    }
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_free = None;
    for (idx, w) in zipf.iter().enumerate() {
        let idx = idx as u32;
        if owned.contains(&idx) {
            continue;
        }
        acc += w;
        last_free = Some(idx);
        if r < acc {
            return Some(idx);
        }
    }
    last_free
}

/// Day-0 profiles: each user draws one to three distinct items (clamped
/// to the catalogue size) from the Zipf popularity.
pub fn seed_population<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Vec<BTreeSet<u32>> {
    let zipf = zipf_weights(config.n_items, config.popularity_skew);
    (0..config.n_users)
        .map(|_| {
            let want = rng.random_range(1usize..=3).min(config.n_items as usize);
            let mut owned = BTreeSet::new();
            while owned.len() < want {
                let item = sample_unowned(&zipf, &owned, rng)
                    .expect("want is clamped to the catalogue size");
                owned.insert(item);
            }
            owned
        })
        .collect()
}

/// Runs the scenario and returns its full adoption log. Deterministic for
/// a fixed config: one sequential random stream drives seeding, organic
/// draws in user order, then campaign acceptance draws in user and rank
/// order.
pub fn generate(config: &ScenarioConfig) -> Result<InteractionLog> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let zipf = zipf_weights(config.n_items, config.popularity_skew);

    let mut owned = seed_population(config, &mut rng);
    let mut log = InteractionLog::new();
    for (u, items) in owned.iter().enumerate() {
        for &i in items {
            log.record(u as u64, i as u64, 0);
        }
    }

    for day in 1..config.horizon_days {
        let todays: Vec<&CampaignSpec> =
            config.campaigns.iter().filter(|c| c.day == day).collect();
        // Campaign recommendations must see yesterday's profiles, not the
        // adoptions made earlier in this loop iteration.
        let yesterdays_owned = if todays.is_empty() {
            None
        } else {
            Some(owned.clone())
        };

        for u in 0..config.n_users as usize {
            if rng.random::<f64>() < config.organic_rate {
                if let Some(item) = sample_unowned(&zipf, &owned[u], &mut rng) {
                    owned[u].insert(item);
                    log.record(u as u64, item as u64, day);
                }
            }
        }

        if todays.is_empty() {
            continue;
        }
        let yesterdays_owned = yesterdays_owned.expect("cloned when campaigns exist");
        let snapshot = log.snapshot_at(day - 1);
        for campaign in todays {
            let recommender: Option<Box<dyn Recommender>> = match &campaign.algorithm {
                AlgorithmSpec::Constant { .. } => None,
                AlgorithmSpec::CosineCf { norm } => Some(Box::new(CosineCf::new(*norm))),
                AlgorithmSpec::NaiveCf => Some(Box::new(NaiveCf)),
            };
            for u in 0..config.n_users as usize {
                let recommended: Vec<u32> = match &campaign.algorithm {
                    AlgorithmSpec::Constant { items } => {
                        let listed: Vec<u32> = match items {
                            Some(list) => list.iter().map(|&i| i as u32).collect(),
                            None => (0..config.n_items).collect(),
                        };
                        listed
                            .into_iter()
                            .filter(|i| !yesterdays_owned[u].contains(i))
                            .take(campaign.k)
                            .collect()
                    }
                    _ => {
                        let recommender = recommender.as_deref().expect("built above");
                        let dense_user = log
                            .user_id(u as u64)
                            .expect("every user has day-0 events");
                        let profile = snapshot
                            .items_of(dense_user)
                            .expect("day-0 profiles are never empty");
                        recommender
                            .recommend(
                                &snapshot,
                                Some(dense_user),
                                ProfileView::full(profile),
                                campaign.k,
                            )
                            .items()
                            .iter()
                            .map(|&i| log.external_item(i) as u32)
                            .collect()
                    }
                };
                for item in recommended {
                    if owned[u].contains(&item) {
                        continue;
                    }
                    if rng.random::<f64>() < campaign.acceptance_prob {
                        owned[u].insert(item);
                        log.record(u as u64, item as u64, day);
                    }
                }
            }
        }
    }
    Ok(log)
}
