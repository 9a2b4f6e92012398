//! Append-only adoption log and its CSV serialization.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::snapshot::Snapshot;

pub const LOG_CSV_HEADER: &str = "user_id,item_id,day";

/// Set of (user, item, day) adoption events.
///
/// External ids are arbitrary `u64` values taken from the input; dense
/// [`UserId`] and [`ItemId`] indexes are assigned in first-seen order and
/// used by everything downstream. Each (user, item) pair is stored once
/// with its earliest adoption day.
#[derive(Debug, Clone, Default)]
pub struct InteractionLog {
    adoption_day: BTreeMap<(UserId, ItemId), u32>,
    users: Vec<u64>,
    items: Vec<u64>,
    user_index: HashMap<u64, UserId>,
    item_index: HashMap<u64, ItemId>,
}

impl InteractionLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one adoption event. A duplicate (user, item) pair keeps the
    /// earliest day seen so far.
    pub fn record(&mut self, user: u64, item: u64, day: u32) -> (UserId, ItemId) {
        let u = self.intern_user(user);
        let i = self.intern_item(item);
        let entry = self.adoption_day.entry((u, i)).or_insert(day);
        if day < *entry {
            *entry = day;
        }
        (u, i)
    }

    fn intern_user(&mut self, external: u64) -> UserId {
        if let Some(&u) = self.user_index.get(&external) {
            return u;
        }
        let u = UserId(self.users.len() as u32);
        self.users.push(external);
        self.user_index.insert(external, u);
        u
    }

    fn intern_item(&mut self, external: u64) -> ItemId {
        if let Some(&i) = self.item_index.get(&external) {
            return i;
        }
        let i = ItemId(self.items.len() as u32);
        self.items.push(external);
        self.item_index.insert(external, i);
        i
    }

    pub fn n_events(&self) -> usize {
        self.adoption_day.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adoption_day.is_empty()
    }

    pub fn user_id(&self, external: u64) -> Option<UserId> {
        self.user_index.get(&external).copied()
    }

    pub fn item_id(&self, external: u64) -> Option<ItemId> {
        self.item_index.get(&external).copied()
    }

    /// External id of a dense user index.
    ///
    /// Panics if the index was not assigned by this log.
    pub fn external_user(&self, user: UserId) -> u64 {
        self.users[user.index()]
    }

    /// External id of a dense item index.
    ///
    /// Panics if the index was not assigned by this log.
    pub fn external_item(&self, item: ItemId) -> u64 {
        self.items[item.index()]
    }

    /// External item ids in ascending order.
    pub fn external_items_sorted(&self) -> Vec<u64> {
        let mut ids = self.items.clone();
        ids.sort_unstable();
        ids
    }

    /// All events as (user, item, earliest day), ordered by dense ids.
    pub fn events(&self) -> impl Iterator<Item = (UserId, ItemId, u32)> + '_ {
        self.adoption_day.iter().map(|(&(u, i), &d)| (u, i, d))
    }

    /// Day of the latest event, if any.
    pub fn last_day(&self) -> Option<u32> {
        self.adoption_day.values().max().copied()
    }

    /// State of all profiles at the end of `day` (events with day <= `day`).
    pub fn snapshot_at(&self, day: u32) -> Snapshot {
        Snapshot::at(self, day)
    }

    /// Parses the `user_id,item_id,day` CSV format. `source_name` labels
    /// parse errors (usually the file name).
    pub fn from_csv_str(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end() == LOG_CSV_HEADER => {}
            Some((_, header)) => {
                return Err(Error::parse(
                    source_name,
                    1,
                    format!("expected header '{LOG_CSV_HEADER}', got '{}'", header.trim_end()),
                ));
            }
            None => return Err(Error::parse(source_name, 1, "empty input")),
        }
        let mut log = InteractionLog::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let user = parse_field::<u64>(&mut fields, "user_id", source_name, line_no)?;
            let item = parse_field::<u64>(&mut fields, "item_id", source_name, line_no)?;
            let day = parse_field::<u32>(&mut fields, "day", source_name, line_no)?;
            if fields.next().is_some() {
                return Err(Error::parse(source_name, line_no, "too many fields"));
            }
            log.record(user, item, day);
        }
        Ok(log)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    /// Serializes the log with rows sorted by (day, user id, item id),
    /// using external ids. The output is byte-stable for equal logs.
    pub fn to_csv_string(&self) -> String {
        let mut rows: Vec<(u32, u64, u64)> = self
            .events()
            .map(|(u, i, d)| (d, self.external_user(u), self.external_item(i)))
            .collect();
        rows.sort_unstable();
        let mut out = String::with_capacity(rows.len() * 12 + LOG_CSV_HEADER.len() + 1);
        out.push_str(LOG_CSV_HEADER);
        out.push('\n');
        for (day, user, item) in rows {
            writeln!(out, "{user},{item},{day}").expect("write to string");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

fn parse_field<'a, T: std::str::FromStr>(
    fields: &mut impl Iterator<Item = &'a str>,
    name: &str,
    source_name: &str,
    line_no: usize,
) -> Result<T> {
    let raw = fields
        .next()
        .ok_or_else(|| Error::parse(source_name, line_no, format!("missing field '{name}'")))?;
    raw.trim().parse::<T>().map_err(|_| {
        Error::parse(source_name, line_no, format!("invalid {name} '{}'", raw.trim()))
    })
}
