//! Point-in-time views of the adoption log.

use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{ItemId, UserId};
use crate::log::InteractionLog;

/// User profiles as of the end of a given day.
///
/// Holds every event with day <= the snapshot day, indexed both as
/// user -> items and as its exact transpose item -> users. Users and items
/// without any event by that day are absent, so every present user has a
/// non-empty profile.
#[derive(Debug, Clone)]
pub struct Snapshot {
    day: u32,
    user_items: BTreeMap<UserId, BTreeSet<ItemId>>,
    item_users: BTreeMap<ItemId, BTreeSet<UserId>>,
}

impl Snapshot {
    /// Builds the snapshot of `log` at the end of `day`.
    pub fn at(log: &InteractionLog, day: u32) -> Snapshot {
        let mut user_items: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
        let mut item_users: BTreeMap<ItemId, BTreeSet<UserId>> = BTreeMap::new();
        for (u, i, d) in log.events() {
            if d <= day {
                user_items.entry(u).or_default().insert(i);
                item_users.entry(i).or_default().insert(u);
            }
        }
        Snapshot {
            day,
            user_items,
            item_users,
        }
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn n_users(&self) -> usize {
        self.user_items.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_users.len()
    }

    pub fn n_events(&self) -> usize {
        self.user_items.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.user_items.is_empty()
    }

    pub fn contains_user(&self, user: UserId) -> bool {
        self.user_items.contains_key(&user)
    }

    pub fn contains_item(&self, item: ItemId) -> bool {
        self.item_users.contains_key(&item)
    }

    /// Users in ascending dense id order.
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.user_items.keys().copied()
    }

    /// Items in ascending dense id order.
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.item_users.keys().copied()
    }

    pub fn items_of(&self, user: UserId) -> Option<&BTreeSet<ItemId>> {
        self.user_items.get(&user)
    }

    pub fn users_of(&self, item: ItemId) -> Option<&BTreeSet<UserId>> {
        self.item_users.get(&item)
    }

    /// One past the largest dense user index present, usable as a capacity
    /// for index-addressed scratch buffers.
    pub fn user_index_bound(&self) -> usize {
        self.user_items
            .keys()
            .next_back()
            .map_or(0, |u| u.index() + 1)
    }

    /// One past the largest dense item index present.
    pub fn item_index_bound(&self) -> usize {
        self.item_users
            .keys()
            .next_back()
            .map_or(0, |i| i.index() + 1)
    }
}
