//! Table-driven client selection.
//!
//! The curiosity table counts, per size level, how often each client was sent
//! or returned a model of that level. The resource table keeps a training
//! score per pool entry and client; it grows when a client trains what it was
//! sent and is penalised above the returned entry when the client had to
//! prune. Rewards derived from both drive a categorical choice of client for
//! every dispatched model.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pruning::{Level, ModelPool};

/// Upper bound applied to the resource reward before it is combined.
pub const RESOURCE_REWARD_CAP: f64 = 0.5;

/// Selection counts per level (rows S, M, L) and client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuriosityTable {
    rows: Vec<Vec<u64>>,
}

impl CuriosityTable {
    pub fn new(clients: usize) -> Self {
        Self {
            rows: vec![vec![1; clients]; 3],
        }
    }

    pub fn get(&self, level: Level, client: usize) -> u64 {
        self.rows[level.row()][client]
    }

    /// Counts start at 1 and `R_c` divides by their root, so 0 is rejected.
    pub fn set(&mut self, level: Level, client: usize, count: u64) {
        assert!(count >= 1, "curiosity counts are at least 1");
        self.rows[level.row()][client] = count;
    }

    fn bump(&mut self, level: Level, client: usize) {
        self.rows[level.row()][client] += 1;
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }
}

/// Training scores per pool entry (row 0 = smallest entry) and client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceTable {
    rows: Vec<Vec<u64>>,
}

impl ResourceTable {
    pub fn new(entries: usize, clients: usize) -> Self {
        Self {
            rows: vec![vec![1; clients]; entries],
        }
    }

    pub fn get(&self, entry: usize, client: usize) -> u64 {
        self.rows[entry][client]
    }

    pub fn set(&mut self, entry: usize, client: usize, value: u64) {
        self.rows[entry][client] = value;
    }

    /// One client's scores, bottom to top of the pool.
    pub fn column(&self, client: usize) -> Vec<u64> {
        self.rows.iter().map(|r| r[client]).collect()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RlTables {
    pub curiosity: CuriosityTable,
    pub resource: ResourceTable,
}

impl RlTables {
    pub fn new(pool: &ModelPool, clients: usize) -> Self {
        Self {
            curiosity: CuriosityTable::new(clients),
            resource: ResourceTable::new(pool.len(), clients),
        }
    }

    pub fn clients(&self) -> usize {
        self.curiosity.rows[0].len()
    }
}

/// Which rewards drive the choice of client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionRule {
    /// `min(0.5, R_s) * R_c`.
    CuriosityResource,
    /// `R_c` only.
    Curiosity,
    /// `R_s` only.
    Resource,
    /// Every client equally likely.
    Uniform,
}

/// Resource reward of `client` for pool entry `entry`.
///
/// For each variant row `k` of the entry's level, the numerator adds the
/// scores from row `k` to the top of the pool; the denominator is `p` times
/// the client's column total. A zero column yields 0.
pub fn resource_reward(pool: &ModelPool, entry: usize, client: usize, resource: &ResourceTable) -> f64 {
    let column = resource.column(client);
    let total: u64 = column.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let numerator: u64 = pool
        .level_range(pool.level_of(entry))
        .map(|k| column[k..].iter().sum::<u64>())
        .sum();
    numerator as f64 / (pool.p() as f64 * total as f64)
}

pub fn curiosity_reward(level: Level, client: usize, curiosity: &CuriosityTable) -> f64 {
    1.0 / (curiosity.get(level, client) as f64).sqrt()
}

/// `min(0.5, resource) * curiosity`.
pub fn combine_rewards(resource: f64, curiosity: f64) -> f64 {
    resource.min(RESOURCE_REWARD_CAP) * curiosity
}

pub fn combined_reward(pool: &ModelPool, entry: usize, client: usize, tables: &RlTables) -> f64 {
    combine_rewards(
        resource_reward(pool, entry, client, &tables.resource),
        curiosity_reward(pool.level_of(entry), client, &tables.curiosity),
    )
}

pub fn reward(rule: SelectionRule, pool: &ModelPool, entry: usize, client: usize, tables: &RlTables) -> f64 {
    match rule {
        SelectionRule::CuriosityResource => combined_reward(pool, entry, client, tables),
        SelectionRule::Curiosity => curiosity_reward(pool.level_of(entry), client, &tables.curiosity),
        SelectionRule::Resource => resource_reward(pool, entry, client, &tables.resource),
        SelectionRule::Uniform => 1.0,
    }
}

/// Selection probability of each client in `candidates` for `entry`,
/// uniform when every reward is zero.
pub fn selection_probabilities(
    rule: SelectionRule,
    pool: &ModelPool,
    entry: usize,
    candidates: &[usize],
    tables: &RlTables,
) -> Vec<f64> {
    let rewards: Vec<f64> = candidates
        .iter()
        .map(|&c| reward(rule, pool, entry, c, tables))
        .collect();
    let total: f64 = rewards.iter().sum();
    if total > 0.0 {
        rewards.iter().map(|r| r / total).collect()
    } else {
        vec![1.0 / candidates.len() as f64; candidates.len()]
    }
}

/// Assigns a distinct client to each dispatched pool entry, in order.
///
/// Each pick samples from the reward distribution over the clients still
/// unassigned this round.
pub fn select_clients<R: Rng + ?Sized>(
    rule: SelectionRule,
    pool: &ModelPool,
    dispatch: &[usize],
    eligible: &[usize],
    tables: &RlTables,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if dispatch.len() > eligible.len() {
        return Err(Error::InvalidScenario(format!(
            "{} dispatches but only {} eligible clients",
            dispatch.len(),
            eligible.len()
        )));
    }
    let mut remaining = eligible.to_vec();
    let mut chosen = Vec::with_capacity(dispatch.len());
    for &entry in dispatch {
        let rewards: Vec<f64> = remaining
            .iter()
            .map(|&c| reward(rule, pool, entry, c, tables))
            .collect();
        let pick = match WeightedIndex::new(&rewards) {
            Ok(dist) => dist.sample(rng),
            Err(_) => rng.random_range(0..remaining.len()),
        };
        chosen.push(remaining.remove(pick));
    }
    Ok(chosen)
}

/// Applies the post-dispatch update for one `(sent, returned)` pair.
pub fn update_tables(
    tables: &mut RlTables,
    pool: &ModelPool,
    sent: usize,
    returned: usize,
    client: usize,
) -> Result<()> {
    if !pool.is_sub_slice(returned, sent) {
        return Err(Error::NotSubSlice(format!(
            "{} returned for {}",
            pool.entry(returned).label(),
            pool.entry(sent).label()
        )));
    }
    if client >= tables.clients() {
        return Err(Error::InvalidScenario(format!("unknown client {client}")));
    }
    tables.curiosity.bump(pool.level_of(sent), client);
    tables.curiosity.bump(pool.level_of(returned), client);

    let top = pool.top();
    let p = pool.p() as u64;
    let rows = &mut tables.resource.rows;
    if sent == returned {
        for row in &mut rows[sent..=top] {
            row[client] += 1;
        }
        rows[top][client] += p - 1;
    } else {
        rows[returned][client] += p;
        for (penalty, row) in rows[returned..=top].iter_mut().enumerate() {
            row[client] = row[client].saturating_sub(penalty as u64);
        }
    }
    Ok(())
}
