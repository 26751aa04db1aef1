//! Round orchestration: client fleet construction, model dispatch, local
//! training with budget fitting, table updates, aggregation and metrics.

pub mod data;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, ReturnedModel};
use crate::error::{Error, Result};
use crate::nn::{evaluate, init_params, local_train, Batch, ModelSpec, ParamSet, TrainConfig};
use crate::pruning::{build_pool, slice_to_widths, Level, LevelRatios, ModelPool};
use crate::rng::{derive_seed, rng_for, stream};
use crate::selection::{select_clients, update_tables, RlTables, SelectionRule};

pub use data::{partition_dirichlet, synthetic_clusters, DataDistribution, Dataset, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Curiosity and resource rewards (the full method).
    Adaptivefl,
    CuriosityOnly,
    ResourceOnly,
    Random,
    /// Always dispatch `L_1`; clients prune to fit.
    Greedy,
    /// Plain FedAvg of `L_1` with resource limits ignored.
    AllLarge,
    /// Independent S, M and L populations with no cross-level sharing.
    Decoupled,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Adaptivefl,
        Strategy::CuriosityOnly,
        Strategy::ResourceOnly,
        Strategy::Random,
        Strategy::Greedy,
        Strategy::AllLarge,
        Strategy::Decoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Adaptivefl => "adaptivefl",
            Strategy::CuriosityOnly => "curiosity-only",
            Strategy::ResourceOnly => "resource-only",
            Strategy::Random => "random",
            Strategy::Greedy => "greedy",
            Strategy::AllLarge => "all-large",
            Strategy::Decoupled => "decoupled",
        }
    }

    pub fn selection_rule(self) -> SelectionRule {
        match self {
            Strategy::Adaptivefl => SelectionRule::CuriosityResource,
            Strategy::CuriosityOnly => SelectionRule::Curiosity,
            Strategy::ResourceOnly => SelectionRule::Resource,
            _ => SelectionRule::Uniform,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Weak,
    Medium,
    Strong,
}

impl Strength {
    /// Level of the largest model this class can train.
    pub fn level(self) -> Level {
        match self {
            Strength::Weak => Level::S,
            Strength::Medium => Level::M,
            Strength::Strong => Level::L,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_clients: usize,
    pub clients_per_round: usize,
    /// Weak : medium : strong.
    pub proportions: [u32; 3],
    pub distribution: DataDistribution,
    pub rounds: usize,
    pub strategy: Strategy,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::InvalidScenario("need at least one client".into()));
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.n_clients {
            return Err(Error::InvalidScenario(format!(
                "clients_per_round must be in 1..={}, got {}",
                self.n_clients, self.clients_per_round
            )));
        }
        if self.proportions.iter().all(|&p| p == 0) {
            return Err(Error::InvalidScenario("proportions are all zero".into()));
        }
        Ok(())
    }

    /// Client counts per strength by largest remainder (ties to the weaker
    /// class).
    pub fn strength_counts(&self) -> [usize; 3] {
        let total: u64 = self.proportions.iter().map(|&p| p as u64).sum();
        let n = self.n_clients as u64;
        let mut counts = [0usize; 3];
        let mut rema = [(0u64, 0usize); 3];
        for (i, &p) in self.proportions.iter().enumerate() {
            counts[i] = (n * p as u64 / total) as usize;
            rema[i] = (n * p as u64 % total, i);
        }
        let assigned: usize = counts.iter().sum();
        rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in rema.iter().take(self.n_clients - assigned) {
            counts[i] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub ratios: LevelRatios,
    /// Starting layer per variant, variant 1 first; strictly decreasing.
    pub start_layers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Files { train: PathBuf, test: PathBuf },
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub scenario: Scenario,
    pub model: ModelSpec,
    pub pool: PoolConfig,
    /// `seed` is ignored; per-job seeds derive from `Experiment::seed`.
    pub train: TrainConfig,
    pub data: DataSource,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub id: usize,
    pub strength: Strength,
    /// Largest parameter count the client can train.
    pub capacity: u64,
    pub shard: Batch,
}

impl ClientState {
    pub fn data_size(&self) -> usize {
        self.shard.len()
    }
}

/// One model dispatch and what came back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispatch {
    pub client: usize,
    pub sent: usize,
    pub returned: usize,
    pub sent_label: String,
    pub returned_label: String,
    pub sent_size: u64,
    pub returned_size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub dispatches: Vec<Dispatch>,
    pub acc_full: f64,
    pub acc_l1: f64,
    pub acc_m1: f64,
    pub acc_s1: f64,
    /// Cumulative communication waste rate up to and including this round.
    pub waste_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<RlTables>,
}

impl RoundRecord {
    /// Mean of the L_1, M_1 and S_1 accuracies.
    pub fn acc_avg(&self) -> f64 {
        (self.acc_l1 + self.acc_m1 + self.acc_s1) / 3.0
    }
}

/// `1 - Σ returned size / Σ sent size`; 0 for an empty history.
pub fn comm_waste_rate(dispatches: &[Dispatch]) -> f64 {
    let sent: u64 = dispatches.iter().map(|d| d.sent_size).sum();
    let back: u64 = dispatches.iter().map(|d| d.returned_size).sum();
    if sent == 0 {
        0.0
    } else {
        1.0 - back as f64 / sent as f64
    }
}

#[derive(Debug, Clone)]
enum ServerModels {
    Shared(ParamSet),
    /// One full-size container per level, indexed by `Level::row`; only the
    /// level's representative slice is ever trained.
    Decoupled([ParamSet; 3]),
}

/// Server state for one experiment.
#[derive(Debug, Clone)]
pub struct Federation {
    spec: ModelSpec,
    pool: ModelPool,
    scenario: Scenario,
    train: TrainConfig,
    clients: Vec<ClientState>,
    test: Batch,
    models: ServerModels,
    tables: RlTables,
    seed: u64,
    round: usize,
    sent_total: u64,
    returned_total: u64,
    model_rng: ChaCha8Rng,
    select_rng: ChaCha8Rng,
}

/// Loads or generates the train/test data for `exp`.
pub fn load_data(exp: &Experiment) -> Result<(Dataset, Dataset)> {
    match &exp.data {
        DataSource::Synthetic(cfg) => synthetic_clusters(cfg, exp.seed),
        DataSource::Files { train, test } => Ok((Dataset::load(train)?, Dataset::load(test)?)),
    }
}

/// Draws a capacity for each strength class: weak clients hold the largest
/// S model but no M model, medium clients hold `M_1` but not `L_1`.
fn draw_capacity(strength: Strength, pool: &ModelPool, rng: &mut impl Rng) -> u64 {
    let size = |level, variant| pool.size(pool.index_of(level, variant).expect("pool entry"));
    let p = pool.p();
    match strength {
        Strength::Weak => rng.random_range(size(Level::S, 1)..size(Level::M, p)),
        Strength::Medium => rng.random_range(size(Level::M, 1)..size(Level::L, 1)),
        Strength::Strong => size(Level::L, 1),
    }
}

impl Federation {
    pub fn new(exp: &Experiment) -> Result<Self> {
        let (train_set, test_set) = load_data(exp)?;
        Self::with_data(exp, train_set, test_set)
    }

    pub fn with_data(exp: &Experiment, train_set: Dataset, test_set: Dataset) -> Result<Self> {
        let spec = &exp.model;
        spec.validate()?;
        exp.scenario.validate()?;
        exp.train.validate()?;
        if train_set.samples.n_features() != spec.input_dim() || train_set.classes != spec.classes() {
            return Err(Error::InvalidScenario(format!(
                "data has {} features and {} classes but the model expects {} and {}",
                train_set.samples.n_features(),
                train_set.classes,
                spec.input_dim(),
                spec.classes()
            )));
        }
        if test_set.is_empty() {
            return Err(Error::EmptyData("test set is empty".into()));
        }
        let pool = build_pool(spec, exp.pool.ratios, &exp.pool.start_layers)?;
        let shards = partition_dirichlet(
            &train_set.samples.labels,
            train_set.classes,
            exp.scenario.n_clients,
            exp.scenario.distribution,
            exp.seed,
        )?;

        let counts = exp.scenario.strength_counts();
        let strengths = [Strength::Weak, Strength::Medium, Strength::Strong]
            .into_iter()
            .zip(counts)
            .flat_map(|(s, n)| std::iter::repeat_n(s, n));
        let mut cap_rng = rng_for(exp.seed, &[stream::CAPACITY]);
        let clients: Vec<ClientState> = strengths
            .zip(shards)
            .enumerate()
            .map(|(id, (strength, idx))| ClientState {
                id,
                strength,
                capacity: draw_capacity(strength, &pool, &mut cap_rng),
                shard: train_set.samples.subset(&idx),
            })
            .collect();

        let global = init_params(spec, derive_seed(exp.seed, &[stream::INIT]))?;
        let models = if exp.scenario.strategy == Strategy::Decoupled {
            ServerModels::Decoupled([global.clone(), global.clone(), global])
        } else {
            ServerModels::Shared(global)
        };
        Ok(Self {
            spec: spec.clone(),
            tables: RlTables::new(&pool, clients.len()),
            pool,
            scenario: exp.scenario.clone(),
            train: exp.train.clone(),
            clients,
            test: test_set.samples,
            models,
            seed: exp.seed,
            round: 0,
            sent_total: 0,
            returned_total: 0,
            model_rng: rng_for(exp.seed, &[stream::MODEL_DRAW]),
            select_rng: rng_for(exp.seed, &[stream::CLIENT_SELECT]),
        })
    }

    pub fn pool(&self) -> &ModelPool {
        &self.pool
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn tables(&self) -> &RlTables {
        &self.tables
    }

    pub fn rounds_done(&self) -> usize {
        self.round
    }

    /// The full model; for the decoupled baseline, the L-level model.
    pub fn global(&self) -> &ParamSet {
        match &self.models {
            ServerModels::Shared(g) => g,
            ServerModels::Decoupled(m) => &m[Level::L.row()],
        }
    }

    fn representative(&self, level: Level) -> usize {
        self.pool.index_of(level, 1).expect("every level has variant 1")
    }

    fn model_for(&self, level: Level) -> &ParamSet {
        match &self.models {
            ServerModels::Shared(g) => g,
            ServerModels::Decoupled(m) => &m[level.row()],
        }
    }

    /// Pool entries to dispatch this round.
    fn draw_dispatch(&mut self) -> Vec<usize> {
        let k = self.scenario.clients_per_round;
        match self.scenario.strategy {
            Strategy::Greedy | Strategy::AllLarge => vec![self.pool.top(); k],
            _ => (0..k)
                .map(|_| self.model_rng.random_range(0..self.pool.len()))
                .collect(),
        }
    }

    fn train_job(&self, source: &ParamSet, client: usize, sent: usize, returned: usize) -> Result<ReturnedModel> {
        let c = &self.clients[client];
        let received = self.pool.prune(source, sent)?;
        let local = slice_to_widths(&received, self.pool.widths(returned))?;
        let cfg = TrainConfig {
            seed: derive_seed(self.seed, &[stream::LOCAL_TRAIN, self.round as u64, client as u64]),
            ..self.train.clone()
        };
        Ok(ReturnedModel {
            client_id: client,
            params: local_train(&local, &c.shard, &cfg)?,
            cfg: *self.pool.entry(returned),
            data_size: c.data_size(),
        })
    }

    /// Runs one round and returns its record.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        self.round += 1;
        let all: Vec<usize> = (0..self.clients.len()).collect();
        let strategy = self.scenario.strategy;

        let (dispatch, chosen) = if strategy == Strategy::Decoupled {
            let chosen = select_clients(
                SelectionRule::Uniform,
                &self.pool,
                &vec![self.pool.top(); self.scenario.clients_per_round],
                &all,
                &self.tables,
                &mut self.select_rng,
            )?;
            let dispatch = chosen
                .iter()
                .map(|&c| self.representative(self.clients[c].strength.level()))
                .collect();
            (dispatch, chosen)
        } else {
            let dispatch = self.draw_dispatch();
            let chosen = select_clients(
                strategy.selection_rule(),
                &self.pool,
                &dispatch,
                &all,
                &self.tables,
                &mut self.select_rng,
            )?;
            (dispatch, chosen)
        };

        let mut jobs = Vec::with_capacity(dispatch.len());
        for (&sent, &client) in dispatch.iter().zip(&chosen) {
            let returned = if strategy == Strategy::AllLarge {
                sent
            } else {
                self.pool.fit_index(sent, self.clients[client].capacity)?
            };
            jobs.push((client, sent, returned));
        }
        jobs.sort_by_key(|j| j.0);

        let results: Vec<ReturnedModel> = jobs
            .par_iter()
            .map(|&(client, sent, returned)| {
                let level = self.pool.level_of(sent);
                self.train_job(self.model_for(level), client, sent, returned)
            })
            .collect::<Result<_>>()?;

        let mut dispatches = Vec::with_capacity(jobs.len());
        for &(client, sent, returned) in &jobs {
            update_tables(&mut self.tables, &self.pool, sent, returned, client)?;
            let (sent_size, returned_size) = (self.pool.size(sent), self.pool.size(returned));
            self.sent_total += sent_size;
            self.returned_total += returned_size;
            dispatches.push(Dispatch {
                client,
                sent,
                returned,
                sent_label: self.pool.entry(sent).label(),
                returned_label: self.pool.entry(returned).label(),
                sent_size,
                returned_size,
            });
        }

        match &mut self.models {
            ServerModels::Shared(global) => {
                *global = aggregate(global, &results, &self.spec)?;
            }
            ServerModels::Decoupled(models) => {
                for level in Level::ALL {
                    let group: Vec<ReturnedModel> = results
                        .iter()
                        .filter(|r| r.cfg.level == level)
                        .cloned()
                        .collect();
                    if !group.is_empty() {
                        let m = &mut models[level.row()];
                        *m = aggregate(m, &group, &self.spec)?;
                    }
                }
            }
        }

        let acc = |level: Level| -> Result<f64> {
            let idx = self.representative(level);
            evaluate(&self.pool.prune(self.model_for(level), idx)?, &self.test)
        };
        let acc_l1 = acc(Level::L)?;
        let record = RoundRecord {
            round: self.round,
            dispatches,
            acc_full: acc_l1,
            acc_l1,
            acc_m1: acc(Level::M)?,
            acc_s1: acc(Level::S)?,
            waste_rate: if self.sent_total == 0 {
                0.0
            } else {
                1.0 - self.returned_total as f64 / self.sent_total as f64
            },
            tables: match strategy.selection_rule() {
                SelectionRule::Uniform => None,
                _ => Some(self.tables.clone()),
            },
        };
        Ok(record)
    }

    /// Runs the remaining rounds of the scenario.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        let remaining = self.scenario.rounds.saturating_sub(self.round);
        (0..remaining).map(|_| self.run_round()).collect()
    }
}

/// Builds the fleet and runs every round of `exp`.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<RoundRecord>> {
    Federation::new(exp)?.run()
}
