//! The replication engine: per-dataset metric, greedy replica removal and
//! addition, LRU/LFU baseline rankings, and the long-term purge.
//!
//! Every dataset on disk carries the metric `M = forecast / n_replicas`
//! (recomputed after every mutation). Freeing space removes a replica from
//! the dataset with the smallest `M` among those with at least two
//! replicas — the very last disk replica is never removed by `free_space`;
//! only the long-term purge may drop a dataset to zero replicas, and the
//! tape copy it could be restored from is implicit. Filling space adds a
//! replica to the dataset with the largest `M` that still fits.
//!
//! Tie-breaking is fully specified so every run is reproducible:
//! removal prefers (smaller metric, larger size, smaller id), addition
//! prefers (larger metric, larger forecast, smaller size, smaller id).
//!
//! Every mutation is appended to an [`ActionLog`]; replaying a log over the
//! initial state reproduces the final replica counts and byte accounting
//! exactly.

mod sim;

pub use sim::{run_simulation, Policy, SimConfig, SimError, SimResult};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::features::FeatureVector;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("metric is undefined for {0} replicas")]
    NoReplicas(u32),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset {0:?} already registered")]
    DuplicateDataset(String),
    #[error("dataset {0:?} has zero size")]
    ZeroSize(String),
    #[error("missing probability for stored dataset {0:?}")]
    MissingProbability(String),
    #[error("missing features for stored dataset {0:?}")]
    MissingFeatures(String),
    #[error("purge threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("dataset {0:?} is already on disk")]
    AlreadyOnDisk(String),
    #[error("need {needed} bytes but only {free} free")]
    InsufficientCapacity { needed: u64, free: u64 },
    #[error("log replay: {0}")]
    ReplayMismatch(String),
}

/// Eq (4)-style replication metric: predicted next-step accesses divided by
/// the current replica count. Undefined for datasets with no disk replica.
pub fn metric_m(forecast: f64, n_replicas: u32) -> Result<f64, StrategyError> {
    if n_replicas < 1 {
        return Err(StrategyError::NoReplicas(n_replicas));
    }
    Ok(forecast / n_replicas as f64)
}

#[derive(Debug, Clone, PartialEq)]
struct Holding {
    n_replicas: u32,
    size_bytes: u64,
    forecast: f64,
    metric: Option<f64>,
}

impl Holding {
    fn refresh_metric(&mut self) {
        self.metric = if self.n_replicas >= 1 {
            Some(self.forecast / self.n_replicas as f64)
        } else {
            None
        };
    }
}

/// A read-only view of one dataset's storage entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry<'a> {
    pub dataset_id: &'a str,
    pub n_replicas: u32,
    pub size_bytes: u64,
    pub forecast: f64,
    /// `forecast / n_replicas`, absent while the dataset has no disk replica.
    pub metric: Option<f64>,
}

/// Replica counts, sizes and metrics for every tracked dataset, plus global
/// byte accounting against a fixed capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageState {
    holdings: BTreeMap<String, Holding>,
    capacity_bytes: u64,
    used_bytes: u64,
}

/// What a logged action did to a dataset's replicas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    RemoveReplica,
    AddReplica,
    Purge,
    Restore,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::RemoveReplica => "remove_replica",
            Action::AddReplica => "add_replica",
            Action::Purge => "purge",
            Action::Restore => "restore",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "remove_replica" => Some(Action::RemoveReplica),
            "add_replica" => Some(Action::AddReplica),
            "purge" => Some(Action::Purge),
            "restore" => Some(Action::Restore),
            _ => None,
        }
    }
}

/// One audit-trail entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub week: u32,
    pub dataset_id: String,
    pub action: Action,
    /// Signed change in used bytes (negative for removals).
    pub bytes_delta: i64,
}

/// Ordered record of every mutation; replaying it over the initial state
/// reproduces the final state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionLog {
    records: Vec<ActionRecord>,
}

impl ActionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[ActionRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn push(&mut self, record: ActionRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, other: ActionLog) {
        self.records.extend(other.records);
    }

    /// Total bytes released by removals and purges in this log.
    pub fn bytes_freed(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| matches!(r.action, Action::RemoveReplica | Action::Purge))
            .map(|r| (-r.bytes_delta) as u64)
            .sum()
    }

    /// Applies the log to a copy of `initial`, validating each record's
    /// byte delta, and returns the resulting state. Forecasts (and hence
    /// metrics) are carried over from `initial`, since forecast refreshes
    /// are inputs rather than logged actions.
    pub fn replay(&self, initial: &StorageState) -> Result<StorageState, StrategyError> {
        let mut state = initial.clone();
        for r in &self.records {
            let holding = state
                .holdings
                .get_mut(&r.dataset_id)
                .ok_or_else(|| StrategyError::UnknownDataset(r.dataset_id.clone()))?;
            let size = holding.size_bytes as i64;
            let expected = match r.action {
                Action::RemoveReplica => {
                    if holding.n_replicas == 0 {
                        return Err(StrategyError::ReplayMismatch(format!(
                            "remove_replica on empty dataset {:?}",
                            r.dataset_id
                        )));
                    }
                    holding.n_replicas -= 1;
                    -size
                }
                Action::AddReplica => {
                    holding.n_replicas += 1;
                    size
                }
                Action::Restore => {
                    if holding.n_replicas != 0 {
                        return Err(StrategyError::ReplayMismatch(format!(
                            "restore of dataset {:?} that is on disk",
                            r.dataset_id
                        )));
                    }
                    holding.n_replicas = 1;
                    size
                }
                Action::Purge => {
                    let n = holding.n_replicas as i64;
                    holding.n_replicas = 0;
                    -(n * size)
                }
            };
            if expected != r.bytes_delta {
                return Err(StrategyError::ReplayMismatch(format!(
                    "{} of {:?} changed {} bytes, log says {}",
                    r.action.name(),
                    r.dataset_id,
                    expected,
                    r.bytes_delta
                )));
            }
            holding.refresh_metric();
            state.used_bytes = (state.used_bytes as i64 + expected) as u64;
        }
        Ok(state)
    }
}

impl StorageState {
    pub fn new(capacity_bytes: u64) -> Self {
        Self {
            holdings: BTreeMap::new(),
            capacity_bytes,
            used_bytes: 0,
        }
    }

    /// Registers a dataset with zero disk replicas (its tape copy is
    /// implicit). Replicas are then added through [`StorageState::add_replica`].
    pub fn insert_dataset(
        &mut self,
        dataset_id: &str,
        size_bytes: u64,
        forecast: f64,
    ) -> Result<(), StrategyError> {
        if size_bytes == 0 {
            return Err(StrategyError::ZeroSize(dataset_id.to_string()));
        }
        if self.holdings.contains_key(dataset_id) {
            return Err(StrategyError::DuplicateDataset(dataset_id.to_string()));
        }
        self.holdings.insert(
            dataset_id.to_string(),
            Holding { n_replicas: 0, size_bytes, forecast, metric: None },
        );
        Ok(())
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn free_bytes(&self) -> u64 {
        self.capacity_bytes - self.used_bytes
    }

    /// Recomputes used bytes from scratch; always equal to
    /// [`StorageState::used_bytes`] (checked by tests).
    pub fn recomputed_used_bytes(&self) -> u64 {
        self.holdings
            .values()
            .map(|h| h.n_replicas as u64 * h.size_bytes)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.holdings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holdings.is_empty()
    }

    pub fn n_replicas(&self, dataset_id: &str) -> Option<u32> {
        self.holdings.get(dataset_id).map(|h| h.n_replicas)
    }

    pub fn metric(&self, dataset_id: &str) -> Option<f64> {
        self.holdings.get(dataset_id).and_then(|h| h.metric)
    }

    pub fn forecast(&self, dataset_id: &str) -> Option<f64> {
        self.holdings.get(dataset_id).map(|h| h.forecast)
    }

    /// Entries in dataset-id order.
    pub fn datasets(&self) -> impl Iterator<Item = DatasetEntry<'_>> {
        self.holdings.iter().map(|(id, h)| DatasetEntry {
            dataset_id: id,
            n_replicas: h.n_replicas,
            size_bytes: h.size_bytes,
            forecast: h.forecast,
            metric: h.metric,
        })
    }

    /// Updates a dataset's forecast and recomputes its metric.
    pub fn set_forecast(&mut self, dataset_id: &str, forecast: f64) -> Result<(), StrategyError> {
        let holding = self
            .holdings
            .get_mut(dataset_id)
            .ok_or_else(|| StrategyError::UnknownDataset(dataset_id.to_string()))?;
        holding.forecast = forecast;
        holding.refresh_metric();
        Ok(())
    }

    /// Adds one replica if it fits the remaining capacity.
    pub fn add_replica(&mut self, dataset_id: &str, week: u32) -> Result<ActionRecord, StrategyError> {
        let free = self.free_bytes();
        let holding = self
            .holdings
            .get_mut(dataset_id)
            .ok_or_else(|| StrategyError::UnknownDataset(dataset_id.to_string()))?;
        if holding.size_bytes > free {
            return Err(StrategyError::InsufficientCapacity {
                needed: holding.size_bytes,
                free,
            });
        }
        holding.n_replicas += 1;
        holding.refresh_metric();
        self.used_bytes += holding.size_bytes;
        Ok(ActionRecord {
            week,
            dataset_id: dataset_id.to_string(),
            action: Action::AddReplica,
            bytes_delta: holding.size_bytes as i64,
        })
    }

    /// Brings a dataset back from tape with a single replica. Only valid
    /// while it has no disk replica; the caller counts this as a mistake.
    pub fn restore(&mut self, dataset_id: &str, week: u32) -> Result<ActionRecord, StrategyError> {
        let free = self.free_bytes();
        let holding = self
            .holdings
            .get_mut(dataset_id)
            .ok_or_else(|| StrategyError::UnknownDataset(dataset_id.to_string()))?;
        if holding.n_replicas > 0 {
            return Err(StrategyError::AlreadyOnDisk(dataset_id.to_string()));
        }
        if holding.size_bytes > free {
            return Err(StrategyError::InsufficientCapacity {
                needed: holding.size_bytes,
                free,
            });
        }
        holding.n_replicas = 1;
        holding.refresh_metric();
        self.used_bytes += holding.size_bytes;
        Ok(ActionRecord {
            week,
            dataset_id: dataset_id.to_string(),
            action: Action::Restore,
            bytes_delta: holding.size_bytes as i64,
        })
    }

    fn remove_one(&mut self, dataset_id: &str, week: u32) -> ActionRecord {
        let holding = self.holdings.get_mut(dataset_id).expect("candidate exists");
        holding.n_replicas -= 1;
        holding.refresh_metric();
        self.used_bytes -= holding.size_bytes;
        ActionRecord {
            week,
            dataset_id: dataset_id.to_string(),
            action: Action::RemoveReplica,
            bytes_delta: -(holding.size_bytes as i64),
        }
    }

    /// Greedily removes replicas until at least `target_bytes` are freed or
    /// no dataset has two or more replicas left. After each removal the
    /// dataset's metric is recomputed before the next candidate is chosen.
    /// Freeing less than the target is reported through the log, not as an
    /// error.
    pub fn free_space(&mut self, target_bytes: u64, week: u32) -> ActionLog {
        let mut log = ActionLog::new();
        let mut freed: u64 = 0;
        while freed < target_bytes {
            let candidate = self
                .holdings
                .iter()
                .filter(|(_, h)| h.n_replicas >= 2)
                .min_by(|(id_a, a), (id_b, b)| {
                    let ma = a.metric.expect("replicated dataset has a metric");
                    let mb = b.metric.expect("replicated dataset has a metric");
                    ma.total_cmp(&mb)
                        .then(b.size_bytes.cmp(&a.size_bytes))
                        .then(id_a.as_str().cmp(id_b.as_str()))
                })
                .map(|(id, _)| id.clone());
            let Some(id) = candidate else { break };
            let record = self.remove_one(&id, week);
            freed += (-record.bytes_delta) as u64;
            log.push(record);
        }
        log
    }

    /// Removes replicas following a fixed ordering (e.g. an LRU or LFU
    /// ranking): the first dataset is drained to one replica before the
    /// next is touched. Ids not present in the state are skipped.
    pub fn free_space_ranked(&mut self, order: &[String], target_bytes: u64, week: u32) -> ActionLog {
        let mut log = ActionLog::new();
        let mut freed: u64 = 0;
        'next: for id in order {
            while self.holdings.get(id).is_some_and(|h| h.n_replicas >= 2) {
                if freed >= target_bytes {
                    break 'next;
                }
                let record = self.remove_one(id, week);
                freed += (-record.bytes_delta) as u64;
                log.push(record);
            }
        }
        log
    }

    /// Greedily adds replicas while any dataset with at least one replica
    /// sits below `max_replicas` and fits the remaining capacity. After
    /// each addition the dataset's metric is recomputed. Datasets with no
    /// disk replica are never grown here; they come back only via
    /// [`StorageState::restore`].
    pub fn fill_space(&mut self, max_replicas: u32, week: u32) -> ActionLog {
        let mut log = ActionLog::new();
        loop {
            let free = self.free_bytes();
            let candidate = self
                .holdings
                .iter()
                .filter(|(_, h)| {
                    h.n_replicas >= 1 && h.n_replicas < max_replicas && h.size_bytes <= free
                })
                .min_by(|(id_a, a), (id_b, b)| {
                    let ma = a.metric.expect("replicated dataset has a metric");
                    let mb = b.metric.expect("replicated dataset has a metric");
                    mb.total_cmp(&ma)
                        .then(b.forecast.total_cmp(&a.forecast))
                        .then(a.size_bytes.cmp(&b.size_bytes))
                        .then(id_a.as_str().cmp(id_b.as_str()))
                })
                .map(|(id, _)| id.clone());
            let Some(id) = candidate else { break };
            let record = self.add_replica(&id, week).expect("candidate fits");
            log.push(record);
        }
        log
    }

    /// Adds replicas following a fixed best-first ordering: each dataset is
    /// grown to `max_replicas` (while it fits) before the next is
    /// considered. Ids not present, or with no disk replica, are skipped.
    pub fn fill_space_ranked(&mut self, order: &[String], max_replicas: u32, week: u32) -> ActionLog {
        let mut log = ActionLog::new();
        for id in order {
            while self.holdings.get(id).is_some_and(|h| {
                h.n_replicas >= 1
                    && h.n_replicas < max_replicas
                    && h.size_bytes <= self.capacity_bytes - self.used_bytes
            }) {
                let record = self.add_replica(id, week).expect("candidate fits");
                log.push(record);
            }
        }
        log
    }

    /// Removes every disk replica of each dataset whose predicted long-term
    /// access probability is strictly below `threshold`. The tape copy
    /// remains available for a later restore. Probabilities must cover all
    /// datasets that currently have a disk replica.
    pub fn long_term_purge(
        &mut self,
        probabilities: &BTreeMap<String, f64>,
        threshold: f64,
        week: u32,
    ) -> Result<ActionLog, StrategyError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(StrategyError::BadThreshold(threshold));
        }
        let mut doomed = Vec::new();
        for (id, holding) in &self.holdings {
            if holding.n_replicas == 0 {
                continue;
            }
            let p = probabilities
                .get(id)
                .ok_or_else(|| StrategyError::MissingProbability(id.clone()))?;
            if *p < threshold {
                doomed.push(id.clone());
            }
        }
        let mut log = ActionLog::new();
        for id in doomed {
            let holding = self.holdings.get_mut(&id).expect("listed above");
            let released = holding.n_replicas as u64 * holding.size_bytes;
            holding.n_replicas = 0;
            holding.refresh_metric();
            self.used_bytes -= released;
            log.push(ActionRecord {
                week,
                dataset_id: id,
                action: Action::Purge,
                bytes_delta: -(released as i64),
            });
        }
        Ok(log)
    }
}

/// LRU removal ordering over the datasets holding disk replicas: stalest
/// (largest recency) first, ties by dataset id. Every replicated dataset
/// must appear in `features`.
pub fn rank_lru(
    state: &StorageState,
    features: &[FeatureVector],
) -> Result<Vec<String>, StrategyError> {
    rank_by(state, features, |fv| fv.recency, true)
}

/// LFU removal ordering: least frequently used first, ties by dataset id.
pub fn rank_lfu(
    state: &StorageState,
    features: &[FeatureVector],
) -> Result<Vec<String>, StrategyError> {
    rank_by(state, features, |fv| fv.frequency, false)
}

fn rank_by(
    state: &StorageState,
    features: &[FeatureVector],
    key: impl Fn(&FeatureVector) -> f64,
    descending: bool,
) -> Result<Vec<String>, StrategyError> {
    let by_id: BTreeMap<&str, f64> = features
        .iter()
        .map(|fv| (fv.dataset_id.as_str(), key(fv)))
        .collect();
    let mut ranked: Vec<(f64, &str)> = Vec::new();
    for entry in state.datasets() {
        if entry.n_replicas == 0 {
            continue;
        }
        let score = by_id
            .get(entry.dataset_id)
            .ok_or_else(|| StrategyError::MissingFeatures(entry.dataset_id.to_string()))?;
        ranked.push((*score, entry.dataset_id));
    }
    ranked.sort_by(|a, b| {
        let ord = a.0.total_cmp(&b.0);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then(a.1.cmp(b.1))
    });
    Ok(ranked.into_iter().map(|(_, id)| id.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GB: u64 = 1_000_000_000;

    fn state_with(datasets: &[(&str, u64, u32, f64)], capacity: u64) -> StorageState {
        let mut state = StorageState::new(capacity);
        for &(id, size, replicas, forecast) in datasets {
            state.insert_dataset(id, size, forecast).unwrap();
            for _ in 0..replicas {
                state.add_replica(id, 0).unwrap();
            }
        }
        state
    }

    #[test]
    fn metric_arithmetic() {
        assert_eq!(metric_m(10.0, 2).unwrap(), 5.0);
        assert_eq!(metric_m(0.0, 3).unwrap(), 0.0);
        assert_eq!(metric_m(7.0, 1).unwrap(), 7.0);
        assert_eq!(metric_m(1.0, 0), Err(StrategyError::NoReplicas(0)));
    }

    #[test]
    fn removing_a_replica_strictly_increases_the_metric() {
        let mut state = state_with(&[("a", GB, 3, 6.0)], 100 * GB);
        let before = state.metric("a").unwrap();
        state.free_space(GB, 1);
        let after = state.metric("a").unwrap();
        assert!(after > before);
        assert_eq!(before, 2.0);
        assert_eq!(after, 3.0);
    }

    #[test]
    fn free_space_takes_minimum_metric_first() {
        // A: M=1 (forecast 2, 2 replicas); B: M=5 (forecast 10, 2 replicas).
        let mut state = state_with(&[("a", 10 * GB, 2, 2.0), ("b", 10 * GB, 2, 10.0)], 100 * GB);
        let log = state.free_space(10 * GB, 3);
        assert_eq!(log.len(), 1);
        assert_eq!(log.records()[0].dataset_id, "a");
        assert_eq!(state.n_replicas("a"), Some(1));
        assert_eq!(state.n_replicas("b"), Some(2));
        assert_eq!(log.bytes_freed(), 10 * GB);
    }

    #[test]
    fn last_replica_is_protected() {
        let mut state = state_with(&[("a", GB, 1, 0.0), ("b", GB, 1, 0.0)], 10 * GB);
        let log = state.free_space(5 * GB, 0);
        assert!(log.is_empty());
        assert_eq!(state.n_replicas("a"), Some(1));
        assert_eq!(state.n_replicas("b"), Some(1));
    }

    #[test]
    fn metric_is_recomputed_between_removals() {
        // A: forecast 4, 2 replicas (M=2); B: forecast 3, 1 replica (M=3).
        // First removal hits A (2 < 3); then nothing is removable.
        let mut state = state_with(&[("a", GB, 2, 4.0), ("b", GB, 1, 3.0)], 10 * GB);
        let log = state.free_space(2 * GB, 0);
        assert_eq!(log.len(), 1);
        assert_eq!(log.records()[0].dataset_id, "a");
        assert_eq!(log.bytes_freed(), GB);
    }

    #[test]
    fn removal_ties_prefer_larger_size_then_id() {
        // Equal metric 0: larger dataset goes first.
        let mut state = state_with(&[("small", GB, 2, 0.0), ("big", 5 * GB, 2, 0.0)], 100 * GB);
        let log = state.free_space(1, 0);
        assert_eq!(log.records()[0].dataset_id, "big");
        // Fully tied: lexicographically smaller id first.
        let mut state = state_with(&[("y", GB, 2, 0.0), ("x", GB, 2, 0.0)], 100 * GB);
        let log = state.free_space(1, 0);
        assert_eq!(log.records()[0].dataset_id, "x");
    }

    #[test]
    fn fill_space_with_no_free_capacity_does_nothing() {
        let mut state = state_with(&[("a", GB, 2, 9.0)], 2 * GB);
        let log = state.fill_space(4, 0);
        assert!(log.is_empty());
    }

    #[test]
    fn fill_space_walks_the_metric_down() {
        // forecast 8, 1 replica, room for 3 more: M goes 8, 4, 8/3, 2.
        let mut state = state_with(&[("a", GB, 1, 8.0)], 4 * GB);
        assert_eq!(state.metric("a"), Some(8.0));
        let log = state.fill_space(4, 0);
        assert_eq!(log.len(), 3);
        assert_eq!(state.n_replicas("a"), Some(4));
        assert_eq!(state.metric("a"), Some(2.0));
    }

    #[test]
    fn fill_space_respects_max_replicas_and_capacity_fit() {
        let mut state = state_with(&[("big", 10 * GB, 1, 100.0), ("small", GB, 1, 1.0)], 13 * GB);
        // big (M=100) does not fit the remaining 2 GB, so small grows.
        let log = state.fill_space(3, 0);
        assert_eq!(state.n_replicas("big"), Some(1));
        assert_eq!(state.n_replicas("small"), Some(3));
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn addition_ties_prefer_larger_forecast_then_id() {
        // Equal M = 4: a has forecast 8 with 2 replicas, b forecast 4 with 1.
        let mut state = state_with(&[("b", GB, 1, 4.0), ("a", GB, 2, 8.0)], 4 * GB);
        let log = state.fill_space(10, 0);
        assert_eq!(log.records()[0].dataset_id, "a");
        // Fully tied: smaller id.
        let mut state = state_with(&[("n", GB, 1, 4.0), ("m", GB, 1, 4.0)], 3 * GB);
        let log = state.fill_space(10, 0);
        assert_eq!(log.records()[0].dataset_id, "m");
    }

    #[test]
    fn purge_thresholds() {
        let probabilities: BTreeMap<String, f64> =
            [("a".to_string(), 0.3), ("b".to_string(), 0.9)].into();
        // Strict inequality: threshold 0 purges nothing.
        let mut state = state_with(&[("a", GB, 1, 0.0), ("b", GB, 2, 0.0)], 10 * GB);
        let log = state.long_term_purge(&probabilities, 0.0, 0).unwrap();
        assert!(log.is_empty());
        // Threshold 1 purges everything below probability 1.
        let log = state.long_term_purge(&probabilities, 1.0, 0).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(state.n_replicas("a"), Some(0));
        assert_eq!(state.n_replicas("b"), Some(0));
        assert_eq!(state.used_bytes(), 0);
        // b's purge released both replicas at once.
        let b_record = log.records().iter().find(|r| r.dataset_id == "b").unwrap();
        assert_eq!(b_record.bytes_delta, -(2 * GB as i64));
    }

    #[test]
    fn purge_requires_probabilities_for_stored_datasets() {
        let mut state = state_with(&[("a", GB, 1, 0.0)], 10 * GB);
        let err = state.long_term_purge(&BTreeMap::new(), 0.5, 0).unwrap_err();
        assert_eq!(err, StrategyError::MissingProbability("a".to_string()));
        assert!(matches!(
            state.long_term_purge(&BTreeMap::new(), 1.5, 0),
            Err(StrategyError::BadThreshold(_))
        ));
    }

    #[test]
    fn restore_needs_an_empty_dataset_and_room() {
        let mut state = state_with(&[("a", GB, 1, 0.0)], GB);
        assert_eq!(
            state.restore("a", 1),
            Err(StrategyError::AlreadyOnDisk("a".to_string()))
        );
        let probabilities: BTreeMap<String, f64> = [("a".to_string(), 0.0)].into();
        state.long_term_purge(&probabilities, 0.5, 1).unwrap();
        assert_eq!(state.n_replicas("a"), Some(0));
        let record = state.restore("a", 2).unwrap();
        assert_eq!(record.action, Action::Restore);
        assert_eq!(state.n_replicas("a"), Some(1));
    }

    #[test]
    fn lru_and_lfu_orderings() {
        let state = state_with(&[("a", GB, 1, 0.0), ("b", GB, 1, 0.0)], 10 * GB);
        let fv = |id: &str, recency: f64, frequency: f64| FeatureVector {
            dataset_id: id.to_string(),
            recency,
            reuse_distance: 0.0,
            first_access_age: 0.0,
            creation_age: 0.0,
            frequency,
            dtype: 0.0,
            extension: 0.0,
            size_bytes: GB as f64,
        };
        let features = vec![fv("a", 10.0, 0.1), fv("b", 2.0, 0.9)];
        assert_eq!(rank_lru(&state, &features).unwrap(), vec!["a", "b"]);
        assert_eq!(rank_lfu(&state, &features).unwrap(), vec!["a", "b"]);

        // A never-accessed dataset carries the sentinel recency and leads
        // the LRU order.
        let features = vec![fv("a", 2.0, 0.5), fv("b", 104.0, 0.0)];
        assert_eq!(rank_lru(&state, &features).unwrap(), vec!["b", "a"]);

        let missing = vec![fv("a", 1.0, 1.0)];
        assert_eq!(
            rank_lru(&state, &missing),
            Err(StrategyError::MissingFeatures("b".to_string()))
        );
    }

    #[test]
    fn ranked_free_and_fill_follow_the_given_order() {
        let mut state = state_with(&[("a", GB, 3, 0.0), ("b", GB, 3, 0.0)], 10 * GB);
        let order = vec!["b".to_string(), "a".to_string()];
        let log = state.free_space_ranked(&order, 3 * GB, 0);
        // b drains to 1 replica (freeing 2 GB), then a gives one more.
        assert_eq!(state.n_replicas("b"), Some(1));
        assert_eq!(state.n_replicas("a"), Some(2));
        assert_eq!(log.bytes_freed(), 3 * GB);

        let log = state.fill_space_ranked(&order, 3, 0);
        assert_eq!(state.n_replicas("b"), Some(3));
        assert_eq!(state.n_replicas("a"), Some(3));
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn replay_reproduces_the_final_state() {
        let mut state = state_with(&[("a", GB, 2, 4.0), ("b", 2 * GB, 2, 1.0)], 20 * GB);
        let initial = state.clone();
        let mut log = ActionLog::new();
        log.extend(state.free_space(2 * GB, 1));
        log.extend(state.fill_space(4, 2));
        let probabilities: BTreeMap<String, f64> =
            [("a".to_string(), 0.9), ("b".to_string(), 0.1)].into();
        log.extend(state.long_term_purge(&probabilities, 0.5, 3).unwrap());
        log.push(state.restore("b", 4).unwrap());

        let replayed = log.replay(&initial).unwrap();
        assert_eq!(replayed, state);
        assert_eq!(state.recomputed_used_bytes(), state.used_bytes());
    }

    #[test]
    fn replay_rejects_corrupted_logs() {
        let state = state_with(&[("a", GB, 1, 0.0)], 10 * GB);
        let mut log = ActionLog::new();
        log.push(ActionRecord {
            week: 0,
            dataset_id: "a".to_string(),
            action: Action::AddReplica,
            bytes_delta: 123,
        });
        assert!(matches!(
            log.replay(&state),
            Err(StrategyError::ReplayMismatch(_))
        ));
    }

    proptest! {
        // Random op sequences keep the byte accounting exact, never drop a
        // dataset to zero replicas except via purge, and replay cleanly.
        #[test]
        fn accounting_is_exact_under_random_ops(
            sizes in proptest::collection::vec(1u64..20, 1..6),
            forecasts in proptest::collection::vec(0.0f64..10.0, 6),
            ops in proptest::collection::vec((0u8..4, 0u64..40), 0..25),
        ) {
            let mut state = StorageState::new(200);
            for (i, size) in sizes.iter().enumerate() {
                let id = format!("d{i}");
                state.insert_dataset(&id, *size, forecasts[i]).unwrap();
                let _ = state.add_replica(&id, 0);
            }
            let initial = state.clone();
            let mut log = ActionLog::new();
            for (week, (op, arg)) in ops.iter().enumerate() {
                let week = week as u32;
                match op {
                    0 => log.extend(state.free_space(*arg, week)),
                    1 => log.extend(state.fill_space(1 + (*arg % 4) as u32, week)),
                    2 => {
                        let probabilities: BTreeMap<String, f64> = (0..sizes.len())
                            .map(|i| (format!("d{i}"), (i as f64 * 0.17) % 1.0))
                            .collect();
                        log.extend(
                            state
                                .long_term_purge(&probabilities, (*arg % 10) as f64 / 10.0, week)
                                .unwrap(),
                        );
                    }
                    _ => {
                        let id = format!("d{}", *arg as usize % sizes.len());
                        if state.n_replicas(&id) == Some(0) {
                            if let Ok(record) = state.restore(&id, week) {
                                log.push(record);
                            }
                        }
                    }
                }
                prop_assert_eq!(state.recomputed_used_bytes(), state.used_bytes());
                prop_assert!(state.used_bytes() <= state.capacity_bytes());
            }
            let replayed = log.replay(&initial).unwrap();
            prop_assert_eq!(replayed, state);
        }
    }
}
