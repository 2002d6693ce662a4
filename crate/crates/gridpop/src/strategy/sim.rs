//! Week-by-week storage simulation driving the replication strategy over a
//! trace.
//!
//! Schedule for each simulated week `w` (from `start_week` to the trace
//! horizon):
//!
//! 1. Refresh scores. Under the metric policy every dataset's next-week
//!    forecast is refit on its history before `w` (fitted alpha when it has
//!    at least two observed weeks, the plain average with one, zero with
//!    none). Under LRU/LFU a removal ranking is computed from features at
//!    window end `w`.
//! 2. Long-term purge at the end of every `purge_cadence_weeks`-week
//!    period, when a model and a positive threshold are configured:
//!    datasets whose predicted long-term access probability falls below
//!    the threshold lose all disk replicas (the tape copy remains).
//! 3. Admissions: datasets created at `w` get their first replica (freeing
//!    space by policy if needed) and up to `min(initial_replicas,
//!    max_replicas)` replicas while space is free.
//! 4. Restores: a dataset accessed at `w` with no disk replica is restored
//!    from tape (freeing space if needed) and counted as a mistake.
//! 5. Fill: remaining free space is spent on new replicas, best first,
//!    once per week after any freeing.
//!
//! The simulation is deterministic: no randomness, and every mutation is
//! logged in order.

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use super::{rank_lfu, rank_lru, ActionLog, StorageState, StrategyError};
use crate::features::{extract_features, FeatureError};
use crate::forest::{ForestError, ForestModel};
use crate::smoothing::{average_forecast, fit_alpha, SmoothingError};
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("week {week}: no room for {dataset_id:?}: need {needed} bytes, {free} free after freeing")]
    OutOfSpace { week: u32, dataset_id: String, needed: u64, free: u64 },
    #[error("capacity {capacity} bytes cannot hold the initial replicas ({needed} bytes)")]
    CapacityTooSmall { capacity: u64, needed: u64 },
    #[error("unknown policy {0:?}, expected metric_m, lru or lfu")]
    BadPolicy(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// Which ordering drives replica removal and addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Forecast-per-replica metric (remove min, add max).
    MetricM,
    /// Least recently used first.
    Lru,
    /// Least frequently used first.
    Lfu,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::MetricM => "metric_m",
            Policy::Lru => "lru",
            Policy::Lfu => "lfu",
        }
    }
}

impl FromStr for Policy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "metric_m" => Ok(Policy::MetricM),
            "lru" => Ok(Policy::Lru),
            "lfu" => Ok(Policy::Lfu),
            other => Err(SimError::BadPolicy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub capacity_bytes: u64,
    pub max_replicas: u32,
    pub policy: Policy,
    /// Purge datasets with predicted access probability strictly below
    /// this. Zero disables purging (strict inequality never fires).
    pub purge_threshold: f64,
    pub purge_cadence_weeks: u32,
    pub start_week: u32,
}

#[derive(Debug)]
pub struct SimResult {
    /// State right after registration, before any replica was admitted;
    /// replaying `log` over it reproduces the final replica counts.
    pub initial_state: StorageState,
    pub final_state: StorageState,
    pub log: ActionLog,
    /// Datasets brought back from tape after being dropped — the
    /// simulation's mistakes.
    pub restores: u32,
}

/// Runs the weekly simulation over `[cfg.start_week, trace.horizon_weeks())`.
///
/// `model` supplies long-term probabilities for the purge step; without it
/// (or with a zero threshold) no purge runs.
pub fn run_simulation(
    trace: &Trace,
    cfg: &SimConfig,
    model: Option<&ForestModel>,
) -> Result<SimResult, SimError> {
    if !(0.0..=1.0).contains(&cfg.purge_threshold) {
        return Err(StrategyError::BadThreshold(cfg.purge_threshold).into());
    }
    let mut state = StorageState::new(cfg.capacity_bytes);
    for meta in trace.metas() {
        state.insert_dataset(&meta.dataset_id, meta.size_bytes, 0.0)?;
    }
    let initial_state = state.clone();
    let mut log = ActionLog::new();
    let mut restores: u32 = 0;

    // Accesses by week, for the restore step.
    let mut accessed_at: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for e in trace.events() {
        accessed_at.entry(e.week).or_default().push(&e.dataset_id);
    }

    // Initial population: datasets created before the simulation starts.
    for meta in trace.metas() {
        if meta.creation_week >= cfg.start_week {
            continue;
        }
        let want = meta.initial_replicas.min(cfg.max_replicas);
        match state.add_replica(&meta.dataset_id, cfg.start_week) {
            Ok(record) => log.push(record),
            Err(StrategyError::InsufficientCapacity { .. }) => {
                return Err(SimError::CapacityTooSmall {
                    capacity: cfg.capacity_bytes,
                    needed: state.used_bytes() + meta.size_bytes,
                });
            }
            Err(e) => return Err(e.into()),
        }
        for _ in 1..want {
            match state.add_replica(&meta.dataset_id, cfg.start_week) {
                Ok(record) => log.push(record),
                Err(StrategyError::InsufficientCapacity { .. }) => break,
                Err(e) => return Err(e.into()),
            }
        }
    }

    for week in cfg.start_week..trace.horizon_weeks() {
        // 1. Refresh scores.
        let ranking: Vec<String> = match cfg.policy {
            Policy::MetricM => {
                let ids: Vec<&str> = state.datasets().map(|d| d.dataset_id).collect();
                let forecasts: Vec<(String, f64)> = ids
                    .par_iter()
                    .map(|id| {
                        let series = trace.series_from_creation(id, week);
                        let forecast = match series.len() {
                            0 => 0.0,
                            1 => average_forecast(&series).expect("non-empty"),
                            _ => fit_alpha(&series).expect("length checked").next_forecast,
                        };
                        (id.to_string(), forecast)
                    })
                    .collect();
                for (id, forecast) in forecasts {
                    state.set_forecast(&id, forecast)?;
                }
                Vec::new()
            }
            Policy::Lru | Policy::Lfu => {
                if week == 0 {
                    Vec::new()
                } else {
                    let features = extract_features(trace, week)?;
                    match cfg.policy {
                        Policy::Lru => rank_lru(&state, &features)?,
                        _ => rank_lfu(&state, &features)?,
                    }
                }
            }
        };
        let free_by_policy =
            |state: &mut StorageState, target: u64, week: u32| match cfg.policy {
                Policy::MetricM => state.free_space(target, week),
                Policy::Lru | Policy::Lfu => state.free_space_ranked(&ranking, target, week),
            };

        // 2. Long-term purge at the end of each full cadence period (the
        // default cadence fires once on a default-length run).
        let purge_due = cfg.purge_threshold > 0.0
            && cfg.purge_cadence_weeks > 0
            && (week - cfg.start_week + 1) % cfg.purge_cadence_weeks == 0;
        if purge_due {
            if let Some(model) = model {
                let features = extract_features(trace, week)?;
                let mut probabilities = BTreeMap::new();
                for fv in &features {
                    let p = model.predict_proba(&fv.values())?;
                    probabilities.insert(fv.dataset_id.clone(), p);
                }
                log.extend(state.long_term_purge(&probabilities, cfg.purge_threshold, week)?);
            }
        }

        // 3. Admissions.
        for meta in trace.metas() {
            if meta.creation_week != week {
                continue;
            }
            let want = meta.initial_replicas.min(cfg.max_replicas);
            if meta.size_bytes > state.free_bytes() {
                let target = meta.size_bytes - state.free_bytes();
                log.extend(free_by_policy(&mut state, target, week));
            }
            match state.add_replica(&meta.dataset_id, week) {
                Ok(record) => log.push(record),
                Err(StrategyError::InsufficientCapacity { needed, free }) => {
                    return Err(SimError::OutOfSpace {
                        week,
                        dataset_id: meta.dataset_id.clone(),
                        needed,
                        free,
                    });
                }
                Err(e) => return Err(e.into()),
            }
            for _ in 1..want {
                match state.add_replica(&meta.dataset_id, week) {
                    Ok(record) => log.push(record),
                    Err(StrategyError::InsufficientCapacity { .. }) => break,
                    Err(e) => return Err(e.into()),
                }
            }
        }

        // 4. Restores of accessed datasets that are no longer on disk.
        if let Some(ids) = accessed_at.get(&week) {
            for id in ids {
                if state.n_replicas(id) != Some(0) {
                    continue;
                }
                let size = trace.meta(id).expect("registered").size_bytes;
                if size > state.free_bytes() {
                    let target = size - state.free_bytes();
                    log.extend(free_by_policy(&mut state, target, week));
                }
                match state.restore(id, week) {
                    Ok(record) => {
                        log.push(record);
                        restores += 1;
                    }
                    Err(StrategyError::InsufficientCapacity { needed, free }) => {
                        return Err(SimError::OutOfSpace {
                            week,
                            dataset_id: id.to_string(),
                            needed,
                            free,
                        });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }

        // 5. Spend leftover space.
        match cfg.policy {
            Policy::MetricM => log.extend(state.fill_space(cfg.max_replicas, week)),
            Policy::Lru | Policy::Lfu => {
                let best_first: Vec<String> = ranking.iter().rev().cloned().collect();
                log.extend(state.fill_space_ranked(&best_first, cfg.max_replicas, week));
            }
        }
    }

    Ok(SimResult { initial_state, final_state: state, log, restores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_synthetic, SynthConfig};

    fn small_trace() -> Trace {
        let config = SynthConfig {
            n_datasets: 60,
            horizon_weeks: 40,
            ..Default::default()
        };
        generate_synthetic(&config, 17).unwrap()
    }

    fn capacity_for(trace: &Trace, factor: f64) -> u64 {
        let initial: u64 = trace
            .metas()
            .iter()
            .map(|m| m.initial_replicas.min(4) as u64 * m.size_bytes)
            .sum();
        (initial as f64 * factor) as u64
    }

    fn config(trace: &Trace, policy: Policy) -> SimConfig {
        SimConfig {
            capacity_bytes: capacity_for(trace, 1.25),
            max_replicas: 4,
            policy,
            purge_threshold: 0.0,
            purge_cadence_weeks: 26,
            start_week: 20,
        }
    }

    #[test]
    fn simulation_is_deterministic_and_replayable() {
        let trace = small_trace();
        let cfg = config(&trace, Policy::MetricM);
        let a = run_simulation(&trace, &cfg, None).unwrap();
        let b = run_simulation(&trace, &cfg, None).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.log, b.log);

        let replayed = a.log.replay(&a.initial_state).unwrap();
        for (got, want) in replayed.datasets().zip(a.final_state.datasets()) {
            assert_eq!(got.dataset_id, want.dataset_id);
            assert_eq!(got.n_replicas, want.n_replicas);
        }
        assert_eq!(replayed.used_bytes(), a.final_state.used_bytes());
    }

    #[test]
    fn accounting_stays_exact_for_every_policy() {
        let trace = small_trace();
        for policy in [Policy::MetricM, Policy::Lru, Policy::Lfu] {
            let cfg = config(&trace, policy);
            let result = run_simulation(&trace, &cfg, None).unwrap();
            let state = &result.final_state;
            assert_eq!(state.recomputed_used_bytes(), state.used_bytes());
            assert!(state.used_bytes() <= state.capacity_bytes());
            for entry in state.datasets() {
                assert!(entry.n_replicas <= cfg.max_replicas);
            }
        }
    }

    #[test]
    fn zero_threshold_never_purges() {
        let trace = small_trace();
        let cfg = config(&trace, Policy::MetricM);
        let result = run_simulation(&trace, &cfg, None).unwrap();
        assert!(result
            .log
            .records()
            .iter()
            .all(|r| r.action != super::super::Action::Purge));
        // Without purges nothing leaves disk entirely, so nothing restores.
        assert_eq!(result.restores, 0);
    }

    #[test]
    fn tiny_capacity_is_rejected() {
        let trace = small_trace();
        let mut cfg = config(&trace, Policy::MetricM);
        cfg.capacity_bytes = 1;
        assert!(matches!(
            run_simulation(&trace, &cfg, None),
            Err(SimError::CapacityTooSmall { .. })
        ));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("metric_m".parse::<Policy>().unwrap(), Policy::MetricM);
        assert_eq!("lru".parse::<Policy>().unwrap(), Policy::Lru);
        assert_eq!("lfu".parse::<Policy>().unwrap(), Policy::Lfu);
        assert!(matches!("arc".parse::<Policy>(), Err(SimError::BadPolicy(_))));
        assert_eq!(Policy::MetricM.name(), "metric_m");
    }
}
