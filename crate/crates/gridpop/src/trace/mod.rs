//! Access-trace data model: weekly access events, dataset metadata, and the
//! validated [`Trace`] container the rest of the library consumes.
//!
//! A trace is immutable after construction. Events are normalized on entry:
//! sorted by `(dataset_id, week)` and duplicate `(dataset_id, week)` rows
//! merged by summing counts, so two traces describing the same history
//! compare equal regardless of input order.

mod io;
mod synth;

pub use io::{export_trace, import_trace};
pub use synth::{generate_synthetic, generate_synthetic_detailed, PopClass, SynthConfig, SyntheticTrace};

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}:{line}: parse error: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("event references unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset {0:?} has non-positive size")]
    BadSize(String),
    #[error("dataset {0:?} has zero initial replicas")]
    BadReplicas(String),
    #[error("duplicate dataset id {0:?} in metadata")]
    DuplicateDataset(String),
    #[error("event for dataset {id:?} at week {week} is before creation week {creation_week}")]
    EventBeforeCreation { id: String, week: u32, creation_week: u32 },
    #[error("event for dataset {id:?} at week {week} is outside horizon {horizon}")]
    EventPastHorizon { id: String, week: u32, horizon: u32 },
    #[error("event for dataset {id:?} at week {week} has zero count")]
    ZeroCount { id: String, week: u32 },
    #[error("mixture weights sum to {0}, expected 1")]
    BadMixture(f64),
    #[error("horizon of {0} weeks is too short, need at least 8")]
    HorizonTooShort(u32),
    #[error("synthetic config needs at least one dataset")]
    NoDatasets,
    #[error("unknown config key {0:?}")]
    UnknownConfigKey(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One dataset's access tally for one week.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessEvent {
    pub dataset_id: String,
    /// Week index, counted from the start of the observed history.
    pub week: u32,
    /// Accesses during that week; always at least 1.
    pub count: u64,
}

/// Static dataset metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub dataset_id: String,
    pub creation_week: u32,
    /// Categorical type code (e.g. 0 = real data, 1 = simulation).
    pub dtype: u32,
    /// Categorical file-extension code.
    pub extension: u32,
    pub size_bytes: u64,
    /// Disk replicas the dataset starts with. The archival tape copy is
    /// implicit and never counted here.
    pub initial_replicas: u32,
}

/// A validated access history: events plus metadata over a fixed horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    events: Vec<AccessEvent>,
    metas: Vec<DatasetMeta>,
    horizon_weeks: u32,
}

impl Trace {
    /// Builds a trace, normalizing events and checking every invariant:
    /// unique dataset ids, positive sizes and replica counts, events only
    /// for known datasets, within the horizon, and not before creation.
    pub fn new(
        events: Vec<AccessEvent>,
        mut metas: Vec<DatasetMeta>,
        horizon_weeks: u32,
    ) -> Result<Self, TraceError> {
        metas.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
        for pair in metas.windows(2) {
            if pair[0].dataset_id == pair[1].dataset_id {
                return Err(TraceError::DuplicateDataset(pair[0].dataset_id.clone()));
            }
        }
        let creation: BTreeMap<&str, u32> = metas
            .iter()
            .map(|m| (m.dataset_id.as_str(), m.creation_week))
            .collect();
        for m in &metas {
            if m.size_bytes == 0 {
                return Err(TraceError::BadSize(m.dataset_id.clone()));
            }
            if m.initial_replicas == 0 {
                return Err(TraceError::BadReplicas(m.dataset_id.clone()));
            }
        }

        // Merge duplicate (dataset_id, week) rows by summing counts.
        let mut merged: BTreeMap<(String, u32), u64> = BTreeMap::new();
        for e in events {
            if e.count == 0 {
                return Err(TraceError::ZeroCount { id: e.dataset_id, week: e.week });
            }
            match creation.get(e.dataset_id.as_str()) {
                None => return Err(TraceError::UnknownDataset(e.dataset_id)),
                Some(&c) if e.week < c => {
                    return Err(TraceError::EventBeforeCreation {
                        id: e.dataset_id,
                        week: e.week,
                        creation_week: c,
                    })
                }
                Some(_) => {}
            }
            if e.week >= horizon_weeks {
                return Err(TraceError::EventPastHorizon {
                    id: e.dataset_id,
                    week: e.week,
                    horizon: horizon_weeks,
                });
            }
            *merged.entry((e.dataset_id, e.week)).or_insert(0) += e.count;
        }
        let events = merged
            .into_iter()
            .map(|((dataset_id, week), count)| AccessEvent { dataset_id, week, count })
            .collect();
        Ok(Self { events, metas, horizon_weeks })
    }

    /// Events sorted by `(dataset_id, week)`, one row per pair.
    pub fn events(&self) -> &[AccessEvent] {
        &self.events
    }

    /// Metadata sorted by dataset id.
    pub fn metas(&self) -> &[DatasetMeta] {
        &self.metas
    }

    pub fn horizon_weeks(&self) -> u32 {
        self.horizon_weeks
    }

    pub fn meta(&self, dataset_id: &str) -> Option<&DatasetMeta> {
        self.metas
            .binary_search_by(|m| m.dataset_id.as_str().cmp(dataset_id))
            .ok()
            .map(|i| &self.metas[i])
    }

    /// The contiguous run of events belonging to one dataset.
    pub fn events_for(&self, dataset_id: &str) -> &[AccessEvent] {
        let start = self
            .events
            .partition_point(|e| e.dataset_id.as_str() < dataset_id);
        let len = self.events[start..]
            .iter()
            .take_while(|e| e.dataset_id == dataset_id)
            .count();
        &self.events[start..start + len]
    }

    /// Dense weekly counts for `dataset_id` over `[start, end)`, zeros filled.
    pub fn weekly_counts(&self, dataset_id: &str, start: u32, end: u32) -> Vec<f64> {
        let mut series = vec![0.0; end.saturating_sub(start) as usize];
        for e in self.events_for(dataset_id) {
            if e.week >= start && e.week < end {
                series[(e.week - start) as usize] = e.count as f64;
            }
        }
        series
    }

    /// Dense weekly counts from the dataset's creation week up to `end`
    /// (exclusive). Empty when the dataset was created at or after `end`.
    pub fn series_from_creation(&self, dataset_id: &str, end: u32) -> Vec<f64> {
        match self.meta(dataset_id) {
            Some(m) if m.creation_week < end => self.weekly_counts(dataset_id, m.creation_week, end),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: &str, creation: u32) -> DatasetMeta {
        DatasetMeta {
            dataset_id: id.to_string(),
            creation_week: creation,
            dtype: 0,
            extension: 0,
            size_bytes: 1_000,
            initial_replicas: 2,
        }
    }

    fn event(id: &str, week: u32, count: u64) -> AccessEvent {
        AccessEvent { dataset_id: id.to_string(), week, count }
    }

    #[test]
    fn merges_duplicate_event_rows() {
        let t = Trace::new(
            vec![event("d1", 3, 2), event("d1", 3, 1)],
            vec![meta("d1", 0)],
            10,
        )
        .unwrap();
        assert_eq!(t.events(), &[event("d1", 3, 3)]);
    }

    #[test]
    fn rejects_event_for_unknown_dataset() {
        let err = Trace::new(vec![event("ghost", 1, 1)], vec![meta("d1", 0)], 10).unwrap_err();
        assert!(matches!(err, TraceError::UnknownDataset(id) if id == "ghost"));
    }

    #[test]
    fn rejects_event_before_creation() {
        let err = Trace::new(vec![event("d1", 1, 1)], vec![meta("d1", 5)], 10).unwrap_err();
        assert!(matches!(err, TraceError::EventBeforeCreation { week: 1, .. }));
    }

    #[test]
    fn rejects_event_past_horizon() {
        let err = Trace::new(vec![event("d1", 10, 1)], vec![meta("d1", 0)], 10).unwrap_err();
        assert!(matches!(err, TraceError::EventPastHorizon { week: 10, .. }));
    }

    #[test]
    fn rejects_bad_metadata() {
        let mut bad = meta("d1", 0);
        bad.size_bytes = 0;
        assert!(matches!(
            Trace::new(vec![], vec![bad], 10),
            Err(TraceError::BadSize(_))
        ));
        let mut bad = meta("d1", 0);
        bad.initial_replicas = 0;
        assert!(matches!(
            Trace::new(vec![], vec![bad], 10),
            Err(TraceError::BadReplicas(_))
        ));
        assert!(matches!(
            Trace::new(vec![], vec![meta("d1", 0), meta("d1", 1)], 10),
            Err(TraceError::DuplicateDataset(_))
        ));
    }

    #[test]
    fn event_order_does_not_matter() {
        let metas = vec![meta("a", 0), meta("b", 0)];
        let fwd = Trace::new(vec![event("a", 1, 1), event("b", 2, 4)], metas.clone(), 10).unwrap();
        let rev = Trace::new(vec![event("b", 2, 4), event("a", 1, 1)], metas, 10).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn weekly_counts_fills_zeros() {
        let t = Trace::new(
            vec![event("d1", 2, 5), event("d1", 4, 1)],
            vec![meta("d1", 1)],
            6,
        )
        .unwrap();
        assert_eq!(t.weekly_counts("d1", 1, 6), vec![0.0, 5.0, 0.0, 1.0, 0.0]);
        assert_eq!(t.series_from_creation("d1", 4), vec![0.0, 5.0, 0.0]);
        assert!(t.series_from_creation("d1", 1).is_empty());
    }

    #[test]
    fn events_for_isolates_one_dataset() {
        let t = Trace::new(
            vec![event("b", 1, 1), event("a", 1, 2), event("c", 3, 1)],
            vec![meta("a", 0), meta("b", 0), meta("c", 0)],
            5,
        )
        .unwrap();
        assert_eq!(t.events_for("b"), &[event("b", 1, 1)]);
        assert!(t.events_for("nope").is_empty());
    }
}
