//! Per-dataset feature extraction over a feature window, and popularity
//! labeling over a subsequent label window.
//!
//! The feature window is `[0, window_end)`: only events strictly before
//! `window_end` are visible. Temporal features are expressed as ages at
//! `window_end`, and a dataset never accessed in the window gets the
//! sentinel `window_end` for recency, reuse distance and first-access age —
//! "never accessed" is strictly staler than any accessed dataset while all
//! features stay bounded.
//!
//! Reuse distance counts accesses with multiplicity: a week with two or
//! more accesses has a reuse distance of zero.

use thiserror::Error;

use crate::trace::Trace;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("window end {window_end} out of range (horizon {horizon})")]
    WindowOutOfRange { window_end: u32, horizon: u32 },
    #[error("label window [{start}, {start}+{weeks}) overruns horizon {horizon}")]
    LabelWindowOverrun { start: u32, weeks: u32, horizon: u32 },
    #[error("label window must span at least one week")]
    EmptyLabelWindow,
}

/// Names of the eight features, in the order produced by
/// [`FeatureVector::values`].
pub const FEATURE_NAMES: [&str; 8] = [
    "recency",
    "reuse_distance",
    "first_access_age",
    "creation_age",
    "frequency",
    "dtype",
    "extension",
    "size_bytes",
];

/// Index of the recency feature in [`FeatureVector::values`].
pub const RECENCY_INDEX: usize = 0;
/// Index of the frequency feature in [`FeatureVector::values`].
pub const FREQUENCY_INDEX: usize = 4;

/// The eight per-dataset features observed at the end of a feature window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dataset_id: String,
    /// Weeks since the last in-window access (sentinel: window length).
    pub recency: f64,
    /// Weeks between the last and second-last accesses (sentinel: window
    /// length when there are fewer than two accesses).
    pub reuse_distance: f64,
    /// Weeks since the first in-window access (sentinel: window length).
    pub first_access_age: f64,
    /// Weeks since the dataset was created.
    pub creation_age: f64,
    /// In-window accesses per week.
    pub frequency: f64,
    pub dtype: f64,
    pub extension: f64,
    pub size_bytes: f64,
}

impl FeatureVector {
    /// The features as a fixed-order array, ready for a classifier.
    pub fn values(&self) -> [f64; 8] {
        [
            self.recency,
            self.reuse_distance,
            self.first_access_age,
            self.creation_age,
            self.frequency,
            self.dtype,
            self.extension,
            self.size_bytes,
        ]
    }
}

/// A feature vector with its popularity label (1 = accessed during the
/// label window).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: u8,
}

/// Computes one [`FeatureVector`] per dataset created before `window_end`,
/// ordered by dataset id. Only events with `week < window_end` contribute.
pub fn extract_features(trace: &Trace, window_end: u32) -> Result<Vec<FeatureVector>, FeatureError> {
    if window_end == 0 || window_end > trace.horizon_weeks() {
        return Err(FeatureError::WindowOutOfRange {
            window_end,
            horizon: trace.horizon_weeks(),
        });
    }
    let sentinel = window_end as f64;
    let mut out = Vec::new();
    for meta in trace.metas() {
        if meta.creation_week >= window_end {
            continue;
        }
        let mut total: u64 = 0;
        let mut first: Option<u32> = None;
        let mut last: Option<u32> = None;
        let mut second_last: Option<u32> = None;
        for e in trace.events_for(&meta.dataset_id) {
            if e.week >= window_end {
                break;
            }
            total += e.count;
            if first.is_none() {
                first = Some(e.week);
            }
            // Track the weeks of the last and second-last accesses with
            // multiplicity: a count >= 2 puts both in the same week.
            second_last = if e.count >= 2 { Some(e.week) } else { last };
            last = Some(e.week);
        }
        let (recency, first_access_age) = match (last, first) {
            (Some(l), Some(f)) => ((window_end - l) as f64, (window_end - f) as f64),
            _ => (sentinel, sentinel),
        };
        let reuse_distance = match (last, second_last) {
            (Some(l), Some(s)) => (l - s) as f64,
            _ => sentinel,
        };
        out.push(FeatureVector {
            dataset_id: meta.dataset_id.clone(),
            recency,
            reuse_distance,
            first_access_age,
            creation_age: (window_end - meta.creation_week) as f64,
            frequency: total as f64 / window_end as f64,
            dtype: meta.dtype as f64,
            extension: meta.extension as f64,
            size_bytes: meta.size_bytes as f64,
        });
    }
    Ok(out)
}

/// Labels each feature vector: 1 if its dataset has at least one access in
/// `[label_start, label_start + label_weeks)`, else 0.
pub fn label_examples(
    features: Vec<FeatureVector>,
    trace: &Trace,
    label_start: u32,
    label_weeks: u32,
) -> Result<Vec<LabeledExample>, FeatureError> {
    if label_weeks == 0 {
        return Err(FeatureError::EmptyLabelWindow);
    }
    let label_end = label_start
        .checked_add(label_weeks)
        .filter(|end| *end <= trace.horizon_weeks())
        .ok_or(FeatureError::LabelWindowOverrun {
            start: label_start,
            weeks: label_weeks,
            horizon: trace.horizon_weeks(),
        })?;
    Ok(features
        .into_iter()
        .map(|fv| {
            let accessed = trace
                .events_for(&fv.dataset_id)
                .iter()
                .any(|e| e.week >= label_start && e.week < label_end);
            LabeledExample { features: fv, label: accessed as u8 }
        })
        .collect())
}
