//! Rolling-window evaluation: saved-space-vs-mistakes curves, walk-forward
//! forecast correlation, and the occupied-space CDF by replica count.
//!
//! The mistake rate of a removal sweep is defined as
//! `removed-and-later-accessed / removed-so-far`; the same definition is
//! applied to every policy being compared, so curve gaps are meaningful
//! even though the denominator is a convention.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::features::{extract_features, label_examples, FeatureError, LabeledExample};
use crate::smoothing::{fit_alpha, SmoothingError};
use crate::strategy::StorageState;
use crate::trace::Trace;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluateError {
    #[error("train window [0, {train_end}) + {label_weeks} label weeks must end by valid_end {valid_end}")]
    WindowsOverlap { train_end: u32, valid_end: u32, label_weeks: u32 },
    #[error("score/truth/size maps disagree on dataset {0:?}")]
    KeyMismatch(String),
    #[error("evaluation weeks {start}..{end} invalid for horizon {horizon}")]
    BadEvalRange { start: u32, end: u32, horizon: u32 },
    #[error("need at least 2 evaluation pairs, got {0}")]
    TooFewPairs(usize),
    #[error("correlation is undefined: {0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("storage state holds no bytes")]
    EmptyState,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
}

/// Train and validation example sets produced by the rolling-window
/// protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub train_end: u32,
    pub valid_end: u32,
    pub label_weeks: u32,
}

/// Builds the two-window split: train examples see features over
/// `[0, train_end)` with labels over `[train_end, train_end+label_weeks)`;
/// validation examples see `[0, valid_end)` with labels over
/// `[valid_end, valid_end+label_weeks)`.
pub fn rolling_windows(
    trace: &Trace,
    train_end: u32,
    valid_end: u32,
    label_weeks: u32,
) -> Result<WindowSplit, EvaluateError> {
    if label_weeks == 0 {
        return Err(FeatureError::EmptyLabelWindow.into());
    }
    if train_end + label_weeks > valid_end {
        return Err(EvaluateError::WindowsOverlap { train_end, valid_end, label_weeks });
    }
    let train_features = extract_features(trace, train_end)?;
    let train = label_examples(train_features, trace, train_end, label_weeks)?;
    let valid_features = extract_features(trace, valid_end)?;
    let validation = label_examples(valid_features, trace, valid_end, label_weeks)?;
    Ok(WindowSplit { train, validation, train_end, valid_end, label_weeks })
}

/// One point of a saved-space-versus-mistakes sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Cumulative removed bytes over total bytes.
    pub saved_space_fraction: f64,
    /// Removed-and-later-accessed datasets over datasets removed so far.
    pub mistake_rate: f64,
}

/// Sweeps dataset removal in ascending score order (ties by dataset id) and
/// records one point after each removal.
///
/// For the classifier the score is the predicted access probability; for
/// LRU pass negated recency, for LFU the access frequency — anything whose
/// ascending order is "remove first".
pub fn saved_space_curve(
    scores: &BTreeMap<String, f64>,
    truth: &BTreeMap<String, u8>,
    sizes: &BTreeMap<String, u64>,
) -> Result<Vec<CurvePoint>, EvaluateError> {
    for key in scores.keys() {
        if !truth.contains_key(key) || !sizes.contains_key(key) {
            return Err(EvaluateError::KeyMismatch(key.clone()));
        }
    }
    for key in truth.keys().chain(sizes.keys()) {
        if !scores.contains_key(key) {
            return Err(EvaluateError::KeyMismatch(key.clone()));
        }
    }

    let mut order: Vec<(&String, &f64)> = scores.iter().collect();
    order.sort_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)));

    let total_bytes: u128 = sizes.values().map(|s| *s as u128).sum();
    let mut removed_bytes: u128 = 0;
    let mut removed = 0u64;
    let mut mistakes = 0u64;
    let mut points = Vec::with_capacity(order.len());
    for (id, _) in order {
        removed_bytes += sizes[id] as u128;
        removed += 1;
        mistakes += u64::from(truth[id]);
        points.push(CurvePoint {
            saved_space_fraction: removed_bytes as f64 / total_bytes as f64,
            mistake_rate: mistakes as f64 / removed as f64,
        });
    }
    Ok(points)
}

/// The mistake rate at the first curve point reaching `fraction` of saved
/// space (the last point when the curve never reaches it).
pub fn mistake_rate_at(curve: &[CurvePoint], fraction: f64) -> Option<f64> {
    curve
        .iter()
        .find(|p| p.saved_space_fraction >= fraction)
        .or(curve.last())
        .map(|p| p.mistake_rate)
}

/// Short-term forecast model under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastModel {
    /// Exponential smoothing with a grid-fitted alpha.
    Brown,
    /// Last observed value.
    Static,
    /// Mean of all observed values.
    Average,
}

impl ForecastModel {
    pub fn name(self) -> &'static str {
        match self {
            ForecastModel::Brown => "brown",
            ForecastModel::Static => "static",
            ForecastModel::Average => "average",
        }
    }

    pub const ALL: [ForecastModel; 3] =
        [ForecastModel::Brown, ForecastModel::Static, ForecastModel::Average];
}

/// Pooled Pearson correlation between one-step-ahead predictions and true
/// weekly counts over every (dataset, week) pair in `eval_weeks`.
///
/// Walk-forward: for each evaluated week the model is refit on that
/// dataset's history up to (excluding) the week. Pairs are only scored for
/// datasets with at least two observed weeks of history at that point.
pub fn forecast_correlation(
    trace: &Trace,
    model: ForecastModel,
    eval_weeks: Range<u32>,
) -> Result<f64, EvaluateError> {
    if eval_weeks.is_empty() || eval_weeks.end > trace.horizon_weeks() {
        return Err(EvaluateError::BadEvalRange {
            start: eval_weeks.start,
            end: eval_weeks.end,
            horizon: trace.horizon_weeks(),
        });
    }
    let per_dataset: Vec<Vec<(f64, f64)>> = trace
        .metas()
        .par_iter()
        .map(|meta| {
            let mut pairs = Vec::new();
            let creation = meta.creation_week;
            if creation + 2 >= eval_weeks.end {
                return pairs;
            }
            let full = trace.weekly_counts(&meta.dataset_id, creation, eval_weeks.end);
            for week in eval_weeks.clone() {
                if week < creation + 2 {
                    continue;
                }
                let history = &full[..(week - creation) as usize];
                let prediction = match model {
                    ForecastModel::Brown => {
                        fit_alpha(history).expect("history length >= 2").next_forecast
                    }
                    ForecastModel::Static => *history.last().expect("non-empty"),
                    ForecastModel::Average => {
                        history.iter().sum::<f64>() / history.len() as f64
                    }
                };
                let truth = full[(week - creation) as usize];
                pairs.push((prediction, truth));
            }
            pairs
        })
        .collect();
    let pairs: Vec<(f64, f64)> = per_dataset.into_iter().flatten().collect();
    if pairs.len() < 2 {
        return Err(EvaluateError::TooFewPairs(pairs.len()));
    }
    let predictions: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let truths: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    pearson(&predictions, &truths)
}

/// Pearson correlation coefficient of two equally long samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvaluateError> {
    assert_eq!(xs.len(), ys.len(), "paired samples must have equal length");
    if xs.len() < 2 {
        return Err(EvaluateError::TooFewPairs(xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_y == 0.0 {
        return Err(EvaluateError::ZeroVariance("truth"));
    }
    if var_x == 0.0 {
        return Err(EvaluateError::ZeroVariance("prediction"));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// One point of the occupied-space CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub n_replicas: u32,
    /// Fraction of used bytes held by datasets with at most this many
    /// replicas.
    pub cumulative_space_fraction: f64,
}

/// Cumulative fraction of occupied disk space by replica count: one point
/// for each k from 1 to the maximum replica count, non-decreasing, ending
/// at exactly 1.
pub fn occupancy_cdf(state: &StorageState) -> Result<Vec<CdfPoint>, EvaluateError> {
    let mut bytes_by_count: BTreeMap<u32, u128> = BTreeMap::new();
    for entry in state.datasets() {
        if entry.n_replicas > 0 {
            *bytes_by_count.entry(entry.n_replicas).or_insert(0) +=
                entry.n_replicas as u128 * entry.size_bytes as u128;
        }
    }
    let total: u128 = bytes_by_count.values().sum();
    if total == 0 {
        return Err(EvaluateError::EmptyState);
    }
    let max_count = *bytes_by_count.keys().last().expect("non-empty");
    let mut cumulative: u128 = 0;
    let mut points = Vec::with_capacity(max_count as usize);
    for k in 1..=max_count {
        cumulative += bytes_by_count.get(&k).copied().unwrap_or(0);
        points.push(CdfPoint {
            n_replicas: k,
            cumulative_space_fraction: cumulative as f64 / total as f64,
        });
    }
    Ok(points)
}

/// A named saved-space curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCurve {
    pub policy: String,
    pub points: Vec<CurvePoint>,
}

/// Everything one evaluation run produces, plus the metadata needed to
/// reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub curves: Vec<PolicyCurve>,
    pub correlations: Vec<(ForecastModel, f64)>,
    pub cdf: Vec<CdfPoint>,
    pub seed: u64,
    pub train_end: u32,
    pub valid_end: u32,
    pub label_weeks: u32,
    pub config_digest: String,
    /// Tape restores during the simulation that produced `cdf`.
    pub restores: Option<u32>,
}

impl EvaluationReport {
    /// Renders the three report sections as plain text.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("gridpop report\n");
        out.push_str("==============\n");
        out.push_str(&format!(
            "config digest: {}  seed: {}\n",
            self.config_digest, self.seed
        ));
        out.push_str(&format!(
            "windows: train_end={} valid_end={} label_weeks={}\n\n",
            self.train_end, self.valid_end, self.label_weeks
        ));

        out.push_str("[saved-space curve] mistake rate at matched saved-space fractions\n");
        out.push_str("fraction");
        for curve in &self.curves {
            out.push_str(&format!(" {:>10}", curve.policy));
        }
        out.push('\n');
        for tenth in 1..=9u32 {
            let fraction = tenth as f64 / 10.0;
            out.push_str(&format!("{fraction:>8.2}"));
            for curve in &self.curves {
                match mistake_rate_at(&curve.points, fraction) {
                    Some(rate) => out.push_str(&format!(" {rate:>10.4}")),
                    None => out.push_str(&format!(" {:>10}", "-")),
                }
            }
            out.push('\n');
        }
        out.push('\n');

        out.push_str("[forecast correlation] one-step-ahead pooled Pearson\n");
        for (model, r) in &self.correlations {
            out.push_str(&format!("{:>8}: {r:.4}\n", model.name()));
        }
        out.push('\n');

        out.push_str("[occupied-space CDF] cumulative space fraction by replica count\n");
        for point in &self.cdf {
            out.push_str(&format!(
                "replicas<={}: {:.4}\n",
                point.n_replicas, point.cumulative_space_fraction
            ));
        }
        if let Some(restores) = self.restores {
            out.push_str(&format!("\nrestores during simulation: {restores}\n"));
        }
        out
    }
}
