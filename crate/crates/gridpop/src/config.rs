//! Run configuration: every tunable in one place, loadable from a plain
//! `key = value` file, with a stable digest stamped into every output so a
//! result can always be traced back to the exact settings that produced it.
//!
//! Precedence is defaults < config file < command-line flags; the digest
//! hashes the configuration after that merge. Fields that resolve against
//! a loaded trace (window ends, capacity, start week) hash as their
//! resolution rule (`auto`) so the digest is defined before any input is
//! read; identical inputs plus an identical digest give byte-identical
//! outputs.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::forest::ForestParams;
use crate::strategy::{Policy, SimConfig};
use crate::trace::{SynthConfig, Trace, TraceError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`, got {text:?}")]
    BadLine { path: String, line: usize, text: String },
    #[error("{path}:{line}: {msg}")]
    BadValue { path: String, line: usize, msg: String },
    #[error("{path}:{line}: unknown key {key:?}")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// All knobs for a run. See `docs/formats.md` for the config-file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Master seed; every stochastic component derives its stream from it.
    pub seed: u64,
    pub synth: SynthConfig,
    /// Feature-window end for training; `None` resolves to 3/5 of the
    /// horizon.
    pub train_end: Option<u32>,
    /// Feature-window end for validation; `None` resolves to 4/5 of the
    /// horizon.
    pub valid_end: Option<u32>,
    /// Label-window length; `None` resolves to the rest of the horizon
    /// after `valid_end`.
    pub label_weeks: Option<u32>,
    pub alpha_grid_step: f64,
    pub n_trees: usize,
    pub max_depth: Option<u32>,
    pub min_samples_leaf: usize,
    pub features_per_split: Option<usize>,
    /// Disk capacity; `None` sizes it from the trace via `capacity_factor`.
    pub capacity_bytes: Option<u64>,
    /// Auto-capacity = initial replica bytes times this factor.
    pub capacity_factor: f64,
    pub max_replicas: u32,
    pub purge_threshold: f64,
    pub purge_cadence_weeks: u32,
    pub policy: Policy,
    /// First simulated week; `None` resolves to `valid_end`.
    pub start_week: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            synth: SynthConfig::default(),
            train_end: None,
            valid_end: None,
            label_weeks: None,
            alpha_grid_step: 0.01,
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
            capacity_bytes: None,
            capacity_factor: 1.25,
            max_replicas: 4,
            purge_threshold: 0.1,
            purge_cadence_weeks: 26,
            policy: Policy::MetricM,
            start_week: None,
        }
    }
}

impl RunConfig {
    /// Defaults overridden by a config file.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let text = std::fs::read_to_string(path)?;
        let display = path.display().to_string();
        for (line, key, value) in parse_kv(&text, &display)? {
            config.apply_key(&key, &value, &display, line)?;
        }
        Ok(config)
    }

    fn apply_key(
        &mut self,
        key: &str,
        value: &str,
        path: &str,
        line: usize,
    ) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::BadValue {
            path: path.to_string(),
            line,
            msg,
        };
        macro_rules! parse {
            () => {
                value.parse().map_err(|e| bad(format!("{key}: {e}")))?
            };
        }
        match key {
            "seed" => self.seed = parse!(),
            "train_end" => self.train_end = Some(parse!()),
            "valid_end" => self.valid_end = Some(parse!()),
            "label_weeks" => self.label_weeks = Some(parse!()),
            "alpha_grid_step" => self.alpha_grid_step = parse!(),
            "n_trees" => self.n_trees = parse!(),
            "max_depth" => {
                self.max_depth = match value {
                    "none" => None,
                    _ => Some(parse!()),
                }
            }
            "min_samples_leaf" => self.min_samples_leaf = parse!(),
            "features_per_split" => {
                self.features_per_split = match value {
                    "auto" => None,
                    _ => Some(parse!()),
                }
            }
            "capacity_bytes" => {
                self.capacity_bytes = match value {
                    "auto" => None,
                    _ => Some(parse!()),
                }
            }
            "capacity_factor" => self.capacity_factor = parse!(),
            "max_replicas" => self.max_replicas = parse!(),
            "purge_threshold" => self.purge_threshold = parse!(),
            "purge_cadence_weeks" => self.purge_cadence_weeks = parse!(),
            "policy" => self.policy = value.parse().map_err(|e| bad(format!("{e}")))?,
            "start_week" => {
                self.start_week = match value {
                    "auto" => None,
                    _ => Some(parse!()),
                }
            }
            _ => match self.synth.set_key(key, value) {
                Ok(()) => {}
                Err(TraceError::UnknownConfigKey(key)) => {
                    return Err(ConfigError::UnknownKey { path: path.to_string(), line, key })
                }
                Err(e) => return Err(bad(e.to_string())),
            },
        }
        Ok(())
    }

    /// Proportional window defaults: 3/5 of the horizon for training, 4/5
    /// for validation, the rest for labels (78/104/26 on 130 weeks).
    pub fn window_defaults(horizon: u32) -> (u32, u32, u32) {
        let train_end = horizon * 3 / 5;
        let valid_end = horizon * 4 / 5;
        (train_end, valid_end, horizon - valid_end)
    }

    /// `(train_end, valid_end, label_weeks)` with defaults filled in.
    pub fn resolve_windows(&self, horizon: u32) -> (u32, u32, u32) {
        let (dt, dv, dl) = Self::window_defaults(horizon);
        (
            self.train_end.unwrap_or(dt),
            self.valid_end.unwrap_or(dv),
            self.label_weeks.unwrap_or(dl),
        )
    }

    pub fn resolve_start_week(&self, horizon: u32) -> u32 {
        self.start_week
            .unwrap_or_else(|| self.resolve_windows(horizon).1)
    }

    /// Explicit capacity, or the initial replica footprint of the trace
    /// scaled by `capacity_factor`.
    pub fn resolve_capacity(&self, trace: &Trace) -> u64 {
        if let Some(capacity) = self.capacity_bytes {
            return capacity;
        }
        let initial: u128 = trace
            .metas()
            .iter()
            .map(|m| m.initial_replicas.min(self.max_replicas) as u128 * m.size_bytes as u128)
            .sum();
        (initial as f64 * self.capacity_factor) as u64
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: self.features_per_split,
        }
    }

    pub fn sim_config(&self, trace: &Trace) -> SimConfig {
        SimConfig {
            capacity_bytes: self.resolve_capacity(trace),
            max_replicas: self.max_replicas,
            policy: self.policy,
            purge_threshold: self.purge_threshold,
            purge_cadence_weeks: self.purge_cadence_weeks,
            start_week: self.resolve_start_week(trace.horizon_weeks()),
        }
    }

    /// Canonical `key = value` dump, one line per key, sorted, with `auto`
    /// for trace-dependent fields left unresolved.
    pub fn canonical_text(&self) -> String {
        let auto_u32 = |v: Option<u32>| v.map_or("auto".to_string(), |x| x.to_string());
        let mut pairs = vec![
            ("alpha_grid_step", self.alpha_grid_step.to_string()),
            ("bursty_weight", self.synth.bursty_weight.to_string()),
            ("capacity_bytes", self.capacity_bytes.map_or("auto".to_string(), |x| x.to_string())),
            ("capacity_factor", self.capacity_factor.to_string()),
            ("cold_weight", self.synth.cold_weight.to_string()),
            ("creation_spread", self.synth.creation_spread.to_string()),
            ("decaying_weight", self.synth.decaying_weight.to_string()),
            ("features_per_split", self.features_per_split.map_or("auto".to_string(), |x| x.to_string())),
            ("horizon_weeks", self.synth.horizon_weeks.to_string()),
            ("hot_weight", self.synth.hot_weight.to_string()),
            ("label_weeks", auto_u32(self.label_weeks)),
            ("max_depth", self.max_depth.map_or("none".to_string(), |x| x.to_string())),
            ("max_replicas", self.max_replicas.to_string()),
            ("min_samples_leaf", self.min_samples_leaf.to_string()),
            ("n_datasets", self.synth.n_datasets.to_string()),
            ("n_trees", self.n_trees.to_string()),
            ("policy", self.policy.name().to_string()),
            ("purge_cadence_weeks", self.purge_cadence_weeks.to_string()),
            ("purge_threshold", self.purge_threshold.to_string()),
            ("seed", self.seed.to_string()),
            ("start_week", auto_u32(self.start_week)),
            ("train_end", auto_u32(self.train_end)),
            ("valid_end", auto_u32(self.valid_end)),
        ];
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// First 16 hex characters of the SHA-256 of [`RunConfig::canonical_text`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_text().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// The `# digest=.. seed=..` annotation stamped on every output file.
    pub fn output_stamp(&self) -> String {
        format!("digest={} seed={}", self.digest(), self.seed)
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// skipped.
pub fn parse_kv(text: &str, path: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::BadLine {
                path: path.to_string(),
                line,
                text: raw.to_string(),
            });
        };
        out.push((line, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::generate_synthetic;

    #[test]
    fn defaults_give_the_documented_windows() {
        let config = RunConfig::default();
        assert_eq!(config.resolve_windows(130), (78, 104, 26));
        assert_eq!(config.resolve_windows(10), (6, 8, 2));
        assert_eq!(config.resolve_start_week(130), 104);
    }

    #[test]
    fn file_values_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "# a comment\nseed = 7\nn_datasets = 50\npolicy = lfu\nmax_depth = 3\n\ntrain_end = 30\n",
        )
        .unwrap();
        let config = RunConfig::from_file(&path).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.synth.n_datasets, 50);
        assert_eq!(config.policy, Policy::Lfu);
        assert_eq!(config.max_depth, Some(3));
        assert_eq!(config.train_end, Some(30));
        // Untouched keys keep their defaults.
        assert_eq!(config.max_replicas, 4);
    }

    #[test]
    fn bad_files_are_rejected_with_positions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "seed = 1\nnot a pair\n").unwrap();
        match RunConfig::from_file(&path).unwrap_err() {
            ConfigError::BadLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, "mystery = 1\n").unwrap();
        assert!(matches!(
            RunConfig::from_file(&path).unwrap_err(),
            ConfigError::UnknownKey { line: 1, .. }
        ));
        std::fs::write(&path, "seed = banana\n").unwrap();
        assert!(matches!(
            RunConfig::from_file(&path).unwrap_err(),
            ConfigError::BadValue { line: 1, .. }
        ));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
        let c = RunConfig { seed: 43, ..Default::default() };
        assert_ne!(a.digest(), c.digest());
        let d = RunConfig { purge_threshold: 0.2, ..Default::default() };
        assert_ne!(a.digest(), d.digest());
    }

    #[test]
    fn auto_capacity_scales_the_initial_footprint() {
        let config = RunConfig {
            synth: SynthConfig { n_datasets: 20, ..Default::default() },
            ..Default::default()
        };
        let trace = generate_synthetic(&config.synth, 1).unwrap();
        let initial: u64 = trace
            .metas()
            .iter()
            .map(|m| m.initial_replicas.min(4) as u64 * m.size_bytes)
            .sum();
        let capacity = config.resolve_capacity(&trace);
        assert!(capacity > initial);
        assert_eq!(capacity, (initial as f64 * 1.25) as u64);
        let fixed = RunConfig { capacity_bytes: Some(999), ..config };
        assert_eq!(fixed.resolve_capacity(&trace), 999);
    }
}
