//! Seeded synthetic trace generation.
//!
//! Real access histories are rarely shareable, so the library ships a
//! generator with enough structure for the prediction and replication
//! machinery to have something to find. Each dataset is drawn from one of
//! four latent popularity classes:
//!
//! - `Hot`: a stable Poisson access rate for its whole life.
//! - `Decaying`: a high initial rate that decays exponentially.
//! - `Cold`: accessed only in its first two weeks, silent afterwards.
//! - `Bursty`: long quiet gaps punctuated by heavy bursts.
//!
//! Metadata (type, extension, size, initial replicas) is correlated with
//! the class, so a classifier has signal beyond pure recency: a stale
//! bursty dataset and a stale cold dataset look alike on recency alone but
//! differ in extension code, access frequency and reuse distance.
//!
//! Every dataset draws from its own counter-mode RNG stream, so output is a
//! pure function of `(config, seed)` and byte-identical across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};

use super::{AccessEvent, DatasetMeta, Trace, TraceError};

/// Latent popularity class of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PopClass {
    Hot,
    Decaying,
    Cold,
    Bursty,
}

impl PopClass {
    pub fn name(self) -> &'static str {
        match self {
            PopClass::Hot => "hot",
            PopClass::Decaying => "decaying",
            PopClass::Cold => "cold",
            PopClass::Bursty => "bursty",
        }
    }
}

/// Generator parameters. All fields have defaults; see `docs/formats.md`
/// for the config-file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_datasets: u32,
    pub horizon_weeks: u32,
    /// Mixture weights for hot / decaying / cold / bursty; must sum to 1.
    pub hot_weight: f64,
    pub decaying_weight: f64,
    pub cold_weight: f64,
    pub bursty_weight: f64,
    /// Creation weeks are drawn uniformly from the first `creation_spread`
    /// fraction of the horizon.
    pub creation_spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_datasets: 10_000,
            horizon_weeks: 130,
            hot_weight: 0.15,
            decaying_weight: 0.25,
            cold_weight: 0.40,
            bursty_weight: 0.20,
            creation_spread: 0.75,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.n_datasets == 0 {
            return Err(TraceError::NoDatasets);
        }
        if self.horizon_weeks < 8 {
            return Err(TraceError::HorizonTooShort(self.horizon_weeks));
        }
        let weights = [
            self.hot_weight,
            self.decaying_weight,
            self.cold_weight,
            self.bursty_weight,
        ];
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0 || w.is_nan()) || (sum - 1.0).abs() > 1e-9 {
            return Err(TraceError::BadMixture(sum));
        }
        Ok(())
    }

    /// Applies one `key = value` pair from a config file.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), TraceError> {
        let bad = |e: String| TraceError::Parse {
            path: "config".to_string(),
            line: 0,
            msg: format!("key {key:?}: {e}"),
        };
        match key {
            "n_datasets" => self.n_datasets = value.parse().map_err(|e| bad(format!("{e}")))?,
            "horizon_weeks" => {
                self.horizon_weeks = value.parse().map_err(|e| bad(format!("{e}")))?
            }
            "hot_weight" => self.hot_weight = value.parse().map_err(|e| bad(format!("{e}")))?,
            "decaying_weight" => {
                self.decaying_weight = value.parse().map_err(|e| bad(format!("{e}")))?
            }
            "cold_weight" => self.cold_weight = value.parse().map_err(|e| bad(format!("{e}")))?,
            "bursty_weight" => {
                self.bursty_weight = value.parse().map_err(|e| bad(format!("{e}")))?
            }
            "creation_spread" => {
                self.creation_spread = value.parse().map_err(|e| bad(format!("{e}")))?
            }
            other => return Err(TraceError::UnknownConfigKey(other.to_string())),
        }
        Ok(())
    }
}

/// A generated trace together with each dataset's latent class, in
/// dataset-id order.
#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    pub trace: Trace,
    pub classes: Vec<(String, PopClass)>,
}

/// Generates a synthetic trace; see [`generate_synthetic_detailed`] to also
/// get the latent classes.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Trace, TraceError> {
    Ok(generate_synthetic_detailed(config, seed)?.trace)
}

/// Generates a synthetic trace, keeping the per-dataset latent classes
/// (useful for evaluation and tests; the classes are not part of the trace
/// itself).
pub fn generate_synthetic_detailed(
    config: &SynthConfig,
    seed: u64,
) -> Result<SyntheticTrace, TraceError> {
    config.validate()?;
    let mut events = Vec::new();
    let mut metas = Vec::with_capacity(config.n_datasets as usize);
    let mut classes = Vec::with_capacity(config.n_datasets as usize);

    let max_creation = (((config.horizon_weeks - 1) as f64) * config.creation_spread) as u32;

    for i in 0..config.n_datasets {
        // One independent stream per dataset: adding or dropping datasets
        // never perturbs the others.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);

        let dataset_id = format!("ds{i:06}");
        let class = draw_class(config, &mut rng);
        let creation_week = rng.random_range(0..=max_creation);

        let meta = draw_meta(&dataset_id, class, creation_week, &mut rng);
        let counts = draw_counts(class, creation_week, config.horizon_weeks, &mut rng);
        for (week, count) in counts {
            events.push(AccessEvent { dataset_id: dataset_id.clone(), week, count });
        }
        metas.push(meta);
        classes.push((dataset_id, class));
    }

    let trace = Trace::new(events, metas, config.horizon_weeks)?;
    Ok(SyntheticTrace { trace, classes })
}

fn draw_class(config: &SynthConfig, rng: &mut ChaCha8Rng) -> PopClass {
    let u: f64 = rng.random();
    let mut acc = config.hot_weight;
    if u < acc {
        return PopClass::Hot;
    }
    acc += config.decaying_weight;
    if u < acc {
        return PopClass::Decaying;
    }
    acc += config.cold_weight;
    if u < acc {
        return PopClass::Cold;
    }
    PopClass::Bursty
}

fn draw_meta(
    dataset_id: &str,
    class: PopClass,
    creation_week: u32,
    rng: &mut ChaCha8Rng,
) -> DatasetMeta {
    // P(dtype = 0), extension weights over {0,1,2}, median size, replica
    // weights over {1,2,3,4}.
    let (p_real, ext_w, median_size, repl_w): (f64, [f64; 3], f64, [f64; 4]) = match class {
        PopClass::Hot => (0.75, [0.55, 0.35, 0.10], 2e11, [0.05, 0.20, 0.40, 0.35]),
        PopClass::Decaying => (0.60, [0.35, 0.55, 0.10], 3e11, [0.10, 0.30, 0.40, 0.20]),
        PopClass::Cold => (0.25, [0.70, 0.25, 0.05], 5e11, [0.40, 0.35, 0.20, 0.05]),
        PopClass::Bursty => (0.50, [0.05, 0.05, 0.90], 2e11, [0.20, 0.30, 0.30, 0.20]),
    };
    let dtype = if rng.random::<f64>() < p_real { 0 } else { 1 };
    let extension = categorical(&ext_w, rng) as u32;
    let lognorm = LogNormal::new(median_size.ln(), 0.8).expect("valid lognormal");
    let size_bytes = (lognorm.sample(rng) as u64).clamp(1_000_000_000, 20_000_000_000_000);
    let initial_replicas = categorical(&repl_w, rng) as u32 + 1;
    DatasetMeta {
        dataset_id: dataset_id.to_string(),
        creation_week,
        dtype,
        extension,
        size_bytes,
        initial_replicas,
    }
}

fn draw_counts(
    class: PopClass,
    creation_week: u32,
    horizon: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<(u32, u64)> {
    let mut out = Vec::new();
    match class {
        PopClass::Hot => {
            let lognorm = LogNormal::new(6f64.ln(), 0.5).expect("valid lognormal");
            let rate = lognorm.sample(rng).clamp(2.0, 40.0);
            for week in creation_week..horizon {
                let c = poisson(rate, rng);
                if c > 0 {
                    out.push((week, c));
                }
            }
        }
        PopClass::Decaying => {
            let lognorm = LogNormal::new(12f64.ln(), 0.4).expect("valid lognormal");
            let initial_rate = lognorm.sample(rng).clamp(4.0, 60.0);
            let timescale = rng.random_range(4.0..16.0);
            for week in creation_week..horizon {
                let rate = initial_rate * (-((week - creation_week) as f64) / timescale).exp();
                if rate < 0.05 {
                    break;
                }
                let c = poisson(rate, rng);
                if c > 0 {
                    out.push((week, c));
                }
            }
        }
        PopClass::Cold => {
            // Checked once or twice right after creation, never again.
            out.push((creation_week, 1 + poisson(1.5, rng)));
            if creation_week + 1 < horizon {
                let c = poisson(0.8, rng);
                if c > 0 {
                    out.push((creation_week + 1, c));
                }
            }
        }
        PopClass::Bursty => {
            out.push((creation_week, 3 + poisson(10.0, rng)));
            for week in creation_week + 1..horizon {
                if rng.random::<f64>() < 0.07 {
                    out.push((week, 1 + poisson(12.0, rng)));
                }
            }
        }
    }
    out
}

fn categorical(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn poisson(rate: f64, rng: &mut ChaCha8Rng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(rate).expect("positive rate");
    dist.sample(rng) as u64
}
