//! CSV readers and writers for the CLI's output artifacts. Every file
//! starts with a `# digest=.. seed=..` comment so results are traceable to
//! the configuration that produced them; schemas are documented in
//! `docs/formats.md`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gridpop::evaluate::{CdfPoint, ForecastModel, PolicyCurve};
use gridpop::features::{FeatureVector, LabeledExample, FEATURE_NAMES};
use gridpop::strategy::{ActionLog, StorageState};

pub fn write_stamped(path: &Path, stamp: &str, body: &str) -> Result<()> {
    let contents = format!("# {stamp}\n{body}");
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn features_csv(features: &[FeatureVector]) -> String {
    let mut out = String::from("dataset_id,");
    out.push_str(&FEATURE_NAMES.join(","));
    out.push('\n');
    for fv in features {
        out.push_str(&feature_row(fv));
        out.push('\n');
    }
    out
}

pub fn labeled_features_csv(examples: &[LabeledExample]) -> String {
    let mut out = String::from("dataset_id,");
    out.push_str(&FEATURE_NAMES.join(","));
    out.push_str(",label\n");
    for ex in examples {
        out.push_str(&feature_row(&ex.features));
        out.push_str(&format!(",{}\n", ex.label));
    }
    out
}

fn feature_row(fv: &FeatureVector) -> String {
    let values = fv.values();
    let mut row = fv.dataset_id.clone();
    for v in values {
        row.push_str(&format!(",{v}"));
    }
    row
}

/// Parses a features CSV (with or without the trailing label column).
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .context("features header")?
        .iter()
        .map(str::to_string)
        .collect();
    let mut expected: Vec<&str> = vec!["dataset_id"];
    expected.extend(FEATURE_NAMES);
    let labeled = match headers.len() {
        9 if headers == expected => false,
        10 if headers[..9] == expected[..] && headers[9] == "label" => true,
        _ => bail!(
            "{}: bad features header {:?}",
            path.display(),
            headers.join(",")
        ),
    };
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let want = if labeled { 10 } else { 9 };
        if record.len() != want {
            bail!("{}: expected {} fields, got {}", path.display(), want, record.len());
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .with_context(|| format!("{}: bad number {:?}", path.display(), &record[i]))
        };
        out.push(FeatureVector {
            dataset_id: record[0].to_string(),
            recency: num(1)?,
            reuse_distance: num(2)?,
            first_access_age: num(3)?,
            creation_age: num(4)?,
            frequency: num(5)?,
            dtype: num(6)?,
            extension: num(7)?,
            size_bytes: num(8)?,
        });
    }
    Ok(out)
}

pub fn probabilities_csv(probabilities: &BTreeMap<String, f64>) -> String {
    let mut out = String::from("dataset_id,probability\n");
    for (id, p) in probabilities {
        out.push_str(&format!("{id},{p}\n"));
    }
    out
}

pub fn forecast_csv(rows: &[(String, f64, f64, f64)]) -> String {
    let mut out = String::from("dataset_id,alpha,next_week_forecast,four_week_forecast\n");
    for (id, alpha, next, four) in rows {
        out.push_str(&format!("{id},{alpha},{next},{four}\n"));
    }
    out
}

pub fn actions_csv(log: &ActionLog) -> String {
    let mut out = String::from("week,dataset_id,action,bytes_delta\n");
    for r in log.records() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.week,
            r.dataset_id,
            r.action.name(),
            r.bytes_delta
        ));
    }
    out
}

pub fn state_csv(state: &StorageState) -> String {
    let mut out = String::from("dataset_id,n_replicas,size_bytes,forecast,metric\n");
    for entry in state.datasets() {
        let metric = entry.metric.map_or(String::new(), |m| format!("{m}"));
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            entry.dataset_id, entry.n_replicas, entry.size_bytes, entry.forecast, metric
        ));
    }
    out
}

pub fn curve_csv(curves: &[PolicyCurve]) -> String {
    let mut out = String::from("policy,saved_space_fraction,mistake_rate\n");
    for curve in curves {
        for p in &curve.points {
            out.push_str(&format!(
                "{},{},{}\n",
                curve.policy, p.saved_space_fraction, p.mistake_rate
            ));
        }
    }
    out
}

pub fn correlation_csv(correlations: &[(ForecastModel, f64)]) -> String {
    let mut out = String::from("model,pearson\n");
    for (model, r) in correlations {
        out.push_str(&format!("{},{r}\n", model.name()));
    }
    out
}

pub fn cdf_csv(cdf: &[CdfPoint]) -> String {
    let mut out = String::from("n_replicas,cumulative_space_fraction\n");
    for p in cdf {
        out.push_str(&format!("{},{}\n", p.n_replicas, p.cumulative_space_fraction));
    }
    out
}
