//! Seed-parallel experiment driver with order-independent aggregation.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Named scalar outcomes of one seed, in a fixed order.
pub type Metrics = Vec<(String, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub metrics: Metrics,
    pub failure: Option<SeedFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedFailure {
    pub message: String,
    pub numerical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean; zero for a single seed.
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloRun {
    pub seeds: Vec<SeedRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl MonteCarloRun {
    pub fn failures(&self) -> usize {
        self.seeds.iter().filter(|s| s.failure.is_some()).count()
    }

    pub fn aggregate(&self, name: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.name == name)
    }
}

/// Runs `job` on every seed in parallel. Failing seeds are recorded and the
/// remaining seeds still run; results are sorted by seed before aggregation.
pub fn monte_carlo<F>(seeds: &[u64], job: F) -> MonteCarloRun
where
    F: Fn(u64) -> Result<Metrics> + Sync,
{
    monte_carlo_collect(seeds, |s| job(s).map(|m| (m, ()))).0
}

/// Like [`monte_carlo`], also returning each successful seed's payload in
/// seed order.
pub fn monte_carlo_collect<F, T>(seeds: &[u64], job: F) -> (MonteCarloRun, Vec<(u64, T)>)
where
    F: Fn(u64) -> Result<(Metrics, T)> + Sync,
    T: Send,
{
    let mut outcomes: Vec<(u64, Result<(Metrics, T)>)> = seeds.par_iter().map(|&seed| (seed, job(seed))).collect();
    outcomes.sort_by_key(|(seed, _)| *seed);
    let mut records = Vec::with_capacity(outcomes.len());
    let mut payloads = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok((metrics, payload)) => {
                records.push(SeedRecord { seed, metrics, failure: None });
                payloads.push((seed, payload));
            }
            Err(e) => records.push(SeedRecord { seed, metrics: Vec::new(), failure: Some(SeedFailure { message: e.to_string(), numerical: e.is_numerical() }) }),
        }
    }
    let aggregates = aggregate(&records);
    (MonteCarloRun { seeds: records, aggregates }, payloads)
}

fn aggregate(records: &[SeedRecord]) -> Vec<Aggregate> {
    let mut names: Vec<String> = Vec::new();
    for r in records {
        for (name, _) in &r.metrics {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
    }
    names
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = records.iter().filter_map(|r| r.metrics.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)).collect();
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std_err = if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
            Aggregate { name, n, mean, std_err }
        })
        .collect()
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let bytes = serde_json::to_vec(&value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Turns recorded seed failures into an error carrying the first message;
/// numerical if any failing seed failed numerically.
pub fn require_success(run: &MonteCarloRun) -> Result<()> {
    let failed: Vec<&SeedRecord> = run.seeds.iter().filter(|s| s.failure.is_some()).collect();
    let Some(first) = failed.first() else {
        return Ok(());
    };
    let f = first.failure.as_ref().expect("filtered on failure");
    let msg = format!("{} of {} seeds failed; seed {}: {}", failed.len(), run.seeds.len(), first.seed, f.message);
    if failed.iter().any(|s| s.failure.as_ref().is_some_and(|f| f.numerical)) {
        Err(HarnessError::Numerical(msg))
    } else {
        Err(HarnessError::Validation(msg))
    }
}
