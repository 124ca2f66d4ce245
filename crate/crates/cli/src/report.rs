//! Per-episode metric tables and their summaries.

use std::collections::BTreeMap;
use std::path::Path;

use aam_core::EpisodeMetrics;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Numeric columns of `metrics.csv`, after the episode index.
pub const COLUMNS: [&str; 8] = [
    "fleet_reward",
    "fulfillment_ratio",
    "reward_class1",
    "reward_class2",
    "reward_class3",
    "arrived",
    "fulfilled",
    "dropped",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for fewer than two values).
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

/// One evaluated episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub episode_seed: u64,
    pub metrics: EpisodeMetrics,
}

impl EpisodeRow {
    fn values(&self) -> [f64; 8] {
        let m = &self.metrics;
        [
            m.fleet_reward,
            m.fulfillment_ratio,
            m.rewards_by_class[0],
            m.rewards_by_class[1],
            m.rewards_by_class[2],
            m.arrived as f64,
            m.fulfilled as f64,
            m.dropped as f64,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: String,
    pub episodes: usize,
    pub columns: BTreeMap<String, Stat>,
}

impl Summary {
    pub fn new(policy: &str, rows: &[EpisodeRow]) -> Self {
        let columns = COLUMNS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let values: Vec<f64> = rows.iter().map(|r| r.values()[i]).collect();
                (name.to_string(), Stat::of(&values))
            })
            .collect();
        Self {
            policy: policy.to_string(),
            episodes: rows.len(),
            columns,
        }
    }

    pub fn stat(&self, column: &str) -> Stat {
        self.columns.get(column).copied().unwrap_or(Stat { mean: f64::NAN, std: f64::NAN })
    }
}

/// Writes `metrics.csv`; floats use the shortest representation that reads
/// back to the same value.
pub fn write_metrics(path: &Path, rows: &[EpisodeRow]) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    let mut header = vec!["episode"];
    header.extend(COLUMNS);
    out.write_record(&header)?;
    for row in rows {
        let m = &row.metrics;
        out.write_record([
            row.episode.to_string(),
            m.fleet_reward.to_string(),
            m.fulfillment_ratio.to_string(),
            m.rewards_by_class[0].to_string(),
            m.rewards_by_class[1].to_string(),
            m.rewards_by_class[2].to_string(),
            m.arrived.to_string(),
            m.fulfilled.to_string(),
            m.dropped.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `metrics.csv` back as column name to values.
pub fn read_metrics(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut columns: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for record in reader.records() {
        let record = record?;
        for (h, field) in headers.iter().zip(record.iter()) {
            let v: f64 = field
                .parse()
                .map_err(|_| crate::CliError::Spec(format!("{}: {h} value {field:?} is not a number", path.display())))?;
            columns.get_mut(h).expect("same headers").push(v);
        }
    }
    Ok(columns)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_use_the_sample_deviation() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]), Stat { mean: 7.0, std: 0.0 });
    }
}
