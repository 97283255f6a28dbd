//! CSV writers and the run manifest.
//!
//! Every CSV has a header row, `\n` line endings and floats printed with
//! Rust's shortest round-trip formatting, so files are byte-stable across
//! runs and locales.

use anyhow::{Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use uav_noma::config::Config;
use uav_noma::experiment::{EpisodeMetrics, EpisodeRecord};

pub const EPISODES_FILE: &str = "episodes.csv";
pub const LOSS_FILE: &str = "loss.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const SLOTS_FILE: &str = "slots.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RATIO_FILE: &str = "ratio.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// `episode,throughput_bits,violation_rate,epsilon`
pub fn write_episodes(path: &Path, episodes: &[EpisodeMetrics]) -> Result<()> {
    write_rows(
        path,
        &strings(&["episode", "throughput_bits", "violation_rate", "epsilon"]),
        episodes.iter().map(|e| {
            vec![
                e.episode.to_string(),
                e.throughput_bits.to_string(),
                e.violation_rate.to_string(),
                e.epsilon.to_string(),
            ]
        }),
    )
}

/// `step,loss`
pub fn write_loss(path: &Path, loss: &[(u64, f64)]) -> Result<()> {
    write_rows(
        path,
        &strings(&["step", "loss"]),
        loss.iter().map(|(s, l)| vec![s.to_string(), l.to_string()]),
    )
}

/// `slot,sum_rate,rate_user0..rate_user{K-1},lambda`, each value averaged
/// over the episodes; `lambda` is also averaged over agents.
pub fn write_slots(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let users = records
        .first()
        .and_then(|r| r.slots.first())
        .map_or(0, |s| s.per_user_rate.len());
    let mut header = strings(&["slot", "sum_rate"]);
    header.extend((0..users).map(|k| format!("rate_user{k}")));
    header.push("lambda".into());
    let slots = records.iter().map(|r| r.slots.len()).min().unwrap_or(0);
    let n = records.len() as f64;
    let rows = (0..slots).map(|t| {
        let sum_rate = records.iter().map(|r| r.slots[t].sum_rate).sum::<f64>() / n;
        let mut row = vec![t.to_string(), sum_rate.to_string()];
        for k in 0..users {
            row.push((records.iter().map(|r| r.slots[t].per_user_rate[k]).sum::<f64>() / n).to_string());
        }
        let lambda = records
            .iter()
            .map(|r| {
                let l = &r.slots[t].lambdas;
                l.iter().map(|&x| x as f64).sum::<f64>() / l.len() as f64
            })
            .sum::<f64>()
            / n;
        row.push(lambda.to_string());
        row
    });
    write_rows(path, &header, rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub arm: String,
    pub seeds: usize,
    pub throughput: (f64, f64),
    pub violation_rate: (f64, f64),
    /// Absent for fixed policies.
    pub steps_to_threshold: Option<(f64, f64)>,
}

/// `arm,seeds,throughput_mean,throughput_std,violation_rate_mean,violation_rate_std,steps_to_threshold_mean,steps_to_threshold_std`
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let header = strings(&[
        "arm",
        "seeds",
        "throughput_mean",
        "throughput_std",
        "violation_rate_mean",
        "violation_rate_std",
        "steps_to_threshold_mean",
        "steps_to_threshold_std",
    ]);
    write_rows(
        path,
        &header,
        rows.iter().map(|r| {
            let (sm, ss) = r
                .steps_to_threshold
                .map_or((String::new(), String::new()), |(m, s)| (m.to_string(), s.to_string()));
            vec![
                r.arm.clone(),
                r.seeds.to_string(),
                r.throughput.0.to_string(),
                r.throughput.1.to_string(),
                r.violation_rate.0.to_string(),
                r.violation_rate.1.to_string(),
                sm,
                ss,
            ]
        }),
    )
}

/// `seed,mdqn_steps,independent_steps,ratio`; an empty cell marks a curve
/// that never reached its threshold.
pub fn write_ratio(path: &Path, rows: &[(u64, Option<u64>, Option<u64>)]) -> Result<()> {
    let opt = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
    write_rows(
        path,
        &strings(&["seed", "mdqn_steps", "independent_steps", "ratio"]),
        rows.iter().map(|&(seed, m, i)| {
            let ratio = match (m, i) {
                (Some(m), Some(i)) if m > 0 => (i as f64 / m as f64).to_string(),
                _ => String::new(),
            };
            vec![seed.to_string(), opt(m), opt(i), ratio]
        }),
    )
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub start_unix_seconds: u64,
    pub seeds: Vec<u64>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub config: Config,
}

impl Manifest {
    pub fn new(command: &str, config: &Config, seeds: Vec<u64>, outputs: Vec<String>) -> Self {
        let start = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            start_unix_seconds: start,
            seeds,
            outputs,
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).context("serializing manifest")?;
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
