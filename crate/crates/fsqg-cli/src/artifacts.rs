//! Run artifacts: CSV bodies, JSON summaries, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// One named check with its threshold, aggregated later by `report`.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub value: f64,
    pub threshold: f64,
    /// "le" (value <= threshold), "ge", or "in" with `threshold_high`.
    pub cmp: String,
    #[serde(default)]
    pub threshold_high: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn le(id: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            value,
            threshold,
            cmp: "le".into(),
            threshold_high: None,
            pass: value <= threshold,
        }
    }

    pub fn ge(id: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            value,
            threshold,
            cmp: "ge".into(),
            threshold_high: None,
            pass: value >= threshold,
        }
    }

    pub fn within(id: &str, description: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            value,
            threshold: lo,
            cmp: "in".into(),
            threshold_high: Some(hi),
            pass: (lo..=hi).contains(&value),
        }
    }

    pub fn boolean(id: &str, description: &str, pass: bool) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
            cmp: "ge".into(),
            threshold_high: None,
            pass,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    subcommand: &'a str,
    checks: &'a [Check],
    passed: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    content_hash: String,
    wall_time_seconds: f64,
    config: &'a str,
}

/// Collects the CSV bodies of a run for content hashing and writes the
/// manifest and summary at the end.
pub struct RunWriter {
    out_dir: PathBuf,
    subcommand: String,
    hasher: Sha256,
    started: Instant,
}

impl RunWriter {
    pub fn new(out_dir: &Path, subcommand: &str) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output dir {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            hasher: Sha256::new(),
            started: Instant::now(),
        })
    }

    /// Write a CSV with the given header and string rows; the body feeds the
    /// run's content hash.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.out_dir.join(name);
        let mut body = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut body);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        self.hasher.update(&body);
        fs::write(&path, &body).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Write the JSON summary plus the run manifest. Returns overall pass.
    pub fn finish(self, config: &ExperimentConfig, checks: &[Check]) -> Result<bool> {
        let passed = checks.iter().all(|c| c.pass);
        let summary = Summary { subcommand: &self.subcommand, checks, passed };
        let spath = self.out_dir.join(format!("{}_summary.json", self.subcommand));
        fs::write(&spath, serde_json::to_string_pretty(&summary)?)?;

        let echo = config.echo_toml();
        let manifest = Manifest {
            subcommand: &self.subcommand,
            content_hash: format!("{:x}", self.hasher.finalize()),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            config: &echo,
        };
        let mpath = self.out_dir.join(format!("manifest_{}.json", self.subcommand));
        fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
        Ok(passed)
    }
}

pub fn f(v: f64) -> String {
    format!("{v}")
}
