//! Run settings: command-line flags over a `key = value` file over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use arrivalfit::ingest::parse_weekday;
use arrivalfit::{PartitionGrid, TestConfig, Weekday};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => bail!("unknown format {other:?}, expected json, csv or text"),
        }
    }
}

/// Every key accepted in a config file.
pub const KEYS: &[&str] = &[
    "weekday",
    "weeks",
    "alpha",
    "ell_hours",
    "weight",
    "grid",
    "max_intervals",
    "cells",
    "budget",
    "seed",
    "restarts",
    "out_dir",
    "format",
];

/// Parsed config file. Blank lines and `#` comments are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key {key:?} (known: {})", n + 1, KEYS.join(", "));
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Self { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key {key} = {v:?}: {e}")))
            .transpose()
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub weekday: Option<String>,
    pub weeks: Option<usize>,
    pub alpha: Option<f64>,
    pub ell_hours: Option<f64>,
    pub weight: Option<f64>,
    pub grid: Option<u32>,
    pub max_intervals: Option<usize>,
    pub cells: Option<usize>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub weekday: Weekday,
    pub weeks: usize,
    pub alpha: f64,
    pub ell_hours: f64,
    pub weight: f64,
    pub grid: u32,
    pub max_intervals: usize,
    pub cells: usize,
    pub budget: usize,
    pub seed: u64,
    pub restarts: usize,
    pub out_dir: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            weekday: Weekday::Tue,
            weeks: 13,
            alpha: 0.05,
            ell_hours: 1.0,
            weight: 1.0,
            grid: 24,
            max_intervals: 24,
            cells: 96,
            budget: 5000,
            seed: 0,
            restarts: 1,
            out_dir: None,
            format: Format::Text,
        }
    }
}

impl RunConfig {
    pub fn resolve(cli: &Overrides, file: &FileConfig) -> Result<Self> {
        let d = Self::default();
        let weekday = match cli.weekday.clone().or(file.get::<String>("weekday")?) {
            Some(s) => parse_weekday(&s)?,
            None => d.weekday,
        };
        let cfg = Self {
            weekday,
            weeks: cli.weeks.or(file.get("weeks")?).unwrap_or(d.weeks),
            alpha: cli.alpha.or(file.get("alpha")?).unwrap_or(d.alpha),
            ell_hours: cli.ell_hours.or(file.get("ell_hours")?).unwrap_or(d.ell_hours),
            weight: cli.weight.or(file.get("weight")?).unwrap_or(d.weight),
            grid: cli.grid.or(file.get("grid")?).unwrap_or(d.grid),
            max_intervals: cli.max_intervals.or(file.get("max_intervals")?).unwrap_or(d.max_intervals),
            cells: cli.cells.or(file.get("cells")?).unwrap_or(d.cells),
            budget: cli.budget.or(file.get("budget")?).unwrap_or(d.budget),
            seed: cli.seed.or(file.get("seed")?).unwrap_or(d.seed),
            restarts: cli.restarts.or(file.get("restarts")?).unwrap_or(d.restarts),
            out_dir: cli.out_dir.clone().or(file.get("out_dir")?),
            format: cli.format.or(file.get("format")?).unwrap_or(d.format),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weeks == 0 {
            bail!("--weeks must be at least 1");
        }
        self.test_config()?;
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            bail!("--weight must be a non-negative number, got {}", self.weight);
        }
        self.partition_grid()?;
        if self.cells == 0 || !self.cells.is_multiple_of(self.grid as usize) {
            bail!("--cells ({}) must be a positive multiple of --grid ({})", self.cells, self.grid);
        }
        if self.budget == 0 {
            bail!("--budget must be at least 1");
        }
        if self.restarts == 0 {
            bail!("--restarts must be at least 1");
        }
        Ok(())
    }

    pub fn test_config(&self) -> Result<TestConfig> {
        TestConfig::new(self.alpha).map_err(|e| anyhow!("--alpha: {e}"))
    }

    pub fn partition_grid(&self) -> Result<PartitionGrid> {
        PartitionGrid::with_ell_hours(self.grid, self.max_intervals, self.ell_hours)
            .map_err(|e| anyhow!("--grid/--max-intervals/--ell-hours: {e}"))
    }
}
