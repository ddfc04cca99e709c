//! Tick directories and the version-tagged JSON artifacts.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hawkes_impact::backtest::{BacktestRun, ModelCalibration};
use hawkes_impact::market_data::{load_window, write_ticks, DayWindow};
use hawkes_impact::par;
use hawkes_impact::strategy_engine::PmsReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::PipelineConfig;

pub const VERSION: u64 = 1;
pub const CALIBRATION_FORMAT: &str = "hawkes-impact/calibration";
pub const BACKTEST_FORMAT: &str = "hawkes-impact/backtest";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    /// Name of the tick directory.
    pub dataset: String,
    pub n_windows: usize,
    pub first_window: String,
    pub last_window: String,
    pub horizon: f64,
    pub tick_size: f64,
}

impl DatasetInfo {
    pub fn describe(dir: &Path, windows: &[DayWindow], cfg: &PipelineConfig) -> Self {
        let dataset = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        Self {
            dataset,
            n_windows: windows.len(),
            first_window: windows.first().map(|w| w.label.clone()).unwrap_or_default(),
            last_window: windows.last().map(|w| w.label.clone()).unwrap_or_default(),
            horizon: cfg.horizon,
            tick_size: cfg.tick_size,
        }
    }

    pub fn same_sample(&self, other: &DatasetInfo) -> bool {
        self.dataset == other.dataset && self.n_windows == other.n_windows && self.first_window == other.first_window && self.last_window == other.last_window
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub format: String,
    pub version: u64,
    pub data: DatasetInfo,
    pub config_hash: String,
    pub calibration: ModelCalibration,
    /// Absent when no resilience fit was available to check against.
    pub pms: Option<PmsReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    InSample,
    OutOfSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestFile {
    pub format: String,
    pub version: u64,
    pub mode: Mode,
    pub data: DatasetInfo,
    /// Sample the parameters were fitted on.
    pub calibrated_on: DatasetInfo,
    pub config_hash: String,
    pub runs: Vec<BacktestRun>,
}

pub enum Artifact {
    Calibration(Box<CalibrationFile>),
    Backtest(Box<BacktestFile>),
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_tagged(path: &Path) -> Result<(String, Value)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("{}: not a readable version {VERSION} hawkes-impact file", path.display()))?;
    let format = value
        .get("format")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("{}: no format tag, not a hawkes-impact file", path.display()))?
        .to_owned();
    let version = value.get("version").and_then(Value::as_u64).ok_or_else(|| anyhow!("{}: {format} file without a version", path.display()))?;
    if version != VERSION {
        bail!("{}: {format} version {version} is not supported, this build reads version {VERSION}", path.display());
    }
    Ok((format, value))
}

fn decode<T: DeserializeOwned>(path: &Path, format: &str, value: Value) -> Result<T> {
    serde_json::from_value(value).with_context(|| format!("{}: malformed {format} version {VERSION} file", path.display()))
}

pub fn read_artifact(path: &Path) -> Result<Artifact> {
    let (format, value) = read_tagged(path)?;
    match format.as_str() {
        CALIBRATION_FORMAT => Ok(Artifact::Calibration(Box::new(decode(path, &format, value)?))),
        BACKTEST_FORMAT => Ok(Artifact::Backtest(Box::new(decode(path, &format, value)?))),
        other => bail!("{}: unknown format {other:?}", path.display()),
    }
}

pub fn read_calibration(path: &Path) -> Result<CalibrationFile> {
    match read_artifact(path)? {
        Artifact::Calibration(c) => Ok(*c),
        Artifact::Backtest(_) => bail!("{}: expected a calibration file, found a backtest report", path.display()),
    }
}

fn tick_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Loads every `*.csv` tick file of `dir` in file-name order.
pub fn load_dataset(dir: &Path, cfg: &PipelineConfig) -> Result<Vec<DayWindow>> {
    let paths = tick_files(dir)?;
    if paths.is_empty() {
        bail!("{}: no tick files (*.csv)", dir.display());
    }
    par::map(&paths, |p| -> Result<DayWindow> {
        let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        load_window(BufReader::new(file), cfg.tick_size, cfg.horizon, &label).with_context(|| format!("loading {}", p.display()))
    })
    .into_iter()
    .collect()
}

/// Writes one tick file per window, named by its label.
pub fn write_dataset(dir: &Path, windows: &[DayWindow]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    par::map(windows, |w| -> Result<()> {
        let path = dir.join(format!("{}.csv", w.label));
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_ticks(&w.to_ticks(), &mut out)?;
        out.flush()?;
        Ok(())
    })
    .into_iter()
    .collect()
}

/// Per-day gains, one column per run.
pub fn write_gains(path: &Path, runs: &[BacktestRun], columns: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "window,{}", columns.join(","))?;
    if let Some(first) = runs.first() {
        for (i, day) in first.days.iter().enumerate() {
            let gains: Vec<String> = runs.iter().map(|r| r.days[i].gain.to_string()).collect();
            writeln!(out, "{},{}", day.label, gains.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}
