//! Run configuration: one JSON file shared by every subcommand.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hawkes_impact::backtest::BacktestConfig;
use hawkes_impact::hawkes_estimator::HawkesConfig;
use hawkes_impact::hawkes_model::SimulationConfig;
use hawkes_impact::propagator_estimator::RegressionConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Either a named preset, optionally resized, or a full simulation spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimulationSource {
    Preset {
        preset: String,
        #[serde(default)]
        n_windows: Option<usize>,
    },
    Explicit(Box<SimulationConfig>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub simulation: Option<SimulationSource>,
    /// Length of each tick file's window, hours.
    pub horizon: f64,
    pub tick_size: f64,
    /// Regression window and backtest warm-up in hours; overrides both sections.
    pub reg_window: Option<f64>,
    pub hawkes: HawkesConfig,
    pub regression: RegressionConfig,
    pub backtest: BacktestConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            simulation: None,
            horizon: 2.0,
            tick_size: 0.005,
            reg_window: None,
            hawkes: HawkesConfig::default(),
            regression: RegressionConfig::default(),
            backtest: BacktestConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>, tick_size: Option<f64>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        if let Some(t) = tick_size {
            cfg.tick_size = t;
        }
        if let Some(r) = cfg.reg_window {
            cfg.regression.reg_window = r;
            cfg.backtest.reg_window = r;
        }
        if !(cfg.tick_size > 0.0 && cfg.horizon > 0.0) {
            bail!("tick size and horizon must be positive");
        }
        cfg.hawkes.validate()?;
        cfg.regression.validate()?;
        cfg.backtest.validate()?;
        Ok(cfg)
    }

    /// Simulation spec from the config, or from `preset` when given.
    pub fn simulation(&self, preset: Option<&str>, n_windows: Option<usize>, tick_override: Option<f64>) -> Result<SimulationConfig> {
        let mut sim = match (preset, &self.simulation) {
            (Some(name), _) => SimulationConfig::preset(name)?,
            (None, Some(SimulationSource::Preset { preset, n_windows })) => {
                let mut s = SimulationConfig::preset(preset)?;
                if let Some(n) = n_windows {
                    s.n_windows = *n;
                }
                s
            }
            (None, Some(SimulationSource::Explicit(s))) => (**s).clone(),
            (None, None) => bail!("no simulation given: pass --preset or add a `simulation` section to the config"),
        };
        if let Some(n) = n_windows {
            sim.n_windows = n;
        }
        if let Some(t) = tick_override {
            sim.tick_size = t;
        }
        sim.validate()?;
        Ok(sim)
    }

    /// Hex digest of the settings that shape a calibration.
    pub fn estimation_hash(&self) -> String {
        let key = serde_json::json!({
            "horizon": self.horizon,
            "tick_size": self.tick_size,
            "hawkes": self.hawkes,
            "regression": self.regression,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))
    }
}
