//! Run configuration file.
//!
//! Every field is optional in the JSON file; missing fields take the
//! defaults printed by `rydtomo --print-default-config`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rydtomo_core::blochsim::{loss_budget, FiveLevelConfig, LossBudget};
use rydtomo_core::dynamics::{BlockadeConfig, ErrorBudget};
use rydtomo_core::rotation::linear_grid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Rotation angles: an explicit list or an inclusive linear range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Range {
            start: 0.0,
            stop: 4.0 * PI,
            count: 41,
        }
    }
}

impl Grid {
    pub fn thetas(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count } => linear_grid(*start, *stop, *count),
        }
    }

    /// Parses `START:STOP:COUNT`. Angles may carry a `pi` suffix, as in `0:4pi:41`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(CliError::Config(format!(
                "grid {s:?} is not START:STOP:COUNT"
            )));
        };
        let count = count
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("grid count {count:?}: {e}")))?;
        Ok(Grid::Range {
            start: parse_angle(start)?,
            stop: parse_angle(stop)?,
            count,
        })
    }

    fn validate(&self) -> Result<()> {
        let thetas = self.thetas();
        if thetas.is_empty() {
            return Err(CliError::Config("grid is empty".into()));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config("grid contains a non-finite angle".into()));
        }
        Ok(())
    }
}

fn parse_angle(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = |e: std::num::ParseFloatError| CliError::Config(format!("angle {s:?}: {e}"));
    match s.strip_suffix("pi") {
        Some("") => Ok(PI),
        Some("-") => Ok(-PI),
        Some(k) => Ok(k.trim_end_matches('*').parse::<f64>().map_err(bad)? * PI),
        None => s.parse().map_err(bad),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub blockade: BlockadeConfig,
    pub budget: ErrorBudget,
    /// When present, the simulated loss budget replaces the matching
    /// fields of `budget`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch: Option<FiveLevelConfig>,
    pub bloch_noise_samples: usize,
    pub grid: Grid,
    pub reps: usize,
    pub seed: u64,
    pub bootstrap_resamples: usize,
    /// Per-atom probability that a present atom reads as absent.
    pub detect_error: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            blockade: BlockadeConfig::default(),
            budget: ErrorBudget::default(),
            bloch: None,
            bloch_noise_samples: 64,
            grid: Grid::default(),
            reps: 100,
            seed: 1,
            bootstrap_resamples: 1000,
            detect_error: 0.0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.blockade.validate()?;
        self.budget.validate()?;
        if let Some(b) = &self.bloch {
            b.validate()?;
            if self.bloch_noise_samples == 0 {
                return Err(CliError::Config(
                    "bloch_noise_samples must be at least 1".into(),
                ));
            }
        }
        self.grid.validate()?;
        if self.reps == 0 {
            return Err(CliError::Config("reps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.detect_error) {
            return Err(CliError::Config(format!(
                "detect_error must lie in [0, 1], got {}",
                self.detect_error
            )));
        }
        Ok(())
    }

    /// The error budget after the optional five-level simulation.
    pub fn effective_budget(&self) -> Result<(ErrorBudget, Option<LossBudget>)> {
        let mut budget = self.budget;
        let Some(bloch) = &self.bloch else {
            return Ok((budget, None));
        };
        let losses = loss_budget(
            bloch,
            &bloch.standard_pulses(),
            self.bloch_noise_samples,
            self.seed,
        )?;
        losses.apply_to(&mut budget);
        budget.validate()?;
        Ok((budget, Some(losses)))
    }

    /// SHA-256 of the compact JSON form. The output directory does not
    /// affect results and is left out.
    pub fn hash(&self) -> String {
        let key = RunConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&key).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
