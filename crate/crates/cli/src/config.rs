use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use htl_core::measures::make_distribution;
use htl_core::schedule;
use htl_core::{AnalyticDistribution, CatalogKind, DeltaWindow};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem; always maps to exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl DistributionConfig {
    pub fn build(&self) -> Result<AnalyticDistribution, ConfigError> {
        let kind = CatalogKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == self.kind)
            .ok_or_else(|| {
                let names: Vec<_> = CatalogKind::ALL.iter().map(|k| k.name()).collect();
                bad(format!(
                    "unknown distribution '{}' (known: {})",
                    self.kind,
                    names.join(", ")
                ))
            })?;
        make_distribution(kind, &self.params)
            .map_err(|e| bad(format!("distribution '{}': {e}", self.kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cell_width: f64,
    /// Right end of the grid; defaults to a margin past the last evaluation point.
    pub x_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cell_width: 0.05,
            x_max: None,
        }
    }
}

/// Evaluation points: explicit, or `x0 * ratio^k` for `k < points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub xs: Option<Vec<f64>>,
    pub x0: Option<f64>,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    pub points: Option<usize>,
}

fn default_ratio() -> f64 {
    2.0
}

impl ScheduleConfig {
    pub fn xs(&self, cell_width: f64) -> Result<Vec<f64>, ConfigError> {
        let raw = match (&self.xs, self.x0, self.points) {
            (Some(xs), None, None) => xs.clone(),
            (None, Some(x0), Some(n)) => {
                schedule::geometric(x0, self.ratio, n).map_err(|e| bad(format!("schedule: {e}")))?
            }
            _ => return Err(bad("schedule needs either `xs` or both `x0` and `points`")),
        };
        let xs = schedule::snap(&raw, cell_width);
        if xs.is_empty() || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad(
                "schedule must be nonempty and strictly increasing after snapping to the grid",
            ));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(bad("schedule points must be finite"));
        }
        Ok(xs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: Option<u64>,
    /// Window lengths; `inf` selects the whole tail.
    #[serde(default = "default_windows")]
    pub windows: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub distribution: Option<DistributionConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    pub schedule: ScheduleConfig,
    /// Experiment-specific knobs.
    #[serde(default)]
    pub params: BTreeMap<String, toml::Value>,
}

fn default_windows() -> Vec<f64> {
    vec![1.0]
}

fn default_tol() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad(format!("config: {e}")))
    }

    /// Checks that do not depend on the experiment.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(bad(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.windows.is_empty() {
            return Err(bad("windows must not be empty"));
        }
        for &t in &self.windows {
            self.window(t)?;
        }
        let d = self.grid.cell_width;
        if !(d.is_finite() && d > 0.0) {
            return Err(bad(format!("grid.cell_width must be > 0, got {d}")));
        }
        Ok(())
    }

    pub fn window(&self, t: f64) -> Result<DeltaWindow, ConfigError> {
        DeltaWindow::new(t).map_err(|e| bad(format!("window T = {t}: {e}")))
    }

    pub fn deltas(&self) -> Result<Vec<DeltaWindow>, ConfigError> {
        self.windows.iter().map(|&t| self.window(t)).collect()
    }

    pub fn xs(&self) -> Result<Vec<f64>, ConfigError> {
        self.schedule.xs(self.grid.cell_width)
    }

    pub fn dist(&self) -> Result<AnalyticDistribution, ConfigError> {
        self.distribution
            .as_ref()
            .ok_or_else(|| {
                bad(format!(
                    "experiment '{}' needs a [distribution] table",
                    self.experiment
                ))
            })?
            .build()
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| {
            bad(format!(
                "experiment '{}' is stochastic and needs a seed",
                self.experiment
            ))
        })
    }

    pub fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(v) => Err(bad(format!("params.{key} must be a number, got {v}"))),
        }
    }

    pub fn num_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    pub fn require(&self, key: &str) -> Result<f64, ConfigError> {
        self.num(key)?.ok_or_else(|| {
            bad(format!(
                "experiment '{}' needs params.{key}",
                self.experiment
            ))
        })
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.num(key)? {
            None => Ok(default),
            Some(v) if v >= 1.0 && v.fract() == 0.0 && v <= 1e12 => Ok(v as usize),
            Some(v) => Err(bad(format!(
                "params.{key} must be a positive integer, got {v}"
            ))),
        }
    }

    pub fn text(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(bad(format!("params.{key} must be a string, got {v}"))),
        }
    }

    /// Right end of the grid: configured, or `last x + margin` rounded up to the cell.
    pub fn x_max(&self, margin: f64) -> Result<f64, ConfigError> {
        let last = *self.xs()?.last().expect("validated nonempty");
        let want = last + margin;
        match self.grid.x_max {
            Some(x) if x < want => Err(bad(format!(
                "grid.x_max = {x} is below the last evaluation point plus window ({want})"
            ))),
            Some(x) => Ok(x),
            None => {
                let d = self.grid.cell_width;
                Ok((want / d).ceil() * d)
            }
        }
    }

    /// SHA-256 over the canonical JSON form, first 16 hex digits.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canon);
        hex::encode(&digest[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str =
        "experiment = \"sstar\"\n[distribution]\nkind = \"pareto\"\nparams = [2.0]\n[schedule]\n";

    #[test]
    fn geometric_schedule_is_the_default_shape() {
        let c = ExperimentConfig::parse(&format!("{BASE}x0 = 10\npoints = 4\n")).unwrap();
        assert_eq!(c.xs().unwrap(), [10.0, 20.0, 40.0, 80.0]);
        assert_eq!(c.x_max(1.0).unwrap(), 81.0);
    }

    #[test]
    fn mixed_schedule_forms_are_rejected() {
        let c = ExperimentConfig::parse(&format!("{BASE}x0 = 10\nxs = [1, 2]\n")).unwrap();
        assert!(c.xs().is_err());
        let c = ExperimentConfig::parse(&format!("{BASE}xs = [5, 2]\n")).unwrap();
        assert!(c.xs().is_err());
    }

    #[test]
    fn infinite_window_parses() {
        let c =
            ExperimentConfig::parse(&format!("windows = [1.0, inf]\n{BASE}xs = [4]\n")).unwrap();
        c.validate().unwrap();
        assert!(c.deltas().unwrap()[1].is_infinite());
    }

    #[test]
    fn hash_tracks_content_only() {
        let a = ExperimentConfig::parse(&format!("{BASE}xs = [4]\n")).unwrap();
        let b = ExperimentConfig::parse(&format!("# comment\n{BASE}xs   = [4.0]\n")).unwrap();
        let c = ExperimentConfig::parse(&format!("{BASE}xs = [8]\n")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn grid_end_must_cover_the_schedule() {
        let c = ExperimentConfig::parse(&format!(
            "{BASE}xs = [100]\n[grid]\ncell_width = 0.5\nx_max = 50\n"
        ))
        .unwrap();
        assert!(c.x_max(1.0).is_err());
    }
}
