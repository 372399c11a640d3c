use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Failure;

const TOLERANCE_KEYS: [&str; 3] = ["riccati", "identity", "commutator"];
const HORIZON_KEYS: [&str; 4] = ["T_riccati", "T_rates", "T_trunc", "Lmax"];

/// Scenario file. Every field is optional; missing ones take the defaults
/// below, and the surface defaults to the hyperbolic metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Surface model JSON: `perturbation`, `word_budget`, `offset`.
    pub surface: serde_json::Value,
    pub seed: u64,
    /// `riccati`, `identity`, `commutator`.
    pub tolerances: BTreeMap<String, f64>,
    /// `T_riccati`, `T_rates`, `T_trunc`, `Lmax`.
    pub horizons: BTreeMap<String, f64>,
    pub outputs: PathBuf,
    pub ensemble_size: usize,
    /// Sample points for pointwise commands.
    pub points: usize,
    pub lambda: [f64; 2],
    pub potential: String,
    /// Function id for `resolvent` and `intertwine`; `bump:<seed>` by default.
    pub function: Option<String>,
    pub epsilon: f64,
    /// Batch manifest for `resolvent`.
    pub batch: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            surface: serde_json::json!({}),
            seed: 1,
            tolerances: BTreeMap::new(),
            horizons: BTreeMap::new(),
            outputs: PathBuf::from("horolab-out"),
            ensemble_size: 200,
            points: 20,
            lambda: [2.5, 0.0],
            potential: "zero".into(),
            function: None,
            epsilon: 0.05,
            batch: None,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        for (map, keys, what) in [
            (&self.tolerances, &TOLERANCE_KEYS[..], "tolerance"),
            (&self.horizons, &HORIZON_KEYS[..], "horizon"),
        ] {
            for (k, &v) in map {
                if !keys.contains(&k.as_str()) {
                    return Err(config_error(format!("unknown {what} '{k}' (expected one of {keys:?})")));
                }
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_error(format!("{what} '{k}' must be positive, got {v}")));
                }
            }
        }
        if self.ensemble_size == 0 || self.points == 0 {
            return Err(config_error("ensemble_size and points must be positive"));
        }
        if !(self.epsilon > 0.0) {
            return Err(config_error(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !self.lambda.iter().all(|x| x.is_finite()) {
            return Err(config_error("lambda must be finite"));
        }
        Ok(())
    }

    pub fn tolerance(&self, key: &str) -> Option<f64> {
        self.tolerances.get(key).copied()
    }

    pub fn horizon(&self, key: &str) -> Option<f64> {
        self.horizons.get(key).copied()
    }

    pub fn t_riccati(&self) -> f64 {
        self.horizon("T_riccati").unwrap_or(32.0)
    }

    pub fn t_rates(&self) -> f64 {
        self.horizon("T_rates").unwrap_or(50.0)
    }

    pub fn lmax(&self) -> f64 {
        self.horizon("Lmax").unwrap_or(12.0)
    }

    pub fn function_id(&self) -> String {
        self.function.clone().unwrap_or_else(|| format!("bump:{}", self.seed))
    }
}
