use std::path::{Path, PathBuf};

use robosac_core::a2cp::ProbeOrder;
use robosac_core::engine::RedrawPolicy;
use robosac_core::sim::{ScenarioConfig, DEFAULT_EPSILON};
use robosac_core::{ReferenceMode, TeamMode};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Engine knobs shared by every experiment. Plans (sample size, budget) are
/// derived per table row, so only the fixed parts live here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    pub epsilon: f64,
    pub confidence: f64,
    pub sample_size: u32,
    pub reference: ReferenceMode,
    pub team_mode: TeamMode,
    pub redraw: RedrawPolicy,
    /// Probes per frame for attacker-ratio estimation.
    pub frame_budget: u32,
    pub probe_order: ProbeOrder,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            confidence: 0.99,
            sample_size: 3,
            reference: ReferenceMode::Individual,
            team_mode: TeamMode::Dynamic,
            redraw: RedrawPolicy::Independent,
            frame_budget: 5,
            probe_order: ProbeOrder::RoundRobin,
        }
    }
}

/// A JSON experiment file. `scenario.rng_seed` is the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: ScenarioConfig,
    pub engine: EngineSettings,
    pub repeats: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "default".into(),
            scenario: ScenarioConfig::default(),
            engine: EngineSettings::default(),
            repeats: 10,
            output_path: None,
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn seed(&self) -> u64 {
        self.scenario.rng_seed
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        let e = &self.engine;
        if !(e.epsilon > 0.0 && e.epsilon < 1.0) {
            return Err(HarnessError::Config(format!("epsilon {} not in (0, 1)", e.epsilon)));
        }
        if !(e.confidence > 0.0 && e.confidence < 1.0) {
            return Err(HarnessError::Config(format!("confidence {} not in (0, 1)", e.confidence)));
        }
        if e.sample_size == 0 || e.frame_budget == 0 {
            return Err(HarnessError::Config("sample_size and frame_budget must be positive".into()));
        }
        self.scenario.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let spec: ExperimentSpec = serde_json::from_str(r#"{"name": "x", "repeats": 3, "engine": {"epsilon": 0.2}}"#).unwrap();
        assert_eq!(spec.repeats, 3);
        assert_eq!(spec.engine.epsilon, 0.2);
        assert_eq!(spec.engine.sample_size, 3);
        assert_eq!(spec.scenario.team_size, 5);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut spec = ExperimentSpec { repeats: 0, ..Default::default() };
        assert!(matches!(spec.validate(), Err(HarnessError::Config(_))));
        spec.repeats = 1;
        spec.engine.epsilon = 1.5;
        assert!(spec.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"repeats\": \"many\"}").unwrap();
        assert!(matches!(ExperimentSpec::load(&path), Err(HarnessError::Config(_))));
    }
}
