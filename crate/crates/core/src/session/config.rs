use serde::{Deserialize, Serialize};

use crate::behavior::DEFAULT_TICK_BUDGET;
use crate::classify::bundled::bundled_static_model;
use crate::classify::{DynamicTemplates, GestureSet, ThresholdRules, DEFAULT_NO_GESTURE_CUTOFF};
use crate::deictic::DeicticParams;
use crate::episode::EpisodeParams;
use crate::pipeline::{Detector, StaticBackend};
use crate::sentence::{GestureTable, MetricMaps, AMBIGUITY_GAP};
use crate::simworld::TeleopMap;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

/// Static channel used by a session.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticChoice {
    #[default]
    Bundled,
    Rules,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub static_classifier: StaticChoice,
    /// Dynamic window, seconds.
    pub window: f64,
    pub decimation: usize,
    pub min_window_points: usize,
    pub no_gesture_cutoff: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            static_classifier: StaticChoice::Bundled,
            window: 1.0,
            decimation: 2,
            min_window_points: 10,
            no_gesture_cutoff: DEFAULT_NO_GESTURE_CUTOFF,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionConfig {
    /// Ticks per task before it is abandoned.
    pub budget: usize,
    /// Spacing of executor ticks on the session clock, seconds.
    pub tick_period: f64,
    /// Chance that a primitive fails transiently.
    pub failure_probability: f64,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_TICK_BUDGET,
            tick_period: 0.1,
            failure_probability: 0.0,
        }
    }
}

/// Everything tunable about a session; every section and field is
/// optional in the TOML form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub detector: DetectorConfig,
    pub episode: EpisodeParams,
    pub deictic: DeicticParams,
    pub actions: GestureTable,
    pub metrics: MetricMaps,
    pub ambiguity_gap: f64,
    pub teleop: TeleopMap,
    pub execution: ExecutionConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            episode: EpisodeParams::default(),
            deictic: DeicticParams::default(),
            actions: GestureTable::default(),
            metrics: MetricMaps::default(),
            ambiguity_gap: AMBIGUITY_GAP,
            teleop: TeleopMap::default(),
            execution: ExecutionConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SessionConfig = toml::from_str(text).map_err(ConfigError::Parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.detector.decimation == 0 {
            return bad("detector.decimation must be at least 1");
        }
        if self.execution.tick_period <= 0.0 {
            return bad("execution.tick_period must be positive");
        }
        if !(0.0..=1.0).contains(&self.episode.threshold) {
            return bad("episode.threshold must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.execution.failure_probability) {
            return bad("execution.failure_probability must lie in [0, 1]");
        }
        Ok(())
    }

    /// Detector for the default gesture set.
    pub fn detector(&self) -> Detector {
        let set = GestureSet::default();
        let backend = match self.detector.static_classifier {
            StaticChoice::Bundled => StaticBackend::Model { model: bundled_static_model() },
            StaticChoice::Rules => StaticBackend::Rules { rules: ThresholdRules::default() },
        };
        let mut templates = DynamicTemplates::default_swipes(&set).expect("default templates");
        templates.no_gesture_cutoff = self.detector.no_gesture_cutoff;
        let mut d = Detector::new(set, backend, templates);
        d.deictic = self.deictic;
        d.window = self.detector.window;
        d.decimation = self.detector.decimation;
        d.min_window_points = self.detector.min_window_points;
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml() {
        let cfg = SessionConfig::from_toml(
            "ambiguity_gap = 0.2\n[episode]\nthreshold = 0.8\n[actions.actions]\nthree = \"close\"\n",
        )
        .unwrap();
        assert_eq!(cfg.ambiguity_gap, 0.2);
        assert_eq!(cfg.episode.threshold, 0.8);
        assert_eq!(cfg.episode.timeout, 3.0);
        assert_eq!(cfg.actions.actions.len(), 1);
        assert!(SessionConfig::from_toml("[execution]\ntick_period = 0").is_err());
        assert!(SessionConfig::from_toml("[episode]\nthreshold = \"x\"").is_err());
        // a misplaced key is an error, not a silent no-op
        assert!(SessionConfig::from_toml("[actions]\nthumbsup = \"put\"").is_err());
        assert!(SessionConfig::from_toml("tick_period = 0.2").is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = SessionConfig::default();
        assert_eq!(SessionConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
