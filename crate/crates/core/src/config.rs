//! Scenario files.
//!
//! A scenario file is TOML with the sections `[vehicle]`, `[attitude_gains]`,
//! `[position_gains]`, `[position_limits]`, `[baseline_gains]`,
//! `[disturbance]`, `[mission]` and `[sim]`. Only `[mission]` is required;
//! every other key falls back to its default.

use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::sim::{Scenario, SimError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let scenario: Scenario = toml::from_str(text)?;
    scenario.validate().map_err(|e| match e {
        SimError::InvalidScenario(msg) => ConfigError::Invalid(msg),
        other => ConfigError::Invalid(other.to_string()),
    })?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

/// TOML text that parses back to `scenario`.
pub fn to_toml(scenario: &Scenario) -> String {
    toml::to_string(scenario).expect("scenario serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Controller, PhaseKind, Reference};

    const MINIMAL: &str = r#"
[mission]
initial_position = [0.0, 0.0, 1.0]

[[mission.phases]]
name = "flight"
kind = "flight"
duration = 2.0
reference = { kind = "hold", position = [0.0, 0.0, 1.0] }
"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.sim.dt, 0.002);
        assert_eq!(s.sim.controller, Controller::Hybrid);
        assert_eq!(s.mission.phases[0].kind, PhaseKind::Flight);
        assert!(matches!(
            s.mission.phases[0].reference,
            Reference::Hold { .. }
        ));
    }

    #[test]
    fn presets_round_trip() {
        for s in [
            Scenario::hover([0.0, 0.0, 1.0], 10.0),
            Scenario::three_phase(7),
            Scenario::attitude_hold(
                [0.1, -0.1, 0.0],
                [0.0; 3],
                crate::disturbance::DisturbanceConfig::constant(
                    [0.05, 0.08, 0.02],
                    [0.1, 0.1, 0.05],
                ),
                10.0,
            ),
        ] {
            let text = to_toml(&s);
            assert_eq!(parse_scenario(&text).unwrap(), s, "{text}");
        }
    }

    #[test]
    fn parse_error_names_line() {
        let text = "[sim]\ndt = 0.002\nposition_divider = five\n";
        let msg = parse_scenario(text).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[sim]\ntime_step = 0.01\n");
        assert!(matches!(parse_scenario(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let text = format!("{MINIMAL}\n[sim]\ndt = -1.0\n");
        assert!(matches!(
            parse_scenario(&text),
            Err(ConfigError::Invalid(_))
        ));
    }
}
