//! Flight phases and their reference trajectories.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    Takeoff,
    Flight,
    Land,
}

impl PhaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Takeoff => "takeoff",
            PhaseKind::Flight => "flight",
            PhaseKind::Land => "land",
        }
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PhaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "takeoff" => Ok(PhaseKind::Takeoff),
            "flight" => Ok(PhaseKind::Flight),
            "land" => Ok(PhaseKind::Land),
            other => Err(format!("unknown phase kind '{other}'")),
        }
    }
}

/// A position waypoint switched in `at` seconds after the phase starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub at: f64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reference {
    /// Fixed position.
    Hold {
        position: [f64; 3],
        #[serde(default)]
        yaw: f64,
    },
    /// Piecewise-constant position; the first step should sit at `at = 0`.
    Steps {
        steps: Vec<Step>,
        #[serde(default)]
        yaw: f64,
    },
    /// Straight line from `from` to `to` over `fraction` of the phase, then
    /// hold. The reference velocity follows the ramp.
    Ramp {
        from: [f64; 3],
        to: [f64; 3],
        #[serde(default = "full_phase")]
        fraction: f64,
        #[serde(default)]
        yaw: f64,
    },
    /// Attitude setpoint with hover thrust; the position loop is idle.
    Attitude { angles: [f64; 3] },
}

fn full_phase() -> f64 {
    1.0
}

/// What a phase asks of the controllers at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Position {
        position: Vector3<f64>,
        velocity: Vector3<f64>,
        yaw: f64,
    },
    Attitude(Vector3<f64>),
}

impl Reference {
    /// Target `elapsed` seconds into a phase lasting `duration`.
    pub fn target(&self, elapsed: f64, duration: f64) -> Target {
        match self {
            Reference::Hold { position, yaw } => Target::Position {
                position: Vector3::from(*position),
                velocity: Vector3::zeros(),
                yaw: *yaw,
            },
            Reference::Steps { steps, yaw } => {
                let current = steps
                    .iter()
                    .take_while(|s| s.at <= elapsed)
                    .last()
                    .or(steps.first())
                    .map(|s| s.position)
                    .unwrap_or([0.0; 3]);
                Target::Position {
                    position: Vector3::from(current),
                    velocity: Vector3::zeros(),
                    yaw: *yaw,
                }
            }
            Reference::Ramp {
                from,
                to,
                fraction,
                yaw,
            } => {
                let span = fraction * duration;
                let from = Vector3::from(*from);
                let to = Vector3::from(*to);
                let (position, velocity) = if elapsed < span {
                    let rate = (to - from) / span;
                    (from + rate * elapsed, rate)
                } else {
                    (to, Vector3::zeros())
                };
                Target::Position {
                    position,
                    velocity,
                    yaw: *yaw,
                }
            }
            Reference::Attitude { angles } => Target::Attitude(Vector3::from(*angles)),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Reference::Steps { steps, .. } => {
                if steps.is_empty() {
                    return Err("step reference needs at least one step".into());
                }
                if steps.windows(2).any(|w| w[1].at < w[0].at) {
                    return Err("step times must be non-decreasing".into());
                }
                Ok(())
            }
            Reference::Ramp { fraction, .. } if !(*fraction > 0.0 && *fraction <= 1.0) => {
                Err(format!("ramp fraction {fraction} must lie in (0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub name: String,
    pub kind: PhaseKind,
    /// Seconds.
    pub duration: f64,
    pub reference: Reference,
}

impl Phase {
    pub fn new(kind: PhaseKind, duration: f64, reference: Reference) -> Self {
        Self {
            name: kind.as_str().to_string(),
            kind,
            duration,
            reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mission {
    #[serde(default)]
    pub initial_position: [f64; 3],
    #[serde(default)]
    pub initial_attitude: [f64; 3],
    #[serde(default)]
    pub initial_rates: [f64; 3],
    pub phases: Vec<Phase>,
}

impl Mission {
    pub fn duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.phases.is_empty() {
            return Err("mission needs at least one phase".into());
        }
        for p in &self.phases {
            if !(p.duration > 0.0 && p.duration.is_finite()) {
                return Err(format!("phase '{}' duration must be positive", p.name));
            }
            let name_ok = !p.name.is_empty()
                && p.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !name_ok {
                return Err(format!(
                    "phase name '{}' must be non-empty [A-Za-z0-9_-]",
                    p.name
                ));
            }
            p.reference
                .validate()
                .map_err(|e| format!("phase '{}': {e}", p.name))?;
        }
        let values = self
            .initial_position
            .iter()
            .chain(&self.initial_attitude)
            .chain(&self.initial_rates);
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err("initial state must be finite".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_switch_on_schedule() {
        let r = Reference::Steps {
            steps: vec![
                Step {
                    at: 0.0,
                    position: [0.0, 0.0, 2.0],
                },
                Step {
                    at: 2.0,
                    position: [0.0, 0.0, 8.0],
                },
            ],
            yaw: 0.0,
        };
        let z = |t| match r.target(t, 10.0) {
            Target::Position { position, .. } => position.z,
            Target::Attitude(_) => unreachable!(),
        };
        assert_eq!(z(0.0), 2.0);
        assert_eq!(z(1.999), 2.0);
        assert_eq!(z(2.0), 8.0);
    }

    #[test]
    fn ramp_reaches_end_and_holds() {
        let r = Reference::Ramp {
            from: [0.0, 0.0, 9.0],
            to: [0.0, 0.0, 0.0],
            fraction: 0.8,
            yaw: 0.0,
        };
        match r.target(10.0, 25.0) {
            Target::Position {
                position, velocity, ..
            } => {
                assert!((position.z - 4.5).abs() < 1e-12);
                assert!((velocity.z + 0.45).abs() < 1e-12);
            }
            Target::Attitude(_) => unreachable!(),
        }
        match r.target(21.0, 25.0) {
            Target::Position {
                position, velocity, ..
            } => {
                assert_eq!(position.z, 0.0);
                assert_eq!(velocity.z, 0.0);
            }
            Target::Attitude(_) => unreachable!(),
        }
    }

    #[test]
    fn validation() {
        let bad = Mission {
            initial_position: [0.0; 3],
            initial_attitude: [0.0; 3],
            initial_rates: [0.0; 3],
            phases: vec![Phase::new(
                PhaseKind::Flight,
                0.0,
                Reference::Attitude { angles: [0.0; 3] },
            )],
        };
        assert!(bad.validate().is_err());
        let empty = Mission {
            phases: vec![],
            ..bad
        };
        assert!(empty.validate().is_err());
    }
}
