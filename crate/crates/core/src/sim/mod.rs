//! Closed-loop scenario engine.
//!
//! Each tick of `dt` runs the attitude loop; every `position_divider`-th tick
//! also runs the position loop. Commands go through the rotor mixer, and the
//! plant advances one RK4 step with the realised controls held. The net rotor
//! speed from the previous tick's mix feeds both the gyroscopic model terms and
//! the attitude controller, which keeps the mixer out of the derivative
//! evaluation.

mod baseline;
mod integrate;
mod log;
mod mission;

pub use baseline::{baseline_pid_attitude, BaselinePidGains, PidMemory};
pub use integrate::{check_divergence, rk4_step, DIVERGENCE_LIMIT};
pub use log::{LogParseError, LogRow, PhaseSpan, ScenarioLog, COLUMNS};
pub use mission::{Mission, Phase, PhaseKind, Reference, Step, Target};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{
    lyapunov_certificates, AdaptationRule, AdaptiveBackstepping, AttitudeSetpoint, BackstepGains,
};
use crate::disturbance::{DisturbanceConfig, DisturbanceState};
use crate::model::{
    mix_rotors, translational_accel_in_air, unmix_rotors, ControlInputs, DisturbanceInput,
    ModelError, RigidBodyState, VehicleParams,
};
use crate::position::{
    PositionCommand, PositionController, PositionGains, PositionLimits, PositionSetpoint, ThrustLaw,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("numerical divergence at t = {time} s: state component {component} = {value}")]
    NumericalDivergence {
        time: f64,
        component: usize,
        value: f64,
    },
    #[error("model failure at t = {time} s: {source}")]
    Model { time: f64, source: ModelError },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl SimError {
    /// Stamps a divergence with the time it happened.
    fn at(self, t: f64) -> Self {
        match self {
            SimError::NumericalDivergence {
                component, value, ..
            } => SimError::NumericalDivergence {
                time: t,
                component,
                value,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Controller {
    Hybrid,
    BaselinePid,
}

/// Thrust law selection. `Auto` uses the altitude PID during takeoff and
/// landing and the full inversion in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThrustMode {
    Auto,
    Inversion,
    Altitude,
}

impl ThrustMode {
    pub fn law(self, phase: PhaseKind) -> ThrustLaw {
        match (self, phase) {
            (ThrustMode::Inversion, _) | (ThrustMode::Auto, PhaseKind::Flight) => {
                ThrustLaw::Inversion
            }
            _ => ThrustLaw::Altitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// Attitude-loop period (s).
    pub dt: f64,
    /// Attitude ticks per position tick.
    pub position_divider: u32,
    pub controller: Controller,
    pub thrust_mode: ThrustMode,
    pub adaptation: AdaptationRule,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.002,
            position_divider: 5,
            controller: Controller::Hybrid,
            thrust_mode: ThrustMode::Auto,
            adaptation: AdaptationRule::default(),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub attitude_gains: BackstepGains,
    #[serde(default)]
    pub position_gains: PositionGains,
    #[serde(default)]
    pub position_limits: PositionLimits,
    #[serde(default)]
    pub baseline_gains: BaselinePidGains,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    pub mission: Mission,
    #[serde(default)]
    pub sim: SimSettings,
}

impl Scenario {
    /// Calm hover at `position`, starting there, for `duration` seconds.
    pub fn hover(position: [f64; 3], duration: f64) -> Self {
        Self::with_mission(Mission {
            initial_position: position,
            initial_attitude: [0.0; 3],
            initial_rates: [0.0; 3],
            phases: vec![Phase::new(
                PhaseKind::Flight,
                duration,
                Reference::Hold { position, yaw: 0.0 },
            )],
        })
    }

    /// Attitude regulation to `angles` from `initial_attitude` under the given
    /// disturbance, with the position loop idle.
    pub fn attitude_hold(
        initial_attitude: [f64; 3],
        angles: [f64; 3],
        disturbance: DisturbanceConfig,
        duration: f64,
    ) -> Self {
        Self {
            disturbance,
            ..Self::with_mission(Mission {
                initial_position: [0.0, 0.0, 10.0],
                initial_attitude,
                initial_rates: [0.0; 3],
                phases: vec![Phase::new(
                    PhaseKind::Flight,
                    duration,
                    Reference::Attitude { angles },
                )],
            })
        }
    }

    /// Takeoff, flight and landing in 20/105/25 s. The takeoff target steps
    /// from 2 m to 8 m to 9 m; the landing ramps back down over 80 % of its
    /// phase. An 8 m/s wind blows along x, a chimney updraft rises along an
    /// inclined pipe, strongest near its inlet, and all three torque axes carry
    /// band-limited noise.
    pub fn three_phase(seed: u64) -> Self {
        let noise = crate::disturbance::TorqueModel::BandLimitedNoise {
            std: Some(0.01),
            cutoff: 2.0,
        };
        let disturbance = DisturbanceConfig {
            roll: noise,
            pitch: noise,
            yaw: noise,
            wind: [8.0, 0.0, 0.0],
            chimney_axis: [0.5, 0.0, 0.866],
            chimney_profile: vec![[0.0, 0.0], [2.0, 5.0], [6.0, 2.0], [12.0, 2.0]],
            seed,
            ..DisturbanceConfig::default()
        };
        let takeoff = Reference::Steps {
            steps: vec![
                Step {
                    at: 0.0,
                    position: [0.0, 0.0, 2.0],
                },
                Step {
                    at: 2.0,
                    position: [0.0, 0.0, 8.0],
                },
                Step {
                    at: 10.0,
                    position: [0.0, 0.0, 9.0],
                },
            ],
            yaw: 0.0,
        };
        Self {
            disturbance,
            ..Self::with_mission(Mission {
                initial_position: [0.0, 0.0, 0.5],
                initial_attitude: [0.0; 3],
                initial_rates: [0.0; 3],
                phases: vec![
                    Phase::new(PhaseKind::Takeoff, 20.0, takeoff),
                    Phase::new(
                        PhaseKind::Flight,
                        105.0,
                        Reference::Hold {
                            position: [0.0, 0.0, 9.0],
                            yaw: 0.0,
                        },
                    ),
                    Phase::new(
                        PhaseKind::Land,
                        25.0,
                        Reference::Ramp {
                            from: [0.0, 0.0, 9.0],
                            to: [0.0, 0.0, 0.0],
                            fraction: 0.8,
                            yaw: 0.0,
                        },
                    ),
                ],
            })
        }
    }

    fn with_mission(mission: Mission) -> Self {
        Self {
            vehicle: VehicleParams::default(),
            attitude_gains: BackstepGains::default(),
            position_gains: PositionGains::default(),
            position_limits: PositionLimits::default(),
            baseline_gains: BaselinePidGains::default(),
            disturbance: DisturbanceConfig::default(),
            mission,
            sim: SimSettings::default(),
        }
    }

    pub fn with_controller(mut self, controller: Controller) -> Self {
        self.sim.controller = controller;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = SimError::InvalidScenario;
        self.vehicle
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.attitude_gains.validate().map_err(invalid)?;
        self.position_gains.validate().map_err(invalid)?;
        self.position_limits.validate().map_err(invalid)?;
        self.baseline_gains.validate().map_err(invalid)?;
        self.disturbance.validate().map_err(invalid)?;
        self.mission.validate().map_err(invalid)?;
        if !(self.sim.dt > 0.0 && self.sim.dt.is_finite()) {
            return Err(invalid(format!("dt = {} must be positive", self.sim.dt)));
        }
        if self.sim.position_divider == 0 {
            return Err(invalid("position_divider must be >= 1".into()));
        }
        Ok(())
    }

    /// Tick index at which each phase ends.
    fn phase_ends(&self) -> Vec<usize> {
        let mut elapsed = 0.0;
        self.mission
            .phases
            .iter()
            .map(|p| {
                elapsed += p.duration;
                (elapsed / self.sim.dt).round() as usize
            })
            .collect()
    }
}

enum AttitudeLaw {
    Hybrid(AdaptiveBackstepping),
    Baseline(BaselinePidGains, PidMemory),
}

/// Runs the whole mission and logs every attitude tick.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioLog, SimError> {
    scenario.validate()?;
    let params = scenario.vehicle;
    let dt = scenario.sim.dt;
    let divider = scenario.sim.position_divider as usize;
    let position_dt = dt * divider as f64;
    let phase_ends = scenario.phase_ends();
    let total_ticks = *phase_ends.last().expect("validated non-empty");

    let mut state = RigidBodyState {
        position: Vector3::from(scenario.mission.initial_position),
        attitude: Vector3::from(scenario.mission.initial_attitude),
        velocity: Vector3::zeros(),
        euler_rates: Vector3::from(scenario.mission.initial_rates),
    };
    let mut position_ctl =
        PositionController::new(scenario.position_gains, scenario.position_limits, params);
    let mut attitude_law = match scenario.sim.controller {
        Controller::Hybrid => AttitudeLaw::Hybrid(
            AdaptiveBackstepping::new(scenario.attitude_gains, params, scenario.disturbance.bounds)
                .with_rule(scenario.sim.adaptation),
        ),
        Controller::BaselinePid => {
            AttitudeLaw::Baseline(scenario.baseline_gains, PidMemory::default())
        }
    };
    let mut disturbance = DisturbanceState::new(scenario.disturbance.seed);

    let mut command = PositionCommand::hover(&params, state.yaw());
    let mut applied = ControlInputs::hover(&params);
    let mut net_rotor_speed = 0.0;
    let mut phase_index = 0;
    let mut phase_start_tick = 0;
    let mut hold_position = state.position;
    let mut rows = Vec::with_capacity(total_ticks);

    for tick in 0..total_ticks {
        let t = tick as f64 * dt;
        if tick == phase_ends[phase_index] {
            phase_start_tick = tick;
            phase_index += 1;
            hold_position = state.position;
        }
        if tick == 0 {
            hold_position = state.position;
        }
        let phase = &scenario.mission.phases[phase_index];
        let elapsed = (tick - phase_start_tick) as f64 * dt;
        let wind =
            crate::disturbance::sample(&scenario.disturbance, t, &state.position, &mut disturbance);

        let desired_position;
        match phase.reference.target(elapsed, phase.duration) {
            Target::Position {
                position,
                velocity,
                yaw,
            } => {
                desired_position = position;
                if tick % divider == 0 {
                    let setpoint = PositionSetpoint {
                        position,
                        velocity,
                        yaw,
                    };
                    let accel = translational_accel_in_air(
                        &state,
                        applied.thrust,
                        &wind.air_velocity,
                        &params,
                    );
                    let law = scenario.sim.thrust_mode.law(phase.kind);
                    command = position_ctl.step(&state, &setpoint, &accel, law, position_dt);
                }
            }
            Target::Attitude(angles) => {
                desired_position = hold_position;
                command = PositionCommand {
                    roll: angles[0],
                    pitch: angles[1],
                    yaw: angles[2],
                    ..PositionCommand::hover(&params, angles[2])
                };
            }
        }

        let setpoint = AttitudeSetpoint::constant(command.attitude());
        let (torques, estimate, lyapunov, estimate_clamped) = match &mut attitude_law {
            AttitudeLaw::Hybrid(ctl) => {
                let out = ctl
                    .step(&state, &setpoint, net_rotor_speed, dt)
                    .map_err(|source| SimError::Model { time: t, source })?;
                let certs = lyapunov_certificates(
                    &out.errors,
                    &out.estimate,
                    &wind.torque,
                    &scenario.attitude_gains,
                    &params,
                );
                (
                    out.torques,
                    out.estimate.estimate,
                    certs.values(),
                    out.estimate_clamped,
                )
            }
            AttitudeLaw::Baseline(gains, memory) => {
                let torques = baseline_pid_attitude(&state, &setpoint, gains, memory, dt);
                (
                    torques,
                    Vector3::repeat(f64::NAN),
                    Vector3::repeat(f64::NAN),
                    false,
                )
            }
        };

        let commanded = ControlInputs::new(command.thrust, torques);
        let rotors = mix_rotors(&commanded, &params);
        applied = if rotors.saturated {
            unmix_rotors(&rotors.speeds, &params)
        } else {
            commanded
        };

        rows.push(LogRow {
            time: t,
            phase: phase.name.clone(),
            phase_kind: phase.kind,
            desired_position,
            position: state.position,
            desired_attitude: command.attitude(),
            attitude: state.attitude,
            thrust: applied.thrust,
            torques: applied.torques(),
            disturbance: wind.torque,
            estimate,
            lyapunov,
            rotor_saturated: rotors.saturated,
            tilt_clamped: command.tilt_clamped,
            thrust_clamped: command.thrust_clamped,
            estimate_clamped,
        });

        let input = DisturbanceInput {
            torque: wind.torque,
            net_rotor_speed,
        };
        state = rk4_step(&state, &applied, &input, &wind.air_velocity, &params, dt)
            .map_err(|e| e.at(t + dt))?;
        net_rotor_speed = rotors.net_rotor_speed;
    }
    Ok(ScenarioLog { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thrust_mode_resolution() {
        assert_eq!(
            ThrustMode::Auto.law(PhaseKind::Takeoff),
            ThrustLaw::Altitude
        );
        assert_eq!(
            ThrustMode::Auto.law(PhaseKind::Flight),
            ThrustLaw::Inversion
        );
        assert_eq!(ThrustMode::Auto.law(PhaseKind::Land), ThrustLaw::Altitude);
        assert_eq!(
            ThrustMode::Inversion.law(PhaseKind::Land),
            ThrustLaw::Inversion
        );
        assert_eq!(
            ThrustMode::Altitude.law(PhaseKind::Flight),
            ThrustLaw::Altitude
        );
    }

    #[test]
    fn log_covers_mission_at_tick_rate() {
        let log = run_scenario(&Scenario::hover([0.0, 0.0, 1.0], 1.0)).unwrap();
        assert_eq!(log.len(), 500);
        assert_eq!(log.rows[1].time, 0.002);
        assert!(log.rows.windows(2).all(|w| w[1].time > w[0].time));
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut s = Scenario::hover([0.0; 3], 1.0);
        s.sim.dt = 0.0;
        assert!(matches!(
            run_scenario(&s),
            Err(SimError::InvalidScenario(_))
        ));
        let mut s = Scenario::hover([0.0; 3], 1.0);
        s.sim.position_divider = 0;
        assert!(matches!(
            run_scenario(&s),
            Err(SimError::InvalidScenario(_))
        ));
    }

    #[test]
    fn divergence_reports_time() {
        // uncontrolled spin: the roll angle passes the limit after 2 s
        let mut s = Scenario::attitude_hold([0.0; 3], [0.0; 3], DisturbanceConfig::calm(), 5.0)
            .with_controller(Controller::BaselinePid);
        s.baseline_gains = BaselinePidGains {
            angle_p: [0.0; 3],
            rate_p: [0.0; 3],
            rate_i: [0.0; 3],
            rate_d: [0.0; 3],
        };
        s.mission.initial_rates = [5e5, 0.0, 0.0];
        match run_scenario(&s) {
            Err(SimError::NumericalDivergence {
                time, component, ..
            }) => {
                assert_eq!(component, 3);
                assert!(time > 1.9 && time < 2.1, "time {time}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
