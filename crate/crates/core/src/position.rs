//! Outer-loop position and altitude control.
//!
//! PD terms with acceleration feedback produce per-axis specific-force
//! commands `(U_x, U_y, U_z)` in the geographic frame. These are turned into
//! collective thrust and roll/pitch setpoints either by inverting the full
//! thrust-vector relation or, for purely vertical flight, by an altitude PID on
//! thrust plus single-channel tilt inversions.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{thrust_direction, RigidBodyState, VehicleParams};

/// Thrust magnitudes below this are treated as zero.
pub const MIN_THRUST: f64 = 1e-6;

/// Slack allowed on arcsine arguments for rounding.
const ARCSIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PositionError {
    #[error("collective thrust {thrust} N is too small to define a tilt")]
    DegenerateThrust { thrust: f64 },
    #[error("required tilt is infeasible (arcsine argument {argument})")]
    InfeasibleTilt { argument: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositionGains {
    pub kp_x: f64,
    pub kp_y: f64,
    pub kp_z: f64,
    pub kd_x: f64,
    pub kd_y: f64,
    pub kd_z: f64,
    /// Acceleration feedback gains.
    pub kdd_x: f64,
    pub kdd_y: f64,
    pub kdd_z: f64,
    pub ki_x: f64,
    pub ki_z: f64,
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            kp_x: 2.1,
            kp_y: 2.1,
            kp_z: 6.8,
            kd_x: 2.6,
            kd_y: 2.6,
            kd_z: 4.7,
            kdd_x: -0.05,
            kdd_y: -0.05,
            kdd_z: -0.05,
            ki_x: 0.5,
            ki_z: 3.2,
        }
    }
}

impl PositionGains {
    /// All gains zero; handy as a base for hand-written cases.
    pub fn zero() -> Self {
        Self {
            kp_x: 0.0,
            kp_y: 0.0,
            kp_z: 0.0,
            kd_x: 0.0,
            kd_y: 0.0,
            kd_z: 0.0,
            kdd_x: 0.0,
            kdd_y: 0.0,
            kdd_z: 0.0,
            ki_x: 0.0,
            ki_z: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let non_negative = [
            ("kp_x", self.kp_x),
            ("kp_y", self.kp_y),
            ("kp_z", self.kp_z),
            ("kd_x", self.kd_x),
            ("kd_y", self.kd_y),
            ("kd_z", self.kd_z),
            ("ki_x", self.ki_x),
            ("ki_z", self.ki_z),
        ];
        if let Some((name, v)) = non_negative
            .iter()
            .find(|(_, v)| !(v.is_finite() && *v >= 0.0))
        {
            return Err(format!("position gain {name} = {v} must be >= 0"));
        }
        if let Some((name, _)) = [
            ("kp_x", self.kp_x),
            ("kp_y", self.kp_y),
            ("kp_z", self.kp_z),
        ]
        .iter()
        .find(|(_, v)| *v <= 0.0)
        {
            return Err(format!("position gain {name} must be > 0"));
        }
        if [self.kdd_x, self.kdd_y, self.kdd_z]
            .iter()
            .any(|k| !k.is_finite() || *k >= 1.0)
        {
            return Err("acceleration feedback gains must be finite and < 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositionLimits {
    /// Hard limit on `|roll_d|` and `|pitch_d|` (rad).
    pub tilt_limit: f64,
    /// Upper thrust bound as a multiple of the vehicle weight.
    pub max_thrust_ratio: f64,
    /// Lower bound on `U_z + g` as a fraction of `g`; keeps the inversion on
    /// the upright branch.
    pub min_vertical_ratio: f64,
}

impl Default for PositionLimits {
    fn default() -> Self {
        Self {
            tilt_limit: 0.5,
            max_thrust_ratio: 2.0,
            min_vertical_ratio: 0.2,
        }
    }
}

impl PositionLimits {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tilt_limit > 0.0 && self.tilt_limit < std::f64::consts::FRAC_PI_2) {
            return Err("tilt_limit must lie in (0, pi/2)".into());
        }
        if !(self.max_thrust_ratio > 1.0 && self.max_thrust_ratio.is_finite()) {
            return Err("max_thrust_ratio must be > 1".into());
        }
        if !(self.min_vertical_ratio > 0.0 && self.min_vertical_ratio < 1.0) {
            return Err("min_vertical_ratio must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// Specific-force commands `(U_x, U_y, U_z)` (m/s^2), geographic frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualForces {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl VirtualForces {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSetpoint {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub yaw: f64,
}

impl PositionSetpoint {
    pub fn hold(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            yaw,
        }
    }
}

/// Running integrals of the x and z position errors (m s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositionIntegrator {
    pub x: f64,
    pub z: f64,
}

pub fn virtual_forces(
    state: &RigidBodyState,
    setpoint: &PositionSetpoint,
    accel_feedback: &Vector3<f64>,
    gains: &PositionGains,
    integrator: &PositionIntegrator,
) -> VirtualForces {
    let e = setpoint.position - state.position;
    let de = setpoint.velocity - state.velocity;
    let a = accel_feedback;
    VirtualForces {
        x: gains.kp_x * e.x + gains.kd_x * de.x + gains.kdd_x * a.x + gains.ki_x * integrator.x,
        y: gains.kp_y * e.y + gains.kd_y * de.y + gains.kdd_y * a.y,
        z: gains.kp_z * e.z + gains.kd_z * de.z + gains.kdd_z * a.z + gains.ki_z * integrator.z,
    }
}

/// Thrust and tilt setpoints recovered from virtual forces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub thrust: f64,
    pub roll: f64,
    pub pitch: f64,
    /// Set when either angle was limited to the tilt bound.
    pub tilt_clamped: bool,
}

fn checked_asin(argument: f64) -> Result<f64, PositionError> {
    if !argument.is_finite() || argument.abs() > 1.0 + ARCSIN_SLACK {
        return Err(PositionError::InfeasibleTilt { argument });
    }
    Ok(argument.clamp(-1.0, 1.0).asin())
}

fn clamp_tilt(angle: f64, limit: f64) -> (f64, bool) {
    let clamped = angle.clamp(-limit, limit);
    (clamped, clamped != angle)
}

/// Inverts `U = R(roll, pitch, yaw) e_z u1 / m - g e_z` for `(u1, pitch, roll)`
/// at a fixed yaw.
///
/// Pitch is recovered from the yaw-aligned horizontal component
/// `U_x cos(yaw) + U_y sin(yaw)`, which equals the `(U_x m - u1 sin(roll)
/// sin(yaw)) / (u1 cos(yaw) cos(roll))` form wherever `cos(yaw) != 0` and stays
/// defined at `yaw = +-pi/2`.
pub fn invert_to_setpoints(
    forces: &VirtualForces,
    yaw: f64,
    params: &VehicleParams,
    tilt_limit: f64,
) -> Result<Inversion, PositionError> {
    let vertical = forces.z + params.gravity;
    let thrust = params.mass * (forces.x.powi(2) + forces.y.powi(2) + vertical.powi(2)).sqrt();
    if thrust.is_nan() || thrust < MIN_THRUST {
        return Err(PositionError::DegenerateThrust { thrust });
    }
    if vertical <= 0.0 {
        // thrust would have to point at or below the horizon
        return Err(PositionError::InfeasibleTilt {
            argument: vertical * params.mass / thrust,
        });
    }
    let (sy, cy) = yaw.sin_cos();
    let roll = checked_asin((forces.x * sy - forces.y * cy) * params.mass / thrust)?;
    let pitch =
        checked_asin(params.mass * (forces.x * cy + forces.y * sy) / (thrust * roll.cos()))?;

    let (roll, roll_clamped) = clamp_tilt(roll, tilt_limit);
    let (pitch, pitch_clamped) = clamp_tilt(pitch, tilt_limit);
    Ok(Inversion {
        thrust,
        roll,
        pitch,
        tilt_clamped: roll_clamped || pitch_clamped,
    })
}

/// Forward map: the specific force produced by `thrust` at `attitude`.
pub fn resultant_forces(
    thrust: f64,
    attitude: &Vector3<f64>,
    params: &VehicleParams,
) -> VirtualForces {
    let a = thrust_direction(attitude) * (thrust / params.mass);
    VirtualForces::new(a.x, a.y, a.z - params.gravity)
}

/// Altitude PID on collective thrust with weight feed-forward, clamped to
/// `[0, max_thrust]`. Returns the thrust and whether it was clamped.
pub fn altitude_thrust(
    state: &RigidBodyState,
    setpoint: &PositionSetpoint,
    gains: &PositionGains,
    integrator: &PositionIntegrator,
    params: &VehicleParams,
    max_thrust: f64,
) -> (f64, bool) {
    let e = setpoint.position.z - state.position.z;
    let de = setpoint.velocity.z - state.velocity.z;
    let raw = gains.kp_z * e + gains.ki_z * integrator.z + gains.kd_z * de + params.weight();
    let thrust = raw.clamp(0.0, max_thrust);
    (thrust, thrust != raw)
}

/// PID output of the x channel (m/s^2).
pub fn x_channel_command(
    state: &RigidBodyState,
    setpoint: &PositionSetpoint,
    gains: &PositionGains,
    integrator: &PositionIntegrator,
) -> f64 {
    gains.kp_x * (setpoint.position.x - state.position.x)
        + gains.ki_x * integrator.x
        + gains.kd_x * (setpoint.velocity.x - state.velocity.x)
}

/// Pitch needed for an x-axis specific force `x_command` when thrust, roll and
/// yaw are held: solves `x_command = (f1 sin(pitch) + f2) u1 / m` with
/// `f1 = cos(roll) cos(yaw)`, `f2 = sin(roll) sin(yaw)`.
pub fn pitch_for_x_command(
    x_command: f64,
    thrust: f64,
    yaw: f64,
    roll: f64,
    params: &VehicleParams,
) -> Result<f64, PositionError> {
    if thrust.is_nan() || thrust < MIN_THRUST {
        return Err(PositionError::DegenerateThrust { thrust });
    }
    let f1 = roll.cos() * yaw.cos();
    let f2 = roll.sin() * yaw.sin();
    let argument = (params.mass * x_command / thrust - f2) / f1;
    checked_asin(argument)
}

pub fn pitch_from_x_channel(
    state: &RigidBodyState,
    setpoint: &PositionSetpoint,
    gains: &PositionGains,
    roll: f64,
    thrust: f64,
    integrator: &PositionIntegrator,
    params: &VehicleParams,
) -> Result<f64, PositionError> {
    let command = x_channel_command(state, setpoint, gains, integrator);
    pitch_for_x_command(command, thrust, setpoint.yaw, roll, params)
}

/// Which relation sets the collective thrust.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThrustLaw {
    /// Full thrust-vector inversion of `(U_x, U_y, U_z)`.
    Inversion,
    /// Altitude PID on thrust; tilt from the horizontal channels alone.
    Altitude,
}

/// Output of one position-loop tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionCommand {
    pub forces: VirtualForces,
    pub thrust: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub tilt_clamped: bool,
    pub thrust_clamped: bool,
}

impl PositionCommand {
    pub fn hover(params: &VehicleParams, yaw: f64) -> Self {
        Self {
            forces: VirtualForces::new(0.0, 0.0, 0.0),
            thrust: params.weight(),
            roll: 0.0,
            pitch: 0.0,
            yaw,
            tilt_clamped: false,
            thrust_clamped: false,
        }
    }

    pub fn attitude(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }
}

/// Position controller owning its integrator, with conditional-integration
/// anti-windup.
#[derive(Debug, Clone)]
pub struct PositionController {
    gains: PositionGains,
    limits: PositionLimits,
    params: VehicleParams,
    integrator: PositionIntegrator,
}

impl PositionController {
    pub fn new(gains: PositionGains, limits: PositionLimits, params: VehicleParams) -> Self {
        Self {
            gains,
            limits,
            params,
            integrator: PositionIntegrator::default(),
        }
    }

    pub fn integrator(&self) -> &PositionIntegrator {
        &self.integrator
    }

    pub fn max_thrust(&self) -> f64 {
        self.limits.max_thrust_ratio * self.params.weight()
    }

    pub fn step(
        &mut self,
        state: &RigidBodyState,
        setpoint: &PositionSetpoint,
        accel_feedback: &Vector3<f64>,
        law: ThrustLaw,
        dt: f64,
    ) -> PositionCommand {
        let p = &self.params;
        let mut forces = virtual_forces(
            state,
            setpoint,
            accel_feedback,
            &self.gains,
            &self.integrator,
        );
        let (sy, cy) = setpoint.yaw.sin_cos();
        let tilt_limit = self.limits.tilt_limit;
        let max_thrust = self.max_thrust();

        let (thrust, roll, pitch, tilt_clamped, thrust_high, thrust_low) = match law {
            ThrustLaw::Inversion => {
                let floor = self.limits.min_vertical_ratio * p.gravity - p.gravity;
                let vertical_floored = forces.z < floor;
                forces.z = forces.z.max(floor);
                let inv = invert_to_setpoints(&forces, setpoint.yaw, p, tilt_limit)
                    .expect("vertical floor keeps the inversion feasible");
                let thrust = inv.thrust.min(max_thrust);
                (
                    thrust,
                    inv.roll,
                    inv.pitch,
                    inv.tilt_clamped,
                    inv.thrust > max_thrust,
                    vertical_floored,
                )
            }
            ThrustLaw::Altitude => {
                let (thrust, clamped) = altitude_thrust(
                    state,
                    setpoint,
                    &self.gains,
                    &self.integrator,
                    p,
                    max_thrust,
                );
                let usable = thrust.max(MIN_THRUST);
                let roll_arg = (forces.x * sy - forces.y * cy) * p.mass / usable;
                let (roll, roll_clamped) = clamp_tilt(roll_arg.clamp(-1.0, 1.0).asin(), tilt_limit);
                let pitch_arg = (p.mass * forces.x / usable - roll.sin() * sy) / (roll.cos() * cy);
                let pitch_raw = if pitch_arg.is_finite() {
                    pitch_arg.clamp(-1.0, 1.0).asin()
                } else {
                    tilt_limit.copysign(forces.x * cy)
                };
                let (pitch, pitch_clamped) = clamp_tilt(pitch_raw, tilt_limit);
                (
                    thrust,
                    roll,
                    pitch,
                    roll_clamped || pitch_clamped || roll_arg.abs() > 1.0 || pitch_arg.abs() > 1.0,
                    clamped && thrust >= max_thrust,
                    clamped && thrust <= 0.0,
                )
            }
        };

        // conditional integration: freeze an integral whose growth would push
        // a saturated output further into saturation
        let e = setpoint.position - state.position;
        if !(tilt_clamped && e.x * forces.x > 0.0) {
            self.integrator.x += e.x * dt;
        }
        let z_winds_up = (thrust_high && e.z > 0.0) || (thrust_low && e.z < 0.0);
        if !z_winds_up {
            self.integrator.z += e.z * dt;
        }

        PositionCommand {
            forces,
            thrust,
            roll,
            pitch,
            yaw: setpoint.yaw,
            tilt_clamped,
            thrust_clamped: thrust_high || thrust_low,
        }
    }
}
