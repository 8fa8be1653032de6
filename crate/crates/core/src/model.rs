//! Rigid-body quadrotor model.
//!
//! Frames follow the usual convention: the body frame `B` has its origin at the
//! centre of mass with `x_b`/`y_b` pointing at rotors 1 and 2 (plus layout) and
//! `z_b` up; the geographic frame `E` is north-east-up with its origin at the
//! take-off point. Attitude is a ZYX (yaw-pitch-roll) Euler triple and the
//! rotational dynamics are written directly in Euler rates.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disturbance::drag_force;

/// Guard band around `|pitch| = pi/2` inside which the Euler kinematics are
/// treated as singular.
pub const GIMBAL_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("pitch {pitch:.6} rad is within {GIMBAL_GUARD} rad of gimbal lock")]
    GimbalLock { pitch: f64 },
    #[error("invalid vehicle parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("vehicle config: {0}")]
    Config(#[from] toml::de::Error),
}

/// Physical constants of the airframe. All SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Take-off mass (kg).
    pub mass: f64,
    /// Distance from the centre of mass to each rotor axis (m).
    pub arm_length: f64,
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    /// Rotor + propeller inertia about the spin axis (kg m^2).
    pub rotor_inertia: f64,
    /// Linear translational drag coefficient (N s/m).
    pub drag_coefficient: f64,
    pub gravity: f64,
    /// Rotor thrust per squared speed (N s^2/rad^2).
    pub thrust_coefficient: f64,
    /// Rotor reaction torque per squared speed (N m s^2/rad^2).
    pub rotor_drag_coefficient: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            arm_length: 0.25,
            ixx: 0.02,
            iyy: 0.02,
            izz: 0.04,
            rotor_inertia: 1e-4,
            drag_coefficient: 0.1,
            gravity: 9.81,
            thrust_coefficient: 1e-5,
            rotor_drag_coefficient: 1e-6,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let strictly_positive = [
            ("mass", self.mass),
            ("arm_length", self.arm_length),
            ("ixx", self.ixx),
            ("iyy", self.iyy),
            ("izz", self.izz),
            ("gravity", self.gravity),
            ("thrust_coefficient", self.thrust_coefficient),
            ("rotor_drag_coefficient", self.rotor_drag_coefficient),
        ];
        for (name, value) in strictly_positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and > 0",
                });
            }
        }
        for (name, value) in [
            ("rotor_inertia", self.rotor_inertia),
            ("drag_coefficient", self.drag_coefficient),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and >= 0",
                });
            }
        }
        Ok(())
    }

    /// Parses a flat `name = value` file. Missing keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self, ModelError> {
        let params: Self = toml::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn inertia(&self) -> Vector3<f64> {
        Vector3::new(self.ixx, self.iyy, self.izz)
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Full 12-dimensional state. Position and velocity live in the geographic
/// frame; `attitude` is `(roll, pitch, yaw)` and `euler_rates` its time
/// derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub position: Vector3<f64>,
    pub attitude: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub euler_rates: Vector3<f64>,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            attitude: Vector3::zeros(),
            velocity: Vector3::zeros(),
            euler_rates: Vector3::zeros(),
        }
    }
}

impl RigidBodyState {
    pub fn at_position(position: Vector3<f64>) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    pub fn roll(&self) -> f64 {
        self.attitude[0]
    }

    pub fn pitch(&self) -> f64 {
        self.attitude[1]
    }

    pub fn yaw(&self) -> f64 {
        self.attitude[2]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn components(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[0..3].copy_from_slice(self.position.as_slice());
        out[3..6].copy_from_slice(self.attitude.as_slice());
        out[6..9].copy_from_slice(self.velocity.as_slice());
        out[9..12].copy_from_slice(self.euler_rates.as_slice());
        out
    }

    pub fn check_gimbal(&self) -> Result<(), ModelError> {
        if self.pitch().abs() >= std::f64::consts::FRAC_PI_2 - GIMBAL_GUARD {
            return Err(ModelError::GimbalLock {
                pitch: self.pitch(),
            });
        }
        Ok(())
    }

    /// `self + h * rate`, component-wise.
    pub fn advanced(&self, rate: &StateDerivative, h: f64) -> Self {
        Self {
            position: self.position + rate.position * h,
            attitude: self.attitude + rate.attitude * h,
            velocity: self.velocity + rate.velocity * h,
            euler_rates: self.euler_rates + rate.euler_rates * h,
        }
    }

    /// Translational kinetic + potential + rotational kinetic energy (J).
    pub fn mechanical_energy(&self, params: &VehicleParams) -> f64 {
        let translational = 0.5 * params.mass * self.velocity.norm_squared();
        let potential = params.weight() * self.position.z;
        let rotational = 0.5
            * params
                .inertia()
                .dot(&self.euler_rates.component_mul(&self.euler_rates));
        translational + potential + rotational
    }
}

/// Time derivative of [`RigidBodyState`], field for field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub position: Vector3<f64>,
    pub attitude: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub euler_rates: Vector3<f64>,
}

impl StateDerivative {
    pub fn weighted_sum(parts: [(&StateDerivative, f64); 4]) -> StateDerivative {
        let mut out = StateDerivative {
            position: Vector3::zeros(),
            attitude: Vector3::zeros(),
            velocity: Vector3::zeros(),
            euler_rates: Vector3::zeros(),
        };
        for (d, w) in parts {
            out.position += d.position * w;
            out.attitude += d.attitude * w;
            out.velocity += d.velocity * w;
            out.euler_rates += d.euler_rates * w;
        }
        out
    }
}

/// Collective thrust `u1` (N) and the three attitude inputs `u2..u4`. The
/// attitude inputs are forces; the rotational dynamics multiply them by the
/// arm length.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInputs {
    pub thrust: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl ControlInputs {
    pub fn new(thrust: f64, torques: Vector3<f64>) -> Self {
        Self {
            thrust,
            roll: torques[0],
            pitch: torques[1],
            yaw: torques[2],
        }
    }

    pub fn hover(params: &VehicleParams) -> Self {
        Self {
            thrust: params.weight(),
            ..Self::default()
        }
    }

    pub fn torques(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.roll, self.pitch, self.yaw)
    }
}

/// Airflow disturbance torques `(d_roll, d_pitch, d_yaw)` (N m) and the
/// signed net rotor speed feeding the gyroscopic terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceInput {
    pub torque: Vector3<f64>,
    pub net_rotor_speed: f64,
}

impl Default for DisturbanceInput {
    fn default() -> Self {
        Self {
            torque: Vector3::zeros(),
            net_rotor_speed: 0.0,
        }
    }
}

/// Body-to-geographic direction cosine matrix for ZYX Euler angles.
pub fn rotation_matrix(attitude: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = attitude[0].sin_cos();
    let (sp, cp) = attitude[1].sin_cos();
    let (sy, cy) = attitude[2].sin_cos();
    Matrix3::new(
        cp * cy,
        sr * sp * cy - cr * sy,
        cr * sp * cy + sr * sy,
        cp * sy,
        sr * sp * sy + cr * cy,
        cr * sp * sy - sr * cy,
        -sp,
        sr * cp,
        cr * cp,
    )
}

/// Matrix taking Euler rates `(roll, pitch, yaw)'` to body angular velocity.
pub fn euler_rate_matrix(attitude: &Vector3<f64>) -> Result<Matrix3<f64>, ModelError> {
    let pitch = attitude[1];
    if pitch.abs() >= std::f64::consts::FRAC_PI_2 - GIMBAL_GUARD {
        return Err(ModelError::GimbalLock { pitch });
    }
    let (sr, cr) = attitude[0].sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Ok(Matrix3::new(
        1.0,
        0.0,
        -sp, //
        0.0,
        cr,
        cp * sr, //
        0.0,
        -sr,
        cp * cr,
    ))
}

/// Unit thrust direction `R e_z` in the geographic frame.
pub fn thrust_direction(attitude: &Vector3<f64>) -> Vector3<f64> {
    let (sr, cr) = attitude[0].sin_cos();
    let (sp, cp) = attitude[1].sin_cos();
    let (sy, cy) = attitude[2].sin_cos();
    Vector3::new(cr * sp * cy + sr * sy, cr * sp * sy - sr * cy, cr * cp)
}

/// Linear acceleration in still air.
pub fn translational_accel(
    state: &RigidBodyState,
    thrust: f64,
    params: &VehicleParams,
) -> Vector3<f64> {
    translational_accel_in_air(state, thrust, &Vector3::zeros(), params)
}

/// Linear acceleration with drag acting on the air-relative velocity.
pub fn translational_accel_in_air(
    state: &RigidBodyState,
    thrust: f64,
    air_velocity: &Vector3<f64>,
    params: &VehicleParams,
) -> Vector3<f64> {
    let drag = drag_force(&(state.velocity - air_velocity), params.drag_coefficient);
    let mut force = thrust_direction(&state.attitude) * thrust + drag;
    force.z -= params.weight();
    force / params.mass
}

/// Euler angular accelerations `(roll, pitch, yaw)''`.
pub fn rotational_accel(
    state: &RigidBodyState,
    controls: &ControlInputs,
    disturbance: &DisturbanceInput,
    params: &VehicleParams,
) -> Vector3<f64> {
    let rates = &state.euler_rates;
    let (roll_rate, pitch_rate, yaw_rate) = (rates[0], rates[1], rates[2]);
    let omega_r = disturbance.net_rotor_speed;
    let d = &disturbance.torque;
    let l = params.arm_length;

    let roll = pitch_rate * yaw_rate * (params.iyy - params.izz)
        + params.rotor_inertia * pitch_rate * omega_r
        + l * controls.roll
        - d[0];
    let pitch = yaw_rate * roll_rate * (params.izz - params.ixx)
        - params.rotor_inertia * roll_rate * omega_r
        + l * controls.pitch
        - d[1];
    let yaw = pitch_rate * roll_rate * (params.ixx - params.iyy) + l * controls.yaw - d[2];

    Vector3::new(roll / params.ixx, pitch / params.iyy, yaw / params.izz)
}

pub fn state_derivative(
    state: &RigidBodyState,
    controls: &ControlInputs,
    disturbance: &DisturbanceInput,
    air_velocity: &Vector3<f64>,
    params: &VehicleParams,
) -> StateDerivative {
    StateDerivative {
        position: state.velocity,
        attitude: state.euler_rates,
        velocity: translational_accel_in_air(state, controls.thrust, air_velocity, params),
        euler_rates: rotational_accel(state, controls, disturbance, params),
    }
}

/// Individual rotor speeds produced by [`mix_rotors`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpeeds {
    /// Rotors 1..4 (rad/s). Rotors 1/3 sit on `x_b`, 2/4 on `y_b`.
    pub speeds: [f64; 4],
    /// `-w1 - w3 + w2 + w4`.
    pub net_rotor_speed: f64,
    /// Set when at least one squared speed had to be clamped at zero.
    pub saturated: bool,
}

/// Maps squared rotor speeds to `(u1, u2, u3, u4)`.
pub fn allocation_matrix(params: &VehicleParams) -> Matrix4<f64> {
    let b = params.thrust_coefficient;
    let k = params.rotor_drag_coefficient / params.arm_length;
    Matrix4::new(
        b, b, b, b, //
        0.0, -b, 0.0, b, //
        -b, 0.0, b, 0.0, //
        -k, k, -k, k,
    )
}

/// Plus-configuration control allocation.
///
/// Solves `allocation_matrix * w = u` for the squared speeds in closed form,
/// clamps negative squares at zero and reports the net rotor speed.
pub fn mix_rotors(u: &ControlInputs, params: &VehicleParams) -> RotorSpeeds {
    let b = params.thrust_coefficient;
    let total = u.thrust / b;
    let roll = u.roll / b;
    let pitch = u.pitch / b;
    let yaw = u.yaw * params.arm_length / params.rotor_drag_coefficient;

    let odd_pair = 0.5 * (total - yaw);
    let even_pair = 0.5 * (total + yaw);
    let squared = [
        0.5 * (odd_pair - pitch),
        0.5 * (even_pair - roll),
        0.5 * (odd_pair + pitch),
        0.5 * (even_pair + roll),
    ];

    let saturated = squared.iter().any(|&w2| w2 < 0.0);
    let speeds = squared.map(|w2| w2.max(0.0).sqrt());
    RotorSpeeds {
        speeds,
        net_rotor_speed: -speeds[0] - speeds[2] + speeds[1] + speeds[3],
        saturated,
    }
}

/// Forward allocation: the controls actually produced by a set of rotor speeds.
pub fn unmix_rotors(speeds: &[f64; 4], params: &VehicleParams) -> ControlInputs {
    let squared = Vector4::from_iterator(speeds.iter().map(|w| w * w));
    let u = allocation_matrix(params) * squared;
    ControlInputs {
        thrust: u[0],
        roll: u[1],
        pitch: u[2],
        yaw: u[3],
    }
}
