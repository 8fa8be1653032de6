//! Adaptive backstepping attitude control.
//!
//! Each axis is treated as a second-order strict-feedback system
//!
//! ```text
//! x1' = x2
//! x2' = a * U + f(x) + delta
//! ```
//!
//! where `a = l / I`, `f` collects the gyroscopic coupling and `delta` is the
//! airflow disturbance expressed as an angular acceleration. The plant takes
//! disturbance torques `d` with `delta = -d / I`; the estimator keeps its state
//! in torque units (N m) and converts on use, so the adaptation law
//! `delta_hat' = beta * e2` reads `d_hat' = -I * beta * e2` on the stored value.
//!
//! Axis bookkeeping follows the usual numbering: pitch uses `(c1, c2, beta1)`,
//! roll `(c3, c4, beta2)` and yaw `(c5, c6, beta3)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::{ModelError, RigidBodyState, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Roll,
    Pitch,
    Yaw,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Roll, Axis::Pitch, Axis::Yaw];

    /// Position in `(roll, pitch, yaw)` ordered vectors.
    pub fn index(self) -> usize {
        match self {
            Axis::Roll => 0,
            Axis::Pitch => 1,
            Axis::Yaw => 2,
        }
    }

    fn inertia(self, params: &VehicleParams) -> f64 {
        match self {
            Axis::Roll => params.ixx,
            Axis::Pitch => params.iyy,
            Axis::Yaw => params.izz,
        }
    }
}

/// Error-feedback gains `c1..c6` (1/s) and adaptation rates `beta1..beta3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackstepGains {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Default for BackstepGains {
    fn default() -> Self {
        Self {
            c1: 4.0,
            c2: 4.0,
            c3: 4.0,
            c4: 4.0,
            c5: 4.0,
            c6: 4.0,
            beta1: 20.0,
            beta2: 20.0,
            beta3: 20.0,
        }
    }
}

/// The three gains acting on one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisGains {
    pub tracking: f64,
    pub virtual_error: f64,
    pub adaptation: f64,
}

impl BackstepGains {
    pub fn uniform(c: f64, beta: f64) -> Self {
        Self {
            c1: c,
            c2: c,
            c3: c,
            c4: c,
            c5: c,
            c6: c,
            beta1: beta,
            beta2: beta,
            beta3: beta,
        }
    }

    pub fn axis(&self, axis: Axis) -> AxisGains {
        let (tracking, virtual_error, adaptation) = match axis {
            Axis::Pitch => (self.c1, self.c2, self.beta1),
            Axis::Roll => (self.c3, self.c4, self.beta2),
            Axis::Yaw => (self.c5, self.c6, self.beta3),
        };
        AxisGains {
            tracking,
            virtual_error,
            adaptation,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c6", self.c6),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
        ];
        match all.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(format!("backstepping gain {name} = {v} must be > 0")),
            None => Ok(()),
        }
    }
}

/// Estimated disturbance torques `(d_roll, d_pitch, d_yaw)` (N m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveState {
    pub estimate: Vector3<f64>,
}

impl Default for AdaptiveState {
    fn default() -> Self {
        Self {
            estimate: Vector3::zeros(),
        }
    }
}

impl AdaptiveState {
    /// Adds `rates * dt`, projected onto
    /// `[-limit, limit]`. Returns true if any axis hit the limit.
    pub fn integrate(&mut self, rates: &Vector3<f64>, dt: f64, limit: &Vector3<f64>) -> bool {
        let mut clamped = false;
        for i in 0..3 {
            let next = self.estimate[i] + rates[i] * dt;
            let bounded = next.clamp(-limit[i], limit[i]);
            clamped |= bounded != next;
            self.estimate[i] = bounded;
        }
        clamped
    }
}

/// Desired attitude with its first two derivatives, `(roll, pitch, yaw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeSetpoint {
    pub angles: Vector3<f64>,
    pub rates: Vector3<f64>,
    pub accels: Vector3<f64>,
}

impl AttitudeSetpoint {
    pub fn constant(angles: Vector3<f64>) -> Self {
        Self {
            angles,
            rates: Vector3::zeros(),
            accels: Vector3::zeros(),
        }
    }
}

/// Backstepping error pair of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisErrorState {
    /// `e1 = angle_d - angle`.
    pub tracking: f64,
    /// `e1'`, from the measured and desired rates.
    pub tracking_rate: f64,
    /// `x_v = c1 e1 + angle_d'`.
    pub virtual_control: f64,
    /// `e2 = rate - x_v`.
    pub virtual_error: f64,
}

pub fn axis_errors(
    angle: f64,
    rate: f64,
    desired: f64,
    desired_rate: f64,
    tracking_gain: f64,
) -> AxisErrorState {
    let tracking = desired - angle;
    let virtual_control = tracking_gain * tracking + desired_rate;
    AxisErrorState {
        tracking,
        tracking_rate: desired_rate - rate,
        virtual_control,
        virtual_error: rate - virtual_control,
    }
}

pub fn errors(
    axis: Axis,
    state: &RigidBodyState,
    setpoint: &AttitudeSetpoint,
    gains: &BackstepGains,
) -> AxisErrorState {
    let i = axis.index();
    axis_errors(
        state.attitude[i],
        state.euler_rates[i],
        setpoint.angles[i],
        setpoint.rates[i],
        gains.axis(axis).tracking,
    )
}

pub fn pitch_errors(
    state: &RigidBodyState,
    setpoint: &AttitudeSetpoint,
    gains: &BackstepGains,
) -> AxisErrorState {
    errors(Axis::Pitch, state, setpoint, gains)
}

/// `U = (e1 + x_v' - f - delta_hat - c2 e2) / a`, with `delta_hat` in the
/// acceleration units of the strict-feedback form.
pub fn backstepping_law(
    errors: &AxisErrorState,
    virtual_control_rate: f64,
    drift: f64,
    disturbance_estimate: f64,
    virtual_gain: f64,
    input_gain: f64,
) -> f64 {
    (errors.tracking + virtual_control_rate
        - drift
        - disturbance_estimate
        - virtual_gain * errors.virtual_error)
        / input_gain
}

/// Input gain `a = l / I` of an axis.
pub fn input_gain(axis: Axis, params: &VehicleParams) -> f64 {
    params.arm_length / axis.inertia(params)
}

/// Gyroscopic drift term `f` of an axis.
pub fn drift(
    axis: Axis,
    state: &RigidBodyState,
    params: &VehicleParams,
    net_rotor_speed: f64,
) -> f64 {
    let r = &state.euler_rates;
    let (roll_rate, pitch_rate, yaw_rate) = (r[0], r[1], r[2]);
    match axis {
        Axis::Roll => {
            pitch_rate * yaw_rate * (params.iyy - params.izz) / params.ixx
                + params.rotor_inertia / params.ixx * pitch_rate * net_rotor_speed
        }
        Axis::Pitch => {
            yaw_rate * roll_rate * (params.izz - params.ixx) / params.iyy
                - params.rotor_inertia / params.iyy * roll_rate * net_rotor_speed
        }
        Axis::Yaw => pitch_rate * roll_rate * (params.ixx - params.iyy) / params.izz,
    }
}

/// Torque disturbance (N m) as the equivalent angular acceleration on an axis.
pub fn equivalent_acceleration(axis: Axis, torque: f64, params: &VehicleParams) -> f64 {
    -torque / axis.inertia(params)
}

/// Output of one axis law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisCommand {
    /// `u2`, `u3` or `u4`.
    pub torque: f64,
    /// Time derivative of the torque estimate (N m/s).
    pub estimate_rate: f64,
    pub errors: AxisErrorState,
}

pub fn axis_control(
    axis: Axis,
    state: &RigidBodyState,
    setpoint: &AttitudeSetpoint,
    adaptive: &AdaptiveState,
    gains: &BackstepGains,
    params: &VehicleParams,
    net_rotor_speed: f64,
) -> Result<AxisCommand, ModelError> {
    state.check_gimbal()?;
    let i = axis.index();
    let g = gains.axis(axis);
    let errors = errors(axis, state, setpoint, gains);
    let virtual_control_rate = g.tracking * errors.tracking_rate + setpoint.accels[i];
    let torque = backstepping_law(
        &errors,
        virtual_control_rate,
        drift(axis, state, params, net_rotor_speed),
        equivalent_acceleration(axis, adaptive.estimate[i], params),
        g.virtual_error,
        input_gain(axis, params),
    );
    Ok(AxisCommand {
        torque,
        estimate_rate: -axis.inertia(params) * g.adaptation * errors.virtual_error,
        errors,
    })
}

pub fn pitch_control(
    state: &RigidBodyState,
    setpoint: &AttitudeSetpoint,
    adaptive: &AdaptiveState,
    gains: &BackstepGains,
    params: &VehicleParams,
    net_rotor_speed: f64,
) -> Result<AxisCommand, ModelError> {
    axis_control(
        Axis::Pitch,
        state,
        setpoint,
        adaptive,
        gains,
        params,
        net_rotor_speed,
    )
}

pub fn roll_control(
    state: &RigidBodyState,
    setpoint: &AttitudeSetpoint,
    adaptive: &AdaptiveState,
    gains: &BackstepGains,
    params: &VehicleParams,
    net_rotor_speed: f64,
) -> Result<AxisCommand, ModelError> {
    axis_control(
        Axis::Roll,
        state,
        setpoint,
        adaptive,
        gains,
        params,
        net_rotor_speed,
    )
}

pub fn yaw_control(
    state: &RigidBodyState,
    setpoint: &AttitudeSetpoint,
    adaptive: &AdaptiveState,
    gains: &BackstepGains,
    params: &VehicleParams,
    net_rotor_speed: f64,
) -> Result<AxisCommand, ModelError> {
    axis_control(
        Axis::Yaw,
        state,
        setpoint,
        adaptive,
        gains,
        params,
        net_rotor_speed,
    )
}

/// `V = e1^2/2 + e2^2/2 + r~^2/(2 beta)`.
pub fn axis_lyapunov(errors: &AxisErrorState, estimation_error: f64, adaptation: f64) -> f64 {
    0.5 * errors.tracking.powi(2)
        + 0.5 * errors.virtual_error.powi(2)
        + estimation_error.powi(2) / (2.0 * adaptation)
}

/// `-c1 e1^2 - c2 e2^2`: the decrease rate guaranteed by the control law.
pub fn axis_lyapunov_rate(errors: &AxisErrorState, gains: &AxisGains) -> f64 {
    -gains.tracking * errors.tracking.powi(2) - gains.virtual_error * errors.virtual_error.powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCertificate {
    pub value: f64,
    pub rate: f64,
}

/// Certificates `V2` (pitch), `V3` (roll), `V4` (yaw).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCertificates {
    pub pitch: LyapunovCertificate,
    pub roll: LyapunovCertificate,
    pub yaw: LyapunovCertificate,
}

impl LyapunovCertificates {
    /// `(roll, pitch, yaw)` values.
    pub fn values(&self) -> Vector3<f64> {
        Vector3::new(self.roll.value, self.pitch.value, self.yaw.value)
    }
}

/// Evaluates the certificates against the true disturbance torques. Only
/// meaningful in simulation, where the truth is known.
pub fn lyapunov_certificates(
    errors: &[AxisErrorState; 3],
    adaptive: &AdaptiveState,
    true_torque: &Vector3<f64>,
    gains: &BackstepGains,
    params: &VehicleParams,
) -> LyapunovCertificates {
    let cert = |axis: Axis| {
        let i = axis.index();
        let g = gains.axis(axis);
        let estimation_error = equivalent_acceleration(axis, true_torque[i], params)
            - equivalent_acceleration(axis, adaptive.estimate[i], params);
        LyapunovCertificate {
            value: axis_lyapunov(&errors[i], estimation_error, g.adaptation),
            rate: axis_lyapunov_rate(&errors[i], &g),
        }
    };
    LyapunovCertificates {
        pitch: cert(Axis::Pitch),
        roll: cert(Axis::Roll),
        yaw: cert(Axis::Yaw),
    }
}

/// Discretisation of the adaptation law at the controller rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptationRule {
    /// `d_hat += rate(t_k) * dt` after the torque is computed.
    Euler,
    /// `d_hat += (rate(t_k-1) + rate(t_k)) / 2 * dt` before the torque is
    /// computed. Pairs the estimate with the error over the whole interval,
    /// which keeps the sampled certificates monotone far more tightly than
    /// the Euler rule.
    #[default]
    Trapezoid,
}

/// Result of one controller tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeCommand {
    /// `(u2, u3, u4)`.
    pub torques: Vector3<f64>,
    pub errors: [AxisErrorState; 3],
    /// Estimate used to compute `torques`.
    pub estimate: AdaptiveState,
    pub estimate_clamped: bool,
}

/// Stateful three-axis controller owning its disturbance estimate.
#[derive(Debug, Clone)]
pub struct AdaptiveBackstepping {
    gains: BackstepGains,
    params: VehicleParams,
    adaptive: AdaptiveState,
    estimate_limit: Vector3<f64>,
    rule: AdaptationRule,
    previous_rates: Option<Vector3<f64>>,
}

impl AdaptiveBackstepping {
    /// The estimate is confined to ten times the configured disturbance bounds.
    pub fn new(gains: BackstepGains, params: VehicleParams, disturbance_bounds: [f64; 3]) -> Self {
        Self {
            gains,
            params,
            adaptive: AdaptiveState::default(),
            estimate_limit: Vector3::from(disturbance_bounds) * 10.0,
            rule: AdaptationRule::Trapezoid,
            previous_rates: None,
        }
    }

    pub fn with_rule(mut self, rule: AdaptationRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn adaptive(&self) -> &AdaptiveState {
        &self.adaptive
    }

    pub fn gains(&self) -> &BackstepGains {
        &self.gains
    }

    pub fn step(
        &mut self,
        state: &RigidBodyState,
        setpoint: &AttitudeSetpoint,
        net_rotor_speed: f64,
        dt: f64,
    ) -> Result<AttitudeCommand, ModelError> {
        let mut estimate_clamped = false;
        if self.rule == AdaptationRule::Trapezoid {
            let now = self.estimate_rates(state, setpoint);
            if let Some(prev) = self.previous_rates {
                estimate_clamped =
                    self.adaptive
                        .integrate(&((prev + now) * 0.5), dt, &self.estimate_limit);
            }
            self.previous_rates = Some(now);
        }
        let mut torques = Vector3::zeros();
        let mut rates = Vector3::zeros();
        let mut errors = [AxisErrorState::default(); 3];
        for axis in Axis::ALL {
            let cmd = axis_control(
                axis,
                state,
                setpoint,
                &self.adaptive,
                &self.gains,
                &self.params,
                net_rotor_speed,
            )?;
            let i = axis.index();
            torques[i] = cmd.torque;
            rates[i] = cmd.estimate_rate;
            errors[i] = cmd.errors;
        }
        let used = self.adaptive;
        if self.rule == AdaptationRule::Euler {
            estimate_clamped = self.adaptive.integrate(&rates, dt, &self.estimate_limit);
        }
        Ok(AttitudeCommand {
            torques,
            errors,
            estimate: used,
            estimate_clamped,
        })
    }

    fn estimate_rates(&self, state: &RigidBodyState, setpoint: &AttitudeSetpoint) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            let axis = Axis::ALL[i];
            let e = errors(axis, state, setpoint, &self.gains);
            -axis.inertia(&self.params) * self.gains.axis(axis).adaptation * e.virtual_error
        })
    }
}
