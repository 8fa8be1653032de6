//! Cascade PID attitude controller used as the comparison baseline.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::attitude::AttitudeSetpoint;
use crate::model::RigidBodyState;

/// Per-axis gains in `(roll, pitch, yaw)` order: an angle-loop P feeding a
/// rate-loop PID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselinePidGains {
    pub angle_p: [f64; 3],
    pub rate_p: [f64; 3],
    pub rate_i: [f64; 3],
    pub rate_d: [f64; 3],
}

impl Default for BaselinePidGains {
    fn default() -> Self {
        Self {
            angle_p: [4.0, 4.0, 4.0],
            rate_p: [0.64, 0.64, 0.64],
            rate_i: [0.0; 3],
            rate_d: [0.0; 3],
        }
    }
}

impl BaselinePidGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = self
            .angle_p
            .iter()
            .chain(&self.rate_p)
            .chain(&self.rate_i)
            .chain(&self.rate_d);
        if all.into_iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err("baseline PID gains must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Rate-loop integrals and the previous rate error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidMemory {
    pub integral: Vector3<f64>,
    pub previous_rate_error: Option<Vector3<f64>>,
}

/// One tick of the cascade: `rate_d = angle_p * (angle_d - angle)`, then a PID
/// on `rate_d - rate`. The derivative term differences successive rate errors
/// and is zero on the first tick.
pub fn baseline_pid_attitude(
    state: &RigidBodyState,
    setpoint: &AttitudeSetpoint,
    gains: &BaselinePidGains,
    memory: &mut PidMemory,
    dt: f64,
) -> Vector3<f64> {
    let angle_error = setpoint.angles - state.attitude;
    let commanded_rate = Vector3::from(gains.angle_p).component_mul(&angle_error) + setpoint.rates;
    let rate_error = commanded_rate - state.euler_rates;
    let derivative = match memory.previous_rate_error {
        Some(prev) => (rate_error - prev) / dt,
        None => Vector3::zeros(),
    };
    memory.integral += rate_error * dt;
    memory.previous_rate_error = Some(rate_error);
    Vector3::from(gains.rate_p).component_mul(&rate_error)
        + Vector3::from(gains.rate_i).component_mul(&memory.integral)
        + Vector3::from(gains.rate_d).component_mul(&derivative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_error_gives_zero_torque() {
        let mut mem = PidMemory::default();
        let u = baseline_pid_attitude(
            &RigidBodyState::default(),
            &AttitudeSetpoint::constant(Vector3::zeros()),
            &BaselinePidGains::default(),
            &mut mem,
            0.002,
        );
        assert_eq!(u, Vector3::zeros());
    }

    #[test]
    fn angle_p_into_rate_p() {
        let gains = BaselinePidGains {
            angle_p: [0.0, 2.0, 0.0],
            rate_p: [0.0, 1.0, 0.0],
            rate_i: [0.0; 3],
            rate_d: [0.0; 3],
        };
        let sp = AttitudeSetpoint::constant(Vector3::new(0.0, 0.1, 0.0));
        let u = baseline_pid_attitude(
            &RigidBodyState::default(),
            &sp,
            &gains,
            &mut PidMemory::default(),
            0.002,
        );
        assert_abs_diff_eq!(u[1], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn integral_and_derivative_terms() {
        let gains = BaselinePidGains {
            angle_p: [1.0; 3],
            rate_p: [0.0; 3],
            rate_i: [1.0; 3],
            rate_d: [1.0; 3],
        };
        let sp = AttitudeSetpoint::constant(Vector3::new(0.1, 0.0, 0.0));
        let mut mem = PidMemory::default();
        let first = baseline_pid_attitude(&RigidBodyState::default(), &sp, &gains, &mut mem, 0.5);
        assert_abs_diff_eq!(first[0], 0.05, epsilon = 1e-15);
        let moved = RigidBodyState {
            euler_rates: Vector3::new(0.1, 0.0, 0.0),
            ..RigidBodyState::default()
        };
        // rate error drops from 0.1 to 0.0: derivative -0.2, integral unchanged
        let second = baseline_pid_attitude(&moved, &sp, &gains, &mut mem, 0.5);
        assert_abs_diff_eq!(second[0], 0.05 - 0.2, epsilon = 1e-15);
    }
}
