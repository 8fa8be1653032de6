use nalgebra::Vector3;

use crate::model::{
    state_derivative, ControlInputs, DisturbanceInput, RigidBodyState, VehicleParams,
};

use super::SimError;

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// One classical fourth-order Runge-Kutta step of the rigid-body dynamics.
/// Controls, torque disturbance and air velocity are held over the step.
pub fn rk4_step(
    state: &RigidBodyState,
    controls: &ControlInputs,
    disturbance: &DisturbanceInput,
    air_velocity: &Vector3<f64>,
    params: &VehicleParams,
    dt: f64,
) -> Result<RigidBodyState, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidScenario(format!(
            "time step {dt} must be positive"
        )));
    }
    let f = |s: &RigidBodyState| state_derivative(s, controls, disturbance, air_velocity, params);
    let k1 = f(state);
    let k2 = f(&state.advanced(&k1, 0.5 * dt));
    let k3 = f(&state.advanced(&k2, 0.5 * dt));
    let k4 = f(&state.advanced(&k3, dt));
    let rate = crate::model::StateDerivative::weighted_sum([
        (&k1, 1.0),
        (&k2, 2.0),
        (&k3, 2.0),
        (&k4, 1.0),
    ]);
    let next = state.advanced(&rate, dt / 6.0);
    check_divergence(&next, f64::NAN)?;
    Ok(next)
}

/// Fails when a component is non-finite or exceeds [`DIVERGENCE_LIMIT`].
/// `time` is reported back in the error.
pub fn check_divergence(state: &RigidBodyState, time: f64) -> Result<(), SimError> {
    let components = state.components();
    match components
        .iter()
        .position(|c| !c.is_finite() || c.abs() > DIVERGENCE_LIMIT)
    {
        Some(index) => Err(SimError::NumericalDivergence {
            time,
            component: index,
            value: components[index],
        }),
        None => Ok(()),
    }
}
