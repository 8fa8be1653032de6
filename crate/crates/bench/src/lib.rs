//! Shared fixtures for the benchmarks.

use nalgebra::Vector3;
use quadflight::sim::Scenario;
use quadflight::RigidBodyState;

/// A tilted, moving state away from every singularity.
pub fn perturbed_state() -> RigidBodyState {
    RigidBodyState {
        position: Vector3::new(0.3, -0.2, 5.0),
        attitude: Vector3::new(0.1, -0.05, 0.2),
        velocity: Vector3::new(0.5, 0.1, -0.2),
        euler_rates: Vector3::new(0.2, -0.1, 0.05),
    }
}

/// The three-phase mission cut down to one second per phase.
pub fn short_mission(seed: u64) -> Scenario {
    let mut s = Scenario::three_phase(seed);
    for phase in &mut s.mission.phases {
        phase.duration = 1.0;
    }
    s
}
