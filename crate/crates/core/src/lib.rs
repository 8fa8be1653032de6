//! Quadrotor flight simulation with adaptive backstepping attitude control.

pub mod attitude;
pub mod config;
pub mod disturbance;
pub mod metrics;
pub mod model;
pub mod position;
pub mod sim;

pub use attitude::{AdaptationRule, AdaptiveBackstepping, Axis, BackstepGains};
pub use config::{load_scenario, parse_scenario, ConfigError};
pub use disturbance::{DisturbanceConfig, DisturbanceGenerator, TorqueModel};
pub use metrics::{phase_reports, tracking_metrics, PhaseReport, TrackingMetrics};
pub use model::{ControlInputs, DisturbanceInput, ModelError, RigidBodyState, VehicleParams};
pub use position::{
    PositionController, PositionGains, PositionLimits, PositionSetpoint, ThrustLaw,
};
pub use sim::{run_scenario, Controller, Scenario, ScenarioLog, SimError};
