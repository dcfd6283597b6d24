//! Control and simulation library for over-actuated multirotors whose motors
//! tilt on two servo axes. The stack is a cascaded incremental-inversion
//! controller: an outer guidance loop allocates body forces and an attitude
//! command under attainable-force-set constraints, an inner loop allocates
//! actuator increments to realize the commanded wrench, and both run over a
//! shared measurement filter chain against a rigid-body plant.

pub mod checks;
pub mod config;
pub mod force_sets;
pub mod guidance;
pub mod lp;
pub mod mesh;
pub mod model;
pub mod scenario;
pub mod signal;
pub mod sim;
pub mod stabilization;
pub mod telemetry;
pub mod wls;

pub use config::{SimSetup, ConfigError};
pub use force_sets::{Polytope, PlaneSlice};
pub use model::{ActuatorState, Mat3, MultirotorConfig, RigidBodyState, Vec3, Wrench};
pub use scenario::ScenarioSpec;
pub use sim::{run_scenario, RunResult, SimError, SimOptions, Simulation};
pub use telemetry::{Metrics, TelemetryRow};
pub use wls::{SolveStatus, WlsProblem, WlsSolution};
