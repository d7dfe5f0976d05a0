//! Deterministic closed-loop simulation of a two-wheeled self-balancing
//! personal vehicle.
//!
//! A one-step predictive controller turns gyro rate samples into wheel-torque
//! commands; a time-delay voltage law turns those into motor voltages. The
//! crate provides the rigid-body relations, a fixed-step RK4 integrator, the
//! two controller layers, scenario orchestration with comparison metrics, and
//! a lockstep software-in-the-loop harness that splits plant and controller
//! into separate processes over a text wire protocol.

pub mod dynamics;
pub mod error;
pub mod hil;
pub mod motor;
pub mod mpc;
pub mod numfmt;
pub mod ode;
pub mod scenario;

pub use dynamics::{PendulumKinematics, PlantModelKind, PlantState, RobotParams};
pub use error::{Error, Result};
pub use hil::{SessionConfig, SyncVerdict, WireMessage};
pub use motor::{DelayLine, MotorParams, MotorState};
pub use mpc::{ControllerState, GyroSample, Prediction};
pub use ode::StepSpec;
pub use scenario::{
    Comparison, ControllerCore, Disturbance, DisturbanceInjection, Metrics, ScenarioConfig,
    ScenarioKind, Trajectory, TrajectorySample,
};
