//! Fault-tolerant geometric tracking control for quadrotors.
//!
//! This crate simulates a quadrotor that keeps tracking position commands
//! after one rotor, or two opposing rotors, fail completely. The controller
//! is a two-loop geometric tracking design: the outer loop turns position
//! and velocity errors into a thrust command and a desired attitude, the
//! inner loop turns the attitude error into body moments. When a fault is
//! active the controller surrenders yaw entirely (the vehicle spins at the
//! rate set by rotational drag) and the allocator drops the yaw row, solving
//! a reduced 3x3 or 2x2 system for the surviving rotors.
//!
//! Four attitude error metrics are selectable for the inner loop; the
//! reduced-attitude ones ignore yaw and keep working through the spin:
//!
//! - `full`:   half vee of `R_d^T R - R^T R_d` (full rotation matrices)
//! - `half`:   `2 sin(rho/2) n` from the axis-angle of the error rotation
//! - `s2`:     tilt-only error from the yaw-tilt factorization
//! - `thrust`: cross product of desired and actual thrust axes
//!
//! Modules:
//! - [`so3`]: rotation algebra (hat/vee, axis-angle, yaw-tilt factorization)
//! - [`dynamics`]: rigid-body plant with rotor force model, linear drag,
//!   fault injection, and an RK4 stepper
//! - [`controller`]: outer/inner loops, error metrics, control allocation
//! - [`trajectory`]: ramped oval references plus hover and line segments
//! - [`harness`]: scenario runner, RMSE reports, sweeps, CSV export
//!
//! See the `examples/` directory for runnable entry points per capability,
//! and the `ftquad` binary for the `run` / `sweep` / `validate` commands.

pub mod controller;
pub mod dynamics;
pub mod harness;
pub mod so3;
pub mod trajectory;

pub use controller::{
    allocation::allocate, attitude_error, inner_loop, outer_loop, ControlCommand, ControlError,
    Controller, Gains, MetricKind, OuterOutput, Setpoint,
};
pub use dynamics::{
    apply_fault, motor_forward, state_derivative, step, DynamicsError, FaultConfig, MotorSpeeds,
    QuadParams, QuadState, RotorFault,
};
pub use harness::{
    export_csv, rmse, run_scenario, sweep, HarnessError, RmseReport, RunLog, ScenarioConfig,
    TerminationStatus,
};
pub use so3::{
    hat, reorthonormalize, vee, AxisAngle, Mat3, Rotation, So3Error, Vec3,
};
pub use trajectory::{OvalSpec, Trajectory};
