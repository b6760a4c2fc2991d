//! Continuous-time quadrotor plant: rotor force model, rigid-body equations
//! of motion with linear translational and rotational drag, fault injection,
//! and a fixed-step RK4 integrator.
//!
//! Frame convention: gravity acts along `+e3` and thrust along `-R e3`, so
//! hover is `f = m g` at `R = I` and altitude is `-z`. Rotors are numbered
//! 1..=4; rotors 1 and 2 spin clockwise, 3 and 4 counter-clockwise, giving
//! the moment signs in [`motor_forward`].

use crate::controller::ControlCommand;
use crate::so3::{hat, reorthonormalize, Mat3, Rotation, So3Error, Vec3};
use thiserror::Error;

/// Any state component beyond this magnitude counts as numerical divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Largest allowed integrator step, in seconds.
pub const MAX_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("state diverged: component magnitude exceeded {DIVERGENCE_LIMIT:e}")]
    NumericalDivergence,
    #[error("attitude could not be re-orthonormalized: {0}")]
    So3(#[from] So3Error),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid fault configuration: {0}")]
    InvalidFault(String),
}

/// Physical parameters of the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    /// Mass, kg.
    pub mass: f64,
    /// Inertia matrix, kg m^2 (diagonal positive definite).
    pub inertia: Mat3,
    /// Arm length from center of mass to each rotor, m.
    pub arm_length: f64,
    /// Thrust coefficient, N / (rad/s)^2.
    pub k_thrust: f64,
    /// Yaw moment coefficient, N m / (rad/s)^2.
    pub k_torque: f64,
    /// Translational drag coefficient, N / (m/s).
    pub k_drag_linear: f64,
    /// Per-axis rotational drag coefficients, N m / (rad/s).
    pub k_drag_angular: Vec3,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Motor speed ceiling, rad/s.
    pub motor_speed_max: f64,
}

impl Default for QuadParams {
    /// 250 g-class vehicle. The yaw drag coefficient is sized so that the
    /// post-failure spin settles near -12 rad/s (`k_m m g / (k_f k_rd3)`).
    fn default() -> Self {
        QuadParams {
            mass: 0.25,
            inertia: Mat3::from_diagonal(&Vec3::new(2.1e-4, 2.1e-4, 3.6e-4)),
            arm_length: 0.0763,
            k_thrust: 2.4e-7,
            k_torque: 7.8e-9,
            k_drag_linear: 0.05,
            k_drag_angular: Vec3::new(1e-4, 1e-4, 6.6e-3),
            gravity: 9.81,
            motor_speed_max: 3000.0,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("mass", self.mass),
            ("arm_length", self.arm_length),
            ("k_thrust", self.k_thrust),
            ("k_torque", self.k_torque),
            ("motor_speed_max", self.motor_speed_max),
            ("gravity", self.gravity),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.k_drag_linear < 0.0 || self.k_drag_angular.min() < 0.0 {
            return Err(DynamicsError::InvalidParams(
                "drag coefficients must be non-negative".into(),
            ));
        }
        let sym = (self.inertia - self.inertia.transpose()).norm();
        if sym > 1e-12 || self.inertia.diagonal().min() <= 0.0 || self.inertia.determinant() <= 0.0
        {
            return Err(DynamicsError::InvalidParams(
                "inertia must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Collective thrust with all motors at the speed ceiling, N.
    pub fn max_thrust(&self) -> f64 {
        self.k_thrust * 4.0 * self.motor_speed_max * self.motor_speed_max
    }

    /// Per-rotor speed that balances gravity with four healthy rotors, rad/s.
    pub fn hover_speed(&self) -> f64 {
        (self.mass * self.gravity / (4.0 * self.k_thrust)).sqrt()
    }
}

/// Rotor angular speeds in rad/s, indexed by rotor number minus one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorSpeeds(pub [f64; 4]);

impl MotorSpeeds {
    pub fn zero() -> Self {
        MotorSpeeds([0.0; 4])
    }

    /// Speed of rotor `rotor` (1-based).
    pub fn rotor(&self, rotor: usize) -> f64 {
        self.0[rotor - 1]
    }

    pub fn squared(&self) -> [f64; 4] {
        [
            self.0[0] * self.0[0],
            self.0[1] * self.0[1],
            self.0[2] * self.0[2],
            self.0[3] * self.0[3],
        ]
    }
}

/// Which rotors have failed. Dual failures must be an opposing pair
/// ({1,2} or {3,4}); anything else leaves the vehicle without a usable
/// allocation and is rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotorFault {
    None,
    Single(usize),
    DualOpposing(usize, usize),
}

impl RotorFault {
    pub fn single(rotor: usize) -> Result<Self, DynamicsError> {
        if !(1..=4).contains(&rotor) {
            return Err(DynamicsError::InvalidFault(format!(
                "rotor index must be 1..=4, got {rotor}"
            )));
        }
        Ok(RotorFault::Single(rotor))
    }

    pub fn dual(a: usize, b: usize) -> Result<Self, DynamicsError> {
        let (lo, hi) = (a.min(b), a.max(b));
        if (lo, hi) != (1, 2) && (lo, hi) != (3, 4) {
            return Err(DynamicsError::InvalidFault(format!(
                "dual failures must be an opposing pair {{1,2}} or {{3,4}}, got {{{a},{b}}}"
            )));
        }
        Ok(RotorFault::DualOpposing(lo, hi))
    }

    pub fn is_none(&self) -> bool {
        matches!(self, RotorFault::None)
    }

    pub fn failed_rotors(&self) -> Vec<usize> {
        match *self {
            RotorFault::None => vec![],
            RotorFault::Single(i) => vec![i],
            RotorFault::DualOpposing(a, b) => vec![a, b],
        }
    }
}

impl std::fmt::Display for RotorFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            RotorFault::None => write!(f, "none"),
            RotorFault::Single(i) => write!(f, "single:{i}"),
            RotorFault::DualOpposing(a, b) => write!(f, "dual:{a},{b}"),
        }
    }
}

/// A fault and the simulation time at which it is injected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultConfig {
    pub fault: RotorFault,
    /// Injection time, s. The fault is active for `t >= t_fault`.
    pub t_fault: f64,
}

impl FaultConfig {
    pub fn none() -> Self {
        FaultConfig {
            fault: RotorFault::None,
            t_fault: 0.0,
        }
    }

    pub fn active_at(&self, t: f64) -> bool {
        !self.fault.is_none() && t >= self.t_fault
    }
}

/// Full plant state: position and velocity in the inertial frame, attitude
/// (body to inertial), body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Rotation,
    pub angular_velocity: Vec3,
}

impl QuadState {
    /// At rest, level, at `position`.
    pub fn hover_at(position: Vec3) -> Self {
        QuadState {
            position,
            velocity: Vec3::zeros(),
            attitude: Rotation::identity(),
            angular_velocity: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.matrix().iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
    }

    fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for v in self
            .position
            .iter()
            .chain(self.velocity.iter())
            .chain(self.angular_velocity.iter())
        {
            m = m.max(v.abs());
        }
        m
    }
}

/// Time derivative of [`QuadState`]; the attitude slot is the raw matrix
/// derivative `R hat(Omega)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadStateDerivative {
    pub d_position: Vec3,
    pub d_velocity: Vec3,
    pub d_attitude: Mat3,
    pub d_angular_velocity: Vec3,
}

/// Rotor speeds to collective thrust and body moments:
/// `f  = k_f (w1^2 + w2^2 + w3^2 + w4^2)`,
/// `M1 = d k_f (w3^2 - w4^2)`,
/// `M2 = d k_f (w2^2 - w1^2)`,
/// `M3 = k_m (w1^2 + w2^2 - w3^2 - w4^2)`.
pub fn motor_forward(speeds: &MotorSpeeds, params: &QuadParams) -> ControlCommand {
    let [s1, s2, s3, s4] = speeds.squared();
    let kf = params.k_thrust;
    let dkf = params.arm_length * kf;
    ControlCommand {
        thrust: kf * (s1 + s2 + s3 + s4),
        moment: Vec3::new(
            dkf * (s3 - s4),
            dkf * (s2 - s1),
            params.k_torque * (s1 + s2 - s3 - s4),
        ),
    }
}

/// Equations of motion:
/// `dp = v`,
/// `m dv = m g e3 - f R e3 - k_td v`,
/// `dR = R hat(Omega)`,
/// `J dOmega = M - Omega x (J Omega) - k_rd . Omega`.
///
/// Drag opposes motion; both drag terms are dissipative.
pub fn state_derivative(
    state: &QuadState,
    cmd: &ControlCommand,
    params: &QuadParams,
) -> QuadStateDerivative {
    derivative_raw(
        &RawState::from_state(state),
        cmd,
        params,
        &params
            .inertia
            .try_inverse()
            .expect("inertia is positive definite"),
    )
}

/// Zeroes the speeds of failed rotors once the fault time is reached
/// (closed interval: active at exactly `t == t_fault`).
pub fn apply_fault(speeds: &MotorSpeeds, fault: &FaultConfig, t: f64) -> MotorSpeeds {
    if !fault.active_at(t) {
        return *speeds;
    }
    let mut out = *speeds;
    for rotor in fault.fault.failed_rotors() {
        out.0[rotor - 1] = 0.0;
    }
    out
}

/// One classical RK4 step with the motor speeds held constant, followed by
/// projection of the attitude back onto SO(3).
pub fn step(
    state: &QuadState,
    speeds: &MotorSpeeds,
    params: &QuadParams,
    dt: f64,
) -> Result<QuadState, DynamicsError> {
    debug_assert!(dt > 0.0 && dt <= MAX_STEP, "step size {dt} out of range");
    let cmd = motor_forward(speeds, params);
    let inertia_inv = params
        .inertia
        .try_inverse()
        .ok_or_else(|| DynamicsError::InvalidParams("inertia is singular".into()))?;

    let y0 = RawState::from_state(state);
    let k1 = derivative_raw(&y0, &cmd, params, &inertia_inv);
    let k2 = derivative_raw(&y0.add_scaled(&k1, dt / 2.0), &cmd, params, &inertia_inv);
    let k3 = derivative_raw(&y0.add_scaled(&k2, dt / 2.0), &cmd, params, &inertia_inv);
    let k4 = derivative_raw(&y0.add_scaled(&k3, dt), &cmd, params, &inertia_inv);

    let mut y = y0;
    y.position += dt / 6.0 * (k1.d_position + 2.0 * k2.d_position + 2.0 * k3.d_position + k4.d_position);
    y.velocity += dt / 6.0 * (k1.d_velocity + 2.0 * k2.d_velocity + 2.0 * k3.d_velocity + k4.d_velocity);
    y.attitude += dt / 6.0 * (k1.d_attitude + 2.0 * k2.d_attitude + 2.0 * k3.d_attitude + k4.d_attitude);
    y.angular_velocity += dt / 6.0
        * (k1.d_angular_velocity
            + 2.0 * k2.d_angular_velocity
            + 2.0 * k3.d_angular_velocity
            + k4.d_angular_velocity);

    let next = QuadState {
        position: y.position,
        velocity: y.velocity,
        attitude: reorthonormalize(&y.attitude)?,
        angular_velocity: y.angular_velocity,
    };
    if !next.is_finite() || next.max_abs() > DIVERGENCE_LIMIT {
        return Err(DynamicsError::NumericalDivergence);
    }
    Ok(next)
}

/// Flat copy of the state used inside the integrator, where intermediate
/// attitudes are allowed to drift off the group.
#[derive(Debug, Clone, Copy)]
struct RawState {
    position: Vec3,
    velocity: Vec3,
    attitude: Mat3,
    angular_velocity: Vec3,
}

impl RawState {
    fn from_state(s: &QuadState) -> Self {
        RawState {
            position: s.position,
            velocity: s.velocity,
            attitude: *s.attitude.matrix(),
            angular_velocity: s.angular_velocity,
        }
    }

    fn add_scaled(&self, d: &QuadStateDerivative, h: f64) -> RawState {
        RawState {
            position: self.position + h * d.d_position,
            velocity: self.velocity + h * d.d_velocity,
            attitude: self.attitude + h * d.d_attitude,
            angular_velocity: self.angular_velocity + h * d.d_angular_velocity,
        }
    }
}

fn derivative_raw(
    y: &RawState,
    cmd: &ControlCommand,
    params: &QuadParams,
    inertia_inv: &Mat3,
) -> QuadStateDerivative {
    let thrust_axis = y.attitude * Vec3::z();
    let d_velocity = params.gravity * Vec3::z()
        - (cmd.thrust / params.mass) * thrust_axis
        - (params.k_drag_linear / params.mass) * y.velocity;
    let omega = y.angular_velocity;
    let torque = cmd.moment
        - omega.cross(&(params.inertia * omega))
        - params.k_drag_angular.component_mul(&omega);
    QuadStateDerivative {
        d_position: y.velocity,
        d_velocity,
        d_attitude: y.attitude * hat(&omega),
        d_angular_velocity: inertia_inv * torque,
    }
}
