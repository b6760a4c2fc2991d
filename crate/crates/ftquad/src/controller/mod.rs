//! Two-loop geometric tracking controller with fault-tolerant yaw surrender.
//!
//! The outer loop ([`outer_loop`]) turns position/velocity errors into a
//! collective thrust, a desired attitude, and desired body rates. The inner
//! loop ([`inner_loop`]) turns the attitude error — under a selectable
//! metric — into body moments. [`allocation::allocate`] then maps thrust and
//! moments to rotor speeds, dropping the yaw row when a fault is active.
//!
//! Sign conventions follow the plant: gravity along `+e3`, thrust along
//! `-R e3`. The commanded force direction is
//! `A = g e3 + k_p.e_p + k_v.e_v - a_d` with `e_p = p - p_d`,
//! `e_v = v - v_d`; the desired thrust axis is `A / |A|` and the thrust
//! magnitude is `m A . (R e3)`, projected on the current attitude.
//!
//! Under an active fault the desired yaw and yaw rate are forced to zero
//! (fixed heading vector `[0, 1, 0]`), the z-component of the desired rate
//! is zeroed, and the inner loop's yaw moment — still computed — is
//! discarded by the reduced allocation. The vehicle then spins at whatever
//! rate balances the residual yaw moment against rotational drag.

pub mod allocation;
mod metrics;

pub use metrics::{attitude_error, MetricKind};

use crate::dynamics::{FaultConfig, MotorSpeeds, QuadParams, QuadState};
use crate::so3::{reorthonormalize, skew_part_vee, Mat3, Rotation, So3Error, Vec3};
use thiserror::Error;

/// Commanded acceleration directions shorter than this are degenerate.
pub const THRUST_DIRECTION_EPSILON: f64 = 1e-6;
/// Heading-thrust cross products shorter than this are degenerate.
pub const HEADING_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    /// The commanded acceleration vector vanished; no thrust direction exists.
    #[error("degenerate thrust command: |A| = {norm:.3e}")]
    DegenerateThrust { norm: f64 },
    /// The heading vector is parallel to the desired thrust axis.
    #[error("heading singular: |b_hd x b3_d| = {norm:.3e}")]
    HeadingSingularity { norm: f64 },
    #[error(transparent)]
    So3(#[from] So3Error),
}

/// The two control inputs: collective thrust (N) and body moments (N m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub thrust: f64,
    pub moment: Vec3,
}

/// Per-axis controller gains, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// Position error gain (outer loop).
    pub k_p: Vec3,
    /// Velocity error gain (outer loop).
    pub k_v: Vec3,
    /// Attitude error gain (inner loop).
    pub k_r: Vec3,
    /// Angular rate error gain (inner loop).
    pub k_omega: Vec3,
}

impl Default for Gains {
    fn default() -> Self {
        Gains {
            k_p: Vec3::new(6.0, 6.0, 8.0),
            k_v: Vec3::new(4.0, 4.0, 5.0),
            k_r: Vec3::new(0.5, 0.5, 0.2),
            k_omega: Vec3::new(0.02, 0.02, 0.01),
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("k_p", &self.k_p),
            ("k_v", &self.k_v),
            ("k_r", &self.k_r),
            ("k_omega", &self.k_omega),
        ] {
            if v.min() <= 0.0 {
                return Err(format!("gain {name} must be strictly positive, got {v:?}"));
            }
        }
        Ok(())
    }
}

/// Reference sample handed to the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
}

impl Setpoint {
    pub fn hold(position: Vec3) -> Self {
        Setpoint {
            position,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
            yaw: 0.0,
            yaw_rate: 0.0,
        }
    }
}

/// Output of the outer loop: thrust, desired attitude, desired body rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOutput {
    pub thrust: f64,
    pub attitude_cmd: Rotation,
    pub rate_cmd: Vec3,
}

/// Outer position loop.
///
/// Builds the commanded force direction from the tracking errors, projects
/// it on the current thrust axis for the thrust magnitude (clamped to
/// `[0, 4 k_f omega_max^2]`), and assembles the desired attitude from the
/// thrust axis and the heading vector (second column of the yaw rotation;
/// `[0, 1, 0]` once a fault forces the desired yaw to zero). Desired body
/// rates come from a backward difference of successive attitude commands —
/// zero on the first call — with the yaw component zeroed under fault.
pub fn outer_loop(
    state: &QuadState,
    setpoint: &Setpoint,
    gains: &Gains,
    params: &QuadParams,
    fault_active: bool,
    prev_attitude_cmd: Option<&Rotation>,
    dt: f64,
) -> Result<OuterOutput, ControlError> {
    let pos_err = state.position - setpoint.position;
    let vel_err = state.velocity - setpoint.velocity;

    // Commanded force direction: gravity compensation plus PD feedback and
    // acceleration feedforward, all expressed on the thrust side of the
    // force balance m*a = m*g*e3 - f*R*e3.
    let accel_cmd = params.gravity * Vec3::z() + gains.k_p.component_mul(&pos_err)
        + gains.k_v.component_mul(&vel_err)
        - setpoint.acceleration;
    let accel_norm = accel_cmd.norm();
    if accel_norm <= THRUST_DIRECTION_EPSILON {
        return Err(ControlError::DegenerateThrust { norm: accel_norm });
    }

    let thrust_axis_cmd = accel_cmd / accel_norm;
    let thrust = (params.mass * accel_cmd.dot(&state.attitude.third_axis()))
        .clamp(0.0, params.max_thrust());

    let yaw_cmd = if fault_active { 0.0 } else { setpoint.yaw };
    let heading = Rotation::yaw(yaw_cmd).col(1);

    let b1_raw = heading.cross(&thrust_axis_cmd);
    let b1_norm = b1_raw.norm();
    if b1_norm <= HEADING_EPSILON {
        return Err(ControlError::HeadingSingularity { norm: b1_norm });
    }
    let b1 = b1_raw / b1_norm;
    let b2 = thrust_axis_cmd.cross(&b1).normalize();
    let attitude_cmd =
        reorthonormalize(&Mat3::from_columns(&[b1, b2, thrust_axis_cmd]))?;

    let mut rate_cmd = match prev_attitude_cmd {
        Some(prev) => {
            let deriv = (attitude_cmd.matrix() - prev.matrix()) / dt;
            skew_part_vee(&(attitude_cmd.matrix().transpose() * deriv))
        }
        None => Vec3::zeros(),
    };
    if fault_active {
        rate_cmd.z = 0.0;
    }

    Ok(OuterOutput {
        thrust,
        attitude_cmd,
        rate_cmd,
    })
}

/// Inner attitude loop: `M = -k_R.e_R - k_Omega.e_Omega + Omega x (J Omega)`
/// with `e_Omega = Omega - R^T R_d Omega_d`. Thrust passes through.
pub fn inner_loop(
    state: &QuadState,
    outer: &OuterOutput,
    gains: &Gains,
    params: &QuadParams,
    metric: MetricKind,
) -> Result<ControlCommand, ControlError> {
    let (command, _, _) = inner_loop_with_errors(state, outer, gains, params, metric)?;
    Ok(command)
}

/// [`inner_loop`] variant that also returns `(e_R, e_Omega)` for logging.
pub fn inner_loop_with_errors(
    state: &QuadState,
    outer: &OuterOutput,
    gains: &Gains,
    params: &QuadParams,
    metric: MetricKind,
) -> Result<(ControlCommand, Vec3, Vec3), ControlError> {
    let att_err = attitude_error(&outer.attitude_cmd, &state.attitude, metric)?;
    let rate_in_body =
        state.attitude.matrix().transpose() * (outer.attitude_cmd.matrix() * outer.rate_cmd);
    let rate_err = state.angular_velocity - rate_in_body;
    let omega = state.angular_velocity;
    let moment = -gains.k_r.component_mul(&att_err) - gains.k_omega.component_mul(&rate_err)
        + omega.cross(&(params.inertia * omega));
    Ok((
        ControlCommand {
            thrust: outer.thrust,
            moment,
        },
        att_err,
        rate_err,
    ))
}

/// Everything one control tick produces, for logging and actuation.
#[derive(Debug, Clone, Copy)]
pub struct ControlTick {
    pub outer: OuterOutput,
    pub command: ControlCommand,
    pub speeds: MotorSpeeds,
    pub attitude_err: Vec3,
    pub rate_err: Vec3,
}

/// Stateful wrapper running outer loop, inner loop, and allocation in
/// sequence. The only state it holds is the previous attitude command for
/// the rate finite difference, so instances are cheap and independent.
#[derive(Debug, Clone)]
pub struct Controller {
    pub gains: Gains,
    pub metric: MetricKind,
    prev_attitude_cmd: Option<Rotation>,
}

impl Controller {
    pub fn new(gains: Gains, metric: MetricKind) -> Self {
        Controller {
            gains,
            metric,
            prev_attitude_cmd: None,
        }
    }

    /// Forgets the previous attitude command (next tick returns zero rates).
    pub fn reset(&mut self) {
        self.prev_attitude_cmd = None;
    }

    /// One full control tick at time `t`: fault gating, outer loop, inner
    /// loop, allocation. `dt` is the control period.
    pub fn tick(
        &mut self,
        state: &QuadState,
        setpoint: &Setpoint,
        params: &QuadParams,
        fault: &FaultConfig,
        t: f64,
        dt: f64,
    ) -> Result<ControlTick, ControlError> {
        let fault_active = fault.active_at(t);
        let outer = outer_loop(
            state,
            setpoint,
            &self.gains,
            params,
            fault_active,
            self.prev_attitude_cmd.as_ref(),
            dt,
        )?;
        self.prev_attitude_cmd = Some(outer.attitude_cmd);
        let (command, attitude_err, rate_err) =
            inner_loop_with_errors(state, &outer, &self.gains, params, self.metric)?;
        let speeds = allocation::allocate(&command, &fault.fault, fault_active, params);
        Ok(ControlTick {
            outer,
            command,
            speeds,
            attitude_err,
            rate_err,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RotorFault;
    use crate::so3::AxisAngle;
    use approx::assert_relative_eq;

    fn hover_state() -> QuadState {
        QuadState::hover_at(Vec3::zeros())
    }

    #[test]
    fn outer_loop_hover_equilibrium() {
        let params = QuadParams::default();
        let gains = Gains::default();
        let out = outer_loop(
            &hover_state(),
            &Setpoint::hold(Vec3::zeros()),
            &gains,
            &params,
            false,
            None,
            2e-3,
        )
        .unwrap();
        assert_relative_eq!(out.thrust, params.mass * params.gravity, max_relative = 1e-12);
        assert_relative_eq!(*out.attitude_cmd.matrix(), Mat3::identity(), epsilon = 1e-12);
        assert_eq!(out.rate_cmd, Vec3::zeros());
    }

    #[test]
    fn outer_loop_altitude_error_raises_thrust() {
        // Vehicle 0.1 m below the setpoint (z is positive down): with
        // k_p = 5 the commanded acceleration is g + 0.5 along e3.
        let params = QuadParams::default();
        let gains = Gains {
            k_p: Vec3::new(5.0, 5.0, 5.0),
            ..Gains::default()
        };
        let mut state = hover_state();
        state.position = Vec3::new(0.0, 0.0, 0.1);
        let out = outer_loop(
            &state,
            &Setpoint::hold(Vec3::zeros()),
            &gains,
            &params,
            false,
            None,
            2e-3,
        )
        .unwrap();
        assert_relative_eq!(
            out.thrust,
            params.mass * (params.gravity + 0.5),
            max_relative = 1e-12
        );
        assert_relative_eq!(out.attitude_cmd.third_axis(), Vec3::z(), epsilon = 1e-12);
    }

    #[test]
    fn outer_loop_axis_construction() {
        // b3_d = e3 and heading [0,1,0] give the identity attitude command.
        let params = QuadParams::default();
        let gains = Gains::default();
        let out = outer_loop(
            &hover_state(),
            &Setpoint::hold(Vec3::zeros()),
            &gains,
            &params,
            true,
            None,
            2e-3,
        )
        .unwrap();
        assert_relative_eq!(out.attitude_cmd.col(0), Vec3::x(), epsilon = 1e-12);
        assert_relative_eq!(out.attitude_cmd.col(1), Vec3::y(), epsilon = 1e-12);
    }

    #[test]
    fn outer_loop_rate_command_from_finite_difference() {
        let params = QuadParams::default();
        let gains = Gains::default();
        let dt = 2e-3;
        // Hold a lateral acceleration demand so the attitude command tilts;
        // feed the same tick twice and the rate command must stay zero.
        let mut state = hover_state();
        state.position = Vec3::new(0.2, 0.0, 0.0);
        let sp = Setpoint::hold(Vec3::zeros());
        let first = outer_loop(&state, &sp, &gains, &params, false, None, dt).unwrap();
        let second = outer_loop(
            &state,
            &sp,
            &gains,
            &params,
            false,
            Some(&first.attitude_cmd),
            dt,
        )
        .unwrap();
        assert_eq!(first.rate_cmd, Vec3::zeros());
        assert!(second.rate_cmd.norm() < 1e-9);
    }

    #[test]
    fn outer_loop_fault_zeroes_yaw_rate_command() {
        let params = QuadParams::default();
        let gains = Gains::default();
        let dt = 2e-3;
        let sp = Setpoint {
            yaw: 0.7,
            ..Setpoint::hold(Vec3::zeros())
        };
        // Without fault the heading tracks yaw; with fault it is pinned.
        let no_fault = outer_loop(&hover_state(), &sp, &gains, &params, false, None, dt).unwrap();
        assert_relative_eq!(
            no_fault.attitude_cmd.col(1),
            Rotation::yaw(0.7).col(1),
            epsilon = 1e-12
        );
        let faulted = outer_loop(&hover_state(), &sp, &gains, &params, true, None, dt).unwrap();
        assert_relative_eq!(faulted.attitude_cmd.col(1), Vec3::y(), epsilon = 1e-12);
        assert_eq!(faulted.rate_cmd.z, 0.0);
    }

    #[test]
    fn outer_loop_detects_degenerate_thrust() {
        let params = QuadParams::default();
        let gains = Gains::default();
        // Cancel gravity exactly with the acceleration feedforward.
        let sp = Setpoint {
            acceleration: params.gravity * Vec3::z(),
            ..Setpoint::hold(Vec3::zeros())
        };
        let result = outer_loop(&hover_state(), &sp, &gains, &params, false, None, 2e-3);
        assert!(matches!(result, Err(ControlError::DegenerateThrust { .. })));
    }

    #[test]
    fn outer_loop_detects_heading_singularity() {
        let params = QuadParams::default();
        let gains = Gains {
            k_p: Vec3::new(1.0, 1.0, 1.0),
            k_v: Vec3::new(1.0, 1.0, 1.0),
            ..Gains::default()
        };
        // Aim the commanded acceleration exactly along the heading [0,1,0].
        let sp = Setpoint {
            acceleration: params.gravity * Vec3::z() + Vec3::new(0.0, -1.0, 0.0),
            ..Setpoint::hold(Vec3::zeros())
        };
        let result = outer_loop(&hover_state(), &sp, &gains, &params, false, None, 2e-3);
        assert!(matches!(
            result,
            Err(ControlError::HeadingSingularity { .. })
        ));
    }

    #[test]
    fn inner_loop_zero_error_zero_moment() {
        let params = QuadParams::default();
        let gains = Gains::default();
        let outer = OuterOutput {
            thrust: params.mass * params.gravity,
            attitude_cmd: Rotation::identity(),
            rate_cmd: Vec3::zeros(),
        };
        for metric in MetricKind::ALL {
            let cmd = inner_loop(&hover_state(), &outer, &gains, &params, metric).unwrap();
            assert_relative_eq!(cmd.moment, Vec3::zeros(), epsilon = 1e-12);
            assert_eq!(cmd.thrust, outer.thrust);
        }
    }

    #[test]
    fn inner_loop_damps_pure_spin() {
        let params = QuadParams::default();
        let gains = Gains::default();
        let r = -3.0;
        let mut state = hover_state();
        state.angular_velocity = Vec3::new(0.0, 0.0, r);
        let outer = OuterOutput {
            thrust: params.mass * params.gravity,
            attitude_cmd: Rotation::identity(),
            rate_cmd: Vec3::zeros(),
        };
        let cmd = inner_loop(&state, &outer, &gains, &params, MetricKind::FullAttitude).unwrap();
        // Spin about a principal axis: the gyroscopic term vanishes.
        assert_relative_eq!(
            cmd.moment,
            Vec3::new(0.0, 0.0, -gains.k_omega.z * r),
            epsilon = 1e-12
        );
    }

    #[test]
    fn inner_loop_small_tilt_moment_for_every_metric() {
        let params = QuadParams::default();
        let gains = Gains::default();
        let delta = 1e-4;
        let mut state = hover_state();
        state.attitude = Rotation::from_axis_angle(&AxisAngle::new(delta, Vec3::x()));
        let outer = OuterOutput {
            thrust: params.mass * params.gravity,
            attitude_cmd: Rotation::identity(),
            rate_cmd: Vec3::zeros(),
        };
        for metric in MetricKind::ALL {
            let cmd = inner_loop(&state, &outer, &gains, &params, metric).unwrap();
            assert_relative_eq!(cmd.moment.x, -gains.k_r.x * delta, max_relative = 1e-6);
            assert!(cmd.moment.y.abs() < 1e-10);
            assert!(cmd.moment.z.abs() < 1e-10);
        }
    }

    #[test]
    fn closed_loop_hover_produces_exact_hover_speeds() {
        let params = QuadParams::default();
        let fault = FaultConfig::none();
        for metric in MetricKind::ALL {
            let mut controller = Controller::new(Gains::default(), metric);
            let tick = controller
                .tick(
                    &hover_state(),
                    &Setpoint::hold(Vec3::zeros()),
                    &params,
                    &fault,
                    0.0,
                    2e-3,
                )
                .unwrap();
            let expected = params.hover_speed();
            for w in tick.speeds.0 {
                assert_relative_eq!(w, expected, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn controller_discards_yaw_moment_under_fault() {
        let params = QuadParams::default();
        let fault = FaultConfig {
            fault: RotorFault::single(1).unwrap(),
            t_fault: 0.0,
        };
        let mut controller = Controller::new(Gains::default(), MetricKind::ThrustVector);
        let mut state = hover_state();
        state.angular_velocity = Vec3::new(0.0, 0.0, -8.0);
        let tick = controller
            .tick(
                &state,
                &Setpoint::hold(Vec3::zeros()),
                &params,
                &fault,
                1.0,
                2e-3,
            )
            .unwrap();
        // The yaw moment is computed but must not reach the rotors: the
        // realized command reproduces only thrust, M1, M2.
        assert!(tick.command.moment.z.abs() > 0.0);
        assert_eq!(tick.speeds.0[0], 0.0);
        let realized = crate::dynamics::motor_forward(&tick.speeds, &params);
        assert_relative_eq!(realized.thrust, tick.command.thrust, max_relative = 1e-9);
        assert_relative_eq!(realized.moment.x, tick.command.moment.x, epsilon = 1e-12);
    }
}
