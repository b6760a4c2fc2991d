//! Control allocation: thrust and moment commands to rotor speeds.
//!
//! Healthy vehicle: invert the full 4x4 mixing map. One failed rotor: drop
//! the yaw row and the failed rotor's column and solve the resulting 3x3
//! system for `[f, M1, M2]` — yaw moments are discarded entirely, which is
//! what surrenders yaw control. Two failed opposing rotors: drop both
//! columns and keep only the thrust row plus the one moment the surviving
//! pair can produce (`M1` for rotors {3,4}, `M2` for rotors {1,2}), a 2x2
//! system. The reduced matrices are full rank by construction.
//!
//! Solved squared speeds are clamped to `[0, omega_max^2]` before the square
//! root, so infeasible demands saturate instead of erroring.

use crate::dynamics::{MotorSpeeds, QuadParams, RotorFault};
use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3, Vector4};

use super::ControlCommand;

/// The full mixing matrix of [`crate::dynamics::motor_forward`], mapping
/// squared rotor speeds to `[f, M1, M2, M3]`.
pub fn full_mixing_matrix(params: &QuadParams) -> Matrix4<f64> {
    let kf = params.k_thrust;
    let dkf = params.arm_length * kf;
    let km = params.k_torque;
    Matrix4::new(
        kf, kf, kf, kf, //
        0.0, 0.0, dkf, -dkf, //
        -dkf, dkf, 0.0, 0.0, //
        km, km, -km, -km,
    )
}

/// Reduced 3x3 mixing matrix for a single failed rotor: rows `[f, M1, M2]`,
/// columns the three healthy rotors in ascending order.
pub fn single_fault_matrix(params: &QuadParams, failed: usize) -> Matrix3<f64> {
    let full = full_mixing_matrix(params);
    let healthy: Vec<usize> = (0..4).filter(|&c| c != failed - 1).collect();
    Matrix3::from_fn(|r, c| full[(r, healthy[c])])
}

/// Reduced 2x2 mixing matrix for two failed opposing rotors: rows `[f, M]`
/// with `M = M1` when rotors {3,4} survive and `M = M2` when {1,2} survive.
pub fn dual_fault_matrix(params: &QuadParams, failed_pair: (usize, usize)) -> Matrix2<f64> {
    let full = full_mixing_matrix(params);
    let (moment_row, survivors) = match failed_pair {
        (1, 2) => (1, [2, 3]),
        (3, 4) => (2, [0, 1]),
        other => unreachable!("non-opposing pair {other:?} rejected at construction"),
    };
    Matrix2::new(
        full[(0, survivors[0])],
        full[(0, survivors[1])],
        full[(moment_row, survivors[0])],
        full[(moment_row, survivors[1])],
    )
}

/// Condition number (ratio of extreme singular values) of the allocation
/// matrix for the given fault. Used by the `validate` command.
pub fn allocation_condition_number(params: &QuadParams, fault: &RotorFault) -> f64 {
    let sv = match *fault {
        RotorFault::None => full_mixing_matrix(params).svd(false, false).singular_values,
        RotorFault::Single(i) => {
            let m = single_fault_matrix(params, i);
            return m.svd(false, false).singular_values.max()
                / m.svd(false, false).singular_values.min();
        }
        RotorFault::DualOpposing(a, b) => {
            let m = dual_fault_matrix(params, (a, b));
            return m.svd(false, false).singular_values.max()
                / m.svd(false, false).singular_values.min();
        }
    };
    sv.max() / sv.min()
}

/// Maps a command to rotor speeds under the active fault configuration.
/// When `fault_active` is false the full 4x4 inversion is used regardless
/// of the configured fault.
pub fn allocate(
    cmd: &ControlCommand,
    fault: &RotorFault,
    fault_active: bool,
    params: &QuadParams,
) -> MotorSpeeds {
    let effective = if fault_active { *fault } else { RotorFault::None };
    let sq_max = params.motor_speed_max * params.motor_speed_max;
    let mut squared = [0.0_f64; 4];

    match effective {
        RotorFault::None => {
            let rhs = Vector4::new(cmd.thrust, cmd.moment.x, cmd.moment.y, cmd.moment.z);
            let sol = full_mixing_matrix(params)
                .lu()
                .solve(&rhs)
                .expect("full mixing matrix is invertible");
            squared.copy_from_slice(sol.as_slice());
        }
        RotorFault::Single(failed) => {
            let rhs = Vector3::new(cmd.thrust, cmd.moment.x, cmd.moment.y);
            let sol = single_fault_matrix(params, failed)
                .lu()
                .solve(&rhs)
                .expect("reduced 3x3 allocation matrix is full rank");
            let healthy: Vec<usize> = (0..4).filter(|&c| c != failed - 1).collect();
            for (k, &rotor) in healthy.iter().enumerate() {
                squared[rotor] = sol[k];
            }
        }
        RotorFault::DualOpposing(a, b) => {
            let retained = match (a, b) {
                (1, 2) => cmd.moment.x,
                (3, 4) => cmd.moment.y,
                other => unreachable!("non-opposing pair {other:?}"),
            };
            let rhs = Vector2::new(cmd.thrust, retained);
            let sol = dual_fault_matrix(params, (a, b))
                .lu()
                .solve(&rhs)
                .expect("reduced 2x2 allocation matrix is full rank");
            let survivors = if (a, b) == (1, 2) { [2, 3] } else { [0, 1] };
            squared[survivors[0]] = sol[0];
            squared[survivors[1]] = sol[1];
        }
    }

    let mut speeds = [0.0_f64; 4];
    for (w, sq) in speeds.iter_mut().zip(squared) {
        *w = sq.clamp(0.0, sq_max).sqrt();
    }
    MotorSpeeds(speeds)
}

/// Residual yaw moment produced by a set of rotor speeds: the `M3` row of
/// the mixing map. Under fault this moment is uncommanded; divided by the
/// yaw drag coefficient it predicts the steady spin rate.
pub fn residual_yaw_moment(speeds: &MotorSpeeds, params: &QuadParams) -> f64 {
    let [s1, s2, s3, s4] = speeds.squared();
    params.k_torque * (s1 + s2 - s3 - s4)
}
