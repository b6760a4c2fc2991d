//! Attitude error metrics for the inner loop.
//!
//! Four interchangeable ways to measure how far the attitude `R` is from the
//! command `R_d`. The first two use the full error rotation `R_e = R_d^T R`
//! and therefore react to yaw error; the last two are reduced-attitude
//! metrics that depend only on the thrust axes and stay zero while the
//! vehicle spins about its body z-axis. That yaw blindness is what keeps
//! them usable after a rotor failure, when yaw is surrendered and the
//! vehicle settles into a steady spin.
//!
//! With `(rho_e, n_e)` the axis-angle of `R_e`:
//!
//! - [`MetricKind::FullAttitude`]: `e = vee(R_d^T R - R^T R_d) / 2 = sin(rho_e) n_e`.
//!   The response weakens past 90 degrees of error (sin is not monotone).
//! - [`MetricKind::HalfAngle`]: `e = 2 sin(rho_e / 2) n_e`. Monotone in the
//!   error angle over the whole range.
//! - [`MetricKind::S2Tilt`]: both attitudes are factored into yaw and tilt;
//!   the error is built from the relative tilt `R_te = R_td^T R_t` alone:
//!   `sin(rho) n` up to 90 degrees, the bare axis `n` beyond.
//! - [`MetricKind::ThrustVector`]: `e = n_d x n` with `n = R e3`,
//!   `n_d = R_d e3`; the cross product of the two thrust directions.
//!
//! The reduced errors are geometric objects; since the moment law consumes
//! body-frame vectors, both are returned in body coordinates (`R^T` applied
//! to the cross product, the yaw factor applied to the tilt axis). That
//! keeps the correction torque pointing the right way at any spin angle.
//!
//! All four agree to first order for small tilt errors.

use crate::so3::{skew_part_vee, Rotation, Vec3};
use std::f64::consts::FRAC_PI_2;

use super::ControlError;

/// Selects the attitude error metric used by the inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    FullAttitude,
    HalfAngle,
    S2Tilt,
    ThrustVector,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::FullAttitude,
        MetricKind::HalfAngle,
        MetricKind::S2Tilt,
        MetricKind::ThrustVector,
    ];

    /// CLI / config name: `full`, `half`, `s2`, `thrust`.
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::FullAttitude => "full",
            MetricKind::HalfAngle => "half",
            MetricKind::S2Tilt => "s2",
            MetricKind::ThrustVector => "thrust",
        }
    }

    pub fn from_name(name: &str) -> Option<MetricKind> {
        match name {
            "full" => Some(MetricKind::FullAttitude),
            "half" => Some(MetricKind::HalfAngle),
            "s2" => Some(MetricKind::S2Tilt),
            "thrust" => Some(MetricKind::ThrustVector),
            _ => None,
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Attitude error between the command `attitude_cmd` and the estimate
/// `attitude`, under the selected metric.
///
/// Only [`MetricKind::S2Tilt`] can fail: it propagates the tilt singularity
/// when either attitude is inverted.
pub fn attitude_error(
    attitude_cmd: &Rotation,
    attitude: &Rotation,
    kind: MetricKind,
) -> Result<Vec3, ControlError> {
    match kind {
        MetricKind::FullAttitude => {
            // skew_part_vee(M) = vee((M - M^T)/2) with M = R_d^T R.
            let m = attitude_cmd.matrix().transpose() * attitude.matrix();
            Ok(skew_part_vee(&m))
        }
        MetricKind::HalfAngle => {
            let err = attitude_cmd.transpose() * *attitude;
            let aa = err.axis_angle();
            Ok(2.0 * (aa.angle / 2.0).sin() * aa.axis)
        }
        MetricKind::S2Tilt => {
            let (_, tilt_cmd) = attitude_cmd.yaw_tilt_decompose()?;
            let (yaw, tilt) = attitude.yaw_tilt_decompose()?;
            let tilt_err = tilt_cmd.transpose() * tilt;
            let aa = tilt_err.axis_angle();
            let error = if aa.angle <= FRAC_PI_2 {
                aa.angle.sin() * aa.axis
            } else {
                aa.axis
            };
            // The tilt error lives in the de-yawed frame; rotate it by the
            // body's yaw factor so it acts as a body-frame moment direction.
            // Without this the correction torque sweeps all directions as
            // the vehicle spins and the average tilt stiffness vanishes.
            Ok(yaw.transpose() * error)
        }
        MetricKind::ThrustVector => {
            // (R^T n_d) x e3: the thrust-axis cross product expressed in the
            // body frame, where the moments act.
            let n_cmd = attitude_cmd.third_axis();
            let n = attitude.third_axis();
            Ok(attitude.matrix().transpose() * n_cmd.cross(&n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{AxisAngle, So3Error};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
        let n = StandardNormal;
        let q = nalgebra::Quaternion::new(
            n.sample(rng),
            n.sample(rng),
            n.sample(rng),
            n.sample(rng),
        );
        let uq = nalgebra::UnitQuaternion::from_quaternion(q);
        Rotation::from_matrix(uq.to_rotation_matrix().into_inner()).unwrap()
    }

    #[test]
    fn zero_error_for_equal_attitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            if r.third_axis().z <= -1.0 + 1e-3 {
                continue;
            }
            for kind in MetricKind::ALL {
                let e = attitude_error(&r, &r, kind).unwrap();
                assert!(e.norm() < 1e-9, "{kind}: {e}");
            }
        }
    }

    #[test]
    fn yaw_error_seen_only_by_full_metrics() {
        let r_cmd = Rotation::identity();
        let r = Rotation::yaw(30.0_f64.to_radians());
        let e1 = attitude_error(&r_cmd, &r, MetricKind::FullAttitude).unwrap();
        let e2 = attitude_error(&r_cmd, &r, MetricKind::HalfAngle).unwrap();
        let e3 = attitude_error(&r_cmd, &r, MetricKind::S2Tilt).unwrap();
        let e4 = attitude_error(&r_cmd, &r, MetricKind::ThrustVector).unwrap();
        assert_relative_eq!(e1, Vec3::new(0.0, 0.0, 0.5), epsilon = 1e-12);
        assert_relative_eq!(
            e2,
            Vec3::new(0.0, 0.0, 2.0 * (15.0_f64.to_radians()).sin()),
            epsilon = 1e-12
        );
        assert_relative_eq!(e3, Vec3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(e4, Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn thrust_metric_for_quarter_roll() {
        // Roll by 90 degrees about e1 takes the thrust axis to [0,-1,0].
        let r = Rotation::from_axis_angle(&AxisAngle::new(FRAC_PI_2, Vec3::x()));
        assert_relative_eq!(r.third_axis(), Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
        let e4 = attitude_error(&Rotation::identity(), &r, MetricKind::ThrustVector).unwrap();
        assert_relative_eq!(e4, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn metrics_agree_for_small_tilt() {
        let delta = 1e-4;
        let r = Rotation::from_axis_angle(&AxisAngle::new(delta, Vec3::x()));
        let expected = Vec3::new(delta, 0.0, 0.0);
        for kind in MetricKind::ALL {
            let e = attitude_error(&Rotation::identity(), &r, kind).unwrap();
            assert!(
                (e - expected).norm() < 1e-8,
                "{kind}: {:?} vs {:?}",
                e,
                expected
            );
        }
    }

    #[test]
    fn reduced_metrics_blind_to_body_yaw() {
        // A body-yaw error (R = R_d * Rz) leaves the thrust axis unchanged,
        // so the reduced metrics must return exactly zero.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let r_cmd = random_rotation(&mut rng);
            if r_cmd.third_axis().z <= -1.0 + 1e-3 {
                continue;
            }
            let alpha: f64 = rng.random_range(-PI..PI);
            let r = r_cmd * Rotation::yaw(alpha);
            let e3 = attitude_error(&r_cmd, &r, MetricKind::S2Tilt).unwrap();
            let e4 = attitude_error(&r_cmd, &r, MetricKind::ThrustVector).unwrap();
            assert!(e3.norm() < 1e-10, "s2 saw yaw: {e3}");
            assert!(e4.norm() < 1e-10, "thrust saw yaw: {e4}");
            if alpha.abs() > 1e-3 {
                let e1 = attitude_error(&r_cmd, &r, MetricKind::FullAttitude).unwrap();
                let e2 = attitude_error(&r_cmd, &r, MetricKind::HalfAngle).unwrap();
                assert!(e1.norm() > 1e-6, "full metric missed yaw");
                assert!(e2.norm() > 1e-6, "half metric missed yaw");
            }
        }
    }

    #[test]
    fn norm_identities_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let angle = (a.transpose() * b).axis_angle().angle;
            let e1 = attitude_error(&a, &b, MetricKind::FullAttitude).unwrap();
            let e2 = attitude_error(&a, &b, MetricKind::HalfAngle).unwrap();
            assert_relative_eq!(e1.norm(), angle.sin(), epsilon = 1e-9);
            assert_relative_eq!(e2.norm(), 2.0 * (angle / 2.0).sin(), epsilon = 1e-9);
        }
    }

    #[test]
    fn half_angle_monotone_full_peaks_at_quarter_turn() {
        let mut prev_half = -1.0;
        let mut prev_full = -1.0;
        let steps = 64;
        for i in 0..=steps {
            let rho = PI * i as f64 / steps as f64;
            let r = Rotation::from_axis_angle(&AxisAngle::new(rho, Vec3::x()));
            let full = attitude_error(&Rotation::identity(), &r, MetricKind::FullAttitude)
                .unwrap()
                .norm();
            let half = attitude_error(&Rotation::identity(), &r, MetricKind::HalfAngle)
                .unwrap()
                .norm();
            assert!(half >= prev_half - 1e-12, "half metric not monotone");
            if rho <= FRAC_PI_2 {
                assert!(full >= prev_full - 1e-12, "full metric should grow to 90 deg");
            } else {
                assert!(full <= prev_full + 1e-12, "full metric should decay past 90 deg");
            }
            prev_half = half;
            prev_full = full;
        }
    }

    #[test]
    fn s2_saturates_past_quarter_turn() {
        let r = Rotation::from_axis_angle(&AxisAngle::new(2.0, Vec3::x()));
        let e3 = attitude_error(&Rotation::identity(), &r, MetricKind::S2Tilt).unwrap();
        // Past pi/2 the metric returns the bare unit axis.
        assert_relative_eq!(e3.norm(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(e3, Vec3::x(), epsilon = 1e-9);
    }

    #[test]
    fn s2_propagates_tilt_singularity() {
        let inverted = Rotation::from_axis_angle(&AxisAngle::new(PI, Vec3::x()));
        let result = attitude_error(&Rotation::identity(), &inverted, MetricKind::S2Tilt);
        assert!(matches!(
            result,
            Err(ControlError::So3(So3Error::TiltSingularity { .. }))
        ));
    }
}
