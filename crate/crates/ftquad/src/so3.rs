//! Rotation-group algebra on SO(3): hat/vee maps, axis-angle conversion,
//! yaw-tilt factorization, and re-orthonormalization.
//!
//! Attitudes are plain 3x3 rotation matrices (body to inertial, columns are
//! the body axes). The [`Rotation`] newtype guards the orthonormality and
//! determinant invariants; raw [`Mat3`] values show up only at the integrator
//! boundary, where drift is projected back onto the group with
//! [`reorthonormalize`].

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// 3-vector of `f64`. Units depend on context (m, m/s, rad/s, N*m).
pub type Vec3 = Vector3<f64>;
/// 3x3 matrix of `f64`.
pub type Mat3 = Matrix3<f64>;

/// Frobenius tolerance on `R*R^T - I` and `det(R) - 1` for a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;
/// Frobenius tolerance on `A + A^T` below which a matrix counts as skew.
pub const SKEW_TOLERANCE: f64 = 1e-6;
/// Rotation angles below this are treated as zero (axis undefined).
pub const ANGLE_EPSILON: f64 = 1e-7;
/// Angles within this distance of pi use the symmetric-part axis extraction.
pub const PI_NEIGHBORHOOD: f64 = 1e-6;
/// The tilt factorization is singular for `b3z <= -1 + eps` (inverted attitude).
pub const TILT_SINGULARITY_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum So3Error {
    /// `vee` was handed a matrix whose asymmetry exceeds [`SKEW_TOLERANCE`].
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e})")]
    NotSkew { asymmetry: f64 },
    /// A matrix failed the rotation invariants.
    #[error("matrix is not a rotation (orthonormality error {error:.3e})")]
    NotRotation { error: f64 },
    /// Yaw-tilt factorization attempted at or beyond the inverted attitude.
    #[error("tilt factorization singular: thrust axis anti-parallel to e3 (b3z = {b3z})")]
    TiltSingularity { b3z: f64 },
    /// Re-orthonormalization of a rank-deficient matrix.
    #[error("matrix is rank-deficient; no nearby rotation")]
    Degenerate,
}

/// Hat map: `hat(a) * b == a.cross(&b)` for all `b`; the result is skew.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Vee map, inverse of [`hat`]. Rejects matrices whose symmetric part is
/// larger than [`SKEW_TOLERANCE`] in Frobenius norm.
pub fn vee(a: &Mat3) -> Result<Vec3, So3Error> {
    let asymmetry = (a + a.transpose()).norm();
    if asymmetry > SKEW_TOLERANCE {
        return Err(So3Error::NotSkew { asymmetry });
    }
    Ok(Vec3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)]))
}

/// Vee of the skew part of an arbitrary matrix: `vee((a - a^T)/2)`.
///
/// Used where the argument is skew by construction (e.g. `R_d^T R - R^T R_d`)
/// and the tolerance check of [`vee`] would be noise.
pub fn skew_part_vee(a: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        a[(2, 1)] - a[(1, 2)],
        a[(0, 2)] - a[(2, 0)],
        a[(1, 0)] - a[(0, 1)],
    )
}

/// Axis-angle form of a rotation: angle in `[0, pi]`, unit axis.
///
/// At zero angle the axis is the convention value `e3`; at angle pi the pair
/// `(pi, n)` and `(pi, -n)` describe the same rotation and the sign is fixed
/// by the largest axis component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    /// Rotation angle in radians, in `[0, pi]`.
    pub angle: f64,
    /// Unit rotation axis.
    pub axis: Vec3,
}

impl AxisAngle {
    pub fn new(angle: f64, axis: Vec3) -> Self {
        Self { angle, axis }
    }
}

/// A 3x3 rotation matrix (element of SO(3)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates the SO(3) invariants before wrapping.
    pub fn from_matrix(m: Mat3) -> Result<Self, So3Error> {
        let error = orthonormality_error(&m);
        let det_error = (m.determinant() - 1.0).abs();
        if error > ROTATION_TOLERANCE || det_error > ROTATION_TOLERANCE {
            return Err(So3Error::NotRotation {
                error: error.max(det_error),
            });
        }
        Ok(Rotation(m))
    }

    /// Rotation by `psi` about `e3`.
    pub fn yaw(psi: f64) -> Self {
        let (s, c) = psi.sin_cos();
        Rotation(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rodrigues' formula: `R = I + sin(rho) hat(n) + (1 - cos(rho)) hat(n)^2`.
    pub fn from_axis_angle(aa: &AxisAngle) -> Self {
        let k = hat(&aa.axis);
        let m = Mat3::identity() + aa.angle.sin() * k + (1.0 - aa.angle.cos()) * (k * k);
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// i-th column (i-th body axis in inertial coordinates).
    pub fn col(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    /// Thrust axis `b3 = R e3`.
    pub fn third_axis(&self) -> Vec3 {
        self.col(2)
    }

    /// Frobenius norm of `R R^T - I`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Axis-angle extraction with the degenerate cases handled:
    /// angle below [`ANGLE_EPSILON`] returns `(0, e3)`; angles within
    /// [`PI_NEIGHBORHOOD`] of pi take the axis from the symmetric part
    /// `I + (1 - cos rho) hat(n)^2`, seeded at the largest diagonal entry.
    pub fn axis_angle(&self) -> AxisAngle {
        let r = &self.0;
        let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let angle = c.acos();

        if angle < ANGLE_EPSILON {
            return AxisAngle::new(0.0, Vec3::z());
        }

        let antisym = Vec3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        );

        if std::f64::consts::PI - angle < PI_NEIGHBORHOOD {
            // sin(rho) ~ 0: recover n n^T = (sym(R) - c I) / (1 - c).
            let sym = 0.5 * (r + r.transpose());
            let outer = (sym - c * Mat3::identity()) / (1.0 - c);
            let i = (0..3)
                .max_by(|&a, &b| outer[(a, a)].partial_cmp(&outer[(b, b)]).unwrap())
                .unwrap();
            let mut axis = outer.column(i).into_owned() / outer[(i, i)].max(1e-12).sqrt();
            axis.normalize_mut();
            // Keep the sign continuous with the antisymmetric part when it
            // still carries information just below pi.
            if antisym.norm() > 1e-12 && antisym.dot(&axis) < 0.0 {
                axis = -axis;
            }
            return AxisAngle::new(angle, axis);
        }

        let axis = antisym / (2.0 * angle.sin());
        AxisAngle::new(angle, axis)
    }

    /// Factors the attitude into a yaw rotation about `e3` and the tilt
    /// rotation that carries `e3` onto the thrust axis `b3 = R e3`:
    /// the product `tilt * yaw` reconstructs `R`, the tilt factor shares
    /// its third column with `R`, and the yaw factor fixes `e3`.
    ///
    /// Returns `(yaw, tilt)`. Fails with [`So3Error::TiltSingularity`] when
    /// the attitude is inverted (`b3z <= -1 + eps`), where no continuous
    /// tilt factor exists.
    pub fn yaw_tilt_decompose(&self) -> Result<(Rotation, Rotation), So3Error> {
        let b3 = self.third_axis();
        if b3.z <= -1.0 + TILT_SINGULARITY_EPSILON {
            return Err(So3Error::TiltSingularity { b3z: b3.z });
        }
        let tilt = tilt_from_axis(&b3);
        // yaw = tilt^T * R fixes e3 (tilt^T maps b3 back onto e3), so it is
        // a pure rotation about e3.
        let yaw = Rotation(tilt.0.transpose() * self.0);
        Ok((yaw, tilt))
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl std::ops::Mul<&Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

fn orthonormality_error(m: &Mat3) -> f64 {
    (m * m.transpose() - Mat3::identity()).norm()
}

/// Tilt rotation mapping `e3` onto the unit vector `b3`: the geodesic
/// rotation about the horizontal axis `e3 x b3`. Closed form, including the
/// diagonal terms `b3z + b3y^2/(1+b3z)` and `1 - b3y^2/(1+b3z)`.
fn tilt_from_axis(b3: &Vec3) -> Rotation {
    let (x, y, z) = (b3.x, b3.y, b3.z);
    let w = 1.0 + z;
    Rotation(Mat3::new(
        z + y * y / w,
        -x * y / w,
        x,
        -x * y / w,
        1.0 - y * y / w,
        y,
        -x,
        -y,
        z,
    ))
}

/// Projects a near-rotation matrix onto SO(3) (closest rotation in the
/// Frobenius sense, via the polar factor of the SVD). Idempotent on valid
/// rotations to within 1e-12. Rank-deficient input yields
/// [`So3Error::Degenerate`].
pub fn reorthonormalize(m: &Mat3) -> Result<Rotation, So3Error> {
    let svd = m.svd(true, true);
    let min_sv = svd.singular_values.min();
    if !min_sv.is_finite() || min_sv < 1e-8 {
        return Err(So3Error::Degenerate);
    }
    let u = svd.u.ok_or(So3Error::Degenerate)?;
    let v_t = svd.v_t.ok_or(So3Error::Degenerate)?;
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // Flip the weakest direction to land on det +1.
        let flip = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        r = u * flip * v_t;
    }
    Ok(Rotation(r))
}
