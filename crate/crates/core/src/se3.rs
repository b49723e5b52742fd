//! Rigid transforms and their exponential coordinates.
//!
//! A [`PoseSE3`] maps points `X` to `R X + t`. [`compose`]`(a, b)` applies
//! `b` first and then `a`. A [`Twist`] is `(omega, v)`: the axis-angle
//! rotation vector followed by the translational part of the Lie algebra.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality tolerance for poses handed to [`PoseSE3::new`].
pub const RIGID_TOLERANCE: f64 = 1e-6;

/// Largest rotation angle accepted by [`se3_log`].
pub const LOG_MAX_ANGLE: f64 = std::f64::consts::PI - 1e-6;

/// Below this angle the trigonometric coefficients use Taylor series.
const SMALL_ANGLE: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSE3 {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Six-vector `(omega_x, omega_y, omega_z, v_x, v_y, v_z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Twist(pub [f64; 6]);

impl Twist {
    pub const ZERO: Twist = Twist([0.0; 6]);

    pub fn new(omega: [f64; 3], v: [f64; 3]) -> Self {
        Twist([omega[0], omega[1], omega[2], v[0], v[1], v[2]])
    }

    pub fn omega(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn v(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.0)
    }
}

impl PoseSE3 {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates orthonormality and orientation within [`RIGID_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite entry".into()));
        }
        let drift = orthonormality_drift(&rotation);
        let det = rotation.determinant();
        if drift >= RIGID_TOLERANCE || (det - 1.0).abs() >= RIGID_TOLERANCE {
            return Err(Error::InvalidPose(format!(
                "rotation not orthonormal (drift {drift:e}, det {det})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: [f64; 3]) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::from(t),
        }
    }

    /// Pose from a rotation vector (axis times angle) and a translation.
    pub fn from_axis_angle(rotvec: [f64; 3], t: [f64; 3]) -> Self {
        Self {
            rotation: so3_exp(&Vector3::from(rotvec)),
            translation: Vector3::from(t),
        }
    }

    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)] * p[0] + r[(0, 1)] * p[1] + r[(0, 2)] * p[2] + t[0],
            r[(1, 0)] * p[0] + r[(1, 1)] * p[1] + r[(1, 2)] * p[2] + t[1],
            r[(2, 0)] * p[0] + r[(2, 1)] * p[1] + r[(2, 2)] * p[2] + t[2],
        ]
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Row-major 3x4 `[R | t]`.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t[0],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t[1],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t[2],
        ]
    }

    pub fn from_row_major_3x4(m: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(rotation, Vector3::new(m[3], m[7], m[11]))
    }

    /// Largest absolute entry-wise difference from another pose.
    pub fn max_abs_diff(&self, other: &PoseSE3) -> f64 {
        let a = self.to_row_major_3x4();
        let b = other.to_row_major_3x4();
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// `a * b`: apply `b`, then `a`.
pub fn compose(a: &PoseSE3, b: &PoseSE3) -> PoseSE3 {
    PoseSE3 {
        rotation: a.rotation * b.rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

pub fn inverse(p: &PoseSE3) -> PoseSE3 {
    let rt = p.rotation.transpose();
    PoseSE3 {
        translation: -(rt * p.translation),
        rotation: rt,
    }
}

pub fn orthonormality_drift(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

pub(crate) fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = axis.norm() / 2.0;
    let cos = (r.trace() - 1.0) / 2.0;
    sin.atan2(cos)
}

/// `sin(t)/t`, `(1 - cos t)/t^2`, `(t - sin t)/t^3`.
fn exp_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        (
            s / theta,
            (1.0 - c) / (theta * theta),
            (theta - s) / (theta * theta * theta),
        )
    }
}

fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let (a, b, _) = exp_coefficients(theta);
    let w = hat(omega);
    Matrix3::identity() + w * a + w * w * b
}

/// Exponential map. Total on finite input.
pub fn se3_exp(twist: &Twist) -> PoseSE3 {
    let omega = twist.omega();
    let theta = omega.norm();
    let (a, b, c) = exp_coefficients(theta);
    let w = hat(&omega);
    let w2 = w * w;
    let rotation = Matrix3::identity() + w * a + w2 * b;
    let v = Matrix3::identity() + w * b + w2 * c;
    PoseSE3 {
        rotation,
        translation: v * twist.v(),
    }
}

/// Logarithm map; fails within 1e-6 rad of a half-turn.
pub fn se3_log(pose: &PoseSE3) -> Result<Twist> {
    let r = &pose.rotation;
    let theta = rotation_angle(r);
    if theta >= LOG_MAX_ANGLE {
        return Err(Error::NearSingularRotation { angle: theta });
    }
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    // axis = 2 sin(theta) * unit axis
    let scale = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0)
    } else {
        theta / (2.0 * theta.sin())
    };
    let omega = axis * scale;
    let w = hat(&omega);
    // V^-1 = I - W/2 + d W^2 with d = (1 - A / (2B)) / theta^2
    let d = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let (a, b, _) = exp_coefficients(theta);
        (1.0 - a / (2.0 * b)) / (theta * theta)
    };
    let v_inv = Matrix3::identity() - w * 0.5 + w * w * d;
    let v = v_inv * pose.translation;
    Ok(Twist([omega[0], omega[1], omega[2], v[0], v[1], v[2]]))
}

/// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = u * fix * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn twist_strategy(max_angle: f64) -> impl Strategy<Value = Twist> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            0.0..max_angle,
            prop::array::uniform3(-5.0f64..5.0),
        )
            .prop_filter("axis", |(a, _, _)| {
                (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt() > 1e-3
            })
            .prop_map(|(axis, angle, v)| {
                let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
                Twist::new(
                    [axis[0] / n * angle, axis[1] / n * angle, axis[2] / n * angle],
                    v,
                )
            })
    }

    fn max_diff(a: &Twist, b: &Twist) -> f64 {
        a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let p = se3_exp(&Twist::ZERO);
        assert_eq!(p, PoseSE3::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        // Rodrigues with theta = pi/2, axis z: R = I + K, K^2 = -diag(1,1,0).
        let p = se3_exp(&Twist::new([0.0, 0.0, PI / 2.0], [0.0; 3]));
        let x = p.transform_point([1.0, 0.0, 0.0]);
        assert!((x[0]).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15 && x[2].abs() < 1e-15);
        assert_eq!(p.translation(), &Vector3::zeros());
    }

    #[test]
    fn exp_pure_translation() {
        let p = se3_exp(&Twist::new([0.0; 3], [1.0, 2.0, 3.0]));
        assert_eq!(p.rotation(), &Matrix3::identity());
        assert_eq!(p.translation(), &Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn log_identity_is_zero() {
        assert_eq!(se3_log(&PoseSE3::identity()).unwrap(), Twist::ZERO);
    }

    #[test]
    fn log_half_turn_is_singular() {
        let p = PoseSE3::from_axis_angle([0.0, PI, 0.0], [1.0, 0.0, 0.0]);
        assert!(matches!(se3_log(&p), Err(Error::NearSingularRotation { .. })));
    }

    #[test]
    fn group_identities() {
        let p = se3_exp(&Twist::new([0.3, -0.2, 0.5], [1.0, -2.0, 0.5]));
        assert!(compose(&p, &PoseSE3::identity()).max_abs_diff(&p) < 1e-15);
        assert!(compose(&p, &inverse(&p)).max_abs_diff(&PoseSE3::identity()) < 1e-9);
        let a = PoseSE3::from_translation([1.0, 2.0, 3.0]);
        let b = PoseSE3::from_translation([-0.5, 4.0, 0.25]);
        assert_eq!(compose(&a, &b).translation(), &Vector3::new(0.5, 6.0, 3.25));
    }

    #[test]
    fn new_rejects_non_rigid() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = 1.01;
        assert!(PoseSE3::new(r, Vector3::zeros()).is_err());
        assert!(PoseSE3::new(-Matrix3::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn nearest_rotation_repairs_drift() {
        let r = se3_exp(&Twist::new([0.1, 0.2, 0.3], [0.0; 3])).rotation;
        let noisy = r + Matrix3::from_element(1e-5);
        let fixed = nearest_rotation(&noisy);
        assert!(orthonormality_drift(&fixed) < 1e-12);
        assert!((fixed - r).abs().max() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn exp_log_roundtrip(xi in twist_strategy(PI - 1e-3)) {
            let p = se3_exp(&xi);
            let back = se3_log(&p).unwrap();
            prop_assert!(max_diff(&back, &xi) < 1e-9, "{:?} vs {:?}", back, xi);
            prop_assert!(se3_exp(&back).max_abs_diff(&p) < 1e-9);
        }

        #[test]
        fn exp_is_rigid(xi in twist_strategy(10.0)) {
            let p = se3_exp(&xi);
            prop_assert!(orthonormality_drift(p.rotation()) < 1e-6);
            prop_assert!((p.rotation().determinant() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn group_laws(a in twist_strategy(3.0), b in twist_strategy(3.0), c in twist_strategy(3.0)) {
            let (pa, pb, pc) = (se3_exp(&a), se3_exp(&b), se3_exp(&c));
            let left = compose(&compose(&pa, &pb), &pc);
            let right = compose(&pa, &compose(&pb, &pc));
            prop_assert!(left.max_abs_diff(&right) < 1e-9);
            prop_assert!(compose(&PoseSE3::identity(), &pa).max_abs_diff(&pa) < 1e-9);
            prop_assert!(compose(&inverse(&pa), &pa).max_abs_diff(&PoseSE3::identity()) < 1e-9);
        }
    }
}
