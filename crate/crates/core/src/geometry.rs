//! Rigid motions in 3-D and their six-parameter vector form.
//!
//! A pose is stored as `(x, y, z, roll, pitch, yaw)` where the rotation is
//! the intrinsic Z-Y-X composition `Rz(yaw) * Ry(pitch) * Rx(roll)`. The
//! vector form is what the fixed-point solvers iterate on; the matrix form
//! is what gets applied to points.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Tolerance for `RigidTransform::new` orthonormality and determinant checks.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Rotation-drift threshold above which `compose` re-orthonormalizes.
const COMPOSE_DRIFT_LIMIT: f64 = 1e-12;

/// `|pitch|` within this distance of `pi/2` selects the gimbal-lock branch
/// of the Euler extraction.
const GIMBAL_LOCK_EPS: f64 = 1e-6;

/// A rigid motion as a point in R^6: translation plus Z-Y-X Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Rotation about X, applied first.
    pub roll: f64,
    /// Rotation about Y, applied second.
    pub pitch: f64,
    /// Rotation about Z, applied last.
    pub yaw: f64,
}

impl Pose6 {
    /// The identity motion.
    pub const IDENTITY: Pose6 = Pose6 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Pose6 {
            x,
            y,
            z,
            roll,
            pitch,
            yaw,
        }
    }

    /// Component order matches the solver state layout: `[x, y, z, roll, pitch, yaw]`.
    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Pose6::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Same motion with every angle wrapped into `(-pi, pi]`.
    pub fn normalized(&self) -> Pose6 {
        Pose6 {
            roll: wrap_angle(self.roll),
            pitch: wrap_angle(self.pitch),
            yaw: wrap_angle(self.yaw),
            ..*self
        }
    }

    /// Largest absolute componentwise difference; handy for convergence tests.
    pub fn max_abs_diff(&self, other: &Pose6) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// A rotation matrix plus translation vector, acting as `p -> R p + t`.
///
/// Invariant: `rotation` is orthonormal with determinant +1. Constructors in
/// this crate guarantee it; `new` checks it for matrices from outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform from parts, rejecting matrices whose orthonormality
    /// or determinant error exceeds [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().all(|v| v.is_finite()) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "rigid transform parts must be finite".into(),
            ));
        }
        let drift = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if drift > ROTATION_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "rotation is not orthonormal (max drift {drift:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// The inverse motion: `p -> R^T (p - t)`.
    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Builds the matrix form of a pose: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
///
/// Errors if any component is non-finite.
pub fn pose_to_transform(pose: &Pose6) -> Result<RigidTransform> {
    if !pose.is_finite() {
        return Err(Error::InvalidArgument(
            "pose components must be finite".into(),
        ));
    }
    let (sr, cr) = pose.roll.sin_cos();
    let (sp, cp) = pose.pitch.sin_cos();
    let (sy, cy) = pose.yaw.sin_cos();
    #[rustfmt::skip]
    let rotation = Matrix3::new(
        cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
        sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
        -sp,     cp * sr,                cp * cr,
    );
    Ok(RigidTransform {
        rotation,
        translation: Vector3::new(pose.x, pose.y, pose.z),
    })
}

/// Result of [`transform_to_pose`]: the extracted pose plus a flag telling
/// whether the gimbal-lock branch was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseExtraction {
    pub pose: Pose6,
    /// True when `|pitch|` was within `1e-6` of `pi/2`, in which case the
    /// roll/yaw split is not unique and roll was fixed to zero.
    pub gimbal_lock: bool,
}

/// Recovers the six-parameter form of a transform.
///
/// Angles come back wrapped in `(-pi, pi]` with `pitch` in `[-pi/2, pi/2]`.
/// Near `pitch = +/-pi/2` only `yaw -/+ roll` is observable; this extraction
/// picks `roll = 0`, folds the remainder into `yaw`, and sets the flag.
pub fn transform_to_pose(transform: &RigidTransform) -> PoseExtraction {
    let r = &transform.rotation;
    let t = &transform.translation;
    // r[(2,0)] = -sin(pitch); hypot of the last row's tail is cos(pitch) >= 0.
    let cos_pitch = r[(2, 1)].hypot(r[(2, 2)]);
    let pitch = (-r[(2, 0)]).atan2(cos_pitch);
    let (roll, yaw, gimbal_lock) = if cos_pitch < GIMBAL_LOCK_EPS {
        let yaw = if pitch > 0.0 {
            // pitch = +pi/2: r[(1,1)] = cos(yaw - roll), r[(1,2)] = sin(yaw - roll)
            r[(1, 2)].atan2(r[(1, 1)])
        } else {
            // pitch = -pi/2: r[(1,1)] = cos(yaw + roll), r[(1,2)] = -sin(yaw + roll)
            (-r[(1, 2)]).atan2(r[(1, 1)])
        };
        (0.0, yaw, true)
    } else {
        (
            r[(2, 1)].atan2(r[(2, 2)]),
            r[(1, 0)].atan2(r[(0, 0)]),
            false,
        )
    };
    PoseExtraction {
        pose: Pose6::new(
            t.x,
            t.y,
            t.z,
            wrap_angle(roll),
            wrap_angle(pitch),
            wrap_angle(yaw),
        ),
        gimbal_lock,
    }
}

/// Applies a transform to every point, preserving order.
pub fn apply_transform(transform: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud::from_points_unchecked(
        cloud
            .points()
            .iter()
            .map(|p| transform.transform_point(p))
            .collect(),
    )
}

/// Composes two motions: `compose(a, b)` applies `b` first, then `a`.
///
/// Accumulated rounding is monitored; if the product rotation drifts from
/// orthonormality by more than `1e-12` it is snapped back via SVD.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    let mut rotation = a.rotation * b.rotation;
    let translation = a.rotation * b.translation + a.translation;
    let drift = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
    if drift > COMPOSE_DRIFT_LIMIT {
        rotation = nearest_rotation(&rotation);
    }
    RigidTransform {
        rotation,
        translation,
    }
}

/// Projects a near-rotation matrix onto the closest proper rotation
/// (orthogonal Procrustes via SVD with a determinant sign fix).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd of 3x3 always yields u");
    let v_t = svd.v_t.expect("svd of 3x3 always yields v_t");
    let sign = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * v_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn random_pose(rng: &mut impl Rng, angle_range: f64) -> Pose6 {
        Pose6::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-angle_range..angle_range),
            rng.gen_range(-angle_range..angle_range),
            rng.gen_range(-angle_range..angle_range),
        )
    }

    #[test]
    fn yaw_quarter_turn_sends_x_to_y() {
        // Hand evaluation of the convention: a +90 degree yaw alone must map
        // the +X axis onto +Y, and +Y onto -X.
        let t = pose_to_transform(&Pose6::new(0.0, 0.0, 0.0, 0.0, 0.0, FRAC_PI_2)).unwrap();
        let p = t.transform_point(&Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-15);
        let q = t.transform_point(&Point3::new(0.0, 1.0, 0.0));
        assert_abs_diff_eq!(q.x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn roll_is_applied_before_yaw() {
        // Hand evaluation: Rx(90deg) sends +Z to -Y (y->z, z->-y), then
        // Rz(90deg) sends -Y to +X (x->y, y->-x). Expect (1, 0, 0).
        let t =
            pose_to_transform(&Pose6::new(0.0, 0.0, 0.0, FRAC_PI_2, 0.0, FRAC_PI_2)).unwrap();
        let p = t.transform_point(&Point3::new(0.0, 0.0, 1.0));
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn round_trip_of_random_poses_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let pose = random_pose(&mut rng, 1.0);
            let t = pose_to_transform(&pose).unwrap();
            let back = transform_to_pose(&t);
            assert!(!back.gimbal_lock);
            assert!(
                pose.max_abs_diff(&back.pose) < 1e-9,
                "round trip drifted: {pose:?} vs {:?}",
                back.pose
            );
        }
    }

    #[test]
    fn rotations_have_unit_determinant_and_preserve_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let pose = random_pose(&mut rng, PI);
            let t = pose_to_transform(&pose).unwrap();
            assert!((t.rotation.determinant() - 1.0).abs() < 1e-12);
        }
        // Pairwise distance preservation on a smaller sample.
        for _ in 0..200 {
            let pose = random_pose(&mut rng, PI);
            let t = pose_to_transform(&pose).unwrap();
            let a = Point3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let b = Point3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let before = (a - b).norm();
            let after = (t.transform_point(&a) - t.transform_point(&b)).norm();
            let scale = before.max(1.0);
            assert!((before - after).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn gimbal_lock_branch_zeroes_roll_and_flags() {
        // pitch exactly +pi/2 with nonzero roll and yaw: only yaw - roll is
        // observable. The branch must return roll = 0 and fold the rest into
        // yaw, and the recovered pose must rebuild the same matrix.
        let pose = Pose6::new(0.1, -0.2, 0.3, 0.4, FRAC_PI_2, 1.1);
        let t = pose_to_transform(&pose).unwrap();
        let back = transform_to_pose(&t);
        assert!(back.gimbal_lock);
        assert_eq!(back.pose.roll, 0.0);
        assert_abs_diff_eq!(back.pose.yaw, 1.1 - 0.4, epsilon = 1e-9);
        let rebuilt = pose_to_transform(&back.pose).unwrap();
        assert!((rebuilt.rotation - t.rotation).abs().max() < 1e-9);

        // Same check on the -pi/2 side, where yaw + roll is observable.
        let pose = Pose6::new(0.0, 0.0, 0.0, 0.25, -FRAC_PI_2, 0.5);
        let t = pose_to_transform(&pose).unwrap();
        let back = transform_to_pose(&t);
        assert!(back.gimbal_lock);
        assert_eq!(back.pose.roll, 0.0);
        assert_abs_diff_eq!(back.pose.yaw, 0.5 + 0.25, epsilon = 1e-9);
        let rebuilt = pose_to_transform(&back.pose).unwrap();
        assert!((rebuilt.rotation - t.rotation).abs().max() < 1e-9);
    }

    #[test]
    fn non_finite_pose_is_rejected() {
        let err = pose_to_transform(&Pose6::new(f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        let err = pose_to_transform(&Pose6::new(0.0, 0.0, 0.0, f64::INFINITY, 0.0, 0.0));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = pose_to_transform(&random_pose(&mut rng, PI)).unwrap();
            let b = pose_to_transform(&random_pose(&mut rng, PI)).unwrap();
            let ab = compose(&a, &b);
            let p = Point3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let direct = ab.transform_point(&p);
            let sequential = a.transform_point(&b.transform_point(&p));
            assert!((direct - sequential).norm() < 1e-12);
        }
    }

    #[test]
    fn long_compose_chain_keeps_rotation_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut acc = RigidTransform::identity();
        for _ in 0..10_000 {
            let step = pose_to_transform(&random_pose(&mut rng, 0.5)).unwrap();
            acc = compose(&step, &acc);
        }
        let drift = (acc.rotation.transpose() * acc.rotation - Matrix3::identity())
            .abs()
            .max();
        assert!(drift <= 1e-12, "drift {drift:.3e}");
        assert!((acc.rotation.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_undoes_the_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t = pose_to_transform(&random_pose(&mut rng, PI)).unwrap();
            let round = compose(&t.inverse(), &t);
            assert!((round.rotation - Matrix3::identity()).abs().max() < 1e-12);
            assert!(round.translation.norm() < 1e-12);
        }
    }

    #[test]
    fn new_rejects_reflections_and_scaling() {
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(reflection, Vector3::zeros()),
            Err(Error::InvalidArgument(_))
        ));
        let scaled = Matrix3::identity() * 1.001;
        assert!(matches!(
            RigidTransform::new(scaled, Vector3::zeros()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0)).is_ok());
    }

    #[test]
    fn wrap_angle_lands_in_half_open_interval() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(FRAC_PI_4), FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-FRAC_PI_4), -FRAC_PI_4, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = rng.gen_range(-50.0..50.0);
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "{a} wrapped to {w}");
            // Wrapped value represents the same direction.
            assert_abs_diff_eq!(w.sin(), a.sin(), epsilon = 1e-9);
            assert_abs_diff_eq!(w.cos(), a.cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn normalized_pose_only_touches_angles() {
        let p = Pose6::new(10.0, -20.0, 30.0, 4.0 * PI + 0.1, 0.2, -3.0 * PI);
        let n = p.normalized();
        assert_eq!((n.x, n.y, n.z), (10.0, -20.0, 30.0));
        assert_abs_diff_eq!(n.roll, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(n.pitch, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(n.yaw, PI, epsilon = 1e-12);
    }
}
