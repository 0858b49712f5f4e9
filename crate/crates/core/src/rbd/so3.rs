//! Rotation utilities on unit quaternions.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::scalar::{cast, Real};

const SMALL_ANGLE: f64 = 1e-6;

/// Rotation-log map returning an axis-angle vector with norm in `[0, pi]`.
pub fn log_map<T: Real>(q: &UnitQuaternion<T>) -> Vector3<T> {
    let mut c = q.quaternion().coords;
    if c.w < T::zero() {
        c = -c;
    }
    let v = Vector3::new(c.x, c.y, c.z);
    let w = c.w;
    let n = v.norm();
    let theta = (n.atan2(w)) * cast::<T>(2.0);
    if theta < cast(SMALL_ANGLE) {
        // theta / sin(theta/2) = 2 + n^2/3 + O(n^4)
        v * (cast::<T>(2.0) + n * n / cast::<T>(3.0))
    } else if theta > T::pi() - cast::<T>(SMALL_ANGLE) {
        // near pi the scalar part vanishes; take the axis straight from the vector part
        v / n * theta
    } else {
        v * (theta / n)
    }
}

/// Inverse of [`log_map`].
pub fn exp_map<T: Real>(v: &Vector3<T>) -> UnitQuaternion<T> {
    let theta = v.norm();
    let half = cast::<T>(0.5);
    let q = if theta < cast(SMALL_ANGLE) {
        let t2 = theta * theta;
        Quaternion::from_parts(
            T::one() - t2 / cast::<T>(8.0),
            v * (half - t2 / cast::<T>(48.0)),
        )
    } else {
        let (s, c) = (theta * half).sin_cos();
        Quaternion::from_parts(c, v * (s / theta))
    };
    UnitQuaternion::new_normalize(q)
}

/// Local difference `a [-] b = log(b^-1 a)`, so that `b * exp(a [-] b) = a`.
pub fn boxminus<T: Real>(a: &UnitQuaternion<T>, b: &UnitQuaternion<T>) -> Vector3<T> {
    if a.quaternion().coords == b.quaternion().coords {
        return Vector3::zeros();
    }
    log_map(&(b.inverse() * a))
}

/// Unit world "down" direction `(0, 0, -1)` expressed in the body frame.
pub fn gravity_in_frame<T: Real>(orientation: &UnitQuaternion<T>) -> Vector3<T> {
    orientation.inverse_transform_vector(&Vector3::new(T::zero(), T::zero(), -T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn quat(axis: [f64; 3], angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle)
    }

    #[test]
    fn identical_rotations_give_zero() {
        let a = quat([0.3, -0.2, 0.9], 2.1);
        assert_eq!(boxminus(&a, &a), Vector3::zeros());
    }

    #[test]
    fn yaw_against_identity() {
        let a = quat([0.0, 0.0, 1.0], 0.3);
        assert_relative_eq!(
            boxminus(&a, &UnitQuaternion::identity()),
            Vector3::new(0.0, 0.0, 0.3),
            epsilon = 1e-15
        );
    }

    #[test]
    fn tiny_and_near_pi_angles() {
        let a = quat([1.0, 0.0, 0.0], 1e-9);
        assert_relative_eq!(log_map(&a), Vector3::new(1e-9, 0.0, 0.0), epsilon = 1e-22);
        let b = quat([0.0, 1.0, 0.0], std::f64::consts::PI - 1e-8);
        let v = log_map(&b);
        assert_relative_eq!(v.norm(), std::f64::consts::PI - 1e-8, epsilon = 1e-12);
        assert_relative_eq!(v.normalize(), Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn gravity_examples() {
        let g = gravity_in_frame(&UnitQuaternion::<f64>::identity());
        assert_eq!(g, Vector3::new(0.0, 0.0, -1.0));
        let pitched = quat([0.0, 1.0, 0.0], std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(
            gravity_in_frame(&pitched),
            Vector3::new(1.0, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn works_in_single_precision() {
        let a = UnitQuaternion::from_axis_angle(&Vector3::<f32>::z_axis(), 0.3f32);
        let d = boxminus(&a, &UnitQuaternion::identity());
        assert!((d.z - 0.3).abs() < 1e-6);
    }

    fn arb_quat() -> impl Strategy<Value = UnitQuaternion<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| {
                w * w + x * x + y * y + z * z > 1e-3
            })
            .prop_map(|(w, x, y, z)| UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z)))
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(a in arb_quat(), b in arb_quat()) {
            let d = boxminus(&a, &b);
            prop_assert!(d.norm() <= std::f64::consts::PI + 1e-12);
            let back = b * exp_map(&d);
            prop_assert!(back.angle_to(&a) < 1e-9);
        }

        #[test]
        fn antisymmetric(a in arb_quat(), b in arb_quat()) {
            let d1 = boxminus(&a, &b);
            let d2 = boxminus(&b, &a);
            prop_assume!(d1.norm() < std::f64::consts::PI - 1e-6);
            prop_assert!((d1 + d2).norm() < 1e-12);
        }

        #[test]
        fn gravity_is_unit(a in arb_quat()) {
            prop_assert!((gravity_in_frame(&a).norm() - 1.0).abs() < 1e-12);
        }
    }
}
