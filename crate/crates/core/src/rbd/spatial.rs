//! Spatial (6D) vector algebra in the `[angular; linear]` convention.

use nalgebra::{Matrix3, Matrix6, UnitQuaternion, Vector3, Vector6};

use crate::scalar::Real;

/// Skew-symmetric cross-product matrix `[v]x`.
pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(),
        -v.z,
        v.y,
        v.z,
        T::zero(),
        -v.x,
        -v.y,
        v.x,
        T::zero(),
    )
}

/// Placement of a child frame in a parent frame.
///
/// `rot` is the child orientation in parent coordinates and `trans` the child
/// origin in parent coordinates, so `p_parent = rot * p_child + trans`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform<T: Real> {
    pub rot: Matrix3<T>,
    pub trans: Vector3<T>,
}

impl<T: Real> Transform<T> {
    pub fn identity() -> Self {
        Self {
            rot: Matrix3::identity(),
            trans: Vector3::zeros(),
        }
    }

    pub fn new(rot: Matrix3<T>, trans: Vector3<T>) -> Self {
        Self { rot, trans }
    }

    pub fn from_translation(trans: Vector3<T>) -> Self {
        Self {
            rot: Matrix3::identity(),
            trans,
        }
    }

    pub fn from_quaternion(q: &UnitQuaternion<T>, trans: Vector3<T>) -> Self {
        Self {
            rot: q.to_rotation_matrix().into_inner(),
            trans,
        }
    }

    /// Pure rotation about a unit `axis` by `angle`.
    pub fn rotation(axis: &Vector3<T>, angle: T) -> Self {
        Self {
            rot: axis_angle_matrix(axis, angle),
            trans: Vector3::zeros(),
        }
    }

    /// `self` places A in P, `child` places B in A; the result places B in P.
    pub fn compose(&self, child: &Transform<T>) -> Transform<T> {
        Transform {
            rot: self.rot * child.rot,
            trans: self.trans + self.rot * child.trans,
        }
    }

    pub fn inverse(&self) -> Transform<T> {
        let rt = self.rot.transpose();
        Transform {
            rot: rt,
            trans: -(rt * self.trans),
        }
    }

    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rot * p + self.trans
    }

    /// Motion transform taking parent-coordinate spatial velocities to child coordinates.
    pub fn motion_matrix(&self) -> Matrix6<T> {
        let rt = self.rot.transpose();
        let mut x = Matrix6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&rt);
        x.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(-(rt * skew(&self.trans))));
        x
    }

    /// Parent-to-child transform of a motion vector.
    pub fn apply_motion(&self, m: &Vector6<T>) -> Vector6<T> {
        let rt = self.rot.transpose();
        let w = m.fixed_rows::<3>(0).into_owned();
        let v = m.fixed_rows::<3>(3).into_owned();
        let wc = rt * w;
        let vc = rt * (v + w.cross(&self.trans));
        stack(&wc, &vc)
    }

    /// Child-to-parent transform of a force vector (the transpose of [`Self::motion_matrix`]).
    pub fn apply_force_to_parent(&self, f: &Vector6<T>) -> Vector6<T> {
        let n = f.fixed_rows::<3>(0).into_owned();
        let lin = f.fixed_rows::<3>(3).into_owned();
        let fp = self.rot * lin;
        let np = self.rot * n + self.trans.cross(&fp);
        stack(&np, &fp)
    }
}

/// Rodrigues rotation matrix for a unit axis.
pub fn axis_angle_matrix<T: Real>(axis: &Vector3<T>, angle: T) -> Matrix3<T> {
    let k = skew(axis);
    let (s, c) = angle.sin_cos();
    Matrix3::identity() + k * s + k * k * (T::one() - c)
}

pub fn stack<T: Real>(top: &Vector3<T>, bottom: &Vector3<T>) -> Vector6<T> {
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

/// Spatial motion cross product matrix `v x`.
pub fn motion_cross<T: Real>(v: &Vector6<T>) -> Matrix6<T> {
    let w = skew(&v.fixed_rows::<3>(0).into_owned());
    let lin = skew(&v.fixed_rows::<3>(3).into_owned());
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&lin);
    m
}

/// Spatial force cross product `v x*`, equal to `-(v x)^T`.
pub fn force_cross<T: Real>(v: &Vector6<T>) -> Matrix6<T> {
    -motion_cross(v).transpose()
}

/// Spatial inertia about a link origin from mass, center of mass and
/// rotational inertia about the center of mass.
pub fn spatial_inertia<T: Real>(mass: T, com: &Vector3<T>, inertia: &Matrix3<T>) -> Matrix6<T> {
    let c = skew(com);
    let mut i = Matrix6::zeros();
    i.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(inertia + c * c.transpose() * mass));
    i.fixed_view_mut::<3, 3>(0, 3).copy_from(&(c * mass));
    i.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(c.transpose() * mass));
    i.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Matrix3::identity() * mass));
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn apply_motion_matches_matrix() {
        let x = Transform::new(
            axis_angle_matrix(&Vector3::new(0.0, 0.6, 0.8), 0.7),
            Vector3::new(0.3, -0.2, 0.5),
        );
        let m = Vector6::new(0.1, -0.4, 0.3, 1.0, 2.0, -0.5);
        assert_relative_eq!(x.apply_motion(&m), x.motion_matrix() * m, epsilon = 1e-14);
        let f = Vector6::new(0.7, 0.1, -0.2, 0.3, 0.9, 1.1);
        assert_relative_eq!(
            x.apply_force_to_parent(&f),
            x.motion_matrix().transpose() * f,
            epsilon = 1e-14
        );
    }

    #[test]
    fn compose_then_inverse_is_identity() {
        let a = Transform::new(
            axis_angle_matrix(&Vector3::new(1.0, 0.0, 0.0), 0.3),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let b = a.compose(&a.inverse());
        assert_relative_eq!(b.rot, Matrix3::identity(), epsilon = 1e-14);
        assert_relative_eq!(b.trans, Vector3::zeros(), epsilon = 1e-14);
    }

    #[test]
    fn power_is_frame_invariant() {
        let x = Transform::new(
            axis_angle_matrix(&Vector3::new(0.0, 0.0, 1.0), 1.1),
            Vector3::new(0.2, 0.1, -0.3),
        );
        let v_parent = Vector6::new(0.3, 0.2, 0.1, -1.0, 0.5, 0.25);
        let f_child = Vector6::new(1.0, -2.0, 0.5, 0.3, 0.3, -0.1);
        let p_child = x.apply_motion(&v_parent).dot(&f_child);
        let p_parent = v_parent.dot(&x.apply_force_to_parent(&f_child));
        assert_relative_eq!(p_child, p_parent, epsilon = 1e-13);
    }
}
