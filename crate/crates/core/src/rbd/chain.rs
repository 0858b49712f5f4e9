use nalgebra::{DVector, Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::spatial::Transform;
use crate::error::{check_len, Error, Result};
use crate::scalar::{cast, Real};

/// Rigid link with mass properties about its center of mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Link<T: Real> {
    pub name: String,
    pub mass: T,
    /// Center of mass in the link frame.
    pub com: Vector3<T>,
    /// Rotational inertia about the center of mass, link axes.
    pub inertia: Matrix3<T>,
}

impl<T: Real> Link<T> {
    pub fn new(name: impl Into<String>, mass: T, com: Vector3<T>, inertia: Matrix3<T>) -> Self {
        Self {
            name: name.into(),
            mass,
            com,
            inertia,
        }
    }

    pub fn massless(name: impl Into<String>) -> Self {
        Self::new(name, T::zero(), Vector3::zeros(), Matrix3::zeros())
    }

    /// Point mass at `com`.
    pub fn point(name: impl Into<String>, mass: T, com: Vector3<T>) -> Self {
        Self::new(name, mass, com, Matrix3::zeros())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    /// Six-DoF root joint. Positions are `[x, y, z, qw, qx, qy, qz]`, velocities
    /// the body-frame spatial velocity `[wx, wy, wz, vx, vy, vz]`.
    FloatingBase,
}

impl JointKind {
    pub fn nq(self) -> usize {
        match self {
            JointKind::Revolute => 1,
            JointKind::FloatingBase => 7,
        }
    }

    pub fn nv(self) -> usize {
        match self {
            JointKind::Revolute => 1,
            JointKind::FloatingBase => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLimits<T: Real> {
    pub q_min: T,
    pub q_max: T,
    pub tau_min: T,
    pub tau_max: T,
}

impl<T: Real> Default for JointLimits<T> {
    fn default() -> Self {
        let big = cast::<T>(1e9);
        Self {
            q_min: -big,
            q_max: big,
            tau_min: -big,
            tau_max: big,
        }
    }
}

/// Joint `i` moves link `i` relative to link `parent` (or the world).
#[derive(Clone, Debug, PartialEq)]
pub struct Joint<T: Real> {
    pub name: String,
    pub kind: JointKind,
    /// Rotation axis in the joint frame (unit norm).
    pub axis: Vector3<T>,
    pub parent: Option<usize>,
    /// Joint frame at zero displacement, expressed in the parent link frame.
    pub origin: Transform<T>,
    pub limits: JointLimits<T>,
    /// Reflected rotor inertia added to the mass-matrix diagonal.
    pub armature: T,
}

impl<T: Real> Joint<T> {
    pub fn revolute(
        name: impl Into<String>,
        parent: Option<usize>,
        origin: Transform<T>,
        axis: Vector3<T>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: JointKind::Revolute,
            axis,
            parent,
            origin,
            limits: JointLimits::default(),
            armature: T::zero(),
        }
    }

    pub fn floating(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: JointKind::FloatingBase,
            axis: Vector3::z(),
            parent: None,
            origin: Transform::identity(),
            limits: JointLimits::default(),
            armature: T::zero(),
        }
    }

    pub fn with_limits(mut self, limits: JointLimits<T>) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_armature(mut self, armature: T) -> Self {
        self.armature = armature;
        self
    }
}

/// Open kinematic tree with per-link inertia and uniform gravity.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainModel<T: Real> {
    links: Vec<Link<T>>,
    joints: Vec<Joint<T>>,
    pub gravity: Vector3<T>,
    q_offsets: Vec<usize>,
    v_offsets: Vec<usize>,
    nq: usize,
    nv: usize,
}

impl<T: Real> ChainModel<T> {
    /// Builds a chain, requiring strictly positive masses and positive definite inertias.
    pub fn new(links: Vec<Link<T>>, joints: Vec<Joint<T>>, gravity: Vector3<T>) -> Result<Self> {
        Self::build(links, joints, gravity, true)
    }

    /// Like [`ChainModel::new`] but admits massless links (used for support chains
    /// whose parent links are modeled elsewhere).
    pub fn new_allow_massless(
        links: Vec<Link<T>>,
        joints: Vec<Joint<T>>,
        gravity: Vector3<T>,
    ) -> Result<Self> {
        Self::build(links, joints, gravity, false)
    }

    fn build(
        links: Vec<Link<T>>,
        mut joints: Vec<Joint<T>>,
        gravity: Vector3<T>,
        strict: bool,
    ) -> Result<Self> {
        if links.len() != joints.len() {
            return Err(Error::InvalidModel(format!(
                "{} links but {} joints",
                links.len(),
                joints.len()
            )));
        }
        for (i, link) in links.iter().enumerate() {
            let sym = (link.inertia - link.inertia.transpose()).amax();
            if sym > cast(1e-9) {
                return Err(Error::InvalidModel(format!(
                    "inertia of link {i} is not symmetric"
                )));
            }
            let eig = link.inertia.symmetric_eigenvalues().min();
            if strict {
                if !(link.mass > T::zero()) {
                    return Err(Error::InvalidModel(format!(
                        "link {i} mass must be positive"
                    )));
                }
                if !(eig > T::zero()) {
                    return Err(Error::InvalidModel(format!(
                        "inertia of link {i} is not positive definite"
                    )));
                }
            } else if link.mass < T::zero() || eig < cast(-1e-12) {
                return Err(Error::InvalidModel(format!(
                    "link {i} has negative mass or inertia"
                )));
            }
        }
        let mut q_offsets = Vec::with_capacity(joints.len());
        let mut v_offsets = Vec::with_capacity(joints.len());
        let (mut nq, mut nv) = (0, 0);
        for (i, joint) in joints.iter_mut().enumerate() {
            if let Some(p) = joint.parent {
                if p >= i {
                    return Err(Error::InvalidModel(format!(
                        "joint {i} has parent {p}; parents must precede children"
                    )));
                }
            }
            match joint.kind {
                JointKind::FloatingBase => {
                    if i != 0 || joint.parent.is_some() {
                        return Err(Error::InvalidModel(
                            "a floating base must be the first joint and attach to the world"
                                .into(),
                        ));
                    }
                }
                JointKind::Revolute => {
                    let n = joint.axis.norm();
                    if (n - T::one()).abs() > cast(1e-6) {
                        return Err(Error::InvalidModel(format!(
                            "joint {i} axis is not unit norm"
                        )));
                    }
                    joint.axis /= n;
                }
            }
            if joint.armature < T::zero() {
                return Err(Error::InvalidModel(format!(
                    "joint {i} armature is negative"
                )));
            }
            q_offsets.push(nq);
            v_offsets.push(nv);
            nq += joint.kind.nq();
            nv += joint.kind.nv();
        }
        Ok(Self {
            links,
            joints,
            gravity,
            q_offsets,
            v_offsets,
            nq,
            nv,
        })
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    pub fn num_bodies(&self) -> usize {
        self.links.len()
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn q_offset(&self, joint: usize) -> usize {
        self.q_offsets[joint]
    }

    pub fn v_offset(&self, joint: usize) -> usize {
        self.v_offsets[joint]
    }

    pub fn is_floating(&self) -> bool {
        self.joints
            .first()
            .is_some_and(|j| j.kind == JointKind::FloatingBase)
    }

    /// Indices of the revolute joints, in order.
    pub fn revolute_joints(&self) -> Vec<usize> {
        (0..self.joints.len())
            .filter(|&i| self.joints[i].kind == JointKind::Revolute)
            .collect()
    }

    pub fn total_mass(&self) -> T {
        self.links.iter().fold(T::zero(), |acc, l| acc + l.mass)
    }

    /// Link indices from the root down to `link`, inclusive.
    pub fn path_to(&self, link: usize) -> Vec<usize> {
        let mut path = vec![link];
        let mut cur = link;
        while let Some(p) = self.joints[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn find_link(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn find_joint(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Multiplies every link mass and inertia by `scale[i]`.
    pub fn with_mass_scales(&self, scale: &[T]) -> Result<Self> {
        check_len("mass scales", self.links.len(), scale.len())?;
        let mut out = self.clone();
        for (link, &s) in out.links.iter_mut().zip(scale) {
            link.mass *= s;
            link.inertia *= s;
        }
        Ok(out)
    }

    /// Zero configuration with identity base orientation.
    pub fn neutral_q(&self) -> DVector<T> {
        let mut q = DVector::zeros(self.nq);
        if self.is_floating() {
            q[3] = T::one();
        }
        q
    }

    pub fn check_q(&self, q: &DVector<T>) -> Result<()> {
        check_len("joint positions", self.nq, q.len())
    }

    pub fn check_v(&self, v: &DVector<T>, what: &'static str) -> Result<()> {
        check_len(what, self.nv, v.len())
    }

    /// Placement of link `i` in its parent link frame.
    pub fn joint_transform(&self, i: usize, q: &DVector<T>) -> Transform<T> {
        let joint = &self.joints[i];
        let o = self.q_offsets[i];
        match joint.kind {
            JointKind::Revolute => joint
                .origin
                .compose(&Transform::rotation(&joint.axis, q[o])),
            JointKind::FloatingBase => {
                let quat = base_quaternion(q);
                let pos = Vector3::new(q[0], q[1], q[2]);
                joint
                    .origin
                    .compose(&Transform::from_quaternion(&quat, pos))
            }
        }
    }

    /// World placement of every link.
    pub fn link_poses(&self, q: &DVector<T>) -> Result<Vec<Transform<T>>> {
        self.check_q(q)?;
        let mut poses: Vec<Transform<T>> = Vec::with_capacity(self.links.len());
        for i in 0..self.links.len() {
            let local = self.joint_transform(i, q);
            let pose = match self.joints[i].parent {
                Some(p) => poses[p].compose(&local),
                None => local,
            };
            poses.push(pose);
        }
        Ok(poses)
    }
}

/// Reads the base quaternion `[qw, qx, qy, qz]` stored at `q[3..7]`.
pub fn base_quaternion<T: Real>(q: &DVector<T>) -> UnitQuaternion<T> {
    UnitQuaternion::new_normalize(Quaternion::new(q[3], q[4], q[5], q[6]))
}

/// Generalized position and velocity of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<T: Real> {
    pub q: DVector<T>,
    pub qd: DVector<T>,
}

impl<T: Real> ChainState<T> {
    pub fn new(q: DVector<T>, qd: DVector<T>) -> Self {
        Self { q, qd }
    }

    pub fn rest(chain: &ChainModel<T>) -> Self {
        Self {
            q: chain.neutral_q(),
            qd: DVector::zeros(chain.nv()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(m: f64) -> Link<f64> {
        Link::new("l", m, Vector3::zeros(), Matrix3::identity() * 0.01)
    }

    #[test]
    fn rejects_bad_parent_order() {
        let joints = vec![
            Joint::revolute("a", Some(1), Transform::identity(), Vector3::z()),
            Joint::revolute("b", None, Transform::identity(), Vector3::z()),
        ];
        assert!(ChainModel::new(vec![link(1.0), link(1.0)], joints, Vector3::zeros()).is_err());
    }

    #[test]
    fn rejects_nonpositive_mass_unless_relaxed() {
        let joints = vec![Joint::revolute(
            "a",
            None,
            Transform::identity(),
            Vector3::z(),
        )];
        assert!(ChainModel::new(vec![link(0.0)], joints.clone(), Vector3::zeros()).is_err());
        assert!(ChainModel::new_allow_massless(
            vec![Link::massless("m")],
            joints,
            Vector3::zeros()
        )
        .is_ok());
    }

    #[test]
    fn rejects_non_unit_axis() {
        let joints = vec![Joint::revolute(
            "a",
            None,
            Transform::identity(),
            Vector3::new(0.0, 0.0, 2.0),
        )];
        assert!(ChainModel::new(vec![link(1.0)], joints, Vector3::zeros()).is_err());
    }

    #[test]
    fn floating_base_dimensions() {
        let joints = vec![
            Joint::floating("base"),
            Joint::revolute("j", Some(0), Transform::identity(), Vector3::x()),
        ];
        let c = ChainModel::new(vec![link(2.0), link(1.0)], joints, Vector3::zeros()).unwrap();
        assert_eq!((c.nq(), c.nv()), (8, 7));
        assert_eq!(c.v_offset(1), 6);
        assert_eq!(c.neutral_q()[3], 1.0);
    }
}
