//! Floating-base plant driven by joint-level PD control.

use nalgebra::{DVector, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::curriculum::BaseKinematics;
use crate::error::{check_len, Error, Result};
use crate::rbd::schema::ChainDoc;
use crate::rbd::{base_quaternion, link_velocities, ChainModel, ChainState, JointKind};
use crate::scalar::{cast, Real};

/// Star-shaped floating body with four two-joint limbs and no gravity.
pub const TOY_PLANT_JSON: &str = include_str!("../../data/toy_plant.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantDoc {
    pub chain: ChainDoc,
    /// Link names; defaults to every leaf link.
    #[serde(default)]
    pub keybodies: Option<Vec<String>>,
    /// Per-joint residual action scale in rad; defaults to 0.1.
    #[serde(default)]
    pub action_scale: Option<Vec<f64>>,
}

impl PlantDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plant<T: Real> {
    pub chain: ChainModel<T>,
    /// Link indices whose poses enter the reward.
    pub keybodies: Vec<usize>,
    pub action_scale: DVector<T>,
}

impl<T: Real> Plant<T> {
    pub fn new(
        chain: ChainModel<T>,
        keybodies: Vec<usize>,
        action_scale: DVector<T>,
    ) -> Result<Self> {
        if !chain.is_floating() {
            return Err(Error::InvalidModel("plant needs a floating base".into()));
        }
        if chain.joints()[1..]
            .iter()
            .any(|j| j.kind != JointKind::Revolute)
        {
            return Err(Error::InvalidModel(
                "only the root joint may be floating".into(),
            ));
        }
        let n_j = chain.joints().len() - 1;
        check_len("action scales", n_j, action_scale.len())?;
        if action_scale.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::InvalidParameter(
                "action scales must be positive".into(),
            ));
        }
        if chain.joints()[1..]
            .iter()
            .any(|j| !(j.armature > T::zero()))
        {
            return Err(Error::InvalidModel(
                "every actuated joint needs a positive armature".into(),
            ));
        }
        if keybodies.iter().any(|&k| k >= chain.num_bodies()) {
            return Err(Error::InvalidModel("keybody index out of range".into()));
        }
        Ok(Self {
            chain,
            keybodies,
            action_scale,
        })
    }

    pub fn from_doc(doc: &PlantDoc) -> Result<Self> {
        let chain = doc.chain.to_model::<T>()?;
        let keybodies = match &doc.keybodies {
            Some(names) => names
                .iter()
                .map(|n| {
                    chain
                        .find_link(n)
                        .ok_or_else(|| Error::InvalidModel(format!("unknown keybody link {n}")))
                })
                .collect::<Result<Vec<_>>>()?,
            None => leaf_links(&chain),
        };
        let n_j = chain.joints().len().saturating_sub(1);
        let scale = match &doc.action_scale {
            Some(s) => DVector::from_iterator(s.len(), s.iter().map(|&x| cast(x))),
            None => DVector::from_element(n_j, cast(0.1)),
        };
        Self::new(chain, keybodies, scale)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(&PlantDoc::from_json(text)?)
    }

    pub fn toy() -> Result<Self> {
        Self::from_json(TOY_PLANT_JSON)
    }

    pub fn num_joints(&self) -> usize {
        self.chain.nv() - 6
    }

    pub fn num_keybodies(&self) -> usize {
        self.keybodies.len()
    }

    pub fn armature(&self) -> DVector<T> {
        DVector::from_iterator(
            self.num_joints(),
            self.chain.joints()[1..].iter().map(|j| j.armature),
        )
    }

    pub fn position_limits(&self) -> Vec<[T; 2]> {
        self.chain.joints()[1..]
            .iter()
            .map(|j| [j.limits.q_min, j.limits.q_max])
            .collect()
    }

    pub fn torque_limits(&self) -> Vec<[T; 2]> {
        self.chain.joints()[1..]
            .iter()
            .map(|j| [j.limits.tau_min, j.limits.tau_max])
            .collect()
    }

    pub fn joint_positions(&self, q: &DVector<T>) -> DVector<T> {
        q.rows(7, self.num_joints()).into_owned()
    }

    pub fn joint_velocities(&self, qd: &DVector<T>) -> DVector<T> {
        qd.rows(6, self.num_joints()).into_owned()
    }

    /// Assembles `q` and `qd` from base and joint quantities. Base velocities
    /// are in base coordinates.
    pub fn state_from_parts(
        &self,
        base_pos: &Vector3<T>,
        base_quat: &UnitQuaternion<T>,
        base_linvel: &Vector3<T>,
        base_angvel: &Vector3<T>,
        joints: &DVector<T>,
        joint_vel: &DVector<T>,
    ) -> Result<ChainState<T>> {
        check_len("joint positions", self.num_joints(), joints.len())?;
        check_len("joint velocities", self.num_joints(), joint_vel.len())?;
        let c = base_quat.quaternion().coords;
        let mut q = DVector::zeros(self.chain.nq());
        q.fixed_rows_mut::<3>(0).copy_from(base_pos);
        q[3] = c.w;
        q[4] = c.x;
        q[5] = c.y;
        q[6] = c.z;
        q.rows_mut(7, joints.len()).copy_from(joints);
        let mut qd = DVector::zeros(self.chain.nv());
        qd.fixed_rows_mut::<3>(0).copy_from(base_angvel);
        qd.fixed_rows_mut::<3>(3).copy_from(base_linvel);
        qd.rows_mut(6, joint_vel.len()).copy_from(joint_vel);
        Ok(ChainState::new(q, qd))
    }

    /// World position, orientation, world linear velocity and base-frame
    /// angular velocity of the base.
    pub fn base_kinematics(&self, state: &ChainState<T>) -> BaseKinematics<T> {
        let rot = base_quaternion(&state.q);
        BaseKinematics {
            position: state.q.fixed_rows::<3>(0).into_owned(),
            orientation: rot,
            linvel: rot * state.qd.fixed_rows::<3>(3).into_owned(),
            angvel: state.qd.fixed_rows::<3>(0).into_owned(),
        }
    }

    /// Keybody poses relative to the base, in base coordinates.
    pub fn keybody_poses(&self, q: &DVector<T>) -> Result<Vec<(Vector3<T>, UnitQuaternion<T>)>> {
        let poses = self.chain.link_poses(q)?;
        let base = &poses[0];
        let inv = base.rot.transpose();
        Ok(self
            .keybodies
            .iter()
            .map(|&k| {
                let p = inv * (poses[k].trans - base.trans);
                let r = inv * poses[k].rot;
                (
                    p,
                    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)),
                )
            })
            .collect())
    }

    /// Inertial linear velocity of each keybody origin in base coordinates.
    pub fn keybody_velocities(&self, state: &ChainState<T>) -> Result<Vec<Vector3<T>>> {
        let vel = link_velocities(&self.chain, &state.q, &state.qd)?;
        let rot = base_quaternion(&state.q);
        Ok(self
            .keybodies
            .iter()
            .map(|&k| rot.inverse_transform_vector(&vel[k].1))
            .collect())
    }

    pub fn measure(&self, state: &ChainState<T>) -> Result<Measured<T>> {
        Ok(Measured {
            base: self.base_kinematics(state),
            base_linvel_body: state.qd.fixed_rows::<3>(3).into_owned(),
            q: self.joint_positions(&state.q),
            qd: self.joint_velocities(&state.qd),
            keybodies: self.keybody_poses(&state.q)?,
            keybody_vel: self.keybody_velocities(state)?,
        })
    }

    pub fn with_mass_scales(&self, scales: &[T]) -> Result<Self> {
        Ok(Self {
            chain: self.chain.with_mass_scales(scales)?,
            ..self.clone()
        })
    }
}

/// Everything the observation, reward and termination code reads from the
/// simulated state.
#[derive(Clone, Debug, PartialEq)]
pub struct Measured<T: Real> {
    pub base: BaseKinematics<T>,
    pub base_linvel_body: Vector3<T>,
    pub q: DVector<T>,
    pub qd: DVector<T>,
    /// Relative to the base, base coordinates.
    pub keybodies: Vec<(Vector3<T>, UnitQuaternion<T>)>,
    pub keybody_vel: Vec<Vector3<T>>,
}

impl<T: Real> Measured<T> {
    pub fn is_finite(&self) -> bool {
        let b = &self.base;
        let q = b.orientation.quaternion().coords;
        b.position
            .iter()
            .chain(b.linvel.iter())
            .chain(b.angvel.iter())
            .chain(q.iter())
            .chain(self.q.iter())
            .chain(self.qd.iter())
            .all(|x| x.is_finite())
    }
}

fn leaf_links<T: Real>(chain: &ChainModel<T>) -> Vec<usize> {
    (0..chain.num_bodies())
        .filter(|&l| !chain.joints().iter().any(|j| j.parent == Some(l)))
        .collect()
}
