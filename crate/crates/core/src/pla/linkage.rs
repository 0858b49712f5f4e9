//! Linkage geometry and its JSON document form.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbd::schema::{vec3, ChainDoc, LinkDoc, OriginDoc};
use crate::rbd::{Link, Transform};
use crate::scalar::{cast, Real};

/// One motor-driven pushrod: motor revolute on the parent link, crank, a
/// universal joint at the crank tip and a rod whose end must coincide with an
/// attachment point on the last output link.
#[derive(Clone, Debug, PartialEq)]
pub struct PushrodBranch<T: Real> {
    pub name: String,
    /// Motor frame in the parent link frame.
    pub motor_origin: Transform<T>,
    pub motor_axis: Vector3<T>,
    pub crank: Link<T>,
    /// Universal joint center in the crank frame.
    pub crank_tip: Vector3<T>,
    /// First universal axis in the crank frame, second in the intermediate frame.
    pub rod_axes: [Vector3<T>; 2],
    pub rod: Link<T>,
    /// Rod end point in the rod frame.
    pub rod_end: Vector3<T>,
    /// Attachment point in the frame of the last output link.
    pub attachment: Vector3<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Closure<T: Real> {
    /// `q_i = ratios * q_o`; rigid couplings and ideal gears.
    Linear { ratios: DMatrix<T> },
    /// Spatial pushrods, one motor each.
    Pushrod { branches: Vec<PushrodBranch<T>> },
}

/// A parallel-linkage actuator attached to a main chain.
///
/// The output joints must form a serial sub-chain of the main chain. The motors
/// sit on the parent link of the first output joint (or the world).
#[derive(Clone, Debug, PartialEq)]
pub struct PlaLinkage<T: Real> {
    pub name: String,
    /// Main-chain joint names of `q_o`, proximal first.
    pub output_joints: Vec<String>,
    /// Diagonal motor armature `I_i`, one entry per motor.
    pub armature: DVector<T>,
    /// Nominal output configuration `q_nom`.
    pub nominal: DVector<T>,
    /// Motor torque box, `[min, max]` per motor.
    pub motor_torque_limits: Vec<[T; 2]>,
    pub closure: Closure<T>,
}

impl<T: Real> PlaLinkage<T> {
    pub fn num_motors(&self) -> usize {
        match &self.closure {
            Closure::Linear { ratios } => ratios.nrows(),
            Closure::Pushrod { branches } => branches.len(),
        }
    }

    /// Number of passive support coordinates `q_d`.
    pub fn num_dependent(&self) -> usize {
        match &self.closure {
            Closure::Linear { .. } => 0,
            Closure::Pushrod { branches } => 2 * branches.len(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n_o = self.output_joints.len();
        let n_i = self.num_motors();
        if n_o == 0 {
            return Err(Error::InvalidModel("linkage has no output joints".into()));
        }
        if self.nominal.len() != n_o {
            return Err(Error::InvalidModel(format!(
                "nominal configuration has {} entries for {n_o} outputs",
                self.nominal.len()
            )));
        }
        if self.armature.len() != n_i || self.motor_torque_limits.len() != n_i {
            return Err(Error::InvalidModel(format!(
                "{n_i} motors need {n_i} armatures and torque limits"
            )));
        }
        if self.armature.iter().any(|&a| !(a > T::zero())) {
            return Err(Error::InvalidModel(
                "motor armatures must be positive".into(),
            ));
        }
        if self.motor_torque_limits.iter().any(|l| !(l[0] < l[1])) {
            return Err(Error::InvalidModel(
                "motor torque limits must have min < max".into(),
            ));
        }
        match &self.closure {
            Closure::Linear { ratios } => {
                if ratios.ncols() != n_o || ratios.nrows() != n_o {
                    return Err(Error::InvalidModel(
                        "linear coupling ratios must be square over the outputs".into(),
                    ));
                }
            }
            Closure::Pushrod { branches } => {
                if branches.len() != n_o {
                    return Err(Error::InvalidModel(
                        "pushrod linkages need one branch per output joint".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PushrodDoc {
    pub name: String,
    pub motor_origin: OriginDoc,
    pub motor_axis: [f64; 3],
    pub crank: LinkDoc,
    pub crank_tip: [f64; 3],
    pub rod_axes: [[f64; 3]; 2],
    pub rod: LinkDoc,
    pub rod_end: [f64; 3],
    pub attachment: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosureDoc {
    Linear { ratios: Vec<Vec<f64>> },
    Pushrod { branches: Vec<PushrodDoc> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkageDoc {
    pub name: String,
    pub output_joints: Vec<String>,
    pub armature: Vec<f64>,
    pub nominal: Vec<f64>,
    pub motor_torque_limits: Vec<[f64; 2]>,
    pub closure: ClosureDoc,
}

/// A main chain together with the linkage that drives it.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MechanismDoc {
    pub chain: ChainDoc,
    pub linkage: LinkageDoc,
}

impl LinkageDoc {
    pub fn to_linkage<T: Real>(&self) -> Result<PlaLinkage<T>> {
        let closure = match &self.closure {
            ClosureDoc::Linear { ratios } => {
                let rows = ratios.len();
                let cols = ratios.first().map_or(0, Vec::len);
                if ratios.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidModel("ragged ratio matrix".into()));
                }
                Closure::Linear {
                    ratios: DMatrix::from_fn(rows, cols, |r, c| cast(ratios[r][c])),
                }
            }
            ClosureDoc::Pushrod { branches } => Closure::Pushrod {
                branches: branches
                    .iter()
                    .map(|b| PushrodBranch {
                        name: b.name.clone(),
                        motor_origin: b.motor_origin.to_transform(),
                        motor_axis: vec3(&b.motor_axis),
                        crank: b.crank.to_link(),
                        crank_tip: vec3(&b.crank_tip),
                        rod_axes: [vec3(&b.rod_axes[0]), vec3(&b.rod_axes[1])],
                        rod: b.rod.to_link(),
                        rod_end: vec3(&b.rod_end),
                        attachment: vec3(&b.attachment),
                    })
                    .collect(),
            },
        };
        let linkage = PlaLinkage {
            name: self.name.clone(),
            output_joints: self.output_joints.clone(),
            armature: DVector::from_iterator(
                self.armature.len(),
                self.armature.iter().map(|&a| cast(a)),
            ),
            nominal: DVector::from_iterator(
                self.nominal.len(),
                self.nominal.iter().map(|&a| cast(a)),
            ),
            motor_torque_limits: self
                .motor_torque_limits
                .iter()
                .map(|l| [cast(l[0]), cast(l[1])])
                .collect(),
            closure,
        };
        linkage.validate()?;
        Ok(linkage)
    }
}

impl MechanismDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
