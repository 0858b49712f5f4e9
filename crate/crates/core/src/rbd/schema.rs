//! JSON document form of [`ChainModel`].
//!
//! ```json
//! {
//!   "gravity": [0, 0, -9.81],
//!   "links":  [{"name": "thigh", "mass": 2.0, "com": [0, 0, -0.2],
//!               "inertia": [[0.02, 0, 0], [0, 0.02, 0], [0, 0, 0.002]]}],
//!   "joints": [{"name": "hip", "type": "revolute", "parent": null, "axis": [0, 1, 0],
//!               "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]},
//!               "limits": {"position": [-1.5, 1.5], "torque": [-80, 80]},
//!               "armature": 0.01}]
//! }
//! ```
//! Joint `i` moves link `i`; `parent` is a link index or `null` for the world.
//! `rpy` is roll-pitch-yaw applied as `Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::chain::{ChainModel, Joint, JointKind, JointLimits, Link};
use super::spatial::Transform;
use crate::error::Result;
use crate::scalar::{cast, Real};

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainDoc {
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    pub links: Vec<LinkDoc>,
    pub joints: Vec<JointDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub name: String,
    pub mass: f64,
    #[serde(default)]
    pub com: [f64; 3],
    pub inertia: [[f64; 3]; 3],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum JointTypeDoc {
    Revolute,
    Floating,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OriginDoc {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl OriginDoc {
    pub fn to_transform<T: Real>(&self) -> Transform<T> {
        let rot = Rotation3::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]);
        Transform::new(mat3(&rot.into_inner()), vec3(&self.xyz))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LimitsDoc {
    pub position: [f64; 2],
    pub torque: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JointDoc {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: JointTypeDoc,
    #[serde(default)]
    pub parent: Option<usize>,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin: OriginDoc,
    #[serde(default)]
    pub limits: Option<LimitsDoc>,
    #[serde(default)]
    pub armature: f64,
}

pub(crate) fn vec3<T: Real>(v: &[f64; 3]) -> Vector3<T> {
    Vector3::new(cast(v[0]), cast(v[1]), cast(v[2]))
}

fn mat3<T: Real>(m: &Matrix3<f64>) -> Matrix3<T> {
    m.map(cast)
}

impl LinkDoc {
    pub fn to_link<T: Real>(&self) -> Link<T> {
        let rows = self.inertia;
        let inertia = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        );
        Link::new(
            self.name.clone(),
            cast(self.mass),
            vec3(&self.com),
            mat3(&inertia),
        )
    }
}

impl JointDoc {
    pub fn to_joint<T: Real>(&self) -> Joint<T> {
        let kind = match self.kind {
            JointTypeDoc::Revolute => JointKind::Revolute,
            JointTypeDoc::Floating => JointKind::FloatingBase,
        };
        let limits = self
            .limits
            .as_ref()
            .map(|l| JointLimits {
                q_min: cast(l.position[0]),
                q_max: cast(l.position[1]),
                tau_min: cast(l.torque[0]),
                tau_max: cast(l.torque[1]),
            })
            .unwrap_or_default();
        Joint {
            name: self.name.clone(),
            kind,
            axis: vec3(&self.axis),
            parent: self.parent,
            origin: self.origin.to_transform(),
            limits,
            armature: cast(self.armature),
        }
    }
}

impl ChainDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_model<T: Real>(&self) -> Result<ChainModel<T>> {
        ChainModel::new(
            self.links.iter().map(LinkDoc::to_link).collect(),
            self.joints.iter().map(JointDoc::to_joint).collect(),
            vec3(&self.gravity),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = r#"{
        "links": [{"name": "bob", "mass": 1.0, "com": [0, 0, -1],
                   "inertia": [[1e-6, 0, 0], [0, 1e-6, 0], [0, 0, 1e-6]]}],
        "joints": [{"name": "pivot", "type": "revolute", "axis": [0, 1, 0]}]
    }"#;

    #[test]
    fn loads_pendulum() {
        let doc = ChainDoc::from_json(PENDULUM).unwrap();
        let chain = doc.to_model::<f64>().unwrap();
        assert_eq!(chain.nv(), 1);
        assert_eq!(chain.gravity, Vector3::new(0.0, 0.0, -9.81));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = PENDULUM.replace("\"links\"", "\"bogus\": 1, \"links\"");
        assert!(ChainDoc::from_json(&text).is_err());
    }
}
