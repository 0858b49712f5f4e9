//! Reference motions: JSON schema, per-frame reference state and derived
//! base accelerations.

use nalgebra::{DVector, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::plant::Plant;
use crate::curriculum::{clamped_central_difference, BaseKinematics, BaseReference};
use crate::error::{check_len, Error, Result};
use crate::rbd::{gravity_in_frame, ChainState};
use crate::scalar::{cast, to_f64, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeybodyDoc {
    pub pos: [f64; 3],
    /// `[w, x, y, z]`.
    pub quat: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDoc {
    pub base_pos: [f64; 3],
    /// `[w, x, y, z]`.
    pub base_quat: [f64; 4],
    /// Base frame.
    pub base_linvel: [f64; 3],
    /// Base frame.
    pub base_angvel: [f64; 3],
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qd: Option<Vec<f64>>,
    /// Poses relative to the base, in base coordinates.
    pub keybodies: Vec<KeybodyDoc>,
    /// Joint torques held from this frame to the next, when generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryDoc {
    pub dt: f64,
    pub frames: Vec<FrameDoc>,
}

impl TrajectoryDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// One reference frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RefState<T: Real> {
    pub base_pos: Vector3<T>,
    pub base_quat: UnitQuaternion<T>,
    /// Base frame.
    pub base_linvel: Vector3<T>,
    /// Base frame.
    pub base_angvel: Vector3<T>,
    pub q: DVector<T>,
    pub qd: DVector<T>,
    pub keybodies: Vec<(Vector3<T>, UnitQuaternion<T>)>,
}

impl<T: Real> RefState<T> {
    pub fn height(&self) -> T {
        self.base_pos.z
    }

    /// Unit down direction in the reference base frame.
    pub fn gravity(&self) -> Vector3<T> {
        gravity_in_frame(&self.base_quat)
    }

    pub fn base_kinematics(&self) -> BaseKinematics<T> {
        BaseKinematics {
            position: self.base_pos,
            orientation: self.base_quat,
            linvel: self.base_quat * self.base_linvel,
            angvel: self.base_angvel,
        }
    }

    pub fn to_state(&self, plant: &Plant<T>) -> Result<ChainState<T>> {
        plant.state_from_parts(
            &self.base_pos,
            &self.base_quat,
            &self.base_linvel,
            &self.base_angvel,
            &self.q,
            &self.qd,
        )
    }
}

fn unit_quat<T: Real>(q: &[f64; 4]) -> Result<UnitQuaternion<T>> {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !((n - 1.0).abs() < 1e-6) {
        return Err(Error::InvalidParameter(format!(
            "quaternion norm {n} is not 1"
        )));
    }
    let quat = Quaternion::new(cast(q[0]), cast(q[1]), cast(q[2]), cast(q[3]));
    // Stored unit quaternions are kept as written so files round-trip exactly.
    if (n - 1.0).abs() <= 1e-12 {
        Ok(UnitQuaternion::new_unchecked(quat))
    } else {
        Ok(UnitQuaternion::new_normalize(quat))
    }
}

fn vec3<T: Real>(v: &[f64; 3]) -> Vector3<T> {
    Vector3::new(cast(v[0]), cast(v[1]), cast(v[2]))
}

fn dvec<T: Real>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| cast(x)))
}

fn quat_array<T: Real>(q: &UnitQuaternion<T>) -> [f64; 4] {
    let c = q.quaternion().coords;
    [to_f64(c.w), to_f64(c.x), to_f64(c.y), to_f64(c.z)]
}

fn vec_array<T: Real>(v: &Vector3<T>) -> [f64; 3] {
    [to_f64(v.x), to_f64(v.y), to_f64(v.z)]
}

/// A loaded reference with frames at `dt` spacing. Frame `k` sits at `k·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    pub dt: f64,
    pub frames: Vec<RefState<T>>,
    /// Generating torques, when every frame carries them.
    pub torques: Option<Vec<DVector<T>>>,
}

impl<T: Real> Trajectory<T> {
    /// Checks the frames against the plant's joint and keybody counts.
    /// Missing joint velocities are central-differenced from positions.
    pub fn from_doc(doc: &TrajectoryDoc, n_joints: usize, n_keybodies: usize) -> Result<Self> {
        if !(doc.dt > 0.0) {
            return Err(Error::InvalidParameter(
                "trajectory dt must be positive".into(),
            ));
        }
        if doc.frames.len() < 2 {
            return Err(Error::InvalidParameter(
                "a trajectory needs at least two frames".into(),
            ));
        }
        let mut frames = Vec::with_capacity(doc.frames.len());
        for f in &doc.frames {
            check_len("frame joint positions", n_joints, f.q.len())?;
            check_len("frame keybodies", n_keybodies, f.keybodies.len())?;
            if let Some(qd) = &f.qd {
                check_len("frame joint velocities", n_joints, qd.len())?;
            }
            if let Some(tau) = &f.tau {
                check_len("frame torques", n_joints, tau.len())?;
            }
            let all = f
                .base_pos
                .iter()
                .chain(&f.base_linvel)
                .chain(&f.base_angvel)
                .chain(&f.q)
                .chain(f.qd.iter().flatten());
            if all.clone().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(
                    "non-finite value in trajectory".into(),
                ));
            }
            let keybodies = f
                .keybodies
                .iter()
                .map(|k| Ok((vec3(&k.pos), unit_quat(&k.quat)?)))
                .collect::<Result<Vec<_>>>()?;
            frames.push(RefState {
                base_pos: vec3(&f.base_pos),
                base_quat: unit_quat(&f.base_quat)?,
                base_linvel: vec3(&f.base_linvel),
                base_angvel: vec3(&f.base_angvel),
                q: dvec(&f.q),
                qd: f
                    .qd
                    .as_deref()
                    .map(dvec)
                    .unwrap_or_else(|| DVector::zeros(n_joints)),
                keybodies,
            });
        }
        let n = frames.len();
        let dt: T = cast(doc.dt);
        for (k, f) in doc.frames.iter().enumerate() {
            if f.qd.is_none() {
                let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
                frames[k].qd = (&frames[b].q - &frames[a].q) / (dt * cast((b - a) as f64));
            }
        }
        let torques = if doc.frames.iter().all(|f| f.tau.is_some()) {
            Some(
                doc.frames
                    .iter()
                    .map(|f| dvec(f.tau.as_deref().unwrap_or_default()))
                    .collect(),
            )
        } else {
            None
        };
        Ok(Self {
            dt: doc.dt,
            frames,
            torques,
        })
    }

    pub fn load(text: &str, plant: &Plant<T>) -> Result<Self> {
        Self::from_doc(
            &TrajectoryDoc::from_json(text)?,
            plant.num_joints(),
            plant.num_keybodies(),
        )
    }

    pub fn to_doc(&self) -> TrajectoryDoc {
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| FrameDoc {
                base_pos: vec_array(&f.base_pos),
                base_quat: quat_array(&f.base_quat),
                base_linvel: vec_array(&f.base_linvel),
                base_angvel: vec_array(&f.base_angvel),
                q: f.q.iter().map(|&x| to_f64(x)).collect(),
                qd: Some(f.qd.iter().map(|&x| to_f64(x)).collect()),
                keybodies: f
                    .keybodies
                    .iter()
                    .map(|(p, r)| KeybodyDoc {
                        pos: vec_array(p),
                        quat: quat_array(r),
                    })
                    .collect(),
                tau: self
                    .torques
                    .as_ref()
                    .map(|t| t[k].iter().map(|&x| to_f64(x)).collect()),
            })
            .collect();
        TrajectoryDoc {
            dt: self.dt,
            frames,
        }
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Duration `len · dt`.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * self.dt
    }

    /// Frame `k` with base accelerations from clamped finite differences:
    /// central inside, one-sided at the ends.
    pub fn base_reference(&self, k: usize, accel_clamp: f64) -> BaseReference<T> {
        let n = self.frames.len();
        let k = k.min(n - 1);
        let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
        let half: T = cast(self.dt * (b - a) as f64 * 0.5);
        let lim: T = cast(accel_clamp);
        let kin = self.frames[k].base_kinematics();
        let (fa, fb) = (&self.frames[a], &self.frames[b]);
        let va = fa.base_quat * fa.base_linvel;
        let vb = fb.base_quat * fb.base_linvel;
        BaseReference {
            kin,
            linacc: clamped_central_difference(&va, &vb, half, lim),
            angacc: clamped_central_difference(&fa.base_angvel, &fb.base_angvel, half, lim),
        }
    }
}
