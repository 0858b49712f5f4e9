//! Failure-coupled assistance scale and the model-based assistive wrench on
//! the base.

use nalgebra::{DVector, Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbd::{boxminus, center_of_mass, mass_matrix, ChainModel};
use crate::scalar::{cast, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumParams {
    /// Target similarity at which assistance vanishes.
    pub eta: f64,
    pub beta_max: f64,
    pub kp_force: f64,
    pub kd_force: f64,
    pub kp_torque: f64,
    pub kd_torque: f64,
    /// Clamp on finite-difference reference accelerations, m/s² and rad/s².
    pub accel_clamp: f64,
}

impl Default for CurriculumParams {
    fn default() -> Self {
        Self {
            eta: 0.80,
            beta_max: 0.60,
            kp_force: 0.0,
            kd_force: 10.0,
            kp_torque: 200.0,
            kd_torque: 10.0,
            accel_clamp: 50.0,
        }
    }
}

impl CurriculumParams {
    pub fn validate(&self) -> Result<()> {
        let gains = [self.kp_force, self.kd_force, self.kp_torque, self.kd_torque];
        let ok = self.eta > 0.0
            && self.eta <= 1.0
            && (0.0..1.0).contains(&self.beta_max)
            && gains.iter().all(|&g| g >= 0.0 && g.is_finite())
            && self.accel_clamp > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "curriculum parameters out of range".into(),
            ))
        }
    }
}

/// `clip(1 − (1 − f)/η, 0, β_max)`.
pub fn assistance_scale(failure: f64, params: &CurriculumParams) -> f64 {
    let similarity = 1.0 - failure;
    (1.0 - similarity / params.eta).clamp(0.0, params.beta_max)
}

/// Whole-body quantities the wrench feedforward needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseModel<T: Real> {
    pub mass: T,
    /// Rotational inertia about the base origin in base coordinates.
    pub inertia: Matrix3<T>,
    /// Whole-body center of mass relative to the base, base coordinates.
    pub com: Vector3<T>,
    pub gravity: Vector3<T>,
}

impl<T: Real> BaseModel<T> {
    /// Evaluated at `q` for a floating-base chain: the inertia is the
    /// composite rigid-body block of the mass matrix.
    pub fn from_chain(chain: &ChainModel<T>, q: &DVector<T>) -> Result<Self> {
        if !chain.is_floating() {
            return Err(Error::InvalidModel(
                "assistive wrench needs a floating base".into(),
            ));
        }
        let m = mass_matrix(chain, q)?;
        let pose = &chain.link_poses(q)?[0];
        let com_world = center_of_mass(chain, q)?;
        Ok(Self {
            mass: chain.total_mass(),
            inertia: m.fixed_view::<3, 3>(0, 0).into_owned(),
            com: pose.rot.transpose() * (com_world - pose.trans),
            gravity: chain.gravity,
        })
    }
}

/// Base pose and twist. Linear quantities are world-frame, angular velocity
/// is in base coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseKinematics<T: Real> {
    pub position: Vector3<T>,
    pub orientation: UnitQuaternion<T>,
    pub linvel: Vector3<T>,
    pub angvel: Vector3<T>,
}

/// Reference base state with its accelerations (world linear, base angular).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseReference<T: Real> {
    pub kin: BaseKinematics<T>,
    pub linacc: Vector3<T>,
    pub angacc: Vector3<T>,
}

/// World-frame force and torque applied at the base origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrench<T: Real> {
    pub force: Vector3<T>,
    pub torque: Vector3<T>,
}

impl<T: Real> Wrench<T> {
    pub fn zero() -> Self {
        Self {
            force: Vector3::zeros(),
            torque: Vector3::zeros(),
        }
    }
}

/// Unscaled `[F_b; M_b]`. The moment is formed in base coordinates and
/// rotated to world; the force is not shifted for its offset from the
/// center of mass.
pub fn nominal_wrench<T: Real>(
    state: &BaseKinematics<T>,
    reference: &BaseReference<T>,
    model: &BaseModel<T>,
    params: &CurriculumParams,
) -> Wrench<T> {
    let kp_v: T = cast(params.kp_force);
    let kd_v: T = cast(params.kd_force);
    let kp_w: T = cast(params.kp_torque);
    let kd_w: T = cast(params.kd_torque);
    let r = &reference.kin;
    let force = (reference.linacc
        + (r.position - state.position) * kp_v
        + (r.linvel - state.linvel) * kd_v
        - model.gravity)
        * model.mass;
    let i = &model.inertia;
    let w = &state.angvel;
    let rot_err = boxminus(&r.orientation, &state.orientation);
    let g_base = state.orientation.inverse_transform_vector(&model.gravity);
    let torque_base =
        i * reference.angacc + i * rot_err * kp_w + i * (r.angvel - w) * kd_w + w.cross(&(i * w))
            - model.com.cross(&(g_base * model.mass));
    Wrench {
        force,
        torque: state.orientation * torque_base,
    }
}

/// `β [F_b; M_b]`.
pub fn assistive_wrench<T: Real>(
    state: &BaseKinematics<T>,
    reference: &BaseReference<T>,
    model: &BaseModel<T>,
    params: &CurriculumParams,
    beta: T,
) -> Wrench<T> {
    if beta == T::zero() {
        return Wrench::zero();
    }
    let w = nominal_wrench(state, reference, model, params);
    Wrench {
        force: w.force * beta,
        torque: w.torque * beta,
    }
}

/// Central difference `(x₊ − x₋)/(2h)` clamped componentwise to `±limit`.
pub fn clamped_central_difference<T: Real>(
    prev: &Vector3<T>,
    next: &Vector3<T>,
    h: T,
    limit: T,
) -> Vector3<T> {
    ((next - prev) / (h + h)).map(|x| x.max(-limit).min(limit))
}
