//! Mechanisms shipped with the crate.
//!
//! The ankle is a pitch-roll pair driven by two parallel shank-mounted motors
//! through pushrods to the heel. The branches differ in crank length, mounting
//! height and motor inertia so the projected armature is coupled. The knee is
//! a planar four-bar with one thigh-mounted motor.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::linkage::{Closure, MechanismDoc, PlaLinkage};
use super::system::PlaSystem;
use crate::error::Result;
use crate::rbd::{ChainModel, Joint, JointLimits, Link, Transform};
use crate::scalar::{cast, Real};

pub const PITCH_ROLL_ANKLE_JSON: &str = include_str!("../../data/pitch_roll_ankle.json");
pub const FOUR_BAR_KNEE_JSON: &str = include_str!("../../data/four_bar_knee.json");

pub fn from_json<T: Real>(text: &str) -> Result<PlaSystem<T>> {
    let doc = MechanismDoc::from_json(text)?;
    PlaSystem::new(doc.chain.to_model()?, doc.linkage.to_linkage()?)
}

pub fn pitch_roll_ankle<T: Real>() -> Result<PlaSystem<T>> {
    from_json(PITCH_ROLL_ANKLE_JSON)
}

pub fn four_bar_knee<T: Real>() -> Result<PlaSystem<T>> {
    from_json(FOUR_BAR_KNEE_JSON)
}

/// A serial chain of `ratios.ncols()` output joints on a swinging base link,
/// driven through the constant coupling `q_i = ratios q_o`.
///
/// Used where the transmission must be configuration independent.
pub fn linear_coupling<T: Real>(ratios: DMatrix<T>, armature: DVector<T>) -> Result<PlaSystem<T>> {
    let n = ratios.ncols();
    let inertia =
        |a: f64, b: f64, c: f64| Matrix3::from_diagonal(&Vector3::new(cast(a), cast(b), cast(c)));
    let limits = JointLimits {
        q_min: cast(-1.0),
        q_max: cast(1.0),
        tau_min: cast(-100.0),
        tau_max: cast(100.0),
    };
    let mut links = vec![Link::new(
        "base",
        cast(2.0),
        Vector3::new(T::zero(), T::zero(), cast(-0.2)),
        inertia(0.03, 0.03, 0.003),
    )];
    let mut joints = vec![
        Joint::revolute("swing", None, Transform::identity(), Vector3::y()).with_limits(limits),
    ];
    let axes = [Vector3::y(), Vector3::x(), Vector3::z()];
    for k in 0..n {
        links.push(Link::new(
            format!("out{k}"),
            cast(1.0 - 0.2 * k as f64),
            Vector3::new(cast(0.02), cast(0.01 * k as f64), cast(-0.1)),
            inertia(0.004, 0.005, 0.003),
        ));
        let origin = if k == 0 {
            Transform::from_translation(Vector3::new(T::zero(), T::zero(), cast(-0.4)))
        } else {
            Transform::identity()
        };
        joints.push(
            Joint::revolute(format!("out{k}"), Some(k), origin, axes[k % 3]).with_limits(limits),
        );
    }
    let main = ChainModel::new(
        links,
        joints,
        Vector3::new(T::zero(), T::zero(), cast(-9.81)),
    )?;
    let linkage = PlaLinkage {
        name: "linear_coupling".into(),
        output_joints: (0..n).map(|k| format!("out{k}")).collect(),
        motor_torque_limits: vec![[cast(-10.0), cast(10.0)]; ratios.nrows()],
        armature,
        nominal: DVector::zeros(n),
        closure: Closure::Linear { ratios },
    };
    PlaSystem::new(main, linkage)
}
