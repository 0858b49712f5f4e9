//! Actor and critic observation vectors.
//!
//! Actor layout: `[ω_T(3), g_T(3), q(n_j), q̇(n_j), a_prev(n_a), r̂z(1), v̂(3),
//! ω̂(3), ĝ(3), q̂(n_j)]`. The critic appends the privileged slots in
//! [`PRIVILEGED_SLOTS`] order.

use std::ops::Range;

use nalgebra::{DVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::plant::Measured;
use super::trajectory::RefState;
use crate::curriculum::Wrench;
use crate::error::{check_len, Error, Result};
use crate::rbd::gravity_in_frame;
use crate::scalar::{cast, Real};

pub const ACTOR_SLOTS: [&str; 10] = [
    "imu_angular_velocity",
    "imu_gravity",
    "joint_positions",
    "joint_velocities",
    "previous_action",
    "ref_base_height",
    "ref_base_linear_velocity",
    "ref_base_angular_velocity",
    "ref_gravity",
    "ref_joint_positions",
];

pub const PRIVILEGED_SLOTS: [&str; 11] = [
    "base_linear_velocity",
    "base_height",
    "base_contact_force",
    "keybody_contact_forces",
    "keybody_positions",
    "keybody_velocities",
    "assist_force",
    "assist_torque",
    "wrench_scale",
    "tracking_rewards",
    "phase",
];

/// Named slot ranges of a flat observation vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObsLayout {
    pub slots: Vec<(&'static str, Range<usize>)>,
}

impl ObsLayout {
    fn from_sizes(
        names: &[&'static str],
        sizes: &[usize],
        start: usize,
    ) -> Vec<(&'static str, Range<usize>)> {
        let mut at = start;
        names
            .iter()
            .zip(sizes)
            .map(|(&n, &s)| {
                let r = at..at + s;
                at += s;
                (n, r)
            })
            .collect()
    }

    pub fn actor(n_joints: usize, n_actions: usize) -> Self {
        let sizes = [3, 3, n_joints, n_joints, n_actions, 1, 3, 3, 3, n_joints];
        Self {
            slots: Self::from_sizes(&ACTOR_SLOTS, &sizes, 0),
        }
    }

    pub fn critic(n_joints: usize, n_actions: usize, n_keybodies: usize) -> Self {
        let mut actor = Self::actor(n_joints, n_actions);
        let k = 3 * n_keybodies;
        let sizes = [3, 1, 3, k, k, k, 3, 3, 1, 7, 1];
        actor
            .slots
            .extend(Self::from_sizes(&PRIVILEGED_SLOTS, &sizes, actor.dim()));
        actor
    }

    pub fn dim(&self) -> usize {
        self.slots.last().map_or(0, |s| s.1.end)
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.slots.iter().find(|s| s.0 == name).map(|s| s.1.clone())
    }
}

/// Per-step additive Gaussian noise on the proprioceptive block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsNoise {
    pub angular_velocity: f64,
    pub gravity: f64,
    pub joint_position: f64,
    pub joint_velocity: f64,
}

impl Default for ObsNoise {
    fn default() -> Self {
        Self {
            angular_velocity: 0.10,
            gravity: 0.015,
            joint_position: 0.005,
            joint_velocity: 0.25,
        }
    }
}

impl ObsNoise {
    pub fn zero() -> Self {
        Self {
            angular_velocity: 0.0,
            gravity: 0.0,
            joint_position: 0.0,
            joint_velocity: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = [
            self.angular_velocity,
            self.gravity,
            self.joint_position,
            self.joint_velocity,
        ];
        if s.iter().all(|&x| x >= 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "noise standard deviations must be finite and non-negative".into(),
            ))
        }
    }
}

fn add_noise<T: Real, R: Rng + ?Sized>(out: &mut [T], std: f64, rng: &mut R) {
    if std == 0.0 {
        return;
    }
    let n = Normal::new(0.0, std).expect("validated std");
    for x in out {
        *x += cast(n.sample(rng));
    }
}

/// Actor vector. Without an RNG no noise is drawn.
pub fn build_actor_obs<T: Real, R: Rng + ?Sized>(
    m: &Measured<T>,
    r: &RefState<T>,
    prev_action: &DVector<T>,
    noise: &ObsNoise,
    rng: Option<&mut R>,
) -> Result<DVector<T>> {
    let n_j = m.q.len();
    check_len("reference joints", n_j, r.q.len())?;
    let layout = ObsLayout::actor(n_j, prev_action.len());
    let mut o = DVector::zeros(layout.dim());
    let g = gravity_in_frame(&m.base.orientation);
    o.fixed_rows_mut::<3>(0).copy_from(&m.base.angvel);
    o.fixed_rows_mut::<3>(3).copy_from(&g);
    o.rows_mut(6, n_j).copy_from(&m.q);
    o.rows_mut(6 + n_j, n_j).copy_from(&m.qd);
    if let Some(rng) = rng {
        let s = o.as_mut_slice();
        add_noise(&mut s[0..3], noise.angular_velocity, rng);
        add_noise(&mut s[3..6], noise.gravity, rng);
        add_noise(&mut s[6..6 + n_j], noise.joint_position, rng);
        add_noise(&mut s[6 + n_j..6 + 2 * n_j], noise.joint_velocity, rng);
    }
    let mut at = 6 + 2 * n_j;
    o.rows_mut(at, prev_action.len()).copy_from(prev_action);
    at += prev_action.len();
    o[at] = r.height();
    o.fixed_rows_mut::<3>(at + 1).copy_from(&r.base_linvel);
    o.fixed_rows_mut::<3>(at + 4).copy_from(&r.base_angvel);
    o.fixed_rows_mut::<3>(at + 7).copy_from(&r.gravity());
    o.rows_mut(at + 10, n_j).copy_from(&r.q);
    Ok(o)
}

/// Privileged inputs that do not come from the measured state.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticExtras<T: Real> {
    pub base_contact_force: Vector3<T>,
    pub keybody_contact_forces: Vec<Vector3<T>>,
    pub assist: Wrench<T>,
    pub beta: T,
    pub tracking: [f64; 7],
    pub phase: T,
}

impl<T: Real> CriticExtras<T> {
    /// Contact-free extras.
    pub fn new(
        n_keybodies: usize,
        assist: Wrench<T>,
        beta: T,
        tracking: [f64; 7],
        phase: T,
    ) -> Self {
        Self {
            base_contact_force: Vector3::zeros(),
            keybody_contact_forces: vec![Vector3::zeros(); n_keybodies],
            assist,
            beta,
            tracking,
            phase,
        }
    }
}

/// Noise-free actor vector followed by the privileged slots.
pub fn build_critic_obs<T: Real>(
    m: &Measured<T>,
    r: &RefState<T>,
    prev_action: &DVector<T>,
    extras: &CriticExtras<T>,
) -> Result<DVector<T>> {
    let n_kb = m.keybodies.len();
    check_len(
        "keybody contact forces",
        n_kb,
        extras.keybody_contact_forces.len(),
    )?;
    let actor =
        build_actor_obs::<T, rand::rngs::ThreadRng>(m, r, prev_action, &ObsNoise::zero(), None)?;
    let mut v: Vec<T> = actor.iter().copied().collect();
    v.extend(m.base_linvel_body.iter());
    v.push(m.base.position.z);
    v.extend(extras.base_contact_force.iter());
    for f in &extras.keybody_contact_forces {
        v.extend(f.iter());
    }
    for (p, _) in &m.keybodies {
        v.extend(p.iter());
    }
    for kv in &m.keybody_vel {
        v.extend(kv.iter());
    }
    v.extend(extras.assist.force.iter());
    v.extend(extras.assist.torque.iter());
    v.push(extras.beta);
    v.extend(extras.tracking.iter().map(|&x| cast::<T>(x)));
    v.push(extras.phase);
    Ok(DVector::from_vec(v))
}
