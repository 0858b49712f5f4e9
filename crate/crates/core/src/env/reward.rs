//! Tracking, regularization and survival rewards.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::plant::Measured;
use super::trajectory::RefState;
use crate::error::{check_len, Error, Result};
use crate::rbd::boxminus;
use crate::scalar::{to_f64, Real};

pub const TRACKING_TERMS: [&str; 7] = [
    "base_position",
    "base_orientation",
    "base_angular_velocity",
    "base_linear_velocity",
    "joint_position",
    "keybody_position",
    "keybody_orientation",
];

/// Index of the joint-position term, whose unweighted kernel is the step
/// similarity.
pub const JOINT_TERM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub tracking: [f64; 7],
    /// Kernel widths; the joint term is multiplied by `√n_j` and the two
    /// keybody terms by `√n_kb`.
    pub sigma: [f64; 7],
    pub kappa: f64,
    pub action_smoothness: f64,
    pub joint_accel: f64,
    pub position_limit: f64,
    pub torque_limit: f64,
    pub survival: f64,
    /// Multiply every weight by the control step.
    pub dt_scaling: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            tracking: [1.0; 7],
            sigma: [0.4, 0.5, 1.5, 0.6, 0.3, 0.2, 0.4],
            kappa: 0.25,
            action_smoothness: 0.15,
            joint_accel: 1e-5,
            position_limit: 1.0,
            torque_limit: 0.1,
            survival: 1.0,
            dt_scaling: true,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let regs = [
            self.action_smoothness,
            self.joint_accel,
            self.position_limit,
            self.torque_limit,
            self.survival,
        ];
        let ok = self.sigma.iter().all(|&s| s > 0.0 && s.is_finite())
            && self.kappa > 0.0
            && self.kappa.is_finite()
            && self
                .tracking
                .iter()
                .chain(&regs)
                .all(|&w| w >= 0.0 && w.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "reward weights out of range".into(),
            ))
        }
    }

    pub fn sigmas(&self, n_joints: usize, n_keybodies: usize) -> [f64; 7] {
        let mut s = self.sigma;
        s[4] *= (n_joints as f64).sqrt();
        s[5] *= (n_keybodies as f64).sqrt();
        s[6] *= (n_keybodies as f64).sqrt();
        s
    }

    pub fn dt_scale(&self, control_dt: f64) -> f64 {
        if self.dt_scaling {
            control_dt
        } else {
            1.0
        }
    }
}

/// `exp(−κ e²/σ²)`, exactly 1 when `e² = 0` (also when `σ = 0`).
pub fn kernel(err_sq: f64, sigma: f64, kappa: f64) -> f64 {
    if err_sq == 0.0 {
        1.0
    } else {
        (-kappa * err_sq / (sigma * sigma)).exp()
    }
}

/// Squared error norms of the seven tracking quantities. Velocities are
/// compared in each body's own base frame, keybodies relative to the base.
pub fn tracking_errors<T: Real>(m: &Measured<T>, r: &RefState<T>) -> Result<[f64; 7]> {
    check_len("joint positions", r.q.len(), m.q.len())?;
    check_len("keybodies", r.keybodies.len(), m.keybodies.len())?;
    let sq = |x: T| to_f64(x);
    let kb_pos = m
        .keybodies
        .iter()
        .zip(&r.keybodies)
        .map(|(a, b)| sq((a.0 - b.0).norm_squared()))
        .sum();
    let kb_rot = m
        .keybodies
        .iter()
        .zip(&r.keybodies)
        .map(|(a, b)| sq(boxminus(&a.1, &b.1).norm_squared()))
        .sum();
    Ok([
        sq((m.base.position - r.base_pos).norm_squared()),
        sq(boxminus(&m.base.orientation, &r.base_quat).norm_squared()),
        sq((m.base.angvel - r.base_angvel).norm_squared()),
        sq((m.base_linvel_body - r.base_linvel).norm_squared()),
        sq((&m.q - &r.q).norm_squared()),
        kb_pos,
        kb_rot,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingReward {
    /// Weighted, dt-scaled terms.
    pub terms: [f64; 7],
    pub total: f64,
    /// Unweighted joint kernel.
    pub similarity: f64,
}

pub fn tracking_reward<T: Real>(
    m: &Measured<T>,
    r: &RefState<T>,
    weights: &RewardWeights,
    control_dt: f64,
) -> Result<TrackingReward> {
    let e = tracking_errors(m, r)?;
    let sigma = weights.sigmas(m.q.len(), m.keybodies.len());
    let scale = weights.dt_scale(control_dt);
    let kernels: Vec<f64> = (0..7)
        .map(|i| kernel(e[i], sigma[i], weights.kappa))
        .collect();
    let mut terms = [0.0; 7];
    for i in 0..7 {
        terms[i] = weights.tracking[i] * scale * kernels[i];
    }
    Ok(TrackingReward {
        terms,
        total: terms.iter().sum(),
        similarity: kernels[JOINT_TERM],
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Regularization {
    pub action_smoothness: f64,
    pub joint_accel: f64,
    pub position_limit: f64,
    pub torque_limit: f64,
    pub total: f64,
}

fn violation<T: Real>(x: &DVector<T>, limits: &[[T; 2]]) -> f64 {
    x.iter()
        .zip(limits)
        .map(|(&v, l)| to_f64((l[0] - v).max(T::zero()) + (v - l[1]).max(T::zero())))
        .sum()
}

/// All terms are `≤ 0`. `tau` is the torque the controller demanded, before
/// any projection onto the limits.
#[allow(clippy::too_many_arguments)]
pub fn regularization_penalty<T: Real>(
    action: &DVector<T>,
    prev_action: &DVector<T>,
    qdd: &DVector<T>,
    q: &DVector<T>,
    tau: &DVector<T>,
    position_limits: &[[T; 2]],
    torque_limits: &[[T; 2]],
    weights: &RewardWeights,
    control_dt: f64,
) -> Result<Regularization> {
    check_len("previous action", action.len(), prev_action.len())?;
    check_len("position limits", q.len(), position_limits.len())?;
    check_len("torques", q.len(), tau.len())?;
    check_len("torque limits", q.len(), torque_limits.len())?;
    check_len("joint accelerations", q.len(), qdd.len())?;
    let s = weights.dt_scale(control_dt);
    let r = Regularization {
        action_smoothness: -weights.action_smoothness * s * to_f64((action - prev_action).norm()),
        joint_accel: -weights.joint_accel * s * to_f64(qdd.norm()),
        position_limit: -weights.position_limit * s * violation(q, position_limits),
        torque_limit: -weights.torque_limit * s * violation(tau, torque_limits),
        total: 0.0,
    };
    Ok(Regularization {
        total: r.action_smoothness + r.joint_accel + r.position_limit + r.torque_limit,
        ..r
    })
}

pub fn survival_reward(weights: &RewardWeights, control_dt: f64) -> f64 {
    weights.survival * weights.dt_scale(control_dt)
}
